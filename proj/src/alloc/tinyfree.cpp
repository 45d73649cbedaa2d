#include <cstring>

#include "uk/alloc_backends.hpp"
#include "uk/error.hpp"

namespace uk::alloc {

struct TinyFreeAllocator::Header {
  std::uint64_t size;  // payload bytes
  std::uint32_t magic;
  std::uint32_t state;

  Header*& next() { return *reinterpret_cast<Header**>(this + 1); }
  std::byte* payload() { return reinterpret_cast<std::byte*>(this + 1); }
  std::byte* end() { return payload() + size; }

  static constexpr std::uint32_t kMagic = 0x54494e59;
  static constexpr std::uint32_t kUsed = 1;
  static constexpr std::uint32_t kFree = 2;
};

namespace {
constexpr std::size_t kMinSplit = TinyFreeAllocator::kHeaderBytes + kMinAlign;
}

TinyFreeAllocator::TinyFreeAllocator(std::span<std::byte> heap, const InitOptions& options)
    : Allocator(BackendKind::tinyfree, heap, options.debug_checks),
      base_(heap.data()),
      len_(heap.size()) {
  static_assert(sizeof(Header) == kHeaderBytes);
  auto* h = reinterpret_cast<Header*>(base_);
  h->size = len_ - kHeaderBytes;
  h->magic = Header::kMagic;
  h->state = Header::kFree;
  h->next() = nullptr;
  free_head_ = h;
  free_bytes_ = h->size;
}

void* TinyFreeAllocator::do_allocate(std::size_t size) {
  Header** link = &free_head_;
  for (Header* h = free_head_; h != nullptr; link = &h->next(), h = h->next()) {
    if (h->size < size) continue;
    if (h->size >= size + kMinSplit) {
      auto* rest = reinterpret_cast<Header*>(h->payload() + size);
      rest->size = h->size - size - kHeaderBytes;
      rest->magic = Header::kMagic;
      rest->state = Header::kFree;
      rest->next() = h->next();
      *link = rest;
      h->size = size;
      free_bytes_ -= size + kHeaderBytes;
    } else {
      *link = h->next();
      free_bytes_ -= h->size;
    }
    h->state = Header::kUsed;
    return h->payload();
  }
  return nullptr;
}

void* TinyFreeAllocator::do_allocate_aligned(std::size_t align, std::size_t size) {
  Header** link = &free_head_;
  for (Header* h = free_head_; h != nullptr; link = &h->next(), h = h->next()) {
    const auto payload = reinterpret_cast<std::uintptr_t>(h->payload());
    std::uintptr_t aligned = (payload + align - 1) & ~(std::uintptr_t{align} - 1);
    if (aligned != payload && aligned - payload < kMinSplit) {
      aligned = (payload + kMinSplit + align - 1) & ~(std::uintptr_t{align} - 1);
    }
    const std::size_t gap = aligned - payload;
    if (h->size < gap || h->size - gap < size) continue;

    Header* block = h;
    if (gap != 0) {
      // Leading gap stays on the list as a free block of its own.
      block = reinterpret_cast<Header*>(aligned - kHeaderBytes);
      block->size = h->size - gap;
      block->magic = Header::kMagic;
      block->next() = h->next();
      h->size = gap - kHeaderBytes;
      h->next() = block;
      free_bytes_ -= kHeaderBytes;
      link = &h->next();
    }
    if (block->size >= size + kMinSplit) {
      auto* rest = reinterpret_cast<Header*>(block->payload() + size);
      rest->size = block->size - size - kHeaderBytes;
      rest->magic = Header::kMagic;
      rest->state = Header::kFree;
      rest->next() = block->next();
      *link = rest;
      block->size = size;
      free_bytes_ -= size + kHeaderBytes;
    } else {
      *link = block->next();
      free_bytes_ -= block->size;
    }
    block->state = Header::kUsed;
    return block->payload();
  }
  return nullptr;
}

TinyFreeAllocator::Header* TinyFreeAllocator::checked_header(void* block) const {
  auto* h = reinterpret_cast<Header*>(static_cast<std::byte*>(block) - kHeaderBytes);
  if (debug_checks()) {
    const auto* p = static_cast<const std::byte*>(block);
    if (p < base_ + kHeaderBytes || p >= base_ + len_ ||
        reinterpret_cast<std::uintptr_t>(p) % kMinAlign != 0 || h->magic != Header::kMagic) {
      report_foreign(block);
    }
    if (h->state == Header::kFree) report_double(block);
    if (h->state != Header::kUsed) report_foreign(block);
  }
  return h;
}

void* TinyFreeAllocator::do_reallocate(void* block, std::size_t size) {
  Header* h = checked_header(block);
  if (size <= h->size) return block;
  void* p = do_allocate(size);
  if (p == nullptr) return nullptr;
  std::memcpy(p, block, h->size);
  do_release(block);
  return p;
}

void TinyFreeAllocator::do_release(void* block) {
  Header* h = checked_header(block);
  h->state = Header::kFree;
  free_bytes_ += h->size;

  // Find the address-ordered insertion point.
  Header* prev = nullptr;
  Header* next = free_head_;
  while (next != nullptr && next < h) {
    prev = next;
    next = next->next();
  }
  h->next() = next;
  if (prev != nullptr) {
    prev->next() = h;
  } else {
    free_head_ = h;
  }

  if (next != nullptr && h->end() == reinterpret_cast<std::byte*>(next)) {
    h->size += kHeaderBytes + next->size;
    h->next() = next->next();
    next->magic = 0;
    free_bytes_ += kHeaderBytes;
  }
  if (prev != nullptr && prev->end() == reinterpret_cast<std::byte*>(h)) {
    prev->size += kHeaderBytes + h->size;
    prev->next() = h->next();
    h->magic = 0;
    free_bytes_ += kHeaderBytes;
  }
}

std::size_t TinyFreeAllocator::do_usable_size(const void* block) const {
  return checked_header(const_cast<void*>(block))->size;
}

std::size_t TinyFreeAllocator::free_block_count() const noexcept {
  std::size_t n = 0;
  for (Header* h = free_head_; h != nullptr; h = h->next()) ++n;
  return n;
}

bool TinyFreeAllocator::check_list() const noexcept {
  for (Header* h = free_head_; h != nullptr; h = h->next()) {
    Header* n = h->next();
    if (h->state != Header::kFree) return false;
    if (n != nullptr && h->end() >= reinterpret_cast<std::byte*>(n)) return false;
  }
  return true;
}

}  // namespace uk::alloc

#include <cstring>

#include "uk/alloc_backends.hpp"
#include "uk/error.hpp"

namespace uk::alloc {

struct RegionAllocator::Header {
  std::uint64_t size;
  std::uint64_t magic;

  static constexpr std::uint64_t kLive = 0x5245474e4c495645ull;
  static constexpr std::uint64_t kDead = 0x5245474e44454144ull;
};

RegionAllocator::RegionAllocator(std::span<std::byte> heap, const InitOptions& options)
    : Allocator(BackendKind::region, heap, options.debug_checks),
      base_(heap.data()),
      len_(heap.size()) {
  static_assert(sizeof(Header) == kHeaderBytes);
}

void* RegionAllocator::do_allocate(std::size_t size) {
  if (len_ - cursor_ < kHeaderBytes || len_ - cursor_ - kHeaderBytes < size) return nullptr;
  auto* h = reinterpret_cast<Header*>(base_ + cursor_);
  h->size = size;
  h->magic = Header::kLive;
  cursor_ += kHeaderBytes + size;
  return h + 1;
}

void* RegionAllocator::do_allocate_aligned(std::size_t align, std::size_t size) {
  const auto start = reinterpret_cast<std::uintptr_t>(base_ + cursor_ + kHeaderBytes);
  const std::uintptr_t aligned = (start + align - 1) & ~(std::uintptr_t{align} - 1);
  const std::size_t payload_off = static_cast<std::size_t>(aligned - reinterpret_cast<std::uintptr_t>(base_));
  if (payload_off > len_ || len_ - payload_off < size) return nullptr;
  auto* h = reinterpret_cast<Header*>(base_ + payload_off - kHeaderBytes);
  h->size = size;
  h->magic = Header::kLive;
  cursor_ = payload_off + size;
  return base_ + payload_off;
}

RegionAllocator::Header* RegionAllocator::header_of(const void* block) const {
  const auto* p = static_cast<const std::byte*>(block);
  auto* h = reinterpret_cast<Header*>(const_cast<std::byte*>(p) - kHeaderBytes);
  if (debug_checks()) {
    if (p < base_ + kHeaderBytes || p >= base_ + cursor_ ||
        reinterpret_cast<std::uintptr_t>(p) % kMinAlign != 0) {
      report_foreign(block);
    }
    if (h->magic == Header::kDead) report_double(block);
    if (h->magic != Header::kLive) report_foreign(block);
  }
  return h;
}

void* RegionAllocator::do_reallocate(void* block, std::size_t size) {
  Header* h = header_of(block);
  if (size <= h->size) return block;
  // The most recent block can grow in place.
  auto* end = static_cast<std::byte*>(block) + h->size;
  if (end == base_ + cursor_ && len_ - cursor_ >= size - h->size) {
    cursor_ += size - h->size;
    h->size = size;
    return block;
  }
  void* p = do_allocate(size);
  if (p == nullptr) return nullptr;
  std::memcpy(p, block, h->size);
  h->magic = Header::kDead;
  return p;
}

void RegionAllocator::do_release(void* block) {
  // Memory is never reclaimed; the tag only lets debug builds catch misuse.
  header_of(block)->magic = Header::kDead;
}

std::size_t RegionAllocator::do_usable_size(const void* block) const {
  return header_of(block)->size;
}

std::size_t RegionAllocator::do_available() const {
  return len_ - cursor_ >= kHeaderBytes ? len_ - cursor_ - kHeaderBytes : 0;
}

std::size_t RegionAllocator::do_seal() {
  len_ = cursor_;
  return cursor_;
}

}  // namespace uk::alloc

#include <bit>
#include <cstring>

#include "uk/alloc_backends.hpp"
#include "uk/error.hpp"

namespace uk::alloc {

// Boundary tag preceding every payload. prev_size always holds the payload
// size of the physically previous block (0 for the first block), so both
// neighbours are reachable in O(1).
struct TlsfAllocator::Block {
  std::uint64_t prev_size;
  std::uint32_t size;
  std::uint16_t flags;
  std::uint16_t magic;

  // Free-list links overlay the payload of free blocks.
  Block*& next_free() { return reinterpret_cast<Block**>(this + 1)[0]; }
  Block*& prev_free() { return reinterpret_cast<Block**>(this + 1)[1]; }
  std::byte* payload() { return reinterpret_cast<std::byte*>(this + 1); }
  Block* next_phys() { return reinterpret_cast<Block*>(payload() + size); }
  Block* prev_phys() {
    return reinterpret_cast<Block*>(reinterpret_cast<std::byte*>(this) - prev_size -
                                    sizeof(Block));
  }
  bool is_free() const { return (flags & kFree) != 0; }
  bool is_first() const { return (flags & kFirst) != 0; }
  bool is_sentinel() const { return (flags & kSentinel) != 0; }

  static constexpr std::uint16_t kFree = 1;
  static constexpr std::uint16_t kFirst = 2;
  static constexpr std::uint16_t kSentinel = 4;
  static constexpr std::uint16_t kMagic = 0x7f5a;
};

namespace {

// Blocks must stay below the top first-level class.
constexpr std::size_t kMaxBlock = (std::size_t{1} << (TlsfAllocator::kFlMax + 1)) - kMinAlign;
constexpr std::size_t kMinSplit = TlsfAllocator::kHeaderBytes + kMinAlign;

}  // namespace

TlsfAllocator::Class TlsfAllocator::class_of(std::size_t size) noexcept {
  if (size < kMinAlign) size = kMinAlign;
  const unsigned fl = static_cast<unsigned>(std::bit_width(size)) - 1;
  const unsigned sl = static_cast<unsigned>((size >> (fl - kSlLog2)) ^ kSlCount);
  return {fl, sl};
}

std::size_t TlsfAllocator::round_request(std::size_t size) noexcept {
  return size < kMinAlign ? kMinAlign : (size + kMinAlign - 1) & ~(kMinAlign - 1);
}

TlsfAllocator::Class TlsfAllocator::search_class(std::size_t request) noexcept {
  std::size_t r = round_request(request);
  const unsigned fl = static_cast<unsigned>(std::bit_width(r)) - 1;
  // Round up to the next class boundary unless r already sits on one.
  r += (std::size_t{1} << (fl - kSlLog2)) - 1;
  return class_of(r);
}

std::size_t TlsfAllocator::class_lower_bound(Class c) noexcept {
  return (std::size_t{1} << c.fl) + (std::size_t{c.sl} << (c.fl - kSlLog2));
}

TlsfAllocator::TlsfAllocator(std::span<std::byte> heap, const InitOptions& options)
    : Allocator(BackendKind::tlsf, heap, options.debug_checks),
      base_(heap.data()),
      len_(heap.size()) {
  static_assert(sizeof(Block) == kHeaderBytes);
  // Chain of free blocks covering the heap, closed by a zero-size sentinel.
  std::size_t remaining = len_ - 2 * kHeaderBytes;
  std::byte* cursor = base_;
  std::uint64_t prev_size = 0;
  bool first = true;
  while (remaining >= kMinSplit) {
    std::size_t payload = remaining - kHeaderBytes;
    if (payload > kMaxBlock) payload = kMaxBlock;
    // Leave either nothing or a whole splittable block behind.
    if (remaining - kHeaderBytes - payload != 0 && remaining - kHeaderBytes - payload < kMinSplit) {
      payload -= kMinSplit;
    }
    auto* b = reinterpret_cast<Block*>(cursor);
    b->prev_size = prev_size;
    b->size = static_cast<std::uint32_t>(payload);
    b->flags = first ? Block::kFirst : 0;
    b->magic = Block::kMagic;
    insert(b);
    prev_size = payload;
    first = false;
    cursor += kHeaderBytes + payload;
    remaining -= kHeaderBytes + payload;
  }
  auto* end = reinterpret_cast<Block*>(cursor);
  end->prev_size = prev_size;
  end->size = 0;
  end->flags = Block::kSentinel;
  end->magic = Block::kMagic;
}

void TlsfAllocator::insert(Block* b) {
  const Class c = class_of(b->size);
  b->flags |= Block::kFree;
  b->prev_free() = nullptr;
  b->next_free() = heads_[c.fl][c.sl];
  if (b->next_free() != nullptr) b->next_free()->prev_free() = b;
  heads_[c.fl][c.sl] = b;
  fl_bitmap_ |= 1u << c.fl;
  sl_bitmap_[c.fl] |= 1u << c.sl;
  free_bytes_ += b->size;
}

void TlsfAllocator::remove(Block* b) {
  const Class c = class_of(b->size);
  Block* next = b->next_free();
  Block* prev = b->prev_free();
  if (next != nullptr) next->prev_free() = prev;
  if (prev != nullptr) {
    prev->next_free() = next;
  } else {
    heads_[c.fl][c.sl] = next;
    if (next == nullptr) {
      sl_bitmap_[c.fl] &= ~(1u << c.sl);
      if (sl_bitmap_[c.fl] == 0) fl_bitmap_ &= ~(1u << c.fl);
    }
  }
  b->flags &= static_cast<std::uint16_t>(~Block::kFree);
  free_bytes_ -= b->size;
}

TlsfAllocator::Block* TlsfAllocator::find_free(std::size_t size) {
  probe_ = {};
  last_class_.reset();
  if (size > kMaxBlock) return nullptr;
  Class c = search_class(size);
  if (c.fl > kFlMax) return nullptr;

  ++probe_.sl_lookups;
  std::uint32_t sl_map = sl_bitmap_[c.fl] & (~0u << c.sl);
  if (sl_map == 0) {
    ++probe_.fl_lookups;
    const std::uint32_t fl_map = c.fl + 1 > kFlMax ? 0u : fl_bitmap_ & (~0u << (c.fl + 1));
    if (fl_map == 0) return nullptr;
    c.fl = static_cast<unsigned>(std::countr_zero(fl_map));
    ++probe_.sl_lookups;
    sl_map = sl_bitmap_[c.fl];
  }
  c.sl = static_cast<unsigned>(std::countr_zero(sl_map));
  Block* b = heads_[c.fl][c.sl];
  ++probe_.list_removals;
  remove(b);
  last_class_ = c;
  return b;
}

void TlsfAllocator::split(Block* b, std::size_t size) {
  if (b->size < size + kMinSplit) return;
  auto* rest = reinterpret_cast<Block*>(b->payload() + size);
  rest->size = static_cast<std::uint32_t>(b->size - size - kHeaderBytes);
  rest->prev_size = size;
  rest->flags = 0;
  rest->magic = Block::kMagic;
  b->size = static_cast<std::uint32_t>(size);
  rest->next_phys()->prev_size = rest->size;
  // The block after `rest` was in use (free neighbours are always merged),
  // except when b was just grown in place; merge to keep the invariant.
  rest = merge_with_next(rest);
  insert(rest);
}

TlsfAllocator::Block* TlsfAllocator::merge_with_next(Block* b) {
  Block* next = b->next_phys();
  if (!next->is_free()) return b;
  if (std::size_t{b->size} + kHeaderBytes + next->size > kMaxBlock) return b;
  remove(next);
  b->size += static_cast<std::uint32_t>(kHeaderBytes + next->size);
  b->next_phys()->prev_size = b->size;
  return b;
}

void* TlsfAllocator::do_allocate(std::size_t size) {
  Block* b = find_free(size);
  if (b == nullptr) return nullptr;
  split(b, size);
  return b->payload();
}

void* TlsfAllocator::do_allocate_aligned(std::size_t align, std::size_t size) {
  // Room for the payload plus a leading gap that is either zero or big
  // enough to stand as a free block of its own.
  const std::size_t want = size + align + kMinSplit;
  Block* b = find_free(want);
  if (b == nullptr) return nullptr;
  const auto payload = reinterpret_cast<std::uintptr_t>(b->payload());
  if (payload % align != 0) {
    const std::uintptr_t aligned = (payload + kMinSplit + align - 1) & ~(std::uintptr_t{align} - 1);
    const std::size_t gap = aligned - payload;
    auto* moved = reinterpret_cast<Block*>(aligned - kHeaderBytes);
    moved->size = static_cast<std::uint32_t>(b->size - gap);
    moved->prev_size = gap - kHeaderBytes;
    moved->flags = 0;
    moved->magic = Block::kMagic;
    moved->next_phys()->prev_size = moved->size;
    b->size = static_cast<std::uint32_t>(gap - kHeaderBytes);
    // b's physical predecessor is in use, so the gap block needs no merge.
    insert(b);
    b = moved;
  }
  split(b, size);
  return b->payload();
}

TlsfAllocator::Block* TlsfAllocator::checked_header(void* block) const {
  auto* b = reinterpret_cast<Block*>(static_cast<std::byte*>(block) - kHeaderBytes);
  if (debug_checks()) {
    const auto* p = static_cast<const std::byte*>(block);
    if (p < base_ + kHeaderBytes || p >= base_ + len_ ||
        reinterpret_cast<std::uintptr_t>(p) % kMinAlign != 0 || b->magic != Block::kMagic ||
        b->is_sentinel()) {
      report_foreign(block);
    }
    if (b->is_free()) report_double(block);
  }
  return b;
}

void* TlsfAllocator::do_reallocate(void* block, std::size_t size) {
  Block* b = checked_header(block);
  if (size <= b->size) {
    split(b, size);
    return block;
  }
  Block* next = b->next_phys();
  if (next->is_free() && std::size_t{b->size} + kHeaderBytes + next->size >= size &&
      std::size_t{b->size} + kHeaderBytes + next->size <= kMaxBlock) {
    remove(next);
    b->size += static_cast<std::uint32_t>(kHeaderBytes + next->size);
    b->next_phys()->prev_size = b->size;
    split(b, size);
    return block;
  }
  const std::size_t old = b->size;
  void* p = do_allocate(size);
  if (p == nullptr) return nullptr;
  std::memcpy(p, block, old);
  do_release(block);
  return p;
}

void TlsfAllocator::do_release(void* block) {
  Block* b = checked_header(block);
  b = merge_with_next(b);
  if (!b->is_first()) {
    Block* prev = b->prev_phys();
    if (prev->is_free() && std::size_t{prev->size} + kHeaderBytes + b->size <= kMaxBlock) {
      remove(prev);
      prev->size += static_cast<std::uint32_t>(kHeaderBytes + b->size);
      prev->next_phys()->prev_size = prev->size;
      b = prev;
    }
  }
  insert(b);
}

std::size_t TlsfAllocator::do_usable_size(const void* block) const {
  return reinterpret_cast<const Block*>(static_cast<const std::byte*>(block) - kHeaderBytes)->size;
}

bool TlsfAllocator::bitmap_bit(Class c) const noexcept {
  return (sl_bitmap_[c.fl] >> c.sl & 1u) != 0 && (fl_bitmap_ >> c.fl & 1u) != 0;
}

std::size_t TlsfAllocator::list_length(Class c) const noexcept {
  std::size_t n = 0;
  for (Block* b = heads_[c.fl][c.sl]; b != nullptr; b = b->next_free()) ++n;
  return n;
}

bool TlsfAllocator::check_consistency() const {
  for (unsigned fl = 0; fl <= kFlMax; ++fl) {
    const bool fl_bit = (fl_bitmap_ >> fl & 1u) != 0;
    if (fl_bit != (sl_bitmap_[fl] != 0)) return false;
    for (unsigned sl = 0; sl < kSlCount; ++sl) {
      const bool bit = (sl_bitmap_[fl] >> sl & 1u) != 0;
      if (bit != (heads_[fl][sl] != nullptr)) return false;
      for (Block* b = heads_[fl][sl]; b != nullptr; b = b->next_free()) {
        if (!b->is_free() || !(class_of(b->size) == Class{fl, sl})) return false;
      }
    }
  }
  return true;
}

}  // namespace uk::alloc

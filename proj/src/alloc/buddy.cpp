#include <bit>
#include <cstring>

#include "uk/alloc_backends.hpp"
#include "uk/error.hpp"

namespace uk::alloc {

BuddyAllocator::BuddyAllocator(std::span<std::byte> heap, const InitOptions& options)
    : Allocator(BackendKind::buddy, heap, options.debug_checks),
      min_block_(options.buddy_min_block) {
  if (!std::has_single_bit(min_block_) || min_block_ < 32) {
    raise(Errc::invalid_argument, "buddy min_block must be a power of two >= 32");
  }
  min_shift_ = static_cast<std::size_t>(std::countr_zero(min_block_));

  // Align the start to one granule so block offsets and addresses agree.
  const auto addr = reinterpret_cast<std::uintptr_t>(heap.data());
  const std::size_t skew = ((addr + min_block_ - 1) & ~(min_block_ - 1)) - addr;
  base_ = heap.data() + skew;
  len_ = heap.size() > skew ? (heap.size() - skew) & ~(min_block_ - 1) : 0;
  if (len_ < min_block_) raise(Errc::region_too_small, "no whole buddy granule in the heap");

  const std::size_t granules = len_ >> min_shift_;
  order_count_ = static_cast<std::size_t>(std::bit_width(granules));
  if (order_count_ > kMaxOrders) order_count_ = kMaxOrders;
  const auto start = reinterpret_cast<std::uintptr_t>(base_);
  addr_align_ = start == 0 ? std::size_t{1} << 63 : std::size_t{1} << std::countr_zero(start);

  tags_.assign(granules, 0);

  // Carve the range into naturally aligned blocks, largest first.
  std::size_t offset = 0;
  while (offset < len_) {
    std::size_t order = order_count_ - 1;
    while (order > 0 && (block_size(order) > len_ - offset || offset % block_size(order) != 0)) {
      --order;
    }
    push_free(offset, order);
    offset += block_size(order);
  }
}

std::size_t BuddyAllocator::order_for(std::size_t size) const noexcept {
  if (size <= min_block_) return 0;
  return static_cast<std::size_t>(std::bit_width((size - 1) >> min_shift_));
}

void BuddyAllocator::push_free(std::size_t offset, std::size_t order) {
  auto* node = reinterpret_cast<Node*>(base_ + offset);
  node->prev = nullptr;
  node->next = heads_[order];
  if (node->next != nullptr) node->next->prev = node;
  heads_[order] = node;
  ++counts_[order];
  nonempty_ |= std::uint64_t{1} << order;
  tags_[offset >> min_shift_] = static_cast<std::uint8_t>(kTagFree | order);
  free_bytes_ += block_size(order);
}

void BuddyAllocator::unlink(std::size_t offset, std::size_t order) {
  auto* node = reinterpret_cast<Node*>(base_ + offset);
  if (node->prev != nullptr) {
    node->prev->next = node->next;
  } else {
    heads_[order] = node->next;
  }
  if (node->next != nullptr) node->next->prev = node->prev;
  if (--counts_[order] == 0) nonempty_ &= ~(std::uint64_t{1} << order);
  tags_[offset >> min_shift_] = 0;
  free_bytes_ -= block_size(order);
}

void* BuddyAllocator::take(std::size_t order) {
  if (order >= order_count_) return nullptr;
  const std::uint64_t candidates = nonempty_ & (~std::uint64_t{0} << order);
  if (candidates == 0) return nullptr;
  std::size_t found = static_cast<std::size_t>(std::countr_zero(candidates));
  const std::size_t offset = static_cast<std::size_t>(
      reinterpret_cast<std::byte*>(heads_[found]) - base_);
  unlink(offset, found);
  // Split down, returning upper halves to their free lists.
  while (found > order) {
    --found;
    push_free(offset + block_size(found), found);
  }
  tags_[offset >> min_shift_] = static_cast<std::uint8_t>(kTagUsed | order);
  return base_ + offset;
}

void* BuddyAllocator::do_allocate(std::size_t size) { return take(order_for(size)); }

void* BuddyAllocator::do_allocate_aligned(std::size_t align, std::size_t size) {
  // Blocks are aligned to their size relative to base_; beyond the base
  // address alignment that no longer holds.
  if (align > addr_align_) return nullptr;
  return take(order_for(size > align ? size : align));
}

void* BuddyAllocator::do_reallocate(void* block, std::size_t size) {
  const std::size_t order = used_order(block);
  if (size <= block_size(order)) return block;
  void* p = take(order_for(size));
  if (p == nullptr) return nullptr;
  std::memcpy(p, block, block_size(order));
  do_release(block);
  return p;
}

std::size_t BuddyAllocator::used_order(const void* block) const {
  const auto* b = static_cast<const std::byte*>(block);
  if (debug_checks()) {
    if (b < base_ || b >= base_ + len_ ||
        (static_cast<std::size_t>(b - base_) & (min_block_ - 1)) != 0) {
      report_foreign(block);
    }
    const std::uint8_t tag = tags_[static_cast<std::size_t>(b - base_) >> min_shift_];
    if ((tag & kTagFree) != 0) report_double(block);
    if ((tag & kTagUsed) == 0) report_foreign(block);
  }
  return tags_[static_cast<std::size_t>(b - base_) >> min_shift_] & kOrderMask;
}

void BuddyAllocator::do_release(void* block) {
  std::size_t order = used_order(block);
  std::size_t offset = static_cast<std::size_t>(static_cast<std::byte*>(block) - base_);
  tags_[offset >> min_shift_] = 0;
  // Eager coalescing: climb while the buddy is a free block of equal order.
  while (order + 1 < order_count_) {
    const std::size_t buddy = offset ^ block_size(order);
    if (buddy + block_size(order) > len_) break;
    if (tags_[buddy >> min_shift_] != (kTagFree | order)) break;
    unlink(buddy, order);
    offset = offset < buddy ? offset : buddy;
    ++order;
  }
  push_free(offset, order);
}

std::size_t BuddyAllocator::do_usable_size(const void* block) const {
  return block_size(used_order(block));
}

std::size_t BuddyAllocator::free_block_count(std::size_t order) const {
  return order < order_count_ ? counts_[order] : 0;
}

std::size_t BuddyAllocator::free_block_count() const {
  std::size_t n = 0;
  for (std::size_t k = 0; k < order_count_; ++k) n += counts_[k];
  return n;
}

std::vector<BuddyAllocator::FreeBlock> BuddyAllocator::free_blocks() const {
  std::vector<FreeBlock> out;
  for (std::size_t k = 0; k < order_count_; ++k) {
    for (const Node* n = heads_[k]; n != nullptr; n = n->next) {
      out.push_back({static_cast<std::size_t>(reinterpret_cast<const std::byte*>(n) - base_), k});
    }
  }
  return out;
}

}  // namespace uk::alloc

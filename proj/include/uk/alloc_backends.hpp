#pragma once

// Concrete ukalloc backends. Applications normally go through Allocator;
// the introspection hooks here exist for invariant checks and benchmarks.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "uk/alloc.hpp"

namespace uk::alloc {

// Power-of-two buddy system with eager coalescing.
//
// Block state lives in a per-granule tag map kept beside the heap, so blocks
// carry no header and a 2^k block is naturally aligned to 2^k relative to
// the heap start.
class BuddyAllocator final : public Allocator {
 public:
  BuddyAllocator(std::span<std::byte> heap, const InitOptions& options);

  std::size_t min_block() const noexcept { return min_block_; }
  std::size_t order_count() const noexcept { return order_count_; }
  std::size_t block_size(std::size_t order) const noexcept { return min_block_ << order; }
  // Order whose block size is the smallest power of two >= size.
  std::size_t order_for(std::size_t size) const noexcept;
  std::size_t free_block_count(std::size_t order) const;
  std::size_t free_block_count() const;

  struct FreeBlock {
    std::size_t offset;
    std::size_t order;
  };
  std::vector<FreeBlock> free_blocks() const;

 protected:
  void* do_allocate(std::size_t size) override;
  void* do_allocate_aligned(std::size_t align, std::size_t size) override;
  void* do_reallocate(void* block, std::size_t size) override;
  void do_release(void* block) override;
  std::size_t do_usable_size(const void* block) const override;
  std::size_t do_available() const override { return free_bytes_; }

 private:
  struct Node {
    Node* prev;
    Node* next;
  };

  static constexpr std::size_t kMaxOrders = 48;
  static constexpr std::uint8_t kTagFree = 0x40;
  static constexpr std::uint8_t kTagUsed = 0x80;
  static constexpr std::uint8_t kOrderMask = 0x3f;

  void* take(std::size_t order);
  void push_free(std::size_t offset, std::size_t order);
  void unlink(std::size_t offset, std::size_t order);
  std::size_t used_order(const void* block) const;

  std::byte* base_;
  std::size_t len_;
  std::size_t min_block_;
  std::size_t min_shift_;
  std::size_t order_count_;
  std::size_t addr_align_;
  std::size_t free_bytes_ = 0;
  std::uint64_t nonempty_ = 0;
  std::array<Node*, kMaxOrders> heads_{};
  std::array<std::size_t, kMaxOrders> counts_{};
  std::vector<std::uint8_t> tags_;
};

// Two-Level Segregated Fits: free blocks indexed by a power-of-two first
// level and a linear second level, located through two bitmaps.
class TlsfAllocator final : public Allocator {
 public:
  static constexpr unsigned kSlLog2 = 4;
  static constexpr unsigned kSlCount = 1u << kSlLog2;
  static constexpr unsigned kFlMax = 30;
  static constexpr unsigned kFlMin = 4;  // classes below 16 bytes never occur
  static constexpr std::size_t kHeaderBytes = 16;

  struct Class {
    unsigned fl;
    unsigned sl;
    friend bool operator==(const Class&, const Class&) = default;
  };

  // Bitmap and list operations performed by the most recent allocation.
  struct SearchProbe {
    unsigned fl_lookups = 0;
    unsigned sl_lookups = 0;
    unsigned list_removals = 0;
  };

  TlsfAllocator(std::span<std::byte> heap, const InitOptions& options);

  // The class a free block of `size` bytes is filed under (requests below
  // 16 bytes count as 16).
  static Class class_of(std::size_t size) noexcept;
  // Where the good-fit search for a request starts: the smallest class whose
  // lower bound is >= the rounded request.
  static Class search_class(std::size_t request) noexcept;
  static std::size_t class_lower_bound(Class c) noexcept;
  static std::size_t round_request(std::size_t size) noexcept;

  bool bitmap_bit(Class c) const noexcept;
  bool list_empty(Class c) const noexcept { return heads_[c.fl][c.sl] == nullptr; }
  std::size_t list_length(Class c) const noexcept;
  const SearchProbe& last_probe() const noexcept { return probe_; }
  std::optional<Class> last_serviced_class() const noexcept { return last_class_; }

  // Exhaustive scan: bit set <=> list non-empty, and every listed block sits
  // in the class its size maps to and is marked free.
  bool check_consistency() const;

 protected:
  void* do_allocate(std::size_t size) override;
  void* do_allocate_aligned(std::size_t align, std::size_t size) override;
  void* do_reallocate(void* block, std::size_t size) override;
  void do_release(void* block) override;
  std::size_t do_usable_size(const void* block) const override;
  std::size_t do_available() const override { return free_bytes_; }

 private:
  struct Block;

  Block* find_free(std::size_t size);
  void insert(Block* b);
  void remove(Block* b);
  void split(Block* b, std::size_t size);
  Block* merge_with_next(Block* b);
  Block* checked_header(void* block) const;

  std::byte* base_;
  std::size_t len_;
  std::size_t free_bytes_ = 0;
  std::uint32_t fl_bitmap_ = 0;
  std::array<std::uint32_t, kFlMax + 1> sl_bitmap_{};
  std::array<std::array<Block*, kSlCount>, kFlMax + 1> heads_{};
  SearchProbe probe_;
  std::optional<Class> last_class_;
};

// Bump-cursor allocator: constant-time init, release is a no-op.
class RegionAllocator final : public Allocator {
 public:
  // Each block is preceded by a size word and a magic word.
  static constexpr std::size_t kHeaderBytes = 16;

  RegionAllocator(std::span<std::byte> heap, const InitOptions& options);

  std::size_t cursor() const noexcept { return cursor_; }

 protected:
  std::size_t do_seal() override;
  void* do_allocate(std::size_t size) override;
  void* do_allocate_aligned(std::size_t align, std::size_t size) override;
  void* do_reallocate(void* block, std::size_t size) override;
  void do_release(void* block) override;
  std::size_t do_usable_size(const void* block) const override;
  std::size_t do_available() const override;

 private:
  struct Header;
  Header* header_of(const void* block) const;

  std::byte* base_;
  std::size_t len_;
  std::size_t cursor_ = 0;
};

// Single address-ordered free list, first fit with splitting, neighbours
// merged before release returns.
class TinyFreeAllocator final : public Allocator {
 public:
  static constexpr std::size_t kHeaderBytes = 16;

  TinyFreeAllocator(std::span<std::byte> heap, const InitOptions& options);

  std::size_t free_block_count() const noexcept;
  // True when the list is address-sorted and no two entries touch.
  bool check_list() const noexcept;

 protected:
  void* do_allocate(std::size_t size) override;
  void* do_allocate_aligned(std::size_t align, std::size_t size) override;
  void* do_reallocate(void* block, std::size_t size) override;
  void do_release(void* block) override;
  std::size_t do_usable_size(const void* block) const override;
  std::size_t do_available() const override { return free_bytes_; }

 private:
  struct Header;
  Header* checked_header(void* block) const;

  std::byte* base_;
  std::size_t len_;
  std::size_t free_bytes_ = 0;
  Header* free_head_ = nullptr;
};

}  // namespace uk::alloc

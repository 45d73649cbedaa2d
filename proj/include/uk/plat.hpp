#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>

#include <ucontext.h>

namespace uk::plat {

inline constexpr std::size_t kPageSize = 4096;
inline constexpr std::size_t kMinStackSize = 16 * 1024;

// Monotonic clock in nanoseconds.
std::uint64_t monotonic_ns() noexcept;

// Timestamp sampled during static initialization of the platform library;
// the closest userspace analogue of "first guest instruction".
std::uint64_t process_entry_ns() noexcept;

enum class MemoryStrategy : std::uint8_t {
  prereserved,  // every page touched before provisioning returns
  on_demand,    // reserved only; pages fault in on first access
};

std::string_view to_string(MemoryStrategy s) noexcept;
std::optional<MemoryStrategy> parse_memory_strategy(std::string_view s) noexcept;

// Anonymous mapping that backs a heap. Move-only; unmapped on destruction.
class MemoryRegion {
 public:
  MemoryRegion() = default;
  MemoryRegion(MemoryRegion&& other) noexcept;
  MemoryRegion& operator=(MemoryRegion&& other) noexcept;
  MemoryRegion(const MemoryRegion&) = delete;
  MemoryRegion& operator=(const MemoryRegion&) = delete;
  ~MemoryRegion();

  std::span<std::byte> bytes() const noexcept { return {base_, size_}; }
  std::byte* data() const noexcept { return base_; }
  std::size_t size() const noexcept { return size_; }
  MemoryStrategy strategy() const noexcept { return strategy_; }
  bool empty() const noexcept { return size_ == 0; }

 private:
  friend MemoryRegion provision_heap(MemoryStrategy, std::size_t);
  MemoryRegion(std::byte* base, std::size_t size, MemoryStrategy s) noexcept
      : base_(base), size_(size), strategy_(s) {}

  std::byte* base_ = nullptr;
  std::size_t size_ = 0;
  MemoryStrategy strategy_ = MemoryStrategy::on_demand;
};

// Reserves `bytes` (rounded up to whole pages). Throws heap_unavailable for a
// zero-byte request or when the host refuses the mapping.
MemoryRegion provision_heap(MemoryStrategy strategy, std::size_t bytes);

// Execution context with its own stack. Contexts are pinned in memory
// (ucontext_t holds interior pointers), so they are handed out by pointer.
class Context {
 public:
  using Entry = void (*)(void* arg);

  // Context representing whatever is currently running; filled in by the
  // first switch away from it.
  Context() = default;
  Context(const Context&) = delete;
  Context& operator=(const Context&) = delete;

  // Throws bad_stack when stack_size < kMinStackSize. `entry` must never
  // return; it has to switch away as its final act.
  static std::unique_ptr<Context> make(std::size_t stack_size, Entry entry, void* arg);

  std::size_t stack_size() const noexcept { return stack_size_; }

  friend void switch_context(Context& from, Context& to);

 private:
  ucontext_t uc_{};
  std::unique_ptr<std::byte[]> stack_;
  std::size_t stack_size_ = 0;
  Entry entry_ = nullptr;
  void* arg_ = nullptr;

  static void trampoline(unsigned hi, unsigned lo);
};

// Saves the running state into `from` and resumes `to`. Returns when some
// other context switches back to `from`.
void switch_context(Context& from, Context& to);

// Handle for the initialized platform layer.
class Platform {
 public:
  static Platform& init();

  std::uint64_t now_ns() const noexcept { return monotonic_ns(); }
  std::size_t page_size() const noexcept { return kPageSize; }
  std::size_t min_stack_size() const noexcept { return kMinStackSize; }

 private:
  Platform() = default;
};

}  // namespace uk::plat

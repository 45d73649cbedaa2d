#pragma once

// ukalloc: a multiplexing allocation facade over interchangeable backends.
//
// Every backend is bound to its own byte range of a platform memory region
// and exposes the same POSIX-shaped operation set through Allocator. The
// Registry records every initialized handle and routes handle-less calls to
// the default one.
//
// Out-of-memory is reported the POSIX way (nullptr). Contract violations
// (bad alignment, zero sizes, foreign or double releases in debug mode) throw
// uk::Error.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace uk::alloc {

enum class BackendKind : std::uint8_t { buddy, tlsf, region, tinyfree };

inline constexpr BackendKind kAllBackends[] = {BackendKind::buddy, BackendKind::tlsf,
                                               BackendKind::region, BackendKind::tinyfree};

std::string_view to_string(BackendKind kind) noexcept;
std::optional<BackendKind> parse_backend(std::string_view name) noexcept;

// Every block handed out by any backend is at least this aligned.
inline constexpr std::size_t kMinAlign = 16;

#ifdef NDEBUG
inline constexpr bool kDebugChecksDefault = false;
#else
inline constexpr bool kDebugChecksDefault = true;
#endif

struct Stats {
  std::uint64_t alloc_count = 0;
  std::uint64_t free_count = 0;
  std::uint64_t bytes_in_use = 0;
  std::uint64_t peak_bytes = 0;
  std::uint64_t init_ns = 0;
};

struct InitOptions {
  // Detect double and foreign releases via boundary-tag magic values.
  bool debug_checks = kDebugChecksDefault;
  // Buddy granule; must be a power of two >= 32.
  std::size_t buddy_min_block = 32;
};

// A handle: one backend bound to one heap range.
class Allocator {
 public:
  Allocator(const Allocator&) = delete;
  Allocator& operator=(const Allocator&) = delete;
  virtual ~Allocator() = default;

  void* allocate(std::size_t size);
  void* allocate_zeroed(std::size_t count, std::size_t size);
  void* allocate_aligned(std::size_t align, std::size_t size);
  // A null block behaves as allocate(); new_size == 0 releases. On failure
  // the original block stays live and nullptr is returned.
  void* reallocate(void* block, std::size_t new_size);
  void release(void* block);

  std::size_t available_bytes() const { return do_available(); }
  std::size_t usable_size(const void* block) const { return do_usable_size(block); }

  BackendKind kind() const noexcept { return kind_; }
  // The managed range after the backend trimmed it for alignment.
  std::span<std::byte> heap() const noexcept { return heap_; }
  std::size_t heap_base() const noexcept { return heap_base_; }
  std::size_t heap_len() const noexcept { return heap_len_; }
  bool owns(const void* p) const noexcept;

  const Stats& stats() const noexcept { return stats_; }
  bool debug_checks() const noexcept { return debug_checks_; }
  void set_debug_checks(bool on) noexcept { debug_checks_ = on; }

  // Freeze the handle: no further memory is handed out and heap() shrinks
  // to the consumed prefix, whose length is returned. Only backends whose
  // consumed memory is a prefix support this; others throw not_supported.
  std::size_t seal();

 protected:
  Allocator(BackendKind kind, std::span<std::byte> heap, bool debug_checks) noexcept;

  // `size` arrives rounded up to a multiple of kMinAlign (and >= kMinAlign).
  virtual void* do_allocate(std::size_t size) = 0;
  // `align` is a power of two > kMinAlign.
  virtual void* do_allocate_aligned(std::size_t align, std::size_t size) = 0;
  // Default: allocate, copy, release.
  virtual void* do_reallocate(void* block, std::size_t size);
  virtual void do_release(void* block) = 0;
  virtual std::size_t do_usable_size(const void* block) const = 0;
  virtual std::size_t do_available() const = 0;
  virtual std::size_t do_seal();

  [[noreturn]] void report_foreign(const void* block) const;
  [[noreturn]] void report_double(const void* block) const;

 private:
  friend class Registry;

  void on_allocated(const void* block);

  BackendKind kind_;
  std::span<std::byte> heap_;
  std::size_t heap_base_ = 0;
  std::size_t heap_len_ = 0;
  bool debug_checks_;
  Stats stats_;
};

// Minimum heap length each backend accepts.
std::size_t min_heap_bytes(BackendKind kind) noexcept;

// Constructs a backend directly over `heap`, without a registry. Throws
// region_too_small.
std::unique_ptr<Allocator> make_backend(BackendKind kind, std::span<std::byte> heap,
                                        const InitOptions& options = {});

// The ukalloc interface: append-ordered registry with a settable default.
class Registry {
 public:
  Registry() = default;
  Registry(const Registry&) = delete;
  Registry& operator=(const Registry&) = delete;

  // Binds a backend to memory[base, base + len). Throws region_too_small,
  // region_overlap, or invalid_argument when the range escapes `memory`.
  Allocator& init(BackendKind kind, std::span<std::byte> memory, std::size_t base,
                  std::size_t len, const InitOptions& options = {});

  void set_default(Allocator& a);
  // The first registered handle until set_default is called. Throws
  // not_registered on an empty registry.
  Allocator& default_allocator() const;

  std::size_t size() const noexcept { return handles_.size(); }
  Allocator& at(std::size_t i) const { return *handles_.at(i); }
  bool contains(const Allocator& a) const noexcept;
  // Handle whose range contains p, or nullptr.
  Allocator* owner_of(const void* p) const noexcept;

  // Handle-less facade routed to the default allocator.
  void* malloc(std::size_t size) { return default_allocator().allocate(size); }
  void* calloc(std::size_t count, std::size_t size) {
    return default_allocator().allocate_zeroed(count, size);
  }
  void* memalign(std::size_t align, std::size_t size) {
    return default_allocator().allocate_aligned(align, size);
  }
  void* realloc(void* block, std::size_t size);
  // Releases to whichever handle owns the block; foreign_block if none does.
  void free(void* block);

 private:
  std::vector<std::unique_ptr<Allocator>> handles_;
  Allocator* default_ = nullptr;
};

// {backend, heap_len, alloc_count, free_count, bytes_in_use, peak_bytes, init_ns}
std::string stats_json(const Allocator& a);

}  // namespace uk::alloc

#include <algorithm>
#include <bit>
#include <cstring>
#include <sstream>

#include <json.hpp>

#include "uk/alloc.hpp"
#include "uk/alloc_backends.hpp"
#include "uk/error.hpp"
#include "uk/plat.hpp"

namespace uk::alloc {

namespace {

constexpr std::size_t round_up(std::size_t v, std::size_t a) noexcept {
  return (v + a - 1) & ~(a - 1);
}

std::string describe(const void* p) {
  std::ostringstream os;
  os << "block " << p;
  return os.str();
}

}  // namespace

std::string_view to_string(BackendKind kind) noexcept {
  switch (kind) {
    case BackendKind::buddy: return "buddy";
    case BackendKind::tlsf: return "tlsf";
    case BackendKind::region: return "region";
    case BackendKind::tinyfree: return "tinyfree";
  }
  return "unknown";
}

std::optional<BackendKind> parse_backend(std::string_view name) noexcept {
  for (BackendKind k : kAllBackends) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

Allocator::Allocator(BackendKind kind, std::span<std::byte> heap, bool debug_checks) noexcept
    : kind_(kind), heap_(heap), heap_len_(heap.size()), debug_checks_(debug_checks) {}

bool Allocator::owns(const void* p) const noexcept {
  const auto* b = static_cast<const std::byte*>(p);
  return b >= heap_.data() && b < heap_.data() + heap_.size();
}

std::size_t Allocator::do_seal() {
  raise(Errc::not_supported, std::string(to_string(kind_)) + " backend cannot be sealed");
}

std::size_t Allocator::seal() {
  const std::size_t extent = do_seal();
  heap_ = heap_.first(extent);
  heap_len_ = extent;
  return extent;
}

void Allocator::on_allocated(const void* block) {
  ++stats_.alloc_count;
  stats_.bytes_in_use += do_usable_size(block);
  stats_.peak_bytes = std::max(stats_.peak_bytes, stats_.bytes_in_use);
}

void* Allocator::allocate(std::size_t size) {
  if (size == 0) raise(Errc::invalid_argument, "zero-byte allocation");
  if (size > heap_.size()) return nullptr;
  void* p = do_allocate(std::max(kMinAlign, round_up(size, kMinAlign)));
  if (p != nullptr) on_allocated(p);
  return p;
}

void* Allocator::allocate_zeroed(std::size_t count, std::size_t size) {
  std::size_t total = 0;
  if (__builtin_mul_overflow(count, size, &total)) return nullptr;
  void* p = allocate(total);
  if (p != nullptr) std::memset(p, 0, total);
  return p;
}

void* Allocator::allocate_aligned(std::size_t align, std::size_t size) {
  if (!std::has_single_bit(align) || align < kMinAlign) {
    raise(Errc::invalid_alignment, "alignment " + std::to_string(align));
  }
  if (size == 0) raise(Errc::invalid_argument, "zero-byte allocation");
  if (size > heap_.size()) return nullptr;
  const std::size_t rounded = std::max(kMinAlign, round_up(size, kMinAlign));
  void* p = align == kMinAlign ? do_allocate(rounded) : do_allocate_aligned(align, rounded);
  if (p != nullptr) on_allocated(p);
  return p;
}

void* Allocator::reallocate(void* block, std::size_t new_size) {
  if (block == nullptr) return allocate(new_size);
  if (new_size == 0) {
    release(block);
    return nullptr;
  }
  if (debug_checks_ && !owns(block)) report_foreign(block);
  if (new_size > heap_.size()) return nullptr;
  const std::size_t old_usable = do_usable_size(block);
  void* p = do_reallocate(block, std::max(kMinAlign, round_up(new_size, kMinAlign)));
  if (p != nullptr) {
    stats_.bytes_in_use = stats_.bytes_in_use - old_usable + do_usable_size(p);
    stats_.peak_bytes = std::max(stats_.peak_bytes, stats_.bytes_in_use);
  }
  return p;
}

void* Allocator::do_reallocate(void* block, std::size_t size) {
  const std::size_t old_usable = do_usable_size(block);
  if (size <= old_usable) return block;
  void* p = do_allocate(size);
  if (p == nullptr) return nullptr;
  std::memcpy(p, block, old_usable);
  do_release(block);
  return p;
}

void Allocator::release(void* block) {
  if (block == nullptr) return;
  if (debug_checks_ && !owns(block)) report_foreign(block);
  const std::size_t usable = do_usable_size(block);
  do_release(block);
  ++stats_.free_count;
  stats_.bytes_in_use -= usable;
}

void Allocator::report_foreign(const void* block) const {
  raise(Errc::foreign_block,
        describe(block) + " was not produced by this " + std::string(to_string(kind_)) +
            " handle");
}

void Allocator::report_double(const void* block) const {
  raise(Errc::double_release, describe(block) + " is already free");
}

std::size_t min_heap_bytes(BackendKind kind) noexcept {
  switch (kind) {
    case BackendKind::buddy: return 32;
    case BackendKind::tlsf: return 3 * TlsfAllocator::kHeaderBytes + kMinAlign;
    case BackendKind::region: return RegionAllocator::kHeaderBytes + kMinAlign;
    case BackendKind::tinyfree: return TinyFreeAllocator::kHeaderBytes + kMinAlign;
  }
  return 0;
}

std::unique_ptr<Allocator> make_backend(BackendKind kind, std::span<std::byte> heap,
                                        const InitOptions& options) {
  // Trim to kMinAlign so every header and payload starts 16-byte aligned.
  const auto addr = reinterpret_cast<std::uintptr_t>(heap.data());
  const std::size_t skew = round_up(addr, kMinAlign) - addr;
  std::size_t len = heap.size() > skew ? heap.size() - skew : 0;
  len &= ~(kMinAlign - 1);
  std::size_t minimum = min_heap_bytes(kind);
  if (kind == BackendKind::buddy) minimum = std::max(minimum, options.buddy_min_block);
  if (len < minimum) {
    raise(Errc::region_too_small, std::to_string(heap.size()) + " bytes offered, " +
                                      std::string(to_string(kind)) + " needs " +
                                      std::to_string(minimum));
  }
  auto trimmed = heap.subspan(skew, len);
  switch (kind) {
    case BackendKind::buddy: return std::make_unique<BuddyAllocator>(trimmed, options);
    case BackendKind::tlsf: return std::make_unique<TlsfAllocator>(trimmed, options);
    case BackendKind::region: return std::make_unique<RegionAllocator>(trimmed, options);
    case BackendKind::tinyfree: return std::make_unique<TinyFreeAllocator>(trimmed, options);
  }
  raise(Errc::invalid_argument, "unknown backend");
}

Allocator& Registry::init(BackendKind kind, std::span<std::byte> memory, std::size_t base,
                          std::size_t len, const InitOptions& options) {
  if (base > memory.size() || len > memory.size() - base) {
    raise(Errc::invalid_argument, "heap range escapes the memory region");
  }
  const std::byte* lo = memory.data() + base;
  const std::byte* hi = lo + len;
  for (const auto& h : handles_) {
    const std::byte* hlo = h->heap_.data();
    const std::byte* hhi = hlo + h->heap_.size();
    if (lo < hhi && hlo < hi) {
      raise(Errc::region_overlap, "range overlaps the " + std::string(to_string(h->kind())) +
                                      " handle registered at index " +
                                      std::to_string(&h - handles_.data()));
    }
  }
  const std::uint64_t t0 = plat::monotonic_ns();
  auto handle = make_backend(kind, memory.subspan(base, len), options);
  const std::uint64_t t1 = plat::monotonic_ns();
  handle->stats_.init_ns = t1 - t0;
  handle->heap_base_ = base;
  handles_.push_back(std::move(handle));
  return *handles_.back();
}

void Registry::set_default(Allocator& a) {
  if (!contains(a)) raise(Errc::not_registered, "handle is not in this registry");
  default_ = &a;
}

Allocator& Registry::default_allocator() const {
  if (default_ != nullptr) return *default_;
  if (handles_.empty()) raise(Errc::not_registered, "no allocator registered");
  return *handles_.front();
}

bool Registry::contains(const Allocator& a) const noexcept {
  return std::any_of(handles_.begin(), handles_.end(),
                     [&](const auto& h) { return h.get() == &a; });
}

Allocator* Registry::owner_of(const void* p) const noexcept {
  for (const auto& h : handles_) {
    if (h->owns(p)) return h.get();
  }
  return nullptr;
}

void* Registry::realloc(void* block, std::size_t size) {
  if (block == nullptr) return malloc(size);
  Allocator* owner = owner_of(block);
  if (owner == nullptr) raise(Errc::foreign_block, describe(block) + " has no owning handle");
  return owner->reallocate(block, size);
}

void Registry::free(void* block) {
  if (block == nullptr) return;
  Allocator* owner = owner_of(block);
  if (owner == nullptr) raise(Errc::foreign_block, describe(block) + " has no owning handle");
  owner->release(block);
}

std::string stats_json(const Allocator& a) {
  const Stats& s = a.stats();
  nlohmann::ordered_json j;
  j["backend"] = to_string(a.kind());
  j["heap_len"] = a.heap_len();
  j["alloc_count"] = s.alloc_count;
  j["free_count"] = s.free_count;
  j["bytes_in_use"] = s.bytes_in_use;
  j["peak_bytes"] = s.peak_bytes;
  j["init_ns"] = s.init_ns;
  return j.dump();
}

}  // namespace uk::alloc

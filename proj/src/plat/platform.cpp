#include "uk/plat.hpp"

#include <sys/mman.h>

#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <string>
#include <utility>

#include "uk/error.hpp"

namespace uk::plat {

std::uint64_t monotonic_ns() noexcept {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(
          std::chrono::steady_clock::now().time_since_epoch())
          .count());
}

namespace {
const std::uint64_t g_process_entry = monotonic_ns();
}  // namespace

std::uint64_t process_entry_ns() noexcept { return g_process_entry; }

std::string_view to_string(MemoryStrategy s) noexcept {
  return s == MemoryStrategy::prereserved ? "prereserved" : "on_demand";
}

std::optional<MemoryStrategy> parse_memory_strategy(std::string_view s) noexcept {
  if (s == "prereserved") return MemoryStrategy::prereserved;
  if (s == "on_demand" || s == "on-demand") return MemoryStrategy::on_demand;
  return std::nullopt;
}

MemoryRegion::MemoryRegion(MemoryRegion&& other) noexcept
    : base_(std::exchange(other.base_, nullptr)),
      size_(std::exchange(other.size_, 0)),
      strategy_(other.strategy_) {}

MemoryRegion& MemoryRegion::operator=(MemoryRegion&& other) noexcept {
  if (this != &other) {
    if (base_ != nullptr) ::munmap(base_, size_);
    base_ = std::exchange(other.base_, nullptr);
    size_ = std::exchange(other.size_, 0);
    strategy_ = other.strategy_;
  }
  return *this;
}

MemoryRegion::~MemoryRegion() {
  if (base_ != nullptr) ::munmap(base_, size_);
}

MemoryRegion provision_heap(MemoryStrategy strategy, std::size_t bytes) {
  if (bytes == 0) raise(Errc::heap_unavailable, "zero-byte heap requested");
  if (bytes > (std::size_t{1} << 46)) raise(Errc::heap_unavailable, "request too large");
  const std::size_t len = (bytes + kPageSize - 1) & ~(kPageSize - 1);

  void* p = ::mmap(nullptr, len, PROT_READ | PROT_WRITE,
                   MAP_PRIVATE | MAP_ANONYMOUS | MAP_NORESERVE, -1, 0);
  if (p == MAP_FAILED) {
    raise(Errc::heap_unavailable, std::string("mmap: ") + std::strerror(errno));
  }
  auto* base = static_cast<std::byte*>(p);
  if (strategy == MemoryStrategy::prereserved) {
    // One write per page pays the first-access cost up front.
    volatile std::byte* touch = base;
    for (std::size_t off = 0; off < len; off += kPageSize) touch[off] = std::byte{0};
  }
  return MemoryRegion(base, len, strategy);
}

std::unique_ptr<Context> Context::make(std::size_t stack_size, Entry entry, void* arg) {
  if (stack_size < kMinStackSize) {
    raise(Errc::bad_stack, "stack of " + std::to_string(stack_size) +
                               " bytes is below the platform minimum of " +
                               std::to_string(kMinStackSize));
  }
  auto ctx = std::make_unique<Context>();
  ctx->stack_ = std::make_unique<std::byte[]>(stack_size);
  ctx->stack_size_ = stack_size;
  ctx->entry_ = entry;
  ctx->arg_ = arg;
  if (::getcontext(&ctx->uc_) != 0) raise(Errc::bad_stack, "getcontext failed");
  ctx->uc_.uc_stack.ss_sp = ctx->stack_.get();
  ctx->uc_.uc_stack.ss_size = stack_size;
  ctx->uc_.uc_link = nullptr;
  const auto self = reinterpret_cast<std::uintptr_t>(ctx.get());
  ::makecontext(&ctx->uc_, reinterpret_cast<void (*)()>(&Context::trampoline), 2,
                static_cast<unsigned>(self >> 32), static_cast<unsigned>(self & 0xffffffffu));
  return ctx;
}

void Context::trampoline(unsigned hi, unsigned lo) {
  auto* self = reinterpret_cast<Context*>((static_cast<std::uintptr_t>(hi) << 32) |
                                          static_cast<std::uintptr_t>(lo));
  self->entry_(self->arg_);
  // Entries switch away for good; falling off the end is a contract breach.
  std::abort();
}

void switch_context(Context& from, Context& to) { ::swapcontext(&from.uc_, &to.uc_); }

Platform& Platform::init() {
  static Platform platform;
  return platform;
}

}  // namespace uk::plat

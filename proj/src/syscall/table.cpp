#include <cstdio>

#include "uk/error.hpp"
#include "uk/syscall.hpp"

namespace uk::sys {

SyscallTable::SyscallTable() noexcept { rebind_stubs(); }

SyscallTable::SyscallTable(SyscallTable&& other) noexcept
    : slots_(other.slots_), log_stubs_(other.log_stubs_), owned_(std::move(other.owned_)) {
  for (std::size_t i = 0; i < seen_.size(); ++i) seen_[i] = other.seen_[i].load();
  rebind_stubs();
}

SyscallTable& SyscallTable::operator=(SyscallTable&& other) noexcept {
  slots_ = other.slots_;
  log_stubs_ = other.log_stubs_;
  owned_ = std::move(other.owned_);
  for (std::size_t i = 0; i < seen_.size(); ++i) seen_[i] = other.seen_[i].load();
  rebind_stubs();
  return *this;
}

void SyscallTable::rebind_stubs() noexcept {
  for (std::size_t i = 0; i < kTableSize; ++i) {
    // Stub slots carry their own number so logging knows which one fired.
    stub_ctx_[i] = {this, static_cast<long>(i)};
    if (slots_[i].fn == nullptr || slots_[i].fn == &stub_entry) {
      slots_[i] = {&stub_entry, &stub_ctx_[i]};
    }
  }
}

void SyscallTable::register_handler(long sysno, Handler fn, void* ctx) {
  if (sysno < 0 || static_cast<unsigned long>(sysno) >= kTableSize) {
    raise(Errc::out_of_range, "syscall number " + std::to_string(sysno) + " outside [0, 512)");
  }
  if (fn == nullptr) raise(Errc::invalid_argument, "null handler");
  if (registered(sysno)) {
    raise(Errc::already_registered, "syscall " + std::to_string(sysno) + " already registered");
  }
  slots_[static_cast<std::size_t>(sysno)] = {fn, ctx};
}

bool SyscallTable::registered(long sysno) const noexcept {
  if (static_cast<unsigned long>(sysno) >= kTableSize) return false;
  return slots_[static_cast<std::size_t>(sysno)].fn != &stub_entry;
}

std::size_t SyscallTable::registered_count() const noexcept {
  std::size_t n = 0;
  for (const Slot& s : slots_) n += s.fn != &stub_entry;
  return n;
}

std::int64_t SyscallTable::stub_entry(void* ctx, std::int64_t, std::int64_t, std::int64_t,
                                      std::int64_t, std::int64_t, std::int64_t) noexcept {
  const auto* s = static_cast<const StubCtx*>(ctx);
  return s->table->stub(s->sysno);
}

std::int64_t SyscallTable::stub(long sysno) const noexcept {
  if (!log_stubs_) return kEnosys;
  const std::size_t bit = sysno < 0 || static_cast<unsigned long>(sysno) >= kTableSize
                              ? kTableSize
                              : static_cast<std::size_t>(sysno);
  const std::uint64_t mask = std::uint64_t{1} << (bit % 64);
  if ((seen_[bit / 64].fetch_or(mask) & mask) == 0) {
    if (bit == kTableSize) {
      std::fprintf(stderr, "syscall_shim: unsupported syscall %ld\n", sysno);
    } else {
      std::fprintf(stderr, "syscall_shim: stubbed syscall %ld -> ENOSYS\n", sysno);
    }
  }
  return kEnosys;
}

std::size_t SyscallTable::stubbed_seen() const noexcept {
  std::size_t n = 0;
  for (const auto& w : seen_) n += static_cast<std::size_t>(__builtin_popcountll(w.load()));
  return n;
}

}  // namespace uk::sys

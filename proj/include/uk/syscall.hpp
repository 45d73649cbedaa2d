#pragma once

// syscall_shim: syscall numbers turned into plain indirect calls.
//
// Every slot always holds a callable entry; unregistered ones point at the
// ENOSYS stub, so dispatch is one bounds check, one load and one call.

#include <array>
#include <atomic>
#include <cerrno>
#include <cstddef>
#include <cstdint>
#include <memory>

namespace uk::net {
class NetDevice;
}
namespace uk::vfs {
class Vfs;
}
namespace uk::alloc {
class Allocator;
}

namespace uk::sys {

inline constexpr std::size_t kTableSize = 512;
inline constexpr std::int64_t kEnosys = -static_cast<std::int64_t>(ENOSYS);

// x86_64 numbering.
namespace nr {
inline constexpr long read = 0;
inline constexpr long write = 1;
inline constexpr long open = 2;
inline constexpr long close = 3;
inline constexpr long stat = 4;
inline constexpr long sendto = 44;
inline constexpr long recvfrom = 45;
inline constexpr long clock_gettime = 228;
}  // namespace nr

using Handler = std::int64_t (*)(void* ctx, std::int64_t a0, std::int64_t a1, std::int64_t a2,
                                 std::int64_t a3, std::int64_t a4, std::int64_t a5);

class SyscallTable {
 public:
  SyscallTable() noexcept;
  SyscallTable(const SyscallTable&) = delete;
  SyscallTable& operator=(const SyscallTable&) = delete;
  SyscallTable(SyscallTable&& other) noexcept;
  SyscallTable& operator=(SyscallTable&& other) noexcept;

  // Throws out_of_range or already_registered.
  void register_handler(long sysno, Handler fn, void* ctx = nullptr);

  std::int64_t dispatch(long sysno, std::int64_t a0 = 0, std::int64_t a1 = 0, std::int64_t a2 = 0,
                        std::int64_t a3 = 0, std::int64_t a4 = 0,
                        std::int64_t a5 = 0) const noexcept {
    if (static_cast<unsigned long>(sysno) >= kTableSize) [[unlikely]] {
      return stub(sysno);
    }
    const Slot& s = slots_[static_cast<std::size_t>(sysno)];
    return s.fn(s.ctx, a0, a1, a2, a3, a4, a5);
  }

  bool registered(long sysno) const noexcept;
  std::size_t registered_count() const noexcept;

  // Writes one line to stderr the first time each stubbed number is hit.
  void set_stub_logging(bool on) noexcept { log_stubs_ = on; }
  // Distinct stubbed numbers seen so far (only tracked while logging).
  std::size_t stubbed_seen() const noexcept;

  // Keeps handler contexts alive as long as the table.
  void adopt(std::shared_ptr<void> owner) { owned_ = std::move(owner); }

 private:
  struct Slot {
    Handler fn;
    void* ctx;
  };
  struct StubCtx {
    const SyscallTable* table;
    long sysno;
  };

  static std::int64_t stub_entry(void* ctx, std::int64_t, std::int64_t, std::int64_t,
                                 std::int64_t, std::int64_t, std::int64_t) noexcept;
  std::int64_t stub(long sysno) const noexcept;
  void rebind_stubs() noexcept;

  std::array<Slot, kTableSize> slots_{};
  std::array<StubCtx, kTableSize> stub_ctx_{};
  // Out-of-range numbers share the bit just past the table.
  mutable std::array<std::atomic<std::uint64_t>, kTableSize / 64 + 1> seen_{};
  bool log_stubs_ = false;
  std::shared_ptr<void> owned_;
};

using Clock = std::uint64_t (*)() noexcept;

struct Components {
  vfs::Vfs* vfs = nullptr;
  // Network numbers are wired only when a running device is supplied.
  net::NetDevice* netdev = nullptr;
  std::uint16_t qid = 0;
  alloc::Allocator* netbuf_alloc = nullptr;
  Clock clock = nullptr;  // defaults to the platform monotonic clock
};

// read/write/open/close/stat bound to the VFS, sendto/recvfrom to the
// device's queue `qid`, clock_gettime to `clock`.
SyscallTable bind_default_table(const Components& c);

}  // namespace uk::sys

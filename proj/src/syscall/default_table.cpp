#include <fcntl.h>
#include <sys/stat.h>

#include <algorithm>
#include <cstring>
#include <ctime>
#include <string_view>

#include "uk/error.hpp"
#include "uk/netdev.hpp"
#include "uk/plat.hpp"
#include "uk/syscall.hpp"
#include "uk/vfs.hpp"

namespace uk::sys {

namespace {

struct Bound {
  Components c;
};

Bound& ctx_of(void* p) { return *static_cast<Bound*>(p); }

template <class T>
T* ptr(std::int64_t v) {
  return reinterpret_cast<T*>(static_cast<std::uintptr_t>(v));
}

unsigned to_open_flags(std::int64_t posix) {
  namespace of = vfs::open_flags;
  unsigned f = 0;
  switch (posix & O_ACCMODE) {
    case O_WRONLY: f |= of::write; break;
    case O_RDWR: f |= of::read | of::write; break;
    default: f |= of::read; break;
  }
  if (posix & O_CREAT) f |= of::create;
  if (posix & O_TRUNC) f |= of::truncate;
  if (posix & O_APPEND) f |= of::append;
  return f;
}

std::int64_t sys_read(void* c, std::int64_t fd, std::int64_t buf, std::int64_t n, std::int64_t,
                      std::int64_t, std::int64_t) {
  if (n < 0) return -EINVAL;
  return ctx_of(c).c.vfs->try_read(static_cast<int>(fd),
                                   {ptr<std::byte>(buf), static_cast<std::size_t>(n)});
}

std::int64_t sys_write(void* c, std::int64_t fd, std::int64_t buf, std::int64_t n, std::int64_t,
                       std::int64_t, std::int64_t) {
  if (n < 0) return -EINVAL;
  return ctx_of(c).c.vfs->try_write(static_cast<int>(fd),
                                    {ptr<const std::byte>(buf), static_cast<std::size_t>(n)});
}

std::int64_t sys_open(void* c, std::int64_t path, std::int64_t flags, std::int64_t,
                      std::int64_t, std::int64_t, std::int64_t) {
  const char* p = ptr<const char>(path);
  if (p == nullptr) return -EFAULT;
  return ctx_of(c).c.vfs->try_open(p, to_open_flags(flags));
}

std::int64_t sys_close(void* c, std::int64_t fd, std::int64_t, std::int64_t, std::int64_t,
                       std::int64_t, std::int64_t) {
  return ctx_of(c).c.vfs->try_close(static_cast<int>(fd));
}

std::int64_t sys_stat(void* c, std::int64_t path, std::int64_t out, std::int64_t, std::int64_t,
                      std::int64_t, std::int64_t) {
  const char* p = ptr<const char>(path);
  auto* st = ptr<struct stat>(out);
  if (p == nullptr || st == nullptr) return -EFAULT;
  vfs::StatInfo info;
  if (const int r = ctx_of(c).c.vfs->try_stat(p, info); r < 0) return r;
  std::memset(st, 0, sizeof(*st));
  st->st_mode = info.kind == vfs::NodeKind::directory ? (S_IFDIR | 0555) : (S_IFREG | 0644);
  st->st_size = static_cast<off_t>(info.size);
  st->st_nlink = 1;
  return 0;
}

std::int64_t sys_clock_gettime(void* c, std::int64_t, std::int64_t out, std::int64_t,
                               std::int64_t, std::int64_t, std::int64_t) {
  auto* ts = ptr<timespec>(out);
  if (ts == nullptr) return -EFAULT;
  const std::uint64_t ns = ctx_of(c).c.clock();
  ts->tv_sec = static_cast<time_t>(ns / 1'000'000'000u);
  ts->tv_nsec = static_cast<long>(ns % 1'000'000'000u);
  return 0;
}

// One datagram per call on the bound queue; the fd and address are ignored.
std::int64_t sys_sendto(void* c, std::int64_t, std::int64_t buf, std::int64_t len, std::int64_t,
                        std::int64_t, std::int64_t) {
  const Components& k = ctx_of(c).c;
  if (len <= 0 || len > UINT16_MAX) return -EINVAL;
  net::NetBuf* b = net::try_netbuf_alloc(*k.netbuf_alloc, static_cast<std::uint32_t>(len), 0);
  if (b == nullptr) return -ENOMEM;
  std::memcpy(b->data(), ptr<const void>(buf), static_cast<std::size_t>(len));
  b->set_len(static_cast<std::uint32_t>(len));
  std::uint16_t cnt = 1;
  try {
    k.netdev->tx_burst(k.qid, &b, cnt);
  } catch (const Error& e) {
    net::netbuf_free(b);
    return -to_errno(e.code());
  }
  if (cnt == 0) {
    net::netbuf_free(b);
    return -EAGAIN;
  }
  return len;
}

std::int64_t sys_recvfrom(void* c, std::int64_t, std::int64_t buf, std::int64_t len,
                          std::int64_t, std::int64_t, std::int64_t) {
  const Components& k = ctx_of(c).c;
  if (len < 0) return -EINVAL;
  net::NetBuf* b = nullptr;
  std::uint16_t cnt = 1;
  try {
    k.netdev->rx_burst(k.qid, &b, cnt);
  } catch (const Error& e) {
    return -to_errno(e.code());
  }
  if (cnt == 0) return -EAGAIN;
  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(len), b->data_len());
  std::memcpy(ptr<void>(buf), b->data(), n);
  net::netbuf_free(b);
  return static_cast<std::int64_t>(n);
}

}  // namespace

SyscallTable bind_default_table(const Components& c) {
  auto bound = std::make_shared<Bound>(Bound{c});
  if (bound->c.clock == nullptr) bound->c.clock = &plat::monotonic_ns;
  SyscallTable t;
  void* ctx = bound.get();
  t.register_handler(nr::clock_gettime, &sys_clock_gettime, ctx);
  if (c.vfs != nullptr) {
    t.register_handler(nr::read, &sys_read, ctx);
    t.register_handler(nr::write, &sys_write, ctx);
    t.register_handler(nr::open, &sys_open, ctx);
    t.register_handler(nr::close, &sys_close, ctx);
    t.register_handler(nr::stat, &sys_stat, ctx);
  }
  if (c.netdev != nullptr) {
    if (c.netbuf_alloc == nullptr) raise(Errc::invalid_argument, "netdev needs a netbuf allocator");
    t.register_handler(nr::sendto, &sys_sendto, ctx);
    t.register_handler(nr::recvfrom, &sys_recvfrom, ctx);
  }
  t.adopt(std::move(bound));
  return t;
}

}  // namespace uk::sys

// Entry point shared by the composed images. What gets compiled in, and so
// what the linker pulls out of the static libraries, is decided by the
// generated feature header alone.

#include <cstdio>
#include <cstring>
#include <string_view>

#include "uk_features.h"

#include "uk/plat.hpp"
#include "uk/syscall.hpp"

#if HAVE_UKBOOT && HAVE_UKALLOC
#include "uk/alloc.hpp"
#include "uk/boot.hpp"
#endif
#if HAVE_UKSCHED
#include "uk/sched.hpp"
#endif
#if HAVE_UKLOCK
#include "uk/lock.hpp"
#endif
#if HAVE_UKNETDEV
#include "uk/netdev.hpp"
#endif
#if HAVE_VFSCORE
#include "uk/vfs.hpp"
#endif

#include <fcntl.h>
#include <unistd.h>

namespace {

std::int64_t console_write(void*, std::int64_t fd, std::int64_t buf, std::int64_t len,
                           std::int64_t, std::int64_t, std::int64_t) {
  if (fd != 1 && fd != 2) return -EBADF;
  const ssize_t n = ::write(static_cast<int>(fd), reinterpret_cast<const void*>(buf),
                            static_cast<std::size_t>(len));
  return n < 0 ? -errno : n;
}

std::int64_t say(const uk::sys::SyscallTable& t, std::string_view s) {
  return t.dispatch(uk::sys::nr::write, 1, reinterpret_cast<std::int64_t>(s.data()),
                    static_cast<std::int64_t>(s.size()));
}

#if HAVE_UKNETDEV && HAVE_VFSCORE
// One request through the whole stack: the client sends a key over the
// loopback link, the server looks it up in the store and answers.
int netkv_main(uk::boot::BootEnv& env) {
  using namespace uk;
  auto vfs = std::make_shared<vfs::Vfs>();
  vfs->mount(std::make_shared<vfs::RamFs>(), "/");
#if HAVE_SHFS
  std::vector<vfs::ShfsImage::Input> files;
  const std::string_view v = "world";
  files.push_back({"hello", {reinterpret_cast<const std::byte*>(v.data()),
                             reinterpret_cast<const std::byte*>(v.data()) + v.size()}});
  vfs->mkdir("/static");
  vfs->mount(std::make_shared<vfs::ShfsFs>(
                 std::make_shared<const vfs::ShfsImage>(vfs::ShfsImage::build(files))),
             "/static");
#endif

  auto [client, server] = net::loopback_pair({1, CONFIG_UKNETDEV_MAX_BURST});
  for (auto* d : {client.get(), server.get()}) {
    d->configure(1, 1);
    d->queue_configure(net::Direction::tx, 0, CONFIG_UKNETDEV_QUEUE_CAPACITY, env.allocator);
    d->queue_configure(net::Direction::rx, 0, CONFIG_UKNETDEV_QUEUE_CAPACITY, env.allocator);
    d->start();
  }

  sys::SyscallTable ct = sys::bind_default_table({nullptr, client.get(), 0, &env.allocator, nullptr});
  sys::SyscallTable st = sys::bind_default_table({vfs.get(), server.get(), 0, &env.allocator, nullptr});
  char buf[64];
  int rc = 0;

  auto serve = [&] {
    const std::int64_t n = st.dispatch(sys::nr::recvfrom, 0, reinterpret_cast<std::int64_t>(buf), sizeof buf);
    if (n <= 0) {
      rc = 1;
      return;
    }
    std::string path = "/static/" + std::string(buf, static_cast<std::size_t>(n));
    const std::int64_t fd = st.dispatch(sys::nr::open, reinterpret_cast<std::int64_t>(path.c_str()),
                                        O_RDONLY);
    char val[64];
    std::int64_t len = 0;
    if (fd >= 0) {
      len = st.dispatch(sys::nr::read, fd, reinterpret_cast<std::int64_t>(val), sizeof val);
      st.dispatch(sys::nr::close, fd);
    }
    st.dispatch(sys::nr::sendto, 0, reinterpret_cast<std::int64_t>(val), len > 0 ? len : 1);
  };

#if HAVE_UKSCHED && HAVE_UKLOCK
  lock::Mutex<lock::Cooperative> mu(*env.scheduler);
  sched::Scheduler& s = *env.scheduler;
  bool sent = false;
  s.create([&] {
    std::lock_guard g(mu);
    while (!sent) s.yield();
    serve();
  });
  s.yield();
#endif
  const std::string_view key = "hello";
  ct.dispatch(sys::nr::sendto, 0, reinterpret_cast<std::int64_t>(key.data()),
              static_cast<std::int64_t>(key.size()));
#if HAVE_UKSCHED && HAVE_UKLOCK
  sent = true;
  s.yield();
  std::lock_guard g(mu);
#else
  serve();
#endif
  const std::int64_t n = ct.dispatch(sys::nr::recvfrom, 0, reinterpret_cast<std::int64_t>(buf), sizeof buf);
  if (rc != 0 || n <= 0) return 1;

  sys::SyscallTable console;
  console.register_handler(sys::nr::write, &console_write);
  say(console, "netkv: hello -> ");
  say(console, std::string_view(buf, static_cast<std::size_t>(n)));
  say(console, "\n");
  return 0;
}
#endif

}  // namespace

int main() {
#if HAVE_UKBOOT && HAVE_UKALLOC && HAVE_UKNETDEV && HAVE_VFSCORE
  uk::boot::BootConfig cfg;
  cfg.heap_bytes = CONFIG_UKALLOC_HEAP_BYTES;
  cfg.memory_strategy = *uk::plat::parse_memory_strategy(CONFIG_UKBOOT_MEMORY_STRATEGY);
  cfg.boot_allocator = *uk::alloc::parse_backend(CONFIG_UKBOOT_BOOT_ALLOCATOR);
  cfg.main_allocator = uk::alloc::parse_backend(CONFIG_UKALLOC_BACKEND);
#if HAVE_UKSCHED
  cfg.with_scheduler = true;
  cfg.scheduler_hooks = &uk::boot::cooperative_scheduler();
#endif
  cfg.main = netkv_main;
  const uk::boot::BootReport r = uk::boot::boot(cfg);
  std::printf("boot-to-main %.3f ms\n", static_cast<double>(r.total_to_main_ns) / 1e6);
  return r.main_result;
#else
  // Run to completion on the boot context: no allocator, no threads.
  const std::uint64_t t0 = uk::plat::process_entry_ns();
  uk::sys::SyscallTable t;
  t.register_handler(uk::sys::nr::write, &console_write);
  if (say(t, "Hello world!\n") < 0) return 1;
  std::printf("boot-to-main %.3f ms\n",
              static_cast<double>(uk::plat::monotonic_ns() - t0) / 1e6);
  return 0;
#endif
}

#include <fcntl.h>

#include <cstring>
#include <exception>
#include <functional>
#include <map>
#include <random>

#include "uk/bench.hpp"
#include "uk/error.hpp"
#include "uk/hash.hpp"
#include "uk/netdev.hpp"
#include "uk/plat.hpp"
#include "uk/syscall.hpp"

namespace uk::bench {

std::size_t encoded_size(const KvMessage& m) noexcept { return 4 + m.key.size() + m.value.size(); }

std::size_t encode_into(KvOp op, std::string_view key, std::string_view value,
                        std::span<std::byte> out) {
  if (key.empty() || key.size() > kMaxKey || value.size() > kMaxValue) {
    raise(Errc::invalid_argument, "kv field out of range");
  }
  const std::size_t n = 4 + key.size() + value.size();
  if (out.size() < n) raise(Errc::invalid_argument, "kv output buffer too small");
  std::byte* p = out.data();
  *p++ = static_cast<std::byte>(op);
  *p++ = static_cast<std::byte>(key.size());
  std::memcpy(p, key.data(), key.size());
  p += key.size();
  *p++ = static_cast<std::byte>(value.size() & 0xff);
  *p++ = static_cast<std::byte>(value.size() >> 8);
  std::memcpy(p, value.data(), value.size());
  return n;
}

void encode(const KvMessage& m, std::vector<std::byte>& out) {
  const std::size_t at = out.size();
  out.resize(at + encoded_size(m));
  encode_into(m.op, m.key, m.value, std::span(out).subspan(at));
}

std::optional<KvView> decode_view(std::span<const std::byte> in) noexcept {
  if (in.size() < 4) return std::nullopt;
  const auto op = static_cast<std::uint8_t>(in[0]);
  if (op > 1) return std::nullopt;
  const std::size_t klen = static_cast<std::uint8_t>(in[1]);
  if (klen == 0 || klen > kMaxKey || in.size() < 4 + klen) return std::nullopt;
  const std::size_t vlen = static_cast<std::size_t>(in[2 + klen]) |
                           (static_cast<std::size_t>(in[3 + klen]) << 8);
  if (vlen > kMaxValue || in.size() != 4 + klen + vlen) return std::nullopt;
  const char* base = reinterpret_cast<const char*>(in.data());
  return KvView{static_cast<KvOp>(op), {base + 2, klen}, {base + 4 + klen, vlen}};
}

std::optional<KvMessage> decode(std::span<const std::byte> in) {
  auto v = decode_view(in);
  if (!v) return std::nullopt;
  return KvMessage{v->op, std::string(v->key), std::string(v->value)};
}

std::string_view to_string(KvMode m) noexcept {
  return m == KvMode::layered ? "layered" : "specialized";
}

std::vector<std::vector<std::byte>> make_kv_requests(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::byte>> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    KvMessage m;
    // A fifth of the key space is never written, so some GETs miss.
    m.key = "key" + std::to_string(rng() % 1280);
    if (rng() % 10 < 4 && std::stoul(m.key.substr(3)) < 1024) {
      m.op = KvOp::set;
      m.value.resize(rng() % 129);
      for (char& c : m.value) c = static_cast<char>('a' + rng() % 26);
    }
    std::vector<std::byte> wire;
    encode(m, wire);
    if (rng() % 500 == 0) {
      switch (rng() % 3) {
        case 0: wire.pop_back(); break;                         // short
        case 1: wire[0] = std::byte{9}; break;                  // bad op
        default: wire.push_back(std::byte{0}); break;           // trailing byte
      }
      if (wire.empty()) wire.push_back(std::byte{0xff});
    }
    out.push_back(std::move(wire));
  }
  return out;
}

namespace {

constexpr std::uint16_t kWindow = 32;
constexpr std::uint32_t kRing = net::kDefaultQueueCapacity;
constexpr std::uint32_t kBufBytes = 4 + kMaxKey + kMaxValue;

// Open-addressed table keyed by FNV-1a; never shrinks.
class FlatStore {
 public:
  FlatStore() : slots_(4096) {}

  std::string_view get(std::string_view k) const {
    const Slot& s = slots_[probe(k)];
    return s.used ? std::string_view(s.value) : std::string_view();
  }
  void set(std::string_view k, std::string_view v) {
    Slot& s = slots_[probe(k)];
    if (!s.used) {
      if (++used_ * 2 > slots_.size()) {
        grow();
        return set(k, v);
      }
      s.used = true;
      s.key.assign(k);
    }
    s.value.assign(v);
  }

 private:
  struct Slot {
    bool used = false;
    std::string key;
    std::string value;
  };

  std::size_t probe(std::string_view k) const {
    const std::size_t mask = slots_.size() - 1;
    std::size_t i = fnv1a64(k) & mask;
    while (slots_[i].used && slots_[i].key != k) i = (i + 1) & mask;
    return i;
  }
  void grow() {
    std::vector<Slot> old = std::move(slots_);
    slots_.assign(old.size() * 2, {});
    used_ = 0;
    for (auto& s : old) {
      if (s.used) set(s.key, s.value);
    }
  }

  std::vector<Slot> slots_;
  std::size_t used_ = 0;
};

// Runs the client on one context and the server on another; they hand the
// CPU back and forth once per window of requests.
class PingPong {
 public:
  using Body = std::function<void(PingPong&)>;

  PingPong(Body client, Body server) : client_body_(std::move(client)), server_body_(std::move(server)) {
    client_ = plat::Context::make(256 * 1024, &PingPong::client_entry, this);
    server_ = plat::Context::make(256 * 1024, &PingPong::server_entry, this);
  }

  void run() {
    plat::switch_context(main_, *client_);
    if (error_) std::rethrow_exception(error_);
  }
  // Client side: let the server drain its ring, return when it is done.
  void serve() {
    plat::switch_context(*client_, *server_);
    if (error_) std::rethrow_exception(error_);
  }

 private:
  static void client_entry(void* arg) {
    auto* self = static_cast<PingPong*>(arg);
    try {
      self->client_body_(*self);
    } catch (...) {
      if (!self->error_) self->error_ = std::current_exception();
    }
    plat::switch_context(*self->client_, self->main_);
  }
  static void server_entry(void* arg) {
    auto* self = static_cast<PingPong*>(arg);
    try {
      for (;;) {
        self->server_body_(*self);
        plat::switch_context(*self->server_, *self->client_);
      }
    } catch (...) {
      self->error_ = std::current_exception();
    }
    // Back to the client, which sees error_ and unwinds normally.
    for (;;) plat::switch_context(*self->server_, *self->client_);
  }

  Body client_body_;
  Body server_body_;
  plat::Context main_;
  std::unique_ptr<plat::Context> client_;
  std::unique_ptr<plat::Context> server_;
  std::exception_ptr error_;
};

void start(net::NetDevice& d, alloc::Allocator& a) {
  d.configure(1, 1);
  d.queue_configure(net::Direction::tx, 0, kRing, a);
  d.queue_configure(net::Direction::rx, 0, kRing, a);
  d.start();
}

std::int64_t addr(const void* p) { return reinterpret_cast<std::int64_t>(p); }

// Socket-style path: every packet crosses the shim and gets its own buffer,
// and every SET is appended to a log file through the VFS.
KvRun run_layered(const std::vector<std::vector<std::byte>>& reqs, alloc::Allocator& a) {
  auto [cdev, sdev] = net::loopback_pair({1, kWindow});
  start(*cdev, a);
  start(*sdev, a);
  vfs::Vfs fs;
  fs.mount(std::make_shared<vfs::RamFs>(), "/");
  const sys::SyscallTable client = sys::bind_default_table({nullptr, cdev.get(), 0, &a, nullptr});
  const sys::SyscallTable server = sys::bind_default_table({&fs, sdev.get(), 0, &a, nullptr});
  const std::int64_t log =
      server.dispatch(sys::nr::open, addr("/kv.log"), O_WRONLY | O_CREAT | O_APPEND);
  if (log < 0) raise(Errc::io_error, "cannot open kv log");

  KvRun run;
  std::map<std::string, std::string> store;

  auto client_body = [&](PingPong& pp) {
    std::vector<std::byte> in(kBufBytes);
    for (std::size_t i = 0; i < reqs.size(); i += kWindow) {
      const std::size_t end = std::min(reqs.size(), i + kWindow);
      for (std::size_t j = i; j < end; ++j) {
        const auto& w = reqs[j];
        if (client.dispatch(sys::nr::sendto, 0, addr(w.data()), static_cast<std::int64_t>(w.size())) < 0) {
          raise(Errc::io_error, "client send failed");
        }
      }
      pp.serve();
      for (;;) {
        const std::int64_t n = client.dispatch(sys::nr::recvfrom, 0, addr(in.data()),
                                               static_cast<std::int64_t>(in.size()));
        if (n == -EAGAIN) break;
        if (n < 0) raise(Errc::io_error, "client receive failed");
        run.responses.insert(run.responses.end(), in.begin(), in.begin() + n);
      }
    }
  };

  auto server_body = [&](PingPong&) {
    std::vector<std::byte> in(kBufBytes + 1);
    std::vector<std::byte> out;
    for (;;) {
      const std::int64_t n = server.dispatch(sys::nr::recvfrom, 0, addr(in.data()),
                                             static_cast<std::int64_t>(in.size()));
      if (n == -EAGAIN) return;
      if (n < 0) raise(Errc::io_error, "server receive failed");
      std::optional<KvMessage> m = decode(std::span(in).first(static_cast<std::size_t>(n)));
      if (!m) {
        ++run.decode_errors;
        continue;
      }
      KvMessage reply{m->op, m->key, {}};
      if (m->op == KvOp::set) {
        if (server.dispatch(sys::nr::write, log, addr(in.data()), n) != n) {
          raise(Errc::io_error, "kv log write failed");
        }
        store[m->key] = std::move(m->value);
      } else if (auto it = store.find(m->key); it != store.end()) {
        reply.value = it->second;
      }
      out.clear();
      encode(reply, out);
      if (server.dispatch(sys::nr::sendto, 0, addr(out.data()), static_cast<std::int64_t>(out.size())) < 0) {
        raise(Errc::io_error, "server send failed");
      }
      ++run.served;
    }
  };

  PingPong pp(client_body, server_body);
  const std::uint64_t t0 = plat::monotonic_ns();
  pp.run();
  run.seconds = static_cast<double>(plat::monotonic_ns() - t0) / 1e9;
  server.dispatch(sys::nr::close, log);
  return run;
}

// Burst rx/tx in polling mode over a preallocated pool; replies are written
// into the request buffer and sent straight back.
KvRun run_specialized(const std::vector<std::vector<std::byte>>& reqs, alloc::Allocator& a) {
  auto [cdev, sdev] = net::loopback_pair({1, kWindow});
  start(*cdev, a);
  start(*sdev, a);
  net::NetBufPool pool(a, 2 * kRing, kBufBytes, 0);

  KvRun run;
  FlatStore store;

  auto client_body = [&](PingPong& pp) {
    net::NetBuf* bufs[kWindow];
    for (std::size_t i = 0; i < reqs.size(); i += kWindow) {
      const auto k = static_cast<std::uint16_t>(std::min<std::size_t>(kWindow, reqs.size() - i));
      for (std::uint16_t j = 0; j < k; ++j) {
        bufs[j] = pool.alloc();
        bufs[j]->assign(reqs[i + j]);
      }
      std::uint16_t cnt = k;
      cdev->tx_burst(0, bufs, cnt);
      if (cnt != k) raise(Errc::io_error, "client ring full");
      pp.serve();
      for (;;) {
        cnt = kWindow;
        cdev->rx_burst(0, bufs, cnt);
        for (std::uint16_t j = 0; j < cnt; ++j) {
          const auto p = bufs[j]->payload();
          run.responses.insert(run.responses.end(), p.begin(), p.end());
          net::netbuf_free(bufs[j]);
        }
        if (cnt < kWindow) break;
      }
    }
  };

  auto server_body = [&](PingPong&) {
    net::NetBuf* bufs[kWindow];
    net::NetBuf* replies[kWindow];
    for (;;) {
      std::uint16_t cnt = kWindow;
      const net::BurstStatus st = sdev->rx_burst(0, bufs, cnt);
      std::uint16_t r = 0;
      for (std::uint16_t j = 0; j < cnt; ++j) {
        net::NetBuf* b = bufs[j];
        const auto v = decode_view(b->payload());
        if (!v) {
          ++run.decode_errors;
          net::netbuf_free(b);
          continue;
        }
        std::string_view value;
        if (v->op == KvOp::set) {
          store.set(v->key, v->value);
        } else {
          value = store.get(v->key);
        }
        // The key moves to the same spot it already occupies; only the
        // value field changes.
        const std::uint32_t n = static_cast<std::uint32_t>(4 + v->key.size() + value.size());
        std::byte* p = b->data();
        const std::size_t kl = v->key.size();
        p[2 + kl] = static_cast<std::byte>(value.size() & 0xff);
        p[3 + kl] = static_cast<std::byte>(value.size() >> 8);
        if (!value.empty()) std::memcpy(p + 4 + kl, value.data(), value.size());
        b->set_len(n);
        replies[r++] = b;
        ++run.served;
      }
      std::uint16_t sent = r;
      sdev->tx_burst(0, replies, sent);
      if (sent != r) raise(Errc::io_error, "server ring full");
      if (cnt < kWindow || st.empty()) return;
    }
  };

  PingPong pp(client_body, server_body);
  const std::uint64_t t0 = plat::monotonic_ns();
  pp.run();
  run.seconds = static_cast<double>(plat::monotonic_ns() - t0) / 1e9;
  return run;
}

struct Heap {
  plat::MemoryRegion region = plat::provision_heap(plat::MemoryStrategy::prereserved, 64u << 20);
  std::unique_ptr<alloc::Allocator> a = alloc::make_backend(alloc::BackendKind::tlsf, region.bytes());
};

}  // namespace

KvRun kv_demo(KvMode mode, const std::vector<std::vector<std::byte>>& requests) {
  Heap h;
  return mode == KvMode::layered ? run_layered(requests, *h.a) : run_specialized(requests, *h.a);
}

KvComparison bench_kv(std::size_t requests, Repeat r, std::uint64_t seed) {
  if (requests == 0) raise(Errc::bad_params, "zero requests");
  if (r.reps <= 0 || r.warmup < 0) raise(Errc::bad_params, "bad repetition count");
  const auto reqs = make_kv_requests(requests, seed);

  Heap h;
  const KvRun a = run_layered(reqs, *h.a);
  const KvRun b = run_specialized(reqs, *h.a);
  if (a.responses != b.responses || a.decode_errors != b.decode_errors) {
    raise(Errc::not_equivalent, "layered and specialized responses differ");
  }

  std::vector<double> slow, fast;
  for (int rep = 0; rep < r.warmup + r.reps; ++rep) {
    const KvRun x = run_layered(reqs, *h.a);
    const KvRun y = run_specialized(reqs, *h.a);
    if (rep < r.warmup) continue;
    slow.push_back(static_cast<double>(requests) / x.seconds);
    fast.push_back(static_cast<double>(requests) / y.seconds);
  }
  std::map<std::string, std::string> params{{"requests", std::to_string(requests)},
                                            {"window", std::to_string(kWindow)}};
  KvComparison c;
  c.layered = make_result("kv-layered", params, "ops_per_s", std::move(slow));
  c.specialized = make_result("kv-specialized", params, "ops_per_s", std::move(fast));
  c.decode_errors = a.decode_errors;
  return c;
}

}  // namespace uk::bench

#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <random>
#include <vector>

#include "support/interval_oracle.hpp"
#include "uk/alloc.hpp"
#include "uk/alloc_backends.hpp"
#include "uk/error.hpp"
#include "uk/plat.hpp"

using namespace uk;
using namespace uk::alloc;

namespace {

constexpr std::size_t kMiB = std::size_t{1} << 20;

plat::MemoryRegion heap(std::size_t bytes) {
  return plat::provision_heap(plat::MemoryStrategy::on_demand, bytes);
}

InitOptions debug_opts() {
  InitOptions o;
  o.debug_checks = true;
  return o;
}

template <class Fn>
Errc error_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected uk::Error");
  return Errc::invalid_argument;
}

std::size_t offset_of(const Allocator& a, const void* p) {
  return static_cast<std::size_t>(static_cast<const std::byte*>(p) - a.heap().data());
}

// Brute-force TLSF class table built straight from the class-bound formula.
struct ClassBound {
  std::size_t lower;
  unsigned fl;
  unsigned sl;
};

std::vector<ClassBound> enumerate_classes() {
  std::vector<ClassBound> out;
  for (unsigned fl = 4; fl <= 30; ++fl) {
    for (unsigned sl = 0; sl < 16; ++sl) {
      out.push_back({(std::size_t{1} << fl) + sl * (std::size_t{1} << (fl - 4)), fl, sl});
    }
  }
  std::sort(out.begin(), out.end(), [](auto& a, auto& b) { return a.lower < b.lower; });
  return out;
}

}  // namespace

TEST_CASE("alloc_init examples") {
  auto mem = heap(4 * kMiB);
  Registry reg;

  SUBCASE("region reports the whole heap minus one header") {
    Allocator& a = reg.init(BackendKind::region, mem.bytes(), 0, kMiB);
    CHECK(a.available_bytes() == kMiB - RegionAllocator::kHeaderBytes);
    CHECK(a.stats().init_ns > 0);
  }
  SUBCASE("buddy over 2^20 with 32-byte granules has 16 orders") {
    Allocator& a = reg.init(BackendKind::buddy, mem.bytes(), 0, kMiB);
    auto& b = dynamic_cast<BuddyAllocator&>(a);
    CHECK(b.min_block() == 32);
    CHECK(b.order_count() == 16);
    CHECK(b.block_size(15) == kMiB);
    CHECK(b.free_block_count() == 1);
  }
  SUBCASE("buddy below one granule is too small") {
    CHECK(error_of([&] { reg.init(BackendKind::buddy, mem.bytes(), 0, 16); }) ==
          Errc::region_too_small);
  }
  SUBCASE("every backend rejects a tiny heap") {
    for (BackendKind k : kAllBackends) {
      CHECK(error_of([&] { reg.init(k, mem.bytes(), 0, 8); }) == Errc::region_too_small);
    }
    CHECK(reg.size() == 0);
  }
  SUBCASE("overlapping regions are refused") {
    reg.init(BackendKind::tlsf, mem.bytes(), 0, kMiB);
    CHECK(error_of([&] { reg.init(BackendKind::region, mem.bytes(), kMiB - 4096, kMiB); }) ==
          Errc::region_overlap);
    CHECK_NOTHROW(reg.init(BackendKind::region, mem.bytes(), kMiB, kMiB));
    CHECK(reg.size() == 2);
  }
  SUBCASE("range must lie inside the memory region") {
    CHECK(error_of([&] { reg.init(BackendKind::region, mem.bytes(), 3 * kMiB, 2 * kMiB); }) ==
          Errc::invalid_argument);
  }
}

TEST_CASE("allocate examples") {
  auto mem = heap(2 * kMiB);
  Registry reg;

  SUBCASE("buddy rounds 100 bytes up to a 128-byte block") {
    Allocator& a = reg.init(BackendKind::buddy, mem.bytes(), 0, kMiB);
    void* p = a.allocate(100);
    REQUIRE(p != nullptr);
    CHECK(a.usable_size(p) == 128);
    CHECK(offset_of(a, p) % 128 == 0);
  }
  SUBCASE("tlsf files a 460-byte block under (8, 12)") {
    CHECK(TlsfAllocator::class_of(460) == TlsfAllocator::Class{8, 12});
    // A 460-byte request needs a class whose lower bound is >= 464.
    CHECK(TlsfAllocator::search_class(460) == TlsfAllocator::Class{8, 13});
  }
  SUBCASE("region cannot serve a second heap-sized block") {
    Allocator& a = reg.init(BackendKind::region, mem.bytes(), 0, kMiB);
    REQUIRE(a.allocate(64) != nullptr);
    CHECK(a.allocate(kMiB) == nullptr);
  }
  SUBCASE("zero-byte requests are contract violations") {
    Allocator& a = reg.init(BackendKind::tlsf, mem.bytes(), 0, kMiB);
    CHECK(error_of([&] { a.allocate(0); }) == Errc::invalid_argument);
  }
  SUBCASE("every block is 16-byte aligned and usable >= request") {
    for (BackendKind k : kAllBackends) {
      Registry r;
      Allocator& a = r.init(k, mem.bytes(), 0, kMiB);
      for (std::size_t n : {1, 15, 16, 17, 100, 1000, 4097}) {
        void* p = a.allocate(n);
        REQUIRE(p != nullptr);
        CHECK(reinterpret_cast<std::uintptr_t>(p) % kMinAlign == 0);
        CHECK(a.usable_size(p) >= n);
      }
    }
  }
}

TEST_CASE("tlsf class mapping matches the enumerated class table for 1..2^20") {
  const auto classes = enumerate_classes();
  std::size_t idx = 0;
  for (std::size_t s = 1; s <= kMiB; ++s) {
    const std::size_t eff = std::max<std::size_t>(s, 16);
    while (idx + 1 < classes.size() && classes[idx + 1].lower <= eff) ++idx;
    const auto got = TlsfAllocator::class_of(s);
    if (got.fl != classes[idx].fl || got.sl != classes[idx].sl) {
      FAIL("size " << s << " mapped to (" << got.fl << "," << got.sl << ") expected ("
                   << classes[idx].fl << "," << classes[idx].sl << ")");
    }
  }
  CHECK(idx > 0);
}

TEST_CASE("allocate_aligned examples") {
  auto mem = heap(2 * kMiB);
  for (BackendKind k : kAllBackends) {
    CAPTURE(to_string(k));
    Registry reg;
    Allocator& a = reg.init(k, mem.bytes(), 0, kMiB);
    a.allocate(48);  // push the cursor off any natural boundary
    void* p = a.allocate_aligned(4096, 100);
    REQUIRE(p != nullptr);
    CHECK(offset_of(a, p) % 4096 == 0);
    CHECK(reinterpret_cast<std::uintptr_t>(p) % 4096 == 0);
    CHECK(a.usable_size(p) >= 100);
    CHECK(error_of([&] { a.allocate_aligned(48, 8); }) == Errc::invalid_alignment);
    CHECK(error_of([&] { a.allocate_aligned(8, 8); }) == Errc::invalid_alignment);
    for (std::size_t align : {32, 64, 256, 8192, 65536}) {
      void* q = a.allocate_aligned(align, 24);
      REQUIRE(q != nullptr);
      CHECK(reinterpret_cast<std::uintptr_t>(q) % align == 0);
      a.release(q);
    }
    a.release(p);
  }

  SUBCASE("buddy serves 4096/4096 with a naturally aligned 4096 block") {
    Registry reg;
    auto& b = dynamic_cast<BuddyAllocator&>(reg.init(BackendKind::buddy, mem.bytes(), 0, kMiB));
    void* p = b.allocate_aligned(4096, 4096);
    REQUIRE(p != nullptr);
    CHECK(b.usable_size(p) == 4096);
    CHECK(offset_of(b, p) % 4096 == 0);
  }
}

TEST_CASE("release examples") {
  auto mem = heap(2 * kMiB);

  SUBCASE("buddy coalesces back to one heap-sized block") {
    Registry reg;
    auto& b = dynamic_cast<BuddyAllocator&>(reg.init(BackendKind::buddy, mem.bytes(), 0, kMiB));
    std::vector<void*> blocks;
    std::mt19937 rng(7);
    while (void* p = b.allocate(32u << (rng() % 6))) blocks.push_back(p);
    CHECK(b.available_bytes() < 32u << 5);
    std::shuffle(blocks.begin(), blocks.end(), rng);
    for (void* p : blocks) b.release(p);
    const auto free = b.free_blocks();
    REQUIRE(free.size() == 1);
    CHECK(free[0].offset == 0);
    CHECK(b.block_size(free[0].order) == kMiB);
  }
  SUBCASE("region release leaves the memory in place") {
    Registry reg;
    Allocator& a = reg.init(BackendKind::region, mem.bytes(), 0, kMiB);
    void* p = a.allocate(256);
    a.release(p);
    void* q = a.allocate(256);
    CHECK(q > p);
  }
  SUBCASE("tlsf release files the block under the class its size maps to") {
    Registry reg;
    auto& t = dynamic_cast<TlsfAllocator&>(reg.init(BackendKind::tlsf, mem.bytes(), 0, kMiB));
    std::vector<void*> keep;
    for (std::size_t n : {460, 1000, 48, 3000, 130, 64}) keep.push_back(t.allocate(n));
    // Release every other block so neighbours stay in use and nothing merges.
    for (std::size_t i = 0; i + 1 < keep.size(); i += 2) {
      const std::size_t size = t.usable_size(keep[i]);
      t.release(keep[i]);
      // Oracle: recompute the class from the block size.
      const unsigned fl = static_cast<unsigned>(std::bit_width(size)) - 1;
      const unsigned sl = static_cast<unsigned>((size - (std::size_t{1} << fl)) >> (fl - 4));
      CHECK(t.bitmap_bit({fl, sl}));
      CHECK(t.list_length({fl, sl}) >= 1);
    }
    CHECK(t.check_consistency());
  }
  SUBCASE("releasing null is a no-op") {
    Registry reg;
    Allocator& a = reg.init(BackendKind::tinyfree, mem.bytes(), 0, kMiB);
    a.release(nullptr);
    CHECK(a.stats().free_count == 0);
  }
}

TEST_CASE("debug configuration detects double and foreign releases") {
  auto mem = heap(2 * kMiB);
  for (BackendKind k : kAllBackends) {
    CAPTURE(to_string(k));
    Registry reg;
    Allocator& a = reg.init(k, mem.bytes(), 0, kMiB, debug_opts());
    Allocator& other = reg.init(BackendKind::tlsf, mem.bytes(), kMiB, kMiB, debug_opts());
    void* p = a.allocate(64);
    void* keep = a.allocate(64);
    a.release(p);
    CHECK(error_of([&] { a.release(p); }) == Errc::double_release);
    void* q = other.allocate(64);
    CHECK(error_of([&] { a.release(q); }) == Errc::foreign_block);
    CHECK(error_of([&] { a.release(static_cast<std::byte*>(keep) + 16); }) ==
          Errc::foreign_block);
    CHECK(a.stats().free_count == 1);
  }
}

TEST_CASE("reallocate examples") {
  auto mem = heap(2 * kMiB);
  for (BackendKind k : kAllBackends) {
    CAPTURE(to_string(k));
    Registry reg;
    Allocator& a = reg.init(k, mem.bytes(), 0, kMiB);

    void* p = a.allocate(64);
    CHECK(a.reallocate(p, a.usable_size(p)) == p);

    void* fresh = a.reallocate(nullptr, 64);
    REQUIRE(fresh != nullptr);
    CHECK(a.usable_size(fresh) >= 64);

    auto* bytes = static_cast<unsigned char*>(p);
    for (int i = 0; i < 64; ++i) bytes[i] = static_cast<unsigned char>(i * 7 + 3);
    a.allocate(32);  // block growth in place where possible
    void* grown = a.reallocate(p, 256);
    REQUIRE(grown != nullptr);
    CHECK(a.usable_size(grown) >= 256);
    const auto* g = static_cast<const unsigned char*>(grown);
    for (int i = 0; i < 64; ++i) {
      if (g[i] != static_cast<unsigned char>(i * 7 + 3)) FAIL("byte " << i << " lost");
    }

    // Failure leaves the original live.
    CHECK(a.reallocate(grown, 4 * kMiB) == nullptr);
    CHECK(g[0] == 3);
    CHECK(a.reallocate(grown, 0) == nullptr);
  }
}

TEST_CASE("default allocator routing") {
  auto mem = heap(2 * kMiB);
  Registry reg;
  CHECK(error_of([&] { reg.default_allocator(); }) == Errc::not_registered);
  Allocator& first = reg.init(BackendKind::tlsf, mem.bytes(), 0, kMiB);
  Allocator& second = reg.init(BackendKind::region, mem.bytes(), kMiB, kMiB);
  CHECK(&reg.default_allocator() == &first);
  reg.set_default(second);
  CHECK(&reg.default_allocator() == &second);
  void* p = reg.malloc(100);
  CHECK(second.owns(p));
  reg.free(p);
  CHECK(second.stats().free_count == 1);

  Registry other;
  auto mem2 = heap(kMiB);
  Allocator& stranger = other.init(BackendKind::region, mem2.bytes(), 0, kMiB);
  CHECK(error_of([&] { reg.set_default(stranger); }) == Errc::not_registered);
}

TEST_CASE("calloc zero-fills and detects overflow") {
  auto mem = heap(kMiB);
  Registry reg;
  Allocator& a = reg.init(BackendKind::tinyfree, mem.bytes(), 0, kMiB);
  auto* p = static_cast<unsigned char*>(a.allocate(512));
  std::memset(p, 0xab, 512);
  a.release(p);
  auto* z = static_cast<unsigned char*>(a.allocate_zeroed(16, 32));
  REQUIRE(z != nullptr);
  CHECK(std::all_of(z, z + 512, [](unsigned char c) { return c == 0; }));
  CHECK(a.allocate_zeroed(SIZE_MAX / 2, 4) == nullptr);
}

TEST_CASE("randomized operations keep blocks disjoint, aligned and accounted") {
  auto mem = heap(8 * kMiB);
  for (BackendKind k : kAllBackends) {
    CAPTURE(to_string(k));
    Registry reg;
    Allocator& a = reg.init(k, mem.bytes(), 0, 4 * kMiB, debug_opts());
    test::IntervalOracle oracle(a.heap().data(), a.heap().size());
    std::mt19937_64 rng(1234);
    std::vector<void*> live;
    std::size_t empty_checkpoints = 0;
    std::uint64_t usable_sum = 0;

    for (int op = 0; op < 20000; ++op) {
      const auto r = rng() % 10;
      if (r < 5 || live.empty()) {
        const std::size_t n = 1 + rng() % (r == 0 ? 16384 : 512);
        void* p = (r == 1) ? a.allocate_aligned(std::size_t{16} << (rng() % 8), n) : a.allocate(n);
        if (p == nullptr) continue;
        const std::size_t u = a.usable_size(p);
        REQUIRE(u >= n);
        REQUIRE(reinterpret_cast<std::uintptr_t>(p) % kMinAlign == 0);
        const auto why = oracle.add(p, u);
        if (!why.empty()) FAIL(why);
        usable_sum += u;
        live.push_back(p);
      } else if (r < 9) {
        const std::size_t i = rng() % live.size();
        usable_sum -= a.usable_size(live[i]);
        REQUIRE(oracle.remove(live[i]).empty());
        a.release(live[i]);
        live[i] = live.back();
        live.pop_back();
      } else {
        const std::size_t i = rng() % live.size();
        const std::size_t n = 1 + rng() % 2048;
        const std::size_t old = a.usable_size(live[i]);
        void* p = a.reallocate(live[i], n);
        if (p == nullptr) continue;
        REQUIRE(oracle.remove(live[i]).empty());
        const std::size_t u = a.usable_size(p);
        const auto why = oracle.add(p, u);
        if (!why.empty()) FAIL(why);
        usable_sum = usable_sum - old + u;
        live[i] = p;
      }
      REQUIRE(a.stats().bytes_in_use == usable_sum);
      REQUIRE(a.stats().peak_bytes >= a.stats().bytes_in_use);

      if (op % 5000 == 4999) {
        for (void* p : live) {
          REQUIRE(oracle.remove(p).empty());
          a.release(p);
        }
        live.clear();
        usable_sum = 0;
        ++empty_checkpoints;
        if (k == BackendKind::buddy) {
          auto& b = dynamic_cast<BuddyAllocator&>(a);
          const auto free = b.free_blocks();
          REQUIRE(free.size() == 1);
          CHECK(b.block_size(free[0].order) == b.heap().size());
        }
        if (k == BackendKind::tinyfree) {
          CHECK(dynamic_cast<TinyFreeAllocator&>(a).free_block_count() == 1);
        }
      }
      if (k == BackendKind::tinyfree && op % 97 == 0) {
        REQUIRE(dynamic_cast<TinyFreeAllocator&>(a).check_list());
      }
    }
    CHECK(empty_checkpoints > 0);
  }
}

TEST_CASE("tlsf good-fit, bounded search and bitmap consistency") {
  auto mem = heap(8 * kMiB);
  Registry reg;
  auto& t = dynamic_cast<TlsfAllocator&>(reg.init(BackendKind::tlsf, mem.bytes(), 0, 8 * kMiB));
  const auto classes = enumerate_classes();
  std::mt19937 rng(99);
  std::vector<void*> live;

  for (int op = 0; op < 3000; ++op) {
    if (live.empty() || rng() % 3 != 0) {
      const std::size_t n = 1 + (rng() % 2 ? rng() % 256 : rng() % 20000);
      // Oracle: smallest non-empty class whose lower bound >= rounded request.
      const std::size_t rounded = std::max<std::size_t>(16, (n + 15) & ~std::size_t{15});
      const ClassBound* expect = nullptr;
      for (const auto& c : classes) {
        if (c.lower >= rounded && t.list_length({c.fl, c.sl}) > 0) {
          expect = &c;
          break;
        }
      }
      void* p = t.allocate(n);
      if (expect == nullptr) {
        CHECK(p == nullptr);
        continue;
      }
      REQUIRE(p != nullptr);
      REQUIRE(t.last_serviced_class().has_value());
      CHECK(t.last_serviced_class()->fl == expect->fl);
      CHECK(t.last_serviced_class()->sl == expect->sl);
      const auto probe = t.last_probe();
      CHECK(probe.fl_lookups <= 2);
      CHECK(probe.sl_lookups <= 2);
      CHECK(probe.list_removals == 1);
      live.push_back(p);
    } else {
      const std::size_t i = rng() % live.size();
      t.release(live[i]);
      live[i] = live.back();
      live.pop_back();
    }
    REQUIRE(t.check_consistency());
  }
}

TEST_CASE("region cursor is monotonic and sealing stops allocation") {
  auto mem = heap(kMiB);
  Registry reg;
  auto& r = dynamic_cast<RegionAllocator&>(reg.init(BackendKind::region, mem.bytes(), 0, kMiB));
  std::size_t last = r.cursor();
  std::mt19937 rng(5);
  for (int i = 0; i < 200; ++i) {
    void* p = (i % 3 == 0) ? r.allocate_aligned(64, 1 + rng() % 300) : r.allocate(1 + rng() % 300);
    if (i % 2 == 0 && p != nullptr) r.release(p);
    CHECK(r.cursor() >= last);
    last = r.cursor();
  }
  const std::size_t extent = r.seal();
  CHECK(extent == last);
  CHECK(r.allocate(16) == nullptr);
  CHECK(r.available_bytes() == 0);

  Registry reg2;
  Allocator& t = reg2.init(BackendKind::tlsf, mem.bytes(), 0, kMiB);
  CHECK(error_of([&] { t.seal(); }) == Errc::not_supported);
}

TEST_CASE("two handles over disjoint regions never cross") {
  auto mem = heap(4 * kMiB);
  Registry reg;
  Allocator& a = reg.init(BackendKind::buddy, mem.bytes(), 0, 2 * kMiB);
  Allocator& b = reg.init(BackendKind::tlsf, mem.bytes(), 2 * kMiB, 2 * kMiB);
  std::mt19937 rng(3);
  std::vector<std::pair<Allocator*, void*>> live;
  for (int i = 0; i < 5000; ++i) {
    Allocator& h = (i % 2 == 0) ? a : b;
    if (rng() % 3 == 0 && !live.empty()) {
      auto [owner, p] = live.back();
      live.pop_back();
      CHECK(reg.owner_of(p) == owner);
      reg.free(p);
      continue;
    }
    void* p = h.allocate(1 + rng() % 1024);
    if (p == nullptr) continue;
    CHECK(h.owns(p));
    CHECK(!(&h == &a ? b : a).owns(p));
    live.emplace_back(&h, p);
  }
}

TEST_CASE("stats dump carries every counter") {
  auto mem = heap(kMiB);
  Registry reg;
  Allocator& a = reg.init(BackendKind::tinyfree, mem.bytes(), 0, kMiB);
  a.release(a.allocate(10));
  a.allocate(100);
  const std::string js = stats_json(a);
  CHECK(js.find("\"backend\":\"tinyfree\"") != std::string::npos);
  CHECK(js.find("\"alloc_count\":2") != std::string::npos);
  CHECK(js.find("\"free_count\":1") != std::string::npos);
  CHECK(js.find("\"bytes_in_use\":112") != std::string::npos);
  CHECK(js.find("\"heap_len\":1048576") != std::string::npos);
  CHECK(js.find("\"init_ns\"") != std::string::npos);
  CHECK(js.find("\"peak_bytes\":112") != std::string::npos);
}

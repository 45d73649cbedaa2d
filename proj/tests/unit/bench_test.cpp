#include <doctest.h>

#include <cstring>
#include <map>
#include <random>
#include <sstream>

#include <json.hpp>

#include "support/corpus.hpp"
#include "uk/bench.hpp"

using namespace uk;
using namespace uk::bench;

namespace {

template <class F>
Errc code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return Errc::invalid_argument;
}

std::vector<std::byte> bytes(std::string_view s) {
  return {reinterpret_cast<const std::byte*>(s.data()),
          reinterpret_cast<const std::byte*>(s.data()) + s.size()};
}

}  // namespace

TEST_CASE("quantiles interpolate between ranks") {
  CHECK(quantile({4, 1, 3, 2}, 0.5) == doctest::Approx(2.5));
  CHECK(quantile({4, 1, 3, 2}, 0.1) == doctest::Approx(1.3));
  CHECK(quantile({4, 1, 3, 2}, 0.9) == doctest::Approx(3.7));
  CHECK(quantile({7}, 0.9) == 7);
  CHECK(quantile({1, 2, 3}, 0.0) == 1);
  CHECK(quantile({1, 2, 3}, 1.0) == 3);
  CHECK(code_of([] { make_result("x", {}, "ns", {}); }) == Errc::bad_params);
}

TEST_CASE("csv and json carry raw samples that reproduce the summary") {
  auto r = make_result("demo", {{"b", "2"}, {"a", "1"}}, "ns", {5, 1, 4, 2, 3});
  const std::string csv = to_csv({r});
  std::istringstream in(csv);
  std::string header, line;
  std::getline(in, header);
  std::getline(in, line);
  CHECK(header == "name,params,median_ns,p10_ns,p90_ns,samples");
  std::vector<std::string> cols;
  std::stringstream ls(line);
  for (std::string c; std::getline(ls, c, ',');) cols.push_back(c);
  REQUIRE(cols.size() == 6);
  CHECK(cols[0] == "demo");
  CHECK(cols[1] == "a=1;b=2;unit=ns");
  std::vector<double> raw;
  std::istringstream ss(cols[5]);
  for (double v; ss >> v;) raw.push_back(v);
  CHECK(raw == std::vector<double>{5, 1, 4, 2, 3});
  CHECK(std::stod(cols[2]) == quantile(raw, 0.5));
  CHECK(std::stod(cols[3]) == doctest::Approx(quantile(raw, 0.1)));

  auto j = nlohmann::json::parse(to_json({r}));
  CHECK(j.at(0).at("median") == 3);
  CHECK(j.at(0).at("samples").size() == 5);
}

TEST_CASE("alloc-init: parameters and ordering") {
  CHECK(code_of([] { bench_alloc_init({alloc::BackendKind::region}, 1 << 20, {0, 0}); }) ==
        Errc::bad_params);
  auto one = bench_alloc_init({alloc::BackendKind::tlsf}, 8 << 20, {3, 1});
  REQUIRE(one.size() == 1);
  CHECK(one[0].samples.size() == 3);
  CHECK(one[0].params.at("backend") == "tlsf");

  auto both = bench_alloc_init({alloc::BackendKind::region, alloc::BackendKind::buddy}, 64 << 20, {5, 1});
  CHECK(both[0].summary().median < both[1].summary().median);
}

TEST_CASE("alloc-work: every backend survives churn under the oracle") {
  WorkloadOptions o;
  o.ops = 100000;
  o.heap_bytes = 64 << 20;
  o.check_disjoint = true;
  for (auto k : alloc::kAllBackends) {
    BenchResult r = bench_alloc_workload(k, Pattern::churn, o, {1, 0});
    CHECK(r.samples.size() == 1);
    CHECK(r.samples[0] > 0);
    if (k == alloc::BackendKind::region) {
      // No reuse: the cursor runs out and the failure is recorded.
      REQUIRE(r.failures.size() == 1);
      CHECK(r.failures[0].find("out_of_memory") == 0);
    } else {
      CHECK(r.failures.empty());
    }
  }
  CHECK(code_of([&] {
          WorkloadOptions z = o;
          z.ops = 0;
          bench_alloc_workload(alloc::BackendKind::tlsf, Pattern::ramp, z);
        }) == Errc::bad_params);
  CHECK(parse_pattern("mixed") == Pattern::mixed);
  CHECK(!parse_pattern("zigzag"));
}

TEST_CASE("alloc-work: no fixed winner between tlsf and tinyfree") {
  WorkloadOptions o;
  o.ops = 40000;
  o.heap_bytes = 64 << 20;
  auto med = [&](alloc::BackendKind k, Pattern p) {
    return bench_alloc_workload(k, p, o, {3, 1}).summary().median;
  };
  const double ramp_tlsf = med(alloc::BackendKind::tlsf, Pattern::ramp);
  const double ramp_tiny = med(alloc::BackendKind::tinyfree, Pattern::ramp);
  const double mixed_tlsf = med(alloc::BackendKind::tlsf, Pattern::mixed);
  const double mixed_tiny = med(alloc::BackendKind::tinyfree, Pattern::mixed);
  // Tiny free lists win on a pure grow-then-free ramp; their linear search
  // collapses once the heap fragments.
  CHECK(ramp_tiny > ramp_tlsf);
  CHECK(mixed_tlsf > mixed_tiny);
}

TEST_CASE("net-batch: parameters, capped bursts") {
  CHECK(code_of([] { bench_net_batch({1}, 0); }) == Errc::bad_params);
  CHECK(code_of([] { bench_net_batch({0}, 10); }) == Errc::bad_params);
  // More than the ring holds: the count contract caps each burst.
  auto r = bench_net_batch({1, 512}, 20, {2, 0});
  REQUIRE(r.size() == 2);
  CHECK(r[1].params.at("batch") == "512");
  CHECK(r[0].summary().median > 0);
  CHECK(r[1].summary().median > 0);
}

TEST_CASE("dispatch: three positive per-call costs") {
  auto d = bench_dispatch(100000, {3, 1});
  CHECK(d.direct_call.summary().median > 0);
  CHECK(d.shim_dispatch.summary().median > 0);
  CHECK(d.host_trap.summary().median > d.shim_dispatch.summary().median);
  CHECK(code_of([] { bench_dispatch(0); }) == Errc::bad_params);
}

TEST_CASE("fs-open: verdicts match a linear scan") {
  const auto corpus = test::make_corpus(500, 3, 64);
  const auto queries = test::make_queries(corpus, 4000, 4);
  auto r = bench_fs_open(corpus, queries, {2, 0});
  REQUIRE(r.found.size() == queries.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const bool want = test::linear_find(corpus, queries[i]) != nullptr;
    CHECK(r.found[i] == want);
    hits += want;
  }
  CHECK(hits > 1000);
  CHECK(hits < 3000);
  CHECK(code_of([] { bench_fs_open({}, {"x"}); }) == Errc::bad_params);

  // The harness's own query mix alternates hit and miss.
  const auto own = make_corpus(100, 1);
  const auto q = make_queries(own, 10, 2);
  auto r2 = bench_fs_open(own, q, {1, 0});
  for (std::size_t i = 0; i < q.size(); ++i) CHECK(r2.found[i] == (i % 2 == 0));
}

TEST_CASE("kv codec round trip and rejection") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 2000; ++i) {
    KvMessage m;
    m.op = rng() % 2 ? KvOp::set : KvOp::get;
    m.key.resize(1 + rng() % kMaxKey);
    for (char& c : m.key) c = static_cast<char>(rng());
    m.value.resize(rng() % (kMaxValue + 1));
    for (char& c : m.value) c = static_cast<char>(rng());
    std::vector<std::byte> w;
    encode(m, w);
    CHECK(w.size() == encoded_size(m));
    CHECK(w[0] == static_cast<std::byte>(m.op));
    CHECK(static_cast<std::size_t>(w[1]) == m.key.size());
    CHECK((static_cast<std::size_t>(w[2 + m.key.size()]) | static_cast<std::size_t>(w[3 + m.key.size()]) << 8) ==
          m.value.size());
    auto d = decode(w);
    REQUIRE(d);
    CHECK(*d == m);
  }
  // Hand-built bytes: GET "k" with empty value.
  CHECK(decode(std::vector<std::byte>{std::byte{0}, std::byte{1}, std::byte{'k'}, std::byte{0}, std::byte{0}})
            ->key == "k");
  CHECK(!decode(bytes("")));
  CHECK(!decode(std::vector<std::byte>{std::byte{2}, std::byte{1}, std::byte{'k'}, std::byte{0}, std::byte{0}}));
  CHECK(!decode(std::vector<std::byte>{std::byte{0}, std::byte{0}, std::byte{0}, std::byte{0}}));
  CHECK(!decode(std::vector<std::byte>{std::byte{0}, std::byte{1}, std::byte{'k'}, std::byte{1}, std::byte{0}}));
  CHECK(!decode(std::vector<std::byte>{std::byte{0}, std::byte{1}, std::byte{'k'}, std::byte{0}, std::byte{0},
                                       std::byte{0}}));
  std::vector<std::byte> big;
  CHECK(code_of([&] { encode({KvOp::set, std::string(65, 'k'), ""}, big); }) == Errc::invalid_argument);
  CHECK(code_of([&] { encode({KvOp::set, "k", std::string(1025, 'v')}, big); }) == Errc::invalid_argument);
}

TEST_CASE("kv demo: both modes agree with a map model") {
  const auto reqs = make_kv_requests(5000, 9);

  std::vector<std::byte> expect;
  std::map<std::string, std::string> model;
  std::uint64_t bad = 0, absent_gets = 0;
  for (const auto& w : reqs) {
    auto m = decode(w);
    if (!m) {
      ++bad;
      continue;
    }
    KvMessage reply{m->op, m->key, {}};
    if (m->op == KvOp::set) {
      model[m->key] = m->value;
    } else if (auto it = model.find(m->key); it != model.end()) {
      reply.value = it->second;
    } else {
      ++absent_gets;
    }
    encode(reply, expect);
  }
  CHECK(bad > 0);
  CHECK(absent_gets > 0);

  for (KvMode mode : {KvMode::layered, KvMode::specialized}) {
    CAPTURE(to_string(mode));
    const KvRun run = kv_demo(mode, reqs);
    CHECK(run.decode_errors == bad);
    CHECK(run.served == reqs.size() - bad);
    CHECK(run.responses == expect);
  }
}

TEST_CASE("kv bench checks equivalence before timing") {
  auto c = bench_kv(2000, {2, 0});
  CHECK(c.layered.samples.size() == 2);
  CHECK(c.specialized.samples.size() == 2);
  CHECK(c.decode_errors > 0);
  CHECK(code_of([] { bench_kv(0); }) == Errc::bad_params);
}

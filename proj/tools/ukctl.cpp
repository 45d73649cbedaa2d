// ukctl: compose images, print dependency graphs, boot, and run benchmarks.

#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "uk/bench.hpp"
#include "uk/boot.hpp"
#include "uk/compose.hpp"
#include "uk/error.hpp"

namespace {

using namespace uk;

void write_out(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) raise(Errc::io_error, "cannot write " + path);
  f << text;
}

struct ComposeArgs {
  std::vector<std::string> registry{UK_DEFAULT_REGISTRY};
  std::string config;
  std::vector<std::string> providers;
  std::vector<std::string> select;
};

void add_compose_opts(CLI::App* c, ComposeArgs& a) {
  c->add_option("--registry", a.registry, "manifest files or directories")->capture_default_str();
  c->add_option("--config", a.config, "selections file (CONFIG_X=y lines)");
  c->add_option("--select", a.select, "extra library to select");
  c->add_option("--provider", a.providers, "api=lib provider choice");
}

compose::ResolvedGraph resolve_from(const ComposeArgs& a) {
  std::vector<std::filesystem::path> paths(a.registry.begin(), a.registry.end());
  const compose::Registry reg = compose::load_registry(paths);
  compose::Selections sel;
  if (!a.config.empty()) sel = compose::load_selections(a.config, reg);
  for (const auto& s : a.select) sel.libraries[s] = true;
  return compose::resolve(reg, sel, compose::parse_provider_choices(a.providers));
}

struct BenchArgs {
  int reps = 20;
  int warmup = 2;
  std::string heap = "256M";
  std::string out;
  std::string format = "csv";
  std::vector<std::string> backends{"region", "buddy", "tlsf", "tinyfree"};
  std::string pattern = "churn";
  std::size_t ops = 100000;
  bool check = false;
  std::vector<std::uint16_t> batches{1, 32};
  std::uint32_t duration_ms = 1000;
  std::size_t invocations = 1000000;
  std::size_t corpus = 1000;
  std::size_t queries = 10000;
  std::size_t requests = 100000;
};

std::size_t heap_bytes(const BenchArgs& b) {
  auto v = boot::parse_size(b.heap);
  if (!v || *v == 0) raise(Errc::bad_params, "bad --heap '" + b.heap + "'");
  return *v;
}

std::vector<alloc::BackendKind> backends(const BenchArgs& b) {
  std::vector<alloc::BackendKind> out;
  for (const auto& s : b.backends) {
    auto k = alloc::parse_backend(s);
    if (!k) raise(Errc::bad_params, "unknown backend '" + s + "'");
    out.push_back(*k);
  }
  return out;
}

void emit(const BenchArgs& b, const std::vector<bench::BenchResult>& results) {
  if (b.format == "json") {
    write_out(b.out, bench::to_json(results));
  } else {
    write_out(b.out, bench::to_csv(results));
  }
  for (const auto& r : results) {
    auto it = r.params.find("backend");
    const std::string who = r.name + (it == r.params.end() ? "" : "[" + it->second + "]");
    for (const auto& f : r.failures) std::cerr << who << ": " << f << "\n";
  }
}

std::vector<bench::BenchResult> run_bench(const std::string& which, const BenchArgs& b) {
  const bench::Repeat rep{b.reps, b.warmup};
  if (which == "alloc-init") return bench::bench_alloc_init(backends(b), heap_bytes(b), rep);
  if (which == "alloc-work") {
    auto p = bench::parse_pattern(b.pattern);
    if (!p) raise(Errc::bad_params, "unknown pattern '" + b.pattern + "'");
    bench::WorkloadOptions o;
    o.ops = b.ops;
    o.heap_bytes = heap_bytes(b);
    o.check_disjoint = b.check;
    std::vector<bench::BenchResult> out;
    for (auto k : backends(b)) out.push_back(bench::bench_alloc_workload(k, *p, o, rep));
    return out;
  }
  if (which == "net-batch") return bench::bench_net_batch(b.batches, b.duration_ms, rep);
  if (which == "dispatch") {
    auto d = bench::bench_dispatch(b.invocations, rep);
    return {d.direct_call, d.shim_dispatch, d.host_trap};
  }
  if (which == "fs-open") {
    if (b.corpus == 0) raise(Errc::bad_params, "empty corpus");
    const auto c = bench::make_corpus(b.corpus, 1);
    auto r = bench::bench_fs_open(c, bench::make_queries(c, b.queries, 2), rep);
    return {r.vfs_path, r.shfs_bypass};
  }
  if (which == "kv") {
    auto r = bench::bench_kv(b.requests, rep);
    return {r.layered, r.specialized};
  }
  raise(Errc::bad_params, "unknown benchmark " + which);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ukctl: compose, inspect, boot and benchmark micro-library images"};
  app.require_subcommand(1);

  ComposeArgs ca;
  std::string plan_out, header_out, dot_out;
  auto* compose_cmd = app.add_subcommand("compose", "resolve a selection and emit its build plan");
  add_compose_opts(compose_cmd, ca);
  compose_cmd->add_option("--plan", plan_out, "write plan JSON here (default stdout)");
  compose_cmd->add_option("--header", header_out, "write the feature header here");
  compose_cmd->add_option("--dot", dot_out, "write the dependency graph here");

  ComposeArgs ga;
  std::string graph_out;
  auto* graph_cmd = app.add_subcommand("graph", "print the resolved dependency graph as DOT");
  add_compose_opts(graph_cmd, ga);
  graph_cmd->add_option("--out", graph_out, "output file (default stdout)");

  std::string run_heap = "64M", run_strategy = "prereserved", run_boot = "region", run_main;
  bool run_sched = false;
  auto* run_cmd = app.add_subcommand("run", "boot an empty application and print the boot report");
  run_cmd->add_option("--heap", run_heap)->capture_default_str();
  run_cmd->add_option("--strategy", run_strategy, "prereserved|on_demand")->capture_default_str();
  run_cmd->add_option("--boot-allocator", run_boot)->capture_default_str();
  run_cmd->add_option("--main-allocator", run_main, "hand off to this backend after boot");
  run_cmd->add_flag("--sched", run_sched, "compose the cooperative scheduler");

  BenchArgs ba;
  std::string which;
  auto* bench_cmd = app.add_subcommand("bench", "run a benchmark");
  bench_cmd->add_option("which", which, "alloc-init|alloc-work|net-batch|dispatch|fs-open|kv")
      ->required()
      ->check(CLI::IsMember({"alloc-init", "alloc-work", "net-batch", "dispatch", "fs-open", "kv"}));
  bench_cmd->add_option("--reps", ba.reps)->capture_default_str();
  bench_cmd->add_option("--warmup", ba.warmup)->capture_default_str();
  bench_cmd->add_option("--heap", ba.heap, "bytes, K/M/G suffixes allowed")->capture_default_str();
  bench_cmd->add_option("--out", ba.out, "output file (default stdout)");
  bench_cmd->add_option("--format", ba.format)->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  bench_cmd->add_option("--backend", ba.backends)->capture_default_str();
  bench_cmd->add_option("--pattern", ba.pattern, "churn|ramp|mixed")->capture_default_str();
  bench_cmd->add_option("--ops", ba.ops)->capture_default_str();
  bench_cmd->add_flag("--check", ba.check, "attach the disjointness oracle");
  bench_cmd->add_option("--batch", ba.batches)->capture_default_str();
  bench_cmd->add_option("--duration-ms", ba.duration_ms)->capture_default_str();
  bench_cmd->add_option("--invocations", ba.invocations)->capture_default_str();
  bench_cmd->add_option("--corpus", ba.corpus)->capture_default_str();
  bench_cmd->add_option("--queries", ba.queries)->capture_default_str();
  bench_cmd->add_option("--requests", ba.requests)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*compose_cmd) {
      const auto g = resolve_from(ca);
      const auto plan = compose::emit_build_plan(g);
      if (!header_out.empty()) write_out(header_out, plan.feature_header());
      if (!dot_out.empty()) write_out(dot_out, compose::emit_dot(g));
      if (!plan_out.empty() || header_out.empty()) write_out(plan_out, plan.to_json());
    } else if (*graph_cmd) {
      write_out(graph_out, compose::emit_dot(resolve_from(ga)));
    } else if (*run_cmd) {
      boot::BootConfig cfg;
      auto h = boot::parse_size(run_heap);
      auto s = plat::parse_memory_strategy(run_strategy);
      auto b = alloc::parse_backend(run_boot);
      if (!h || !s || !b) raise(Errc::bad_config, "bad --heap, --strategy or --boot-allocator");
      cfg.heap_bytes = *h;
      cfg.memory_strategy = *s;
      cfg.boot_allocator = *b;
      if (!run_main.empty()) {
        cfg.main_allocator = alloc::parse_backend(run_main);
        if (!cfg.main_allocator) raise(Errc::bad_config, "bad --main-allocator");
      }
      cfg.with_scheduler = run_sched;
      if (run_sched) cfg.scheduler_hooks = &boot::cooperative_scheduler();
      cfg.main = [](boot::BootEnv&) { return 0; };
      std::cout << boot::boot(cfg).to_json() << "\n";
    } else if (*bench_cmd) {
      emit(ba, run_bench(which, ba));
    }
  } catch (const uk::Error& e) {
    std::cerr << "ukctl: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

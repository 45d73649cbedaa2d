#include <charconv>
#include <cstdlib>

#include <json.hpp>

#include "uk/boot.hpp"
#include "uk/error.hpp"

namespace uk::boot {

std::optional<std::size_t> parse_size(std::string_view text) noexcept {
  if (text.empty()) return std::nullopt;
  std::size_t mult = 1;
  switch (text.back()) {
    case 'k': case 'K': mult = std::size_t{1} << 10; break;
    case 'm': case 'M': mult = std::size_t{1} << 20; break;
    case 'g': case 'G': mult = std::size_t{1} << 30; break;
    default: break;
  }
  if (mult != 1) text.remove_suffix(1);
  std::size_t v = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || end != text.data() + text.size()) return std::nullopt;
  if (v > SIZE_MAX / mult) return std::nullopt;
  return v * mult;
}

BootConfig apply_env(BootConfig cfg) {
  if (const char* s = std::getenv("UK_HEAP_BYTES"); s != nullptr && *s != '\0') {
    const auto v = parse_size(s);
    if (!v) raise(Errc::bad_config, std::string("UK_HEAP_BYTES is not a size: ") + s);
    cfg.heap_bytes = *v;
  }
  if (const char* s = std::getenv("UK_MEM_STRATEGY"); s != nullptr && *s != '\0') {
    const auto v = plat::parse_memory_strategy(s);
    if (!v) raise(Errc::bad_config, std::string("UK_MEM_STRATEGY is not a strategy: ") + s);
    cfg.memory_strategy = *v;
  }
  return cfg;
}

std::string BootReport::to_json() const {
  nlohmann::ordered_json j;
  j["platform_init_ns"] = platform_init_ns;
  j["heap_provision_ns"] = heap_provision_ns;
  j["boot_alloc_init_ns"] = boot_alloc_init_ns;
  j["main_alloc_init_ns"] = main_alloc_init_ns;
  j["sched_init_ns"] = sched_init_ns;
  j["total_to_main_ns"] = total_to_main_ns;
  j["process_to_main_ns"] = process_to_main_ns;
  j["heap_bytes"] = heap_bytes;
  j["memory_strategy"] = std::string(plat::to_string(memory_strategy));
  j["main_result"] = main_result;
  return j.dump();
}

BootReport boot(const BootConfig& in) {
  const std::uint64_t t0 = plat::monotonic_ns();
  const BootConfig cfg = in.honor_env ? apply_env(in) : in;
  if (!cfg.main) raise(Errc::bad_config, "no application main");
  if (cfg.with_scheduler && cfg.scheduler_hooks == nullptr) {
    raise(Errc::bad_config, "scheduler requested but none composed");
  }
  BootReport rep;
  rep.heap_bytes = cfg.heap_bytes;
  rep.memory_strategy = cfg.memory_strategy;
  auto lap = [](std::uint64_t& since) {
    const std::uint64_t now = plat::monotonic_ns();
    const std::uint64_t d = now - since;
    since = now;
    return d;
  };
  std::uint64_t t = t0;

  plat::Platform& platform = plat::Platform::init();
  rep.platform_init_ns = lap(t);

  plat::MemoryRegion heap = plat::provision_heap(cfg.memory_strategy, cfg.heap_bytes);
  rep.heap_provision_ns = lap(t);

  alloc::Registry registry;
  alloc::Allocator& boot_alloc =
      registry.init(cfg.boot_allocator, heap.bytes(), 0, heap.size(), cfg.alloc_options);
  rep.boot_alloc_init_ns = lap(t);

  if (cfg.main_allocator) {
    // Boot blocks stay valid; the main allocator gets the untouched rest.
    std::size_t used = 0;
    try {
      used = boot_alloc.seal();
    } catch (const Error& e) {
      if (e.code() != Errc::not_supported) throw;
      raise(Errc::bad_config, std::string(alloc::to_string(cfg.boot_allocator)) +
                                  " cannot hand over to a main allocator");
    }
    const std::size_t start = boot_alloc.heap_base() +
                              ((used + plat::kPageSize - 1) & ~(plat::kPageSize - 1));
    if (start >= heap.size()) raise(Errc::heap_unavailable, "boot allocator consumed the heap");
    alloc::Allocator& main_alloc = registry.init(*cfg.main_allocator, heap.bytes(), start,
                                                 heap.size() - start, cfg.alloc_options);
    registry.set_default(main_alloc);
    rep.main_alloc_init_ns = lap(t);
  }

  sched::Scheduler* scheduler = nullptr;
  if (cfg.with_scheduler) {
    scheduler = cfg.scheduler_hooks->create();
    rep.sched_init_ns = lap(t);
  }
  struct Cleanup {
    const SchedulerHooks* hooks;
    sched::Scheduler* s;
    ~Cleanup() {
      if (s != nullptr) hooks->destroy(s);
    }
  } cleanup{cfg.scheduler_hooks, scheduler};

  BootEnv env{platform, registry, registry.default_allocator(), scheduler, cfg};
  auto enter_main = [&] {
    const std::uint64_t now = plat::monotonic_ns();
    rep.total_to_main_ns = now - t0;
    rep.process_to_main_ns = now - plat::process_entry_ns();
    rep.main_result = cfg.main(env);
  };
  if (scheduler != nullptr) {
    cfg.scheduler_hooks->run_main(*scheduler, enter_main);
  } else {
    enter_main();  // run to completion on the boot context
  }
  return rep;
}

}  // namespace uk::boot

#pragma once

// ukboot: staged bring-up ending in the application's main.
//
//   platform init -> heap provisioning -> boot allocator -> [main allocator]
//   -> [scheduler] -> main
//
// The scheduler stage only exists when a SchedulerHooks table is supplied,
// so images without uksched never link it.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "uk/alloc.hpp"
#include "uk/plat.hpp"

namespace uk::sched {
class Scheduler;
}

namespace uk::boot {

struct BootConfig;

struct BootEnv {
  plat::Platform& platform;
  alloc::Registry& allocators;
  alloc::Allocator& allocator;  // the default handle after boot
  sched::Scheduler* scheduler;  // null in run-to-completion images
  const BootConfig& config;
};

struct SchedulerHooks {
  sched::Scheduler* (*create)();
  // Runs `main` as the first thread and returns once every thread exited.
  void (*run_main)(sched::Scheduler& s, const std::function<void()>& main);
  void (*destroy)(sched::Scheduler* s);
};

struct BootConfig {
  std::size_t heap_bytes = std::size_t{64} << 20;
  plat::MemoryStrategy memory_strategy = plat::MemoryStrategy::prereserved;
  alloc::BackendKind boot_allocator = alloc::BackendKind::region;
  // Takes over the heap remainder once the boot allocator is sealed.
  std::optional<alloc::BackendKind> main_allocator;
  bool with_scheduler = false;
  const SchedulerHooks* scheduler_hooks = nullptr;
  std::function<int(BootEnv&)> main;
  alloc::InitOptions alloc_options;
  // Apply UK_HEAP_BYTES / UK_MEM_STRATEGY.
  bool honor_env = true;
};

struct BootReport {
  std::uint64_t platform_init_ns = 0;
  std::uint64_t heap_provision_ns = 0;
  std::uint64_t boot_alloc_init_ns = 0;
  std::uint64_t main_alloc_init_ns = 0;
  std::uint64_t sched_init_ns = 0;
  // From boot() entry to the first instruction of main.
  std::uint64_t total_to_main_ns = 0;
  // From platform static initialization (process entry) to main.
  std::uint64_t process_to_main_ns = 0;
  std::size_t heap_bytes = 0;
  plat::MemoryStrategy memory_strategy = plat::MemoryStrategy::prereserved;
  int main_result = 0;

  std::string to_json() const;
};

// Throws heap_unavailable, bad_config, or whatever allocator init raises.
BootReport boot(const BootConfig& cfg);

// Returns `cfg` with environment overrides applied; bad_config on garbage.
BootConfig apply_env(BootConfig cfg);

// Accepts plain bytes or a K/M/G suffix (powers of 1024).
std::optional<std::size_t> parse_size(std::string_view text) noexcept;

// Hooks for the cooperative scheduler (in uk_boot_sched).
const SchedulerHooks& cooperative_scheduler();

}  // namespace uk::boot

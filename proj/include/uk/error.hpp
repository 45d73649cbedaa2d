#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace uk {

// Error codes shared by every micro-library. Syscall-facing code maps these
// onto negative errno values with to_errno().
enum class Errc : std::uint8_t {
  invalid_argument,
  // ukalloc
  region_too_small,
  region_overlap,
  out_of_memory,
  invalid_alignment,
  double_release,
  foreign_block,
  not_registered,
  // uknetdev
  too_many_queues,
  wrong_state,
  bad_capacity,
  bad_queue_id,
  buffer_busy,
  not_supported,
  io_error,
  // uksched / uklock
  foreign_thread,
  not_blocked,
  bad_stack,
  not_owner,
  deadlock,
  // vfscore / shfs
  not_found,
  is_directory,
  not_directory,
  read_only_fs,
  bad_handle,
  duplicate_name,
  corrupt_image,
  already_exists,
  // syscall shim
  out_of_range,
  already_registered,
  // ukboot / platform
  heap_unavailable,
  bad_config,
  // composer
  parse_error,
  duplicate_library,
  unsatisfied_dependency,
  ambiguous_provider,
  dependency_cycle,
  // bench
  bad_params,
  not_equivalent,  // compared paths disagreed before timing
};

std::string_view to_string(Errc code) noexcept;

// Positive errno value for the syscall convention (callers negate).
int to_errno(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  explicit Error(Errc code, std::string_view detail = {});

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] void raise(Errc code, std::string_view detail = {});

}  // namespace uk

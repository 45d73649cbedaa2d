#include "uk/error.hpp"

#include <cerrno>

namespace uk {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::region_too_small: return "region_too_small";
    case Errc::region_overlap: return "region_overlap";
    case Errc::out_of_memory: return "out_of_memory";
    case Errc::invalid_alignment: return "invalid_alignment";
    case Errc::double_release: return "double_release";
    case Errc::foreign_block: return "foreign_block";
    case Errc::not_registered: return "not_registered";
    case Errc::too_many_queues: return "too_many_queues";
    case Errc::wrong_state: return "wrong_state";
    case Errc::bad_capacity: return "bad_capacity";
    case Errc::bad_queue_id: return "bad_queue_id";
    case Errc::buffer_busy: return "buffer_busy";
    case Errc::not_supported: return "not_supported";
    case Errc::io_error: return "io_error";
    case Errc::foreign_thread: return "foreign_thread";
    case Errc::not_blocked: return "not_blocked";
    case Errc::bad_stack: return "bad_stack";
    case Errc::not_owner: return "not_owner";
    case Errc::deadlock: return "deadlock";
    case Errc::not_found: return "not_found";
    case Errc::is_directory: return "is_directory";
    case Errc::not_directory: return "not_directory";
    case Errc::read_only_fs: return "read_only_fs";
    case Errc::bad_handle: return "bad_handle";
    case Errc::duplicate_name: return "duplicate_name";
    case Errc::corrupt_image: return "corrupt_image";
    case Errc::already_exists: return "already_exists";
    case Errc::out_of_range: return "out_of_range";
    case Errc::already_registered: return "already_registered";
    case Errc::heap_unavailable: return "heap_unavailable";
    case Errc::bad_config: return "bad_config";
    case Errc::parse_error: return "parse_error";
    case Errc::duplicate_library: return "duplicate_library";
    case Errc::unsatisfied_dependency: return "unsatisfied_dependency";
    case Errc::ambiguous_provider: return "ambiguous_provider";
    case Errc::dependency_cycle: return "dependency_cycle";
    case Errc::bad_params: return "bad_params";
    case Errc::not_equivalent: return "not_equivalent";
  }
  return "unknown";
}

int to_errno(Errc code) noexcept {
  switch (code) {
    case Errc::not_found: return ENOENT;
    case Errc::is_directory: return EISDIR;
    case Errc::not_directory: return ENOTDIR;
    case Errc::read_only_fs: return EROFS;
    case Errc::bad_handle: return EBADF;
    case Errc::already_exists:
    case Errc::duplicate_name: return EEXIST;
    case Errc::out_of_memory:
    case Errc::heap_unavailable: return ENOMEM;
    case Errc::not_supported: return ENOTSUP;
    case Errc::wrong_state: return EAGAIN;
    case Errc::io_error: return EIO;
    case Errc::buffer_busy: return EBUSY;
    case Errc::not_owner: return EPERM;
    case Errc::deadlock: return EDEADLK;
    default: return EINVAL;
  }
}

namespace {

std::string format_message(Errc code, std::string_view detail) {
  std::string msg(to_string(code));
  if (!detail.empty()) {
    msg += ": ";
    msg += detail;
  }
  return msg;
}

}  // namespace

Error::Error(Errc code, std::string_view detail)
    : std::runtime_error(format_message(code, detail)), code_(code) {}

void raise(Errc code, std::string_view detail) { throw Error(code, detail); }

}  // namespace uk

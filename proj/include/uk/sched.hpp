#pragma once

// uksched: cooperative FIFO threads on top of platform contexts.
//
// A Scheduler owns its threads and runs them on whatever host context calls
// run(). Nothing is shared between schedulers.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "uk/plat.hpp"

namespace uk::sched {

inline constexpr std::size_t kDefaultStackSize = 64 * 1024;

enum class ThreadState : std::uint8_t { ready, running, blocked, exited };
enum class SwitchReason : std::uint8_t { yield, block, wake, exit };

std::string_view to_string(ThreadState s) noexcept;
std::string_view to_string(SwitchReason r) noexcept;

class Scheduler;

class Thread {
 public:
  using Entry = void (*)(void* arg);

  std::uint32_t id() const noexcept { return id_; }
  ThreadState state() const noexcept { return state_; }
  std::size_t stack_size() const noexcept { return ctx_ ? ctx_->stack_size() : 0; }
  Scheduler& owner() const noexcept { return *owner_; }

 private:
  friend class Scheduler;
  Thread() = default;

  std::uint32_t id_ = 0;
  ThreadState state_ = ThreadState::ready;
  Scheduler* owner_ = nullptr;
  std::function<void()> body_;
  std::unique_ptr<plat::Context> ctx_;
};

class Scheduler {
 public:
  explicit Scheduler(plat::Platform& platform = plat::Platform::init());
  Scheduler(const Scheduler&) = delete;
  Scheduler& operator=(const Scheduler&) = delete;
  ~Scheduler();

  // Throws bad_stack below plat::kMinStackSize.
  Thread& create(Thread::Entry entry, void* arg, std::size_t stack_size = kDefaultStackSize);
  Thread& create(std::function<void()> body, std::size_t stack_size = kDefaultStackSize);

  // Only from inside one of this scheduler's threads.
  void yield();
  void block();
  // Throws not_blocked unless `t` is blocked, foreign_thread if `t` belongs to
  // another scheduler.
  void wake(Thread& t);

  // Runs until every thread has exited. Throws deadlock when the run queue
  // drains while threads are still blocked; rethrows the first exception that
  // escaped a thread body.
  void run();

  Thread* current() const noexcept { return current_; }
  std::size_t ready_count() const noexcept { return run_queue_.size(); }
  std::size_t thread_count() const noexcept { return threads_.size(); }
  std::size_t blocked_count() const noexcept;

  // "switch <from> -> <to> reason=<r>"; id 0 is the context that called run().
  const std::vector<std::string>& trace() const noexcept { return trace_; }
  void clear_trace() { trace_.clear(); }
  void set_tracing(bool on) noexcept { tracing_ = on; }

 private:
  static void thread_main(void* arg);
  void switch_out(SwitchReason why);
  void record(std::uint32_t from, std::uint32_t to, SwitchReason why);
  void require_current(const char* op) const;

  plat::Platform& platform_;
  plat::Context sched_ctx_;
  std::vector<std::unique_ptr<Thread>> threads_;
  std::deque<Thread*> run_queue_;
  Thread* current_ = nullptr;
  std::uint32_t next_id_ = 1;
  bool running_ = false;
  bool tracing_ = true;
  std::uint32_t last_from_ = 0;
  SwitchReason last_reason_ = SwitchReason::wake;
  std::exception_ptr failure_;
  std::vector<std::string> trace_;
};

}  // namespace uk::sched

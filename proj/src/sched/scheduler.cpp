#include <algorithm>

#include "uk/error.hpp"
#include "uk/sched.hpp"

namespace uk::sched {

std::string_view to_string(ThreadState s) noexcept {
  switch (s) {
    case ThreadState::ready: return "ready";
    case ThreadState::running: return "running";
    case ThreadState::blocked: return "blocked";
    case ThreadState::exited: return "exited";
  }
  return "?";
}

std::string_view to_string(SwitchReason r) noexcept {
  switch (r) {
    case SwitchReason::yield: return "yield";
    case SwitchReason::block: return "block";
    case SwitchReason::wake: return "wake";
    case SwitchReason::exit: return "exit";
  }
  return "?";
}

Scheduler::Scheduler(plat::Platform& platform) : platform_(platform) {}

Scheduler::~Scheduler() = default;

Thread& Scheduler::create(Thread::Entry entry, void* arg, std::size_t stack_size) {
  return create([entry, arg] { entry(arg); }, stack_size);
}

Thread& Scheduler::create(std::function<void()> body, std::size_t stack_size) {
  auto t = std::unique_ptr<Thread>(new Thread);
  t->ctx_ = plat::Context::make(stack_size, &Scheduler::thread_main, t.get());
  t->id_ = next_id_++;
  t->owner_ = this;
  t->body_ = std::move(body);
  t->state_ = ThreadState::ready;
  run_queue_.push_back(t.get());
  threads_.push_back(std::move(t));
  return *threads_.back();
}

void Scheduler::thread_main(void* arg) {
  auto* t = static_cast<Thread*>(arg);
  Scheduler& s = *t->owner_;
  try {
    t->body_();
  } catch (...) {
    if (!s.failure_) s.failure_ = std::current_exception();
  }
  t->state_ = ThreadState::exited;
  s.switch_out(SwitchReason::exit);
}

void Scheduler::require_current(const char* op) const {
  if (current_ == nullptr) {
    raise(Errc::wrong_state, std::string(op) + " outside of a scheduler thread");
  }
}

void Scheduler::yield() {
  require_current("yield");
  current_->state_ = ThreadState::ready;
  run_queue_.push_back(current_);
  switch_out(SwitchReason::yield);
}

void Scheduler::block() {
  require_current("block");
  current_->state_ = ThreadState::blocked;
  switch_out(SwitchReason::block);
}

void Scheduler::wake(Thread& t) {
  if (t.owner_ != this) raise(Errc::foreign_thread, "thread belongs to another scheduler");
  if (t.state_ != ThreadState::blocked) {
    raise(Errc::not_blocked, "thread " + std::to_string(t.id_) + " is " +
                                 std::string(to_string(t.state_)));
  }
  t.state_ = ThreadState::ready;
  run_queue_.push_back(&t);
}

void Scheduler::switch_out(SwitchReason why) {
  Thread* self = current_;
  last_from_ = self->id_;
  last_reason_ = why;
  current_ = nullptr;
  plat::switch_context(*self->ctx_, sched_ctx_);
}

void Scheduler::record(std::uint32_t from, std::uint32_t to, SwitchReason why) {
  if (!tracing_) return;
  trace_.push_back("switch " + std::to_string(from) + " -> " + std::to_string(to) +
                   " reason=" + std::string(to_string(why)));
}

std::size_t Scheduler::blocked_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(threads_.begin(), threads_.end(), [](auto& t) {
    return t->state_ == ThreadState::blocked;
  }));
}

void Scheduler::run() {
  if (running_) raise(Errc::wrong_state, "scheduler already running");
  running_ = true;
  last_from_ = 0;
  last_reason_ = SwitchReason::wake;
  struct Reset {
    bool& flag;
    ~Reset() { flag = false; }
  } reset{running_};

  while (!run_queue_.empty()) {
    Thread* next = run_queue_.front();
    run_queue_.pop_front();
    if (next->id_ != last_from_) record(last_from_, next->id_, last_reason_);
    next->state_ = ThreadState::running;
    current_ = next;
    plat::switch_context(sched_ctx_, *next->ctx_);
    if (next->state_ == ThreadState::exited) {
      // Its stack is no longer in use once we are back here.
      next->ctx_.reset();
    }
  }
  if (last_from_ != 0) record(last_from_, 0, last_reason_);

  if (failure_) std::rethrow_exception(std::exchange(failure_, nullptr));
  if (const std::size_t blocked = blocked_count(); blocked > 0) {
    std::string ids;
    for (auto& t : threads_) {
      if (t->state_ == ThreadState::blocked) ids += (ids.empty() ? "" : ",") + std::to_string(t->id_);
    }
    raise(Errc::deadlock, std::to_string(blocked) + " thread(s) blocked with an empty run queue: " + ids);
  }
}

}  // namespace uk::sched

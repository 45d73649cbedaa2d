#include "uk/lock.hpp"

namespace uk::lock {

sched::Thread& Mutex<Cooperative>::self() const {
  sched::Thread* t = sched_.current();
  if (t == nullptr) raise(Errc::wrong_state, "mutex used outside of a scheduler thread");
  return *t;
}

void Mutex<Cooperative>::lock() {
  sched::Thread& me = self();
  if (owner_ == nullptr) {
    owner_ = &me;
    return;
  }
  if (owner_ == &me) raise(Errc::deadlock, "mutex is not recursive");
  waiters_.push_back(&me);
  // unlock() hands ownership over before waking us.
  sched_.block();
}

bool Mutex<Cooperative>::try_lock() {
  sched::Thread& me = self();
  if (owner_ != nullptr) return false;
  owner_ = &me;
  return true;
}

void Mutex<Cooperative>::unlock() {
  if (owner_ != sched_.current() || owner_ == nullptr) {
    raise(Errc::not_owner, "mutex unlocked by a thread that does not hold it");
  }
  if (waiters_.empty()) {
    owner_ = nullptr;
    return;
  }
  owner_ = waiters_.front();
  waiters_.pop_front();
  sched_.wake(*owner_);
}

void Semaphore<Cooperative>::down() {
  if (count_ > 0) {
    --count_;
    return;
  }
  sched::Thread* me = sched_.current();
  if (me == nullptr) raise(Errc::wrong_state, "semaphore wait outside of a scheduler thread");
  waiters_.push_back(me);
  sched_.block();
}

bool Semaphore<Cooperative>::try_down() noexcept {
  if (count_ == 0) return false;
  --count_;
  return true;
}

void Semaphore<Cooperative>::up() {
  if (waiters_.empty()) {
    ++count_;
    return;
  }
  sched::Thread* t = waiters_.front();
  waiters_.pop_front();
  sched_.wake(*t);
}

}  // namespace uk::lock

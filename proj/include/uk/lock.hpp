#pragma once

// uklock: mutex and semaphore that vanish when threading is not composed.
//
// Mutex<NoThreading> and Semaphore<NoThreading> are empty types whose
// operations are inline no-ops. The Cooperative versions block through the
// owning scheduler and never spin.

#include <cstdint>
#include <deque>
#include <type_traits>

#include "uk/error.hpp"
#include "uk/sched.hpp"

namespace uk::lock {

struct NoThreading {};
struct Cooperative {};

struct LockConfig {
  bool threading_enabled = false;
};

template <class Policy>
class Mutex;

template <class Policy>
class Semaphore;

template <>
class Mutex<NoThreading> {
 public:
  void lock() noexcept {}
  bool try_lock() noexcept { return true; }
  void unlock() noexcept {}
};

template <>
class Semaphore<NoThreading> {
 public:
  explicit Semaphore(std::uint32_t = 0) noexcept {}
  void down() noexcept {}
  bool try_down() noexcept { return true; }
  void up() noexcept {}
};

static_assert(std::is_empty_v<Mutex<NoThreading>>);
static_assert(std::is_empty_v<Semaphore<NoThreading>>);

template <>
class Mutex<Cooperative> {
 public:
  explicit Mutex(sched::Scheduler& s) noexcept : sched_(s) {}
  Mutex(const Mutex&) = delete;
  Mutex& operator=(const Mutex&) = delete;

  void lock();
  bool try_lock();
  // Throws not_owner when the caller does not hold the mutex.
  void unlock();

  const sched::Thread* owner() const noexcept { return owner_; }
  std::size_t waiters() const noexcept { return waiters_.size(); }

 private:
  sched::Thread& self() const;

  sched::Scheduler& sched_;
  sched::Thread* owner_ = nullptr;
  std::deque<sched::Thread*> waiters_;
};

template <>
class Semaphore<Cooperative> {
 public:
  Semaphore(sched::Scheduler& s, std::uint32_t initial) noexcept : sched_(s), count_(initial) {}
  Semaphore(const Semaphore&) = delete;
  Semaphore& operator=(const Semaphore&) = delete;

  void down();
  bool try_down() noexcept;
  void up();

  std::uint32_t count() const noexcept { return count_; }

 private:
  sched::Scheduler& sched_;
  std::uint32_t count_;
  std::deque<sched::Thread*> waiters_;
};

template <bool Threading>
using DefaultMutex = std::conditional_t<Threading, Mutex<Cooperative>, Mutex<NoThreading>>;

}  // namespace uk::lock

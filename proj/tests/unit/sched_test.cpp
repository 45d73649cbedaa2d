#include <doctest.h>

#include <string>
#include <vector>

#include "uk/error.hpp"
#include "uk/lock.hpp"
#include "uk/sched.hpp"

using namespace uk;
using namespace uk::sched;

namespace {

template <class Fn>
Errc error_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected uk::Error");
  return Errc::invalid_argument;
}

using Trace = std::vector<std::string>;

}  // namespace

TEST_CASE("sched_create examples") {
  Scheduler s1, s2;
  s1.run();  // empty: returns at once
  CHECK(s1.trace().empty());

  Thread* b_blocked = nullptr;
  s2.create([&] {
    b_blocked = s2.current();
    s2.block();
  });
  auto& a = s1.create([&] {
    CHECK(error_of([&] { s1.wake(*b_blocked); }) == Errc::foreign_thread);
  });
  CHECK(error_of([&] { s2.run(); }) == Errc::deadlock);
  s1.run();
  CHECK(a.state() == ThreadState::exited);
  CHECK(&a.owner() == &s1);
  CHECK(b_blocked->state() == ThreadState::blocked);
  CHECK(s1.thread_count() == 1);
  CHECK(s2.thread_count() == 1);
}

TEST_CASE("two yielding threads alternate in FIFO order") {
  Scheduler s;
  std::string order;
  for (char name : {'A', 'B'}) {
    s.create([&, name] {
      for (int i = 0; i < 3; ++i) {
        order += name;
        s.yield();
      }
      order += name;
    });
  }
  s.run();
  CHECK(order == "ABABABAB");
  const Trace expect = {
      "switch 0 -> 1 reason=wake",  "switch 1 -> 2 reason=yield", "switch 2 -> 1 reason=yield",
      "switch 1 -> 2 reason=yield", "switch 2 -> 1 reason=yield", "switch 1 -> 2 reason=yield",
      "switch 2 -> 1 reason=yield", "switch 1 -> 2 reason=exit",  "switch 2 -> 0 reason=exit",
  };
  CHECK(s.trace() == expect);
}

TEST_CASE("block and wake") {
  Scheduler s;
  std::string order;
  Thread* a = nullptr;
  a = &s.create([&] {
    order += "a1 ";
    s.block();
    order += "a2 ";
  });
  s.create([&] {
    order += "b ";
    CHECK(a->state() == ThreadState::blocked);
    s.wake(*a);
    CHECK(error_of([&] { s.wake(*a); }) == Errc::not_blocked);
    CHECK(error_of([&] { s.wake(*s.current()); }) == Errc::not_blocked);
  });
  s.run();
  CHECK(order == "a1 b a2 ");
  const Trace expect = {"switch 0 -> 1 reason=wake", "switch 1 -> 2 reason=block",
                        "switch 2 -> 1 reason=exit", "switch 1 -> 0 reason=exit"};
  CHECK(s.trace() == expect);
}

TEST_CASE("stack below the platform minimum") {
  Scheduler s;
  CHECK(error_of([&] { s.create([] {}, plat::kMinStackSize - 1); }) == Errc::bad_stack);
  auto& t = s.create([] {});
  CHECK(t.stack_size() == kDefaultStackSize);
  s.run();
}

TEST_CASE("yield outside a thread is refused") {
  Scheduler s;
  CHECK(error_of([&] { s.yield(); }) == Errc::wrong_state);
  CHECK(error_of([&] { s.block(); }) == Errc::wrong_state);
}

TEST_CASE("threads created during run join the queue tail") {
  Scheduler s;
  std::string order;
  s.create([&] {
    order += "1";
    s.create([&] { order += "3"; });
    s.yield();
    order += "4";
  });
  s.create([&] { order += "2"; });
  s.run();
  CHECK(order == "1234");
}

TEST_CASE("exceptions escaping a thread surface from run") {
  Scheduler s;
  s.create([] { raise(Errc::io_error, "boom"); });
  bool other_ran = false;
  s.create([&] { other_ran = true; });
  CHECK(error_of([&] { s.run(); }) == Errc::io_error);
  CHECK(other_ran);
}

TEST_CASE("scripted traces are reproducible") {
  auto script = [] {
    Scheduler s;
    std::vector<Thread*> ts;
    for (int i = 0; i < 4; ++i) {
      ts.push_back(&s.create([&s, &ts, i] {
        for (int r = 0; r < 5; ++r) {
          if ((r + i) % 3 == 0) {
            s.block();
          } else {
            for (Thread* t : ts) {
              if (t->state() == ThreadState::blocked) {
                s.wake(*t);
                break;
              }
            }
            s.yield();
          }
        }
        for (Thread* t : ts) {
          if (t->state() == ThreadState::blocked) s.wake(*t);
        }
      }));
    }
    s.run();
    return s.trace();
  };
  const Trace first = script();
  CHECK(first.size() > 10);
  for (int run = 0; run < 20; ++run) CHECK(script() == first);
}

TEST_CASE("no-threading locks are empty no-ops") {
  lock::Mutex<lock::NoThreading> m;
  lock::Semaphore<lock::NoThreading> sem(0);
  m.lock();
  CHECK(m.try_lock());
  m.unlock();
  sem.down();
  sem.up();
  static_assert(std::is_empty_v<lock::DefaultMutex<false>>);
  static_assert(!std::is_empty_v<lock::DefaultMutex<true>>);
}

TEST_CASE("cooperative mutex gives mutual exclusion") {
  Scheduler s;
  lock::Mutex<lock::Cooperative> m(s);
  long counter = 0;
  for (int t = 0; t < 2; ++t) {
    s.create([&] {
      for (int i = 0; i < 10000; ++i) {
        m.lock();
        const long seen = counter;
        if (i % 7 == 0) s.yield();  // hold the lock across a switch
        counter = seen + 1;
        m.unlock();
      }
    });
  }
  s.set_tracing(false);
  s.run();
  CHECK(counter == 20000);
  CHECK(m.owner() == nullptr);
}

TEST_CASE("mutex unlock by a non-owner") {
  Scheduler s;
  lock::Mutex<lock::Cooperative> m(s);
  s.create([&] {
    m.lock();
    s.yield();
    m.unlock();
  });
  s.create([&] {
    CHECK(error_of([&] { m.unlock(); }) == Errc::not_owner);
    CHECK(!m.try_lock());
  });
  s.run();
}

TEST_CASE("semaphore wakes the waiter") {
  Scheduler s;
  lock::Semaphore<lock::Cooperative> sem(s, 0);
  std::string order;
  s.create([&] {
    order += "down ";
    sem.down();
    order += "resumed ";
  });
  s.create([&] {
    order += "up ";
    sem.up();
  });
  s.run();
  CHECK(order == "down up resumed ");
  CHECK(sem.count() == 0);
}

TEST_CASE("deadlock fixture") {
  Scheduler s;
  lock::Semaphore<lock::Cooperative> sem(s, 0);
  s.create([&] { sem.down(); });
  s.create([&] { s.block(); });
  try {
    s.run();
    FAIL("no deadlock reported");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::deadlock);
    CHECK(std::string(e.what()).find("1,2") != std::string::npos);
  }
  CHECK(s.blocked_count() == 2);
}

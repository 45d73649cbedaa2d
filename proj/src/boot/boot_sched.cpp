#include "uk/boot.hpp"
#include "uk/sched.hpp"

namespace uk::boot {

const SchedulerHooks& cooperative_scheduler() {
  static const SchedulerHooks hooks{
      [] { return new sched::Scheduler(); },
      [](sched::Scheduler& s, const std::function<void()>& main) {
        s.create(main);
        s.run();
      },
      [](sched::Scheduler* s) { delete s; },
  };
  return hooks;
}

}  // namespace uk::boot

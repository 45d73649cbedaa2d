#include <algorithm>
#include <atomic>
#include <vector>

#include "uk/error.hpp"
#include "uk/netdev.hpp"

namespace uk::net {

namespace {

// Single-producer/single-consumer ring between one tx queue and the peer's
// rx queue.
class Link {
 public:
  explicit Link(std::uint32_t capacity) : slots_(capacity), mask_(capacity - 1) {}

  ~Link() {
    for (std::uint64_t i = head_.load(); i != tail_.load(); ++i) drop_(slots_[i & mask_].buf);
  }

  std::uint32_t capacity() const noexcept { return mask_ + 1; }

  template <class Mark>
  std::pair<std::uint16_t, bool> push(NetBuf* const* pkts, std::uint16_t cnt, Mark&& mark) {
    const std::uint64_t tail = tail_.load(std::memory_order_relaxed);
    const std::uint64_t head = head_.load(std::memory_order_acquire);
    const std::uint64_t room = capacity() - (tail - head);
    const auto n = static_cast<std::uint16_t>(std::min<std::uint64_t>(cnt, room));
    std::uint16_t i = 0;
    try {
      for (; i < n; ++i) {
        mark(pkts[i]);
        slots_[(tail + i) & mask_] = {pkts[i], pkts[i]->generation()};
      }
    } catch (...) {
      tail_.store(tail + i, std::memory_order_release);
      throw;
    }
    tail_.store(tail + n, std::memory_order_release);
    return {n, tail + n - head == capacity()};
  }

  template <class Unmark>
  std::pair<std::uint16_t, bool> pop(NetBuf** pkts, std::uint16_t cnt, Unmark&& unmark) {
    const std::uint64_t head = head_.load(std::memory_order_relaxed);
    const std::uint64_t tail = tail_.load(std::memory_order_acquire);
    const auto n = static_cast<std::uint16_t>(std::min<std::uint64_t>(cnt, tail - head));
    for (std::uint16_t i = 0; i < n; ++i) {
      const Slot& s = slots_[(head + i) & mask_];
      if (s.buf->generation() != s.gen) raise(Errc::buffer_busy, "stale netbuf reference on ring");
      unmark(s.buf);
      pkts[i] = s.buf;
    }
    head_.store(head + n, std::memory_order_release);
    return {n, head + n == tail};
  }

  bool has_data() const noexcept {
    return tail_.load(std::memory_order_acquire) != head_.load(std::memory_order_acquire);
  }
  bool has_room() const noexcept {
    return tail_.load(std::memory_order_acquire) - head_.load(std::memory_order_acquire) <
           capacity();
  }

  void set_drop(void (*drop)(NetBuf*)) { drop_ = drop; }

 private:
  struct Slot {
    NetBuf* buf = nullptr;
    std::uint32_t gen = 0;
  };

  std::vector<Slot> slots_;
  std::uint32_t mask_;
  alignas(64) std::atomic<std::uint64_t> head_{0};
  alignas(64) std::atomic<std::uint64_t> tail_{0};
  void (*drop_)(NetBuf*) = [](NetBuf*) {};
};

class LoopbackDevice;

struct Wiring {
  LoopbackDevice* side[2] = {nullptr, nullptr};
  // links[s][q]: from side s's tx queue q to the other side's rx queue q.
  std::vector<std::unique_ptr<Link>> links[2];
  bool bound = false;
};

class LoopbackDevice final : public NetDevice {
 public:
  LoopbackDevice(Capabilities caps, std::shared_ptr<Wiring> w, int side)
      : NetDevice(Backend::loopback, caps), wiring_(std::move(w)), side_(side) {
    wiring_->side[side_] = this;
  }

  ~LoopbackDevice() override {
    wiring_->side[side_] = nullptr;
    // Buffers still queued towards or from a vanished device are released.
    for (auto& list : wiring_->links) {
      for (auto& l : list) {
        l->set_drop([](NetBuf* b) {
          mark_dequeued(b);
          netbuf_free(b);
        });
      }
    }
  }

 protected:
  std::pair<std::uint16_t, bool> do_tx(std::uint16_t qid, NetBuf* const* pkts,
                                       std::uint16_t cnt) override {
    Link& l = out(qid);
    const auto r = l.push(pkts, cnt, [](NetBuf* b) { mark_queued(b); });
    if (r.first > 0) peer().fire(Direction::rx, qid);
    return r;
  }

  std::pair<std::uint16_t, bool> do_rx(std::uint16_t qid, NetBuf** pkts,
                                       std::uint16_t cnt) override {
    Link& l = in(qid);
    const auto r = l.pop(pkts, cnt, [](NetBuf* b) { mark_dequeued(b); });
    if (r.first > 0) peer().fire(Direction::tx, qid);
    return r;
  }

  bool pending(Direction dir, std::uint16_t qid) const override {
    return dir == Direction::rx ? in(qid).has_data() : out(qid).has_room();
  }

  void do_start() override {
    LoopbackDevice* other = wiring_->side[1 - side_];
    if (other == nullptr || other->state() != DeviceState::running) return;
    for (int s = 0; s < 2; ++s) {
      LoopbackDevice* from = wiring_->side[s];
      LoopbackDevice* to = wiring_->side[1 - s];
      const auto n = std::min(from->queue_count(Direction::tx), to->queue_count(Direction::rx));
      for (std::uint16_t q = 0; q < n; ++q) {
        const auto cap = std::min(from->queue_capacity(Direction::tx, q),
                                  to->queue_capacity(Direction::rx, q));
        wiring_->links[s].push_back(std::make_unique<Link>(cap));
      }
    }
    wiring_->bound = true;
  }

 private:
  LoopbackDevice& peer() const {
    LoopbackDevice* p = wiring_->side[1 - side_];
    if (p == nullptr) raise(Errc::wrong_state, "loopback peer is gone");
    return *p;
  }

  Link& out(std::uint16_t qid) const { return link(side_, qid); }
  Link& in(std::uint16_t qid) const { return link(1 - side_, qid); }

  Link& link(int s, std::uint16_t qid) const {
    if (!wiring_->bound) raise(Errc::wrong_state, "loopback peer not running");
    auto& list = wiring_->links[s];
    if (qid >= list.size()) raise(Errc::wrong_state, "peer has no matching queue");
    return *list[qid];
  }

  std::shared_ptr<Wiring> wiring_;
  int side_;
};

}  // namespace

std::pair<std::unique_ptr<NetDevice>, std::unique_ptr<NetDevice>> loopback_pair(
    Capabilities caps) {
  auto w = std::make_shared<Wiring>();
  auto a = std::make_unique<LoopbackDevice>(caps, w, 0);
  auto b = std::make_unique<LoopbackDevice>(caps, w, 1);
  return {std::move(a), std::move(b)};
}

}  // namespace uk::net

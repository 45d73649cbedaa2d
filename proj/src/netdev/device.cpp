#include <bit>

#include "uk/error.hpp"
#include "uk/netdev.hpp"

namespace uk::net {

namespace {

thread_local int callback_depth = 0;

struct CallbackScope {
  CallbackScope() { ++callback_depth; }
  ~CallbackScope() { --callback_depth; }
};

}  // namespace

std::string_view to_string(Direction d) noexcept { return d == Direction::tx ? "tx" : "rx"; }

std::string_view to_string(DeviceState s) noexcept {
  switch (s) {
    case DeviceState::unconfigured: return "unconfigured";
    case DeviceState::configured: return "configured";
    case DeviceState::running: return "running";
  }
  return "?";
}

NetDevice::NetDevice(Backend backend, Capabilities caps) : backend_(backend), caps_(caps) {}

NetDevice::~NetDevice() = default;

void NetDevice::configure(std::uint16_t num_tx_queues, std::uint16_t num_rx_queues) {
  if (state_ != DeviceState::unconfigured) raise(Errc::wrong_state, "device already configured");
  if (num_tx_queues > caps_.max_queues || num_rx_queues > caps_.max_queues) {
    raise(Errc::too_many_queues, "queue count exceeds max_queues");
  }
  for (std::uint16_t i = 0; i < num_tx_queues; ++i) tx_.push_back(std::make_unique<Queue>());
  for (std::uint16_t i = 0; i < num_rx_queues; ++i) rx_.push_back(std::make_unique<Queue>());
  state_ = DeviceState::configured;
}

void NetDevice::queue_configure(Direction dir, std::uint16_t qid, std::uint32_t capacity,
                                alloc::Allocator& a, QueueCallback callback) {
  if (state_ != DeviceState::configured) raise(Errc::wrong_state, "device not in configured state");
  auto& list = dir == Direction::tx ? tx_ : rx_;
  if (qid >= list.size()) raise(Errc::bad_queue_id, "queue id beyond configured count");
  if (capacity == 0 || !std::has_single_bit(capacity)) {
    raise(Errc::bad_capacity, "queue capacity must be a power of two");
  }
  Queue& q = *list[qid];
  q.configured = true;
  q.capacity = capacity;
  q.alloc = &a;
  q.callback = std::move(callback);
  q.mode = QueueMode::polling;
  q.arm.store(Arm::idle);
}

void NetDevice::start() {
  if (state_ != DeviceState::configured) raise(Errc::wrong_state, "device not in configured state");
  for (auto* list : {&tx_, &rx_}) {
    for (auto& q : *list) {
      if (!q->configured) raise(Errc::wrong_state, "unconfigured queue at start");
    }
  }
  state_ = DeviceState::running;
  do_start();
}

NetDevice::Queue& NetDevice::queue(Direction dir, std::uint16_t qid) {
  auto& list = dir == Direction::tx ? tx_ : rx_;
  if (qid >= list.size() || !list[qid]->configured) raise(Errc::bad_queue_id, "no such queue");
  return *list[qid];
}

const NetDevice::Queue& NetDevice::queue(Direction dir, std::uint16_t qid) const {
  return const_cast<NetDevice*>(this)->queue(dir, qid);
}

std::uint16_t NetDevice::queue_count(Direction dir) const noexcept {
  return static_cast<std::uint16_t>(dir == Direction::tx ? tx_.size() : rx_.size());
}

std::uint32_t NetDevice::queue_capacity(Direction dir, std::uint16_t qid) const {
  return queue(dir, qid).capacity;
}

QueueMode NetDevice::queue_mode(Direction dir, std::uint16_t qid) const {
  return queue(dir, qid).mode;
}

bool NetDevice::queue_armed(Direction dir, std::uint16_t qid) const {
  return queue(dir, qid).arm.load() == Arm::armed;
}

std::uint64_t NetDevice::queue_callbacks(Direction dir, std::uint16_t qid) const {
  return queue(dir, qid).callbacks.load();
}

std::uint64_t NetDevice::queue_armings(Direction dir, std::uint16_t qid) const {
  return queue(dir, qid).armings;
}

void NetDevice::check_burst(std::uint16_t qid, Direction dir) const {
  if (callback_depth > 0) raise(Errc::wrong_state, "burst call from inside a queue callback");
  if (state_ != DeviceState::running) raise(Errc::wrong_state, "device not running");
  queue(dir, qid);
}

BurstStatus NetDevice::tx_burst(std::uint16_t qid, NetBuf* const* pkts, std::uint16_t& cnt) {
  check_burst(qid, Direction::tx);
  Queue& q = *tx_[qid];
  const auto [n, full] = do_tx(qid, pkts, cnt);
  cnt = n;
  if (q.mode == QueueMode::interrupt) {
    if (!full) {
      q.arm.store(Arm::idle);
    } else {
      arm(q);
      if (pending(Direction::tx, qid)) fire(Direction::tx, qid);
    }
  }
  return BurstStatus::from_exhausted(full);
}

BurstStatus NetDevice::rx_burst(std::uint16_t qid, NetBuf** pkts, std::uint16_t& cnt) {
  check_burst(qid, Direction::rx);
  Queue& q = *rx_[qid];
  const auto [n, empty] = do_rx(qid, pkts, cnt);
  cnt = n;
  if (q.mode == QueueMode::interrupt) {
    if (n > 0) q.arm.store(Arm::idle);
    if (empty) {
      arm(q);
      if (pending(Direction::rx, qid)) fire(Direction::rx, qid);
    }
  }
  return BurstStatus::from_exhausted(empty);
}

void NetDevice::queue_intr_enable(Direction dir, std::uint16_t qid, bool on) {
  Queue& q = queue(dir, qid);
  do_intr_enable(dir, qid, on);
  q.mode = on ? QueueMode::interrupt : QueueMode::polling;
  if (!on) q.arm.store(Arm::idle);
}

void NetDevice::arm(Queue& q) noexcept {
  if (q.arm.exchange(Arm::armed) != Arm::armed) ++q.armings;
}

void NetDevice::fire(Direction dir, std::uint16_t qid) {
  auto& list = dir == Direction::tx ? tx_ : rx_;
  if (qid >= list.size()) return;
  Queue& q = *list[qid];
  Arm expected = Arm::armed;
  if (!q.arm.compare_exchange_strong(expected, Arm::fired)) return;
  q.callbacks.fetch_add(1, std::memory_order_relaxed);
  if (q.callback) {
    CallbackScope scope;
    q.callback(*this, dir, qid);
  }
}

void NetDevice::mark_queued(NetBuf* b) {
  if (b == nullptr) raise(Errc::invalid_argument, "null netbuf in burst");
  if (b->in_flight_) raise(Errc::buffer_busy, "netbuf already queued");
  b->in_flight_ = true;
}

void NetDevice::mark_dequeued(NetBuf* b) noexcept { b->in_flight_ = false; }

}  // namespace uk::net

#pragma once

// uknetdev: burst packet I/O over application-owned buffers.
//
// The application allocates NetBufs, hands arrays of them to tx_burst and
// gets arrays back from rx_burst. Both calls take the count by reference and
// overwrite it with the number actually moved. Ownership of an accepted tx
// buffer passes to the device; every buffer returned by rx_burst belongs to
// the caller, who releases it with netbuf_free().
//
// Callbacks run synchronously on whichever context produced the edge. Burst
// calls from inside a callback are rejected with wrong_state.

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "uk/alloc.hpp"

namespace uk::net {

class NetBufPool;

// Header and storage live in one allocation from the origin allocator.
class NetBuf {
 public:
  std::byte* storage() noexcept { return storage_; }
  std::uint32_t capacity() const noexcept { return capacity_; }
  std::uint32_t headroom() const noexcept { return headroom_; }
  std::uint32_t data_offset() const noexcept { return data_offset_; }
  std::uint32_t data_len() const noexcept { return data_len_; }
  std::uint32_t tailroom() const noexcept { return capacity_ - data_offset_ - data_len_; }

  std::byte* data() noexcept { return storage_ + data_offset_; }
  const std::byte* data() const noexcept { return storage_ + data_offset_; }
  std::span<const std::byte> payload() const noexcept { return {data(), data_len_}; }

  // Throws out_of_range if the payload would run past capacity.
  void set_len(std::uint32_t len);
  void set_offset(std::uint32_t offset);
  void assign(std::span<const std::byte> bytes);
  void reset() noexcept;

  alloc::Allocator* origin_allocator() const noexcept { return alloc_; }
  NetBufPool* origin_pool() const noexcept { return pool_; }

  // Bumped on every free; rings record it to catch stale references.
  std::uint32_t generation() const noexcept { return generation_; }
  bool in_flight() const noexcept { return in_flight_; }

 private:
  friend NetBuf* try_netbuf_alloc(alloc::Allocator&, std::uint32_t, std::uint32_t);
  friend void netbuf_free(NetBuf*);
  friend class NetBufPool;
  friend class NetDevice;

  NetBuf() = default;

  std::byte* storage_ = nullptr;
  std::uint32_t capacity_ = 0;
  std::uint32_t headroom_ = 0;
  std::uint32_t data_offset_ = 0;
  std::uint32_t data_len_ = 0;
  alloc::Allocator* alloc_ = nullptr;
  NetBufPool* pool_ = nullptr;
  std::uint32_t generation_ = 0;
  bool in_flight_ = false;
  bool pooled_free_ = false;
};

// capacity == headroom + payload_capacity; data_offset == headroom.
NetBuf* try_netbuf_alloc(alloc::Allocator& a, std::uint32_t payload_capacity,
                         std::uint32_t headroom);
// As above but throws out_of_memory.
NetBuf* netbuf_alloc(alloc::Allocator& a, std::uint32_t payload_capacity, std::uint32_t headroom);
// Returns the buffer to its pool or allocator. Throws buffer_busy if the
// buffer still sits on a ring. Null is ignored.
void netbuf_free(NetBuf* buf);

// Fixed set of equally sized buffers carved out up front.
class NetBufPool {
 public:
  NetBufPool(alloc::Allocator& a, std::size_t count, std::uint32_t payload_capacity,
             std::uint32_t headroom);
  NetBufPool(const NetBufPool&) = delete;
  NetBufPool& operator=(const NetBufPool&) = delete;
  ~NetBufPool();

  NetBuf* try_alloc() noexcept;
  NetBuf* alloc();  // throws out_of_memory when exhausted

  std::size_t size() const noexcept { return all_.size(); }
  std::size_t available() const noexcept { return free_.size(); }

 private:
  friend void netbuf_free(NetBuf*);
  void put(NetBuf* b) noexcept;

  alloc::Allocator& alloc_;
  std::vector<NetBuf*> all_;
  std::vector<NetBuf*> free_;
};

enum class Direction : std::uint8_t { tx, rx };
enum class QueueMode : std::uint8_t { polling, interrupt };
enum class DeviceState : std::uint8_t { unconfigured, configured, running };
enum class Backend : std::uint8_t { loopback, host_udp };

std::string_view to_string(Direction d) noexcept;
std::string_view to_string(DeviceState s) noexcept;

// Two-bit status word. Tx reports MORE_ROOM/FULL, rx MORE_PKTS/EMPTY.
struct BurstStatus {
  static constexpr std::uint8_t kMore = 0x1;
  static constexpr std::uint8_t kFullOrEmpty = 0x2;

  std::uint8_t flags = 0;

  bool more_room() const noexcept { return flags & kMore; }
  bool full() const noexcept { return flags & kFullOrEmpty; }
  bool more_pkts() const noexcept { return flags & kMore; }
  bool empty() const noexcept { return flags & kFullOrEmpty; }

  static BurstStatus from_exhausted(bool exhausted) noexcept {
    return {exhausted ? kFullOrEmpty : kMore};
  }
};

struct Capabilities {
  std::uint16_t max_queues = 1;
  std::uint16_t max_burst = 64;
};

inline constexpr std::uint32_t kDefaultQueueCapacity = 256;

class NetDevice;
using QueueCallback = std::function<void(NetDevice&, Direction, std::uint16_t qid)>;

class NetDevice {
 public:
  NetDevice(const NetDevice&) = delete;
  NetDevice& operator=(const NetDevice&) = delete;
  virtual ~NetDevice();

  void configure(std::uint16_t num_tx_queues, std::uint16_t num_rx_queues);
  // `a` backs buffers the driver itself has to allocate (host receive).
  void queue_configure(Direction dir, std::uint16_t qid, std::uint32_t capacity,
                       alloc::Allocator& a, QueueCallback callback = {});
  // Requires every queue to be configured.
  void start();

  BurstStatus tx_burst(std::uint16_t qid, NetBuf* const* pkts, std::uint16_t& cnt);
  BurstStatus rx_burst(std::uint16_t qid, NetBuf** pkts, std::uint16_t& cnt);
  void queue_intr_enable(Direction dir, std::uint16_t qid, bool on);

  DeviceState state() const noexcept { return state_; }
  Capabilities capabilities() const noexcept { return caps_; }
  Backend backend() const noexcept { return backend_; }
  std::uint16_t queue_count(Direction dir) const noexcept;
  std::uint32_t queue_capacity(Direction dir, std::uint16_t qid) const;
  QueueMode queue_mode(Direction dir, std::uint16_t qid) const;
  bool queue_armed(Direction dir, std::uint16_t qid) const;
  // Number of times the queue's callback has fired.
  std::uint64_t queue_callbacks(Direction dir, std::uint16_t qid) const;
  std::uint64_t queue_armings(Direction dir, std::uint16_t qid) const;

 protected:
  enum class Arm : std::uint8_t { idle, armed, fired };

  struct Queue {
    bool configured = false;
    std::uint32_t capacity = 0;
    alloc::Allocator* alloc = nullptr;
    QueueCallback callback;
    QueueMode mode = QueueMode::polling;
    std::atomic<Arm> arm{Arm::idle};
    std::uint64_t armings = 0;
    std::atomic<std::uint64_t> callbacks{0};
  };

  NetDevice(Backend backend, Capabilities caps);

  Queue& queue(Direction dir, std::uint16_t qid);
  const Queue& queue(Direction dir, std::uint16_t qid) const;

  void arm(Queue& q) noexcept;
  // armed -> fired exactly once per arming; runs the callback on success.
  void fire(Direction dir, std::uint16_t qid);

  static void mark_queued(NetBuf* b);
  static void mark_dequeued(NetBuf* b) noexcept;

  // Moves at most `cnt` buffers; returns how many, plus whether the ring is
  // full (tx) or empty (rx) afterwards.
  virtual std::pair<std::uint16_t, bool> do_tx(std::uint16_t qid, NetBuf* const* pkts,
                                               std::uint16_t cnt) = 0;
  virtual std::pair<std::uint16_t, bool> do_rx(std::uint16_t qid, NetBuf** pkts,
                                               std::uint16_t cnt) = 0;
  virtual void do_start() {}
  virtual void do_intr_enable(Direction, std::uint16_t, bool) {}
  // Re-check after arming: true if work is already pending again.
  virtual bool pending(Direction dir, std::uint16_t qid) const = 0;

 private:
  void check_burst(std::uint16_t qid, Direction dir) const;

  Backend backend_;
  Capabilities caps_;
  DeviceState state_ = DeviceState::unconfigured;
  std::vector<std::unique_ptr<Queue>> tx_;
  std::vector<std::unique_ptr<Queue>> rx_;
};

// Device A's tx queue q feeds device B's rx queue q and vice versa. The ring
// between them is sized min(tx capacity, rx capacity) and binds once both
// devices are running.
std::pair<std::unique_ptr<NetDevice>, std::unique_ptr<NetDevice>> loopback_pair(
    Capabilities caps = {});

// One payload per datagram over a host UDP socket, polling only. `local` and
// `remote` are "host:port"; port 0 in `local` picks an ephemeral port.
std::unique_ptr<NetDevice> make_host_udp(const std::string& local, const std::string& remote);
std::uint16_t host_udp_local_port(const NetDevice& dev);

}  // namespace uk::net

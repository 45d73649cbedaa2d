#include <cstring>
#include <new>

#include "uk/error.hpp"
#include "uk/netdev.hpp"

namespace uk::net {

namespace {
constexpr std::size_t kHeaderBytes = (sizeof(NetBuf) + alloc::kMinAlign - 1) & ~(alloc::kMinAlign - 1);
}

void NetBuf::set_len(std::uint32_t len) {
  if (std::uint64_t{data_offset_} + len > capacity_) raise(Errc::out_of_range, "netbuf length");
  data_len_ = len;
}

void NetBuf::set_offset(std::uint32_t offset) {
  if (offset < headroom_ || std::uint64_t{offset} + data_len_ > capacity_) {
    raise(Errc::out_of_range, "netbuf offset");
  }
  data_offset_ = offset;
}

void NetBuf::assign(std::span<const std::byte> bytes) {
  if (bytes.size() > capacity_ - data_offset_) raise(Errc::out_of_range, "netbuf payload");
  std::memcpy(data(), bytes.data(), bytes.size());
  data_len_ = static_cast<std::uint32_t>(bytes.size());
}

void NetBuf::reset() noexcept {
  data_offset_ = headroom_;
  data_len_ = 0;
}

NetBuf* try_netbuf_alloc(alloc::Allocator& a, std::uint32_t payload_capacity,
                         std::uint32_t headroom) {
  if (payload_capacity == 0) raise(Errc::invalid_argument, "netbuf payload capacity is zero");
  const std::uint64_t capacity = std::uint64_t{payload_capacity} + headroom;
  if (capacity > UINT32_MAX) raise(Errc::invalid_argument, "netbuf capacity overflows");
  void* mem = a.allocate(kHeaderBytes + capacity);
  if (mem == nullptr) return nullptr;
  auto* b = new (mem) NetBuf;
  b->storage_ = static_cast<std::byte*>(mem) + kHeaderBytes;
  b->capacity_ = static_cast<std::uint32_t>(capacity);
  b->headroom_ = headroom;
  b->data_offset_ = headroom;
  b->alloc_ = &a;
  return b;
}

NetBuf* netbuf_alloc(alloc::Allocator& a, std::uint32_t payload_capacity, std::uint32_t headroom) {
  NetBuf* b = try_netbuf_alloc(a, payload_capacity, headroom);
  if (b == nullptr) raise(Errc::out_of_memory, "netbuf allocation");
  return b;
}

void netbuf_free(NetBuf* buf) {
  if (buf == nullptr) return;
  if (buf->in_flight_) raise(Errc::buffer_busy, "netbuf is still queued on a ring");
  if (buf->pool_ != nullptr) {
    if (buf->pooled_free_) raise(Errc::double_release, "netbuf returned to its pool twice");
    ++buf->generation_;
    buf->pool_->put(buf);
    return;
  }
  ++buf->generation_;
  alloc::Allocator* a = buf->alloc_;
  buf->~NetBuf();
  a->release(buf);
}

NetBufPool::NetBufPool(alloc::Allocator& a, std::size_t count, std::uint32_t payload_capacity,
                       std::uint32_t headroom)
    : alloc_(a) {
  all_.reserve(count);
  free_.reserve(count);
  try {
    for (std::size_t i = 0; i < count; ++i) {
      NetBuf* b = netbuf_alloc(a, payload_capacity, headroom);
      b->pool_ = this;
      b->pooled_free_ = true;
      all_.push_back(b);
    }
  } catch (...) {
    for (NetBuf* b : all_) alloc_.release(b);
    throw;
  }
  // Hand buffers out lowest address first.
  free_.assign(all_.rbegin(), all_.rend());
}

NetBufPool::~NetBufPool() {
  for (NetBuf* b : all_) {
    b->~NetBuf();
    alloc_.release(b);
  }
}

NetBuf* NetBufPool::try_alloc() noexcept {
  if (free_.empty()) return nullptr;
  NetBuf* b = free_.back();
  free_.pop_back();
  b->pooled_free_ = false;
  return b;
}

NetBuf* NetBufPool::alloc() {
  NetBuf* b = try_alloc();
  if (b == nullptr) raise(Errc::out_of_memory, "netbuf pool exhausted");
  return b;
}

void NetBufPool::put(NetBuf* b) noexcept {
  b->reset();
  b->pooled_free_ = true;
  free_.push_back(b);
}

}  // namespace uk::net

#include <netdb.h>
#include <sys/ioctl.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <vector>

#include "uk/error.hpp"
#include "uk/netdev.hpp"

namespace uk::net {

namespace {

constexpr std::uint32_t kMaxDatagram = 2048;

sockaddr_storage resolve(const std::string& endpoint, socklen_t& len) {
  const auto colon = endpoint.rfind(':');
  if (colon == std::string::npos) raise(Errc::invalid_argument, "endpoint must be host:port");
  const std::string host = endpoint.substr(0, colon);
  const std::string port = endpoint.substr(colon + 1);
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_DGRAM;
  addrinfo* res = nullptr;
  if (getaddrinfo(host.c_str(), port.c_str(), &hints, &res) != 0 || res == nullptr) {
    raise(Errc::invalid_argument, "cannot resolve " + endpoint);
  }
  sockaddr_storage out{};
  std::memcpy(&out, res->ai_addr, res->ai_addrlen);
  len = res->ai_addrlen;
  freeaddrinfo(res);
  return out;
}

class HostUdpDevice final : public NetDevice {
 public:
  HostUdpDevice(const std::string& local, const std::string& remote)
      : NetDevice(Backend::host_udp, Capabilities{1, 64}) {
    fd_ = ::socket(AF_INET, SOCK_DGRAM | SOCK_NONBLOCK | SOCK_CLOEXEC, 0);
    if (fd_ < 0) raise(Errc::io_error, std::string("socket: ") + std::strerror(errno));
    socklen_t len = 0;
    const sockaddr_storage l = resolve(local, len);
    if (::bind(fd_, reinterpret_cast<const sockaddr*>(&l), len) != 0) {
      const int e = errno;
      ::close(fd_);
      raise(Errc::io_error, std::string("bind: ") + std::strerror(e));
    }
    remote_ = resolve(remote, remote_len_);
  }

  ~HostUdpDevice() override { ::close(fd_); }

  std::uint16_t local_port() const {
    sockaddr_storage a{};
    socklen_t len = sizeof(a);
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&a), &len);
    return ntohs(reinterpret_cast<const sockaddr_in&>(a).sin_port);
  }

 protected:
  std::pair<std::uint16_t, bool> do_tx(std::uint16_t, NetBuf* const* pkts,
                                       std::uint16_t cnt) override {
    std::vector<mmsghdr> msgs(cnt);
    std::vector<iovec> iov(cnt);
    for (std::uint16_t i = 0; i < cnt; ++i) {
      iov[i] = {pkts[i]->data(), pkts[i]->data_len()};
      msgs[i] = {};
      msgs[i].msg_hdr.msg_name = &remote_;
      msgs[i].msg_hdr.msg_namelen = remote_len_;
      msgs[i].msg_hdr.msg_iov = &iov[i];
      msgs[i].msg_hdr.msg_iovlen = 1;
    }
    int sent = cnt == 0 ? 0 : ::sendmmsg(fd_, msgs.data(), cnt, 0);
    if (sent < 0) {
      if (errno != EAGAIN && errno != EWOULDBLOCK && errno != ECONNREFUSED) {
        raise(Errc::io_error, std::string("sendmmsg: ") + std::strerror(errno));
      }
      sent = 0;
    }
    // Transmission completes synchronously, so accepted buffers go straight
    // back to their origin.
    for (int i = 0; i < sent; ++i) netbuf_free(pkts[i]);
    return {static_cast<std::uint16_t>(sent), sent < cnt};
  }

  std::pair<std::uint16_t, bool> do_rx(std::uint16_t qid, NetBuf** pkts,
                                       std::uint16_t cnt) override {
    alloc::Allocator& a = *queue(Direction::rx, qid).alloc;
    std::vector<mmsghdr> msgs;
    std::vector<iovec> iov;
    msgs.reserve(cnt);
    iov.reserve(cnt);
    std::uint16_t have = 0;
    for (; have < cnt; ++have) {
      NetBuf* b = try_netbuf_alloc(a, kMaxDatagram, 0);
      if (b == nullptr) break;
      pkts[have] = b;
      iov.push_back({b->data(), kMaxDatagram});
    }
    for (std::uint16_t i = 0; i < have; ++i) {
      mmsghdr m{};
      m.msg_hdr.msg_iov = &iov[i];
      m.msg_hdr.msg_iovlen = 1;
      msgs.push_back(m);
    }
    int got = have == 0 ? 0 : ::recvmmsg(fd_, msgs.data(), have, MSG_DONTWAIT, nullptr);
    if (got < 0) {
      if (errno != EAGAIN && errno != EWOULDBLOCK && errno != ECONNREFUSED) {
        const int e = errno;
        for (std::uint16_t i = 0; i < have; ++i) netbuf_free(pkts[i]);
        raise(Errc::io_error, std::string("recvmmsg: ") + std::strerror(e));
      }
      got = 0;
    }
    for (int i = 0; i < got; ++i) pkts[i]->set_len(msgs[i].msg_len);
    for (std::uint16_t i = static_cast<std::uint16_t>(got); i < have; ++i) netbuf_free(pkts[i]);
    int queued = 0;
    ::ioctl(fd_, FIONREAD, &queued);
    return {static_cast<std::uint16_t>(got), queued == 0};
  }

  bool pending(Direction, std::uint16_t) const override { return false; }

  void do_intr_enable(Direction, std::uint16_t, bool on) override {
    if (on) raise(Errc::not_supported, "host_udp queues are polling only");
  }

 private:
  int fd_ = -1;
  sockaddr_storage remote_{};
  socklen_t remote_len_ = 0;
};

}  // namespace

std::unique_ptr<NetDevice> make_host_udp(const std::string& local, const std::string& remote) {
  return std::make_unique<HostUdpDevice>(local, remote);
}

std::uint16_t host_udp_local_port(const NetDevice& dev) {
  const auto* d = dynamic_cast<const HostUdpDevice*>(&dev);
  if (d == nullptr) raise(Errc::invalid_argument, "not a host_udp device");
  return d->local_port();
}

}  // namespace uk::net

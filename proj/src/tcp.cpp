#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <thread>

#include "fedwad/error.hpp"
#include "fedwad/transport.hpp"

namespace fedwad::net {
namespace {

[[noreturn]] void fail(const std::string& what) {
  throw Error(ErrorCode::TransportError, what + ": " + std::strerror(errno));
}

class TcpChannel : public Channel {
 public:
  explicit TcpChannel(int fd) : fd_(fd) {
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  }
  ~TcpChannel() override { close(); }

  void send(const Frame& frame) override {
    const Bytes bytes = encode_frame(frame);
    std::size_t off = 0;
    while (off < bytes.size()) {
      const ssize_t k = ::send(fd_, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
      if (k < 0) {
        if (errno == EINTR) continue;
        fail("send");
      }
      off += static_cast<std::size_t>(k);
    }
  }

  Frame receive() override {
    std::uint8_t header[kFrameHeaderSize];
    read_exact(header, sizeof header);
    const FrameHeader h = decode_header(header);
    Frame frame{h.type, Bytes(h.payload_len)};
    read_exact(frame.payload.data(), frame.payload.size());
    return frame;
  }

  void close() override {
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  void read_exact(std::uint8_t* out, std::size_t n) {
    if (fd_ < 0) throw Error(ErrorCode::TransportError, "channel is closed");
    std::size_t off = 0;
    while (off < n) {
      const ssize_t k = ::recv(fd_, out + off, n - off, 0);
      if (k == 0) throw Error(ErrorCode::TransportError, "peer closed the connection");
      if (k < 0) {
        if (errno == EINTR) continue;
        fail("recv");
      }
      off += static_cast<std::size_t>(k);
    }
  }

  int fd_;
};

addrinfo* resolve(const Endpoint& ep, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(ep.port);
  const int rc = ::getaddrinfo(ep.host.empty() ? nullptr : ep.host.c_str(), port.c_str(), &hints, &res);
  if (rc != 0) {
    throw Error(ErrorCode::TransportError,
                "cannot resolve " + ep.host + ": " + ::gai_strerror(rc));
  }
  return res;
}

}  // namespace

std::unique_ptr<Channel> tcp_connect(const Endpoint& ep, std::chrono::milliseconds timeout) {
  addrinfo* res = resolve(ep, false);
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  std::string last_error = "no address";
  // A listener that is still starting up refuses connections; retry until the deadline.
  while (true) {
    for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
      const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
      if (fd < 0) continue;
      if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
        ::freeaddrinfo(res);
        return std::make_unique<TcpChannel>(fd);
      }
      last_error = std::strerror(errno);
      ::close(fd);
    }
    if (std::chrono::steady_clock::now() >= deadline) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  ::freeaddrinfo(res);
  throw Error(ErrorCode::TransportError, "cannot connect to " + ep.host + ":" +
                                             std::to_string(ep.port) + ": " + last_error);
}

TcpListener::TcpListener(const Endpoint& bind) {
  addrinfo* res = resolve(bind, true);
  fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd_ < 0) {
    ::freeaddrinfo(res);
    fail("socket");
  }
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(fd_, res->ai_addr, res->ai_addrlen) != 0 || ::listen(fd_, 4) != 0) {
    ::freeaddrinfo(res);
    const int saved = errno;
    ::close(fd_);
    errno = saved;
    fail("cannot listen on " + bind.host + ":" + std::to_string(bind.port));
  }
  ::freeaddrinfo(res);
  sockaddr_in addr{};
  socklen_t len = sizeof addr;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() { close(); }

void TcpListener::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

std::unique_ptr<Channel> TcpListener::accept() {
  while (true) {
    const int fd = ::accept(fd_, nullptr, nullptr);
    if (fd >= 0) return std::make_unique<TcpChannel>(fd);
    if (errno != EINTR) fail("accept");
  }
}

}  // namespace fedwad::net

#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "fedwad/protocol.hpp"

namespace fedwad::net {

/// Ordered, reliable stream of whole frames. Failures (peer gone, socket
/// error) surface as Error(ErrorCode::TransportError).
class Channel {
 public:
  virtual ~Channel() = default;
  virtual void send(const Frame& frame) = 0;
  virtual Frame receive() = 0;
  virtual void close() = 0;
};

/// Two connected in-process endpoints. Frames are serialized and parsed on the
/// way through, so the byte stream is the same as over TCP.
std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> make_channel_pair();

/// Wraps a channel and keeps a copy of every frame in both directions.
class RecordingChannel : public Channel {
 public:
  enum class Direction { Sent, Received };
  struct Entry {
    Direction direction;
    Bytes bytes;  // the complete encoded frame
  };

  explicit RecordingChannel(Channel& inner) : inner_(inner) {}

  void send(const Frame& frame) override;
  Frame receive() override;
  void close() override { inner_.close(); }

  std::vector<Entry> entries() const;

 private:
  Channel& inner_;
  mutable std::mutex mu_;
  std::vector<Entry> entries_;
};

/// Test hook: forwards frames until `limit` frames have been received, then
/// closes the inner channel and fails like a dropped connection.
class FaultyChannel : public Channel {
 public:
  FaultyChannel(Channel& inner, std::size_t receive_limit)
      : inner_(inner), remaining_(receive_limit) {}

  void send(const Frame& frame) override { inner_.send(frame); }
  Frame receive() override;
  void close() override { inner_.close(); }

 private:
  Channel& inner_;
  std::size_t remaining_;
};

struct Endpoint {
  std::string host;
  std::uint16_t port = 0;
};

/// Parses "host:port"; throws InvalidParameter.
Endpoint parse_endpoint(const std::string& text);

/// Dials a listening client. Throws Error(TransportError) when unreachable.
std::unique_ptr<Channel> tcp_connect(const Endpoint& ep,
                                     std::chrono::milliseconds timeout = std::chrono::seconds(5));

/// Listening socket for serve-client. Port 0 picks an ephemeral port.
class TcpListener {
 public:
  explicit TcpListener(const Endpoint& bind);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const noexcept { return port_; }
  std::unique_ptr<Channel> accept();
  void close();

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

}  // namespace fedwad::net

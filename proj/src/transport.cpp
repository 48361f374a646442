#include "fedwad/transport.hpp"

#include <charconv>
#include <condition_variable>
#include <deque>

#include "fedwad/error.hpp"

namespace fedwad::net {
namespace {

struct Pipe {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<Bytes> queue;
  bool closed = false;
};

class InProcessChannel : public Channel {
 public:
  InProcessChannel(std::shared_ptr<Pipe> out, std::shared_ptr<Pipe> in)
      : out_(std::move(out)), in_(std::move(in)) {}
  ~InProcessChannel() override { close(); }

  void send(const Frame& frame) override {
    Bytes bytes = encode_frame(frame);
    std::lock_guard lock(out_->mu);
    if (out_->closed) throw Error(ErrorCode::TransportError, "peer closed the channel");
    out_->queue.push_back(std::move(bytes));
    out_->cv.notify_one();
  }

  Frame receive() override {
    std::unique_lock lock(in_->mu);
    in_->cv.wait(lock, [&] { return !in_->queue.empty() || in_->closed; });
    if (in_->queue.empty()) throw Error(ErrorCode::TransportError, "connection closed");
    Bytes bytes = std::move(in_->queue.front());
    in_->queue.pop_front();
    lock.unlock();
    return decode_frame(bytes);
  }

  void close() override {
    for (auto* pipe : {out_.get(), in_.get()}) {
      std::lock_guard lock(pipe->mu);
      pipe->closed = true;
      pipe->cv.notify_all();
    }
  }

 private:
  std::shared_ptr<Pipe> out_;
  std::shared_ptr<Pipe> in_;
};

}  // namespace

std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> make_channel_pair() {
  auto ab = std::make_shared<Pipe>();
  auto ba = std::make_shared<Pipe>();
  return {std::make_unique<InProcessChannel>(ab, ba), std::make_unique<InProcessChannel>(ba, ab)};
}

void RecordingChannel::send(const Frame& frame) {
  {
    std::lock_guard lock(mu_);
    entries_.push_back({Direction::Sent, encode_frame(frame)});
  }
  inner_.send(frame);
}

Frame RecordingChannel::receive() {
  Frame frame = inner_.receive();
  std::lock_guard lock(mu_);
  entries_.push_back({Direction::Received, encode_frame(frame)});
  return frame;
}

std::vector<RecordingChannel::Entry> RecordingChannel::entries() const {
  std::lock_guard lock(mu_);
  return entries_;
}

Frame FaultyChannel::receive() {
  if (remaining_ == 0) {
    inner_.close();
    throw Error(ErrorCode::TransportError, "connection reset (injected)");
  }
  --remaining_;
  return inner_.receive();
}

Endpoint parse_endpoint(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0) {
    throw Error(ErrorCode::InvalidParameter, "expected host:port, got '" + text + "'");
  }
  Endpoint ep;
  ep.host = text.substr(0, colon);
  unsigned port = 0;
  const char* first = text.data() + colon + 1;
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, port);
  if (ec != std::errc() || ptr != last || first == last || port > 65535) {
    throw Error(ErrorCode::InvalidParameter, "bad port in '" + text + "'");
  }
  ep.port = static_cast<std::uint16_t>(port);
  return ep;
}

}  // namespace fedwad::net

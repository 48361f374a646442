#include "fedwad/protocol.hpp"

#include <bit>
#include <cstring>

#include "fedwad/error.hpp"

namespace fedwad::net {
namespace {

class Writer {
 public:
  explicit Writer(std::size_t reserve = 0) { out_.reserve(reserve); }

  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }

  Bytes take() { return std::move(out_); }

 private:
  void put(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  Bytes out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }

  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return in_.size() - pos_; }

  void expect_end(const char* what) const {
    if (remaining() != 0) {
      throw Error(ErrorCode::Truncated, std::string(what) + ": " + std::to_string(remaining()) +
                                            " trailing bytes");
    }
  }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) {
      throw Error(ErrorCode::Truncated, "need " + std::to_string(n) + " bytes, have " +
                                            std::to_string(remaining()));
    }
  }

  std::uint64_t get(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

bool known_type(std::uint8_t t) {
  switch (static_cast<MsgType>(t)) {
    case MsgType::Hello:
    case MsgType::XiBroadcast:
    case MsgType::InterpReply:
    case MsgType::Done:
    case MsgType::Error:
      return true;
  }
  return false;
}

void write_measure(Writer& w, const DiscreteMeasure& m) {
  if (m.size() > UINT32_MAX || m.dim() > UINT32_MAX) {
    throw Error(ErrorCode::InvalidParameter, "measure too large for the wire format");
  }
  w.u32(static_cast<std::uint32_t>(m.size()));
  w.u32(static_cast<std::uint32_t>(m.dim()));
  const Matrix& pts = m.points();
  for (Index i = 0; i < pts.size(); ++i) w.f64(pts.data()[i]);
  for (Index i = 0; i < m.size(); ++i) w.f64(m.weight(i));
}

DiscreteMeasure read_measure(Reader& r) {
  const std::uint64_t n = r.u32();
  const std::uint64_t d = r.u32();
  // Check the declared size against what is actually there before allocating.
  const std::uint64_t doubles = n * (d + 1);
  if (doubles > r.remaining() / 8) {
    throw Error(ErrorCode::Truncated, "measure declares " + std::to_string(n) + "x" +
                                          std::to_string(d) + " but only " +
                                          std::to_string(r.remaining()) + " bytes follow");
  }
  if (n == 0 || d == 0) throw Error(ErrorCode::ShapeMismatch, "empty measure on the wire");
  Matrix pts(static_cast<Index>(n), static_cast<Index>(d));
  for (Index i = 0; i < pts.size(); ++i) pts.data()[i] = r.f64();
  Vector w(static_cast<Index>(n));
  for (Index i = 0; i < w.size(); ++i) w[i] = r.f64();
  try {
    return DiscreteMeasure::from_normalized(std::move(pts), std::move(w));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NonFiniteValue) throw;
    throw Error(ErrorCode::WeightInvariantViolated, e.what());
  }
}

void write_options(Writer& w, const SessionOptions& o) {
  w.u8(static_cast<std::uint8_t>(o.role));
  w.u32(o.rounds);
  w.u8(static_cast<std::uint8_t>(o.report));
  w.u8(static_cast<std::uint8_t>(o.mode));
  w.u8(o.p);
  if (const auto* fixed = std::get_if<FixedT>(&o.t_policy)) {
    w.u8(0);
    w.f64(fixed->t);
    w.f64(0.0);
    w.u64(0);
  } else {
    const auto& rnd = std::get<UniformRandomT>(o.t_policy);
    w.u8(1);
    w.f64(rnd.lo);
    w.f64(rnd.hi);
    w.u64(rnd.seed);
  }
}

SessionOptions read_options(Reader& r) {
  SessionOptions o;
  const auto role = r.u8();
  if (role > 1) throw Error(ErrorCode::InvalidParameter, "session role must be 0 or 1");
  o.role = static_cast<Party>(role);
  o.rounds = r.u32();
  const auto report = r.u8();
  const auto mode = r.u8();
  if (report > 1 || mode > 1) throw Error(ErrorCode::InvalidParameter, "bad session option enum");
  o.report = static_cast<ReportPolicy>(report);
  o.mode = static_cast<InterpMode>(mode);
  o.p = r.u8();
  const auto kind = r.u8();
  const double a = r.f64();
  const double b = r.f64();
  const std::uint64_t seed = r.u64();
  if (kind == 0) {
    o.t_policy = FixedT{a};
  } else if (kind == 1) {
    o.t_policy = UniformRandomT{a, b, seed};
  } else {
    throw Error(ErrorCode::InvalidParameter, "unknown t policy kind");
  }
  return o;
}

}  // namespace

Bytes encode_frame(const Frame& frame) {
  if (frame.payload.size() > kMaxPayload) {
    throw Error(ErrorCode::InvalidParameter, "payload exceeds the frame size limit");
  }
  Writer w(kFrameHeaderSize + frame.payload.size());
  w.bytes(kMagic);
  w.u8(static_cast<std::uint8_t>(frame.type));
  w.u32(static_cast<std::uint32_t>(frame.payload.size()));
  w.bytes(frame.payload);
  return w.take();
}

FrameHeader decode_header(std::span<const std::uint8_t> header) {
  Reader r(header);
  auto magic = r.take(kMagic.size());
  if (!std::equal(magic.begin(), magic.end(), kMagic.begin())) {
    throw Error(ErrorCode::BadMagic, "frame does not start with FWD1");
  }
  const auto type = r.u8();
  if (!known_type(type)) {
    throw Error(ErrorCode::UnknownMessage, "unknown message type " + std::to_string(type));
  }
  const auto len = r.u32();
  if (len > kMaxPayload) throw Error(ErrorCode::Truncated, "payload length exceeds limit");
  return {static_cast<MsgType>(type), len};
}

Frame decode_frame(std::span<const std::uint8_t> bytes) {
  const FrameHeader h = decode_header(bytes.first(std::min(bytes.size(), kFrameHeaderSize)));
  if (bytes.size() - kFrameHeaderSize != h.payload_len) {
    throw Error(ErrorCode::Truncated, "payload_len " + std::to_string(h.payload_len) +
                                          " disagrees with " +
                                          std::to_string(bytes.size() - kFrameHeaderSize) +
                                          " payload bytes");
  }
  auto payload = bytes.subspan(kFrameHeaderSize);
  return {h.type, Bytes(payload.begin(), payload.end())};
}

std::size_t measure_blob_size(Index n, Index d) {
  return 8 + 8 * static_cast<std::size_t>(n) * static_cast<std::size_t>(d + 1);
}

Bytes encode_measure(const DiscreteMeasure& m) {
  Writer w(measure_blob_size(m.size(), m.dim()));
  write_measure(w, m);
  return w.take();
}

DiscreteMeasure decode_measure(std::span<const std::uint8_t> blob) {
  Reader r(blob);
  auto m = read_measure(r);
  r.expect_end("measure blob");
  return m;
}

Frame encode_message(const Message& msg) {
  Writer w;
  MsgType type{};
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Hello>) {
          type = MsgType::Hello;
          if (m.range.size() != 2 * static_cast<std::size_t>(m.dim)) {
            throw Error(ErrorCode::ShapeMismatch, "HELLO range must hold 2*d values");
          }
          w.u16(m.version);
          w.u32(m.dim);
          for (double v : m.range) w.f64(v);
          if (m.options) write_options(w, *m.options);
        } else if constexpr (std::is_same_v<T, XiBroadcast>) {
          type = MsgType::XiBroadcast;
          w.u32(m.round);
          write_measure(w, m.xi);
        } else if constexpr (std::is_same_v<T, InterpReply>) {
          type = MsgType::InterpReply;
          w.u32(m.round);
          write_measure(w, m.interp);
          const std::uint8_t flag = !m.distance ? 0 : (m.interp_distance ? 2 : 1);
          w.u8(flag);
          w.f64(m.distance.value_or(0.0));
          if (flag == 2) w.f64(*m.interp_distance);
        } else if constexpr (std::is_same_v<T, Done>) {
          type = MsgType::Done;
          w.f64(m.distance);
        } else {
          type = MsgType::Error;
          w.u16(m.code);
          w.bytes(std::span(reinterpret_cast<const std::uint8_t*>(m.message.data()),
                            m.message.size()));
        }
      },
      msg);
  return {type, w.take()};
}

Message decode_message(const Frame& frame) {
  Reader r(frame.payload);
  switch (frame.type) {
    case MsgType::Hello: {
      Hello h;
      h.version = r.u16();
      h.dim = r.u32();
      if (static_cast<std::uint64_t>(h.dim) * 16 > r.remaining()) {
        throw Error(ErrorCode::Truncated, "HELLO range shorter than 2*d doubles");
      }
      h.range.resize(2 * static_cast<std::size_t>(h.dim));
      for (double& v : h.range) v = r.f64();
      if (r.remaining() > 0) h.options = read_options(r);
      r.expect_end("HELLO");
      return h;
    }
    case MsgType::XiBroadcast: {
      const auto round = r.u32();
      auto xi = read_measure(r);
      r.expect_end("XI_BROADCAST");
      return XiBroadcast{round, std::move(xi)};
    }
    case MsgType::InterpReply: {
      const auto round = r.u32();
      auto interp = read_measure(r);
      const auto flag = r.u8();
      const double distance = r.f64();
      InterpReply reply{round, std::move(interp), std::nullopt, std::nullopt};
      if (flag > 2) throw Error(ErrorCode::InvalidParameter, "bad has_distance flag");
      if (flag >= 1) reply.distance = distance;
      if (flag == 2) reply.interp_distance = r.f64();
      r.expect_end("INTERP_REPLY");
      return reply;
    }
    case MsgType::Done: {
      Done d{r.f64()};
      r.expect_end("DONE");
      return d;
    }
    case MsgType::Error: {
      ErrorReply e;
      e.code = r.u16();
      auto rest = r.take(r.remaining());
      e.message.assign(rest.begin(), rest.end());
      return e;
    }
  }
  throw Error(ErrorCode::UnknownMessage, "unknown message type");
}

std::size_t measure_payload_bytes(const Frame& frame) {
  if (frame.type != MsgType::XiBroadcast && frame.type != MsgType::InterpReply) return 0;
  if (frame.payload.size() < 12) return 0;
  Reader r(std::span(frame.payload).subspan(4));
  const auto n = r.u32();
  const auto d = r.u32();
  return measure_blob_size(n, d);
}

}  // namespace fedwad::net

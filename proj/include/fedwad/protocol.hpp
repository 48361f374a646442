#pragma once

// FedWaD wire format. All integers and IEEE-754 doubles are little-endian.
//
//   frame   := magic "FWD1" | msg_type u8 | payload_len u32 | payload
//   measure := n u32 | d u32 | n*d f64 (points, row-major) | n f64 (weights)
//
//   HELLO        0x01  version u16 | d u32 | 2*d f64 range (lo_0, hi_0, lo_1, ...)
//                      [| session options, coordinator -> client only]
//   XI_BROADCAST 0x02  round u32 | measure
//   INTERP_REPLY 0x03  round u32 | measure | has_distance u8 | distance f64
//                      [| interp_distance f64, when has_distance == 2]
//   DONE         0x04  distance f64
//   ERROR        0x7F  code u16 | utf-8 message
//
// Session options (33 bytes): role u8 | rounds u32 | report u8 | mode u8 |
//   p u8 | t_kind u8 | t_a f64 | t_b f64 | t_seed u64

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fedwad/config.hpp"
#include "fedwad/measures.hpp"

namespace fedwad::net {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::array<std::uint8_t, 4> kMagic = {'F', 'W', 'D', '1'};
inline constexpr std::uint16_t kProtocolVersion = 1;
inline constexpr std::size_t kFrameHeaderSize = 9;
inline constexpr std::size_t kSessionOptionsSize = 33;
/// Upper bound on accepted payloads (1 GiB); larger headers are treated as corrupt.
inline constexpr std::uint32_t kMaxPayload = 1u << 30;

enum class MsgType : std::uint8_t {
  Hello = 0x01,
  XiBroadcast = 0x02,
  InterpReply = 0x03,
  Done = 0x04,
  Error = 0x7F,
};

/// ERROR message codes.
enum class WireError : std::uint16_t {
  VersionMismatch = 0x0001,
  MalformedFrame = 0x0002,
  DimensionMismatch = 0x0003,
  SolverFailure = 0x0004,
  UnexpectedMessage = 0x0005,
};

struct Frame {
  MsgType type{};
  Bytes payload;
};

struct FrameHeader {
  MsgType type{};
  std::uint32_t payload_len = 0;
};

Bytes encode_frame(const Frame& frame);
/// Validates magic and message type; throws BadMagic / UnknownMessage / Truncated.
FrameHeader decode_header(std::span<const std::uint8_t> header);
/// Decodes exactly one frame occupying the whole buffer.
Frame decode_frame(std::span<const std::uint8_t> bytes);

/// Encoded size of a measure blob: 8 + 8 n (d + 1).
std::size_t measure_blob_size(Index n, Index d);
Bytes encode_measure(const DiscreteMeasure& m);
/// Throws Truncated on any length disagreement, WeightInvariantViolated when
/// the decoded weights are off the simplex.
DiscreteMeasure decode_measure(std::span<const std::uint8_t> blob);

struct SessionOptions {
  Party role = Party::ClientMu;
  std::uint32_t rounds = 0;
  ReportPolicy report = ReportPolicy::LastRoundOnly;
  InterpMode mode = InterpMode::Approx;
  std::uint8_t p = 2;
  TPolicy t_policy = FixedT{};
};

struct Hello {
  std::uint16_t version = kProtocolVersion;
  std::uint32_t dim = 0;
  std::vector<double> range;  // 2*dim values, (lo, hi) per coordinate
  std::optional<SessionOptions> options;
};

struct XiBroadcast {
  std::uint32_t round = 0;
  DiscreteMeasure xi;
};

struct InterpReply {
  std::uint32_t round = 0;
  DiscreteMeasure interp;
  std::optional<double> distance;         // W_p(local, received xi)
  std::optional<double> interp_distance;  // W_p(local, returned interpolant)
};

struct Done {
  double distance = 0.0;
};

struct ErrorReply {
  std::uint16_t code = 0;
  std::string message;
};

using Message = std::variant<Hello, XiBroadcast, InterpReply, Done, ErrorReply>;

Frame encode_message(const Message& msg);
Message decode_message(const Frame& frame);

/// Bytes of measure blobs carried by a frame (0 for frames without one).
std::size_t measure_payload_bytes(const Frame& frame);

}  // namespace fedwad::net

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dms::mq {

enum class MessageKind : std::uint8_t { Data = 0, Null = 1, End = 2 };

std::string_view to_string(MessageKind kind);

struct TimestampedMessage {
  MessageKind kind = MessageKind::Data;
  double timestamp = 0.0;  // hours
  std::string label;       // sending LP id
  std::string body;        // empty unless kind == Data
  std::uint64_t seq = 0;   // per (sender, destination queue)

  friend bool operator==(const TimestampedMessage&, const TimestampedMessage&) = default;
};

inline constexpr std::size_t kMaxLabelBytes = 0xFFFF;
inline constexpr std::size_t kMaxBodyBytes = 0xFFFFFFFF;

class TransportError : public std::runtime_error {
 public:
  enum class Code { AlreadyBound, Unreachable, Closed, MalformedFrame, NotLocal, PeerLost, InvalidMessage };

  TransportError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

}  // namespace dms::mq

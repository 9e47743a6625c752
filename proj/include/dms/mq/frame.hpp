#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "dms/mq/message.hpp"

namespace dms::mq {

// Wire layout, all integers big-endian:
//
//   magic "DMS1"   4 bytes
//   kind           u8   (0 DATA, 1 NULL, 2 END)
//   timestamp      IEEE-754 binary64
//   label_len      u16, then label bytes (UTF-8)
//   body_len       u32, then body bytes (UTF-8)
//   seq            u64
using Frame = std::vector<std::uint8_t>;

inline constexpr std::size_t kFrameOverhead = 4 + 1 + 8 + 2 + 4 + 8;

bool is_valid_utf8(std::string_view text);

// Throws TransportError(InvalidMessage) for messages that cannot be framed:
// oversized or non-UTF-8 fields, body on NULL/END, negative or non-finite time.
Frame encode(const TimestampedMessage& msg);

// Decodes exactly one frame; trailing bytes are malformed.
TimestampedMessage decode(std::span<const std::uint8_t> bytes);

struct DecodedPrefix {
  TimestampedMessage message;
  std::size_t consumed = 0;
};

// Stream decoding: nullopt when `bytes` holds only part of a frame.
// Throws TransportError(MalformedFrame) as soon as the prefix is invalid.
std::optional<DecodedPrefix> decode_prefix(std::span<const std::uint8_t> bytes);

}  // namespace dms::mq

#include "dms/mq/frame.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include <fmt/format.h>

namespace dms::mq {
namespace {

constexpr std::uint8_t kMagic[4] = {'D', 'M', 'S', '1'};

[[noreturn]] void malformed(const std::string& why) {
  throw TransportError(TransportError::Code::MalformedFrame, "malformed frame: " + why);
}

[[noreturn]] void invalid(const std::string& why) {
  throw TransportError(TransportError::Code::InvalidMessage, "cannot encode message: " + why);
}

template <typename T>
std::uint8_t* put_be(std::uint8_t* out, T value) {
  for (int shift = (sizeof(T) - 1) * 8; shift >= 0; shift -= 8) {
    *out++ = static_cast<std::uint8_t>(value >> shift);
  }
  return out;
}

std::uint8_t* put_bytes(std::uint8_t* out, std::string_view bytes) {
  if (!bytes.empty()) std::memcpy(out, bytes.data(), bytes.size());
  return out + bytes.size();
}

template <typename T>
T get_be(const std::uint8_t* p) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value = static_cast<T>((value << 8) | p[i]);
  return value;
}

bool valid_kind(std::uint8_t k) { return k <= static_cast<std::uint8_t>(MessageKind::End); }

}  // namespace

std::string_view to_string(MessageKind kind) {
  switch (kind) {
    case MessageKind::Data:
      return "DATA";
    case MessageKind::Null:
      return "NULL";
    case MessageKind::End:
      return "END";
  }
  return "?";
}

bool is_valid_utf8(std::string_view text) {
  const auto* s = reinterpret_cast<const unsigned char*>(text.data());
  const std::size_t n = text.size();
  std::size_t i = 0;
  while (i < n) {
    const unsigned char c = s[i];
    if (c < 0x80) {
      ++i;
      continue;
    }
    std::size_t len;
    std::uint32_t cp;
    if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > n) return false;
    for (std::size_t k = 1; k < len; ++k) {
      if ((s[i + k] & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (s[i + k] & 0x3F);
    }
    // Overlong forms, surrogates, beyond U+10FFFF.
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000)) return false;
    if (cp >= 0xD800 && cp <= 0xDFFF) return false;
    if (cp > 0x10FFFF) return false;
    i += len;
  }
  return true;
}

Frame encode(const TimestampedMessage& msg) {
  if (!valid_kind(static_cast<std::uint8_t>(msg.kind))) invalid("unknown kind");
  if (!std::isfinite(msg.timestamp) || msg.timestamp < 0.0) invalid("timestamp must be finite and >= 0");
  if (msg.label.size() > kMaxLabelBytes) invalid(fmt::format("label of {} bytes", msg.label.size()));
  if (msg.body.size() > kMaxBodyBytes) invalid(fmt::format("body of {} bytes", msg.body.size()));
  if (msg.kind != MessageKind::Data && !msg.body.empty()) invalid("NULL/END messages carry no body");
  if (!is_valid_utf8(msg.label) || !is_valid_utf8(msg.body)) invalid("label/body must be UTF-8");

  Frame out(kFrameOverhead + msg.label.size() + msg.body.size());
  std::uint8_t* p = out.data();
  std::memcpy(p, kMagic, sizeof(kMagic));
  p += sizeof(kMagic);
  *p++ = static_cast<std::uint8_t>(msg.kind);
  p = put_be(p, std::bit_cast<std::uint64_t>(msg.timestamp));
  p = put_be(p, static_cast<std::uint16_t>(msg.label.size()));
  p = put_bytes(p, msg.label);
  p = put_be(p, static_cast<std::uint32_t>(msg.body.size()));
  p = put_bytes(p, msg.body);
  put_be(p, msg.seq);
  return out;
}

std::optional<DecodedPrefix> decode_prefix(std::span<const std::uint8_t> bytes) {
  const std::uint8_t* p = bytes.data();
  const std::size_t n = bytes.size();

  // Validate the magic on whatever prefix is available so garbage is rejected
  // without waiting for a full header.
  for (std::size_t i = 0; i < std::min<std::size_t>(n, 4); ++i) {
    if (p[i] != kMagic[i]) malformed("bad magic");
  }
  if (n < 5) return std::nullopt;
  if (!valid_kind(p[4])) malformed(fmt::format("invalid kind {}", p[4]));
  if (n < 4 + 1 + 8 + 2) return std::nullopt;

  TimestampedMessage msg;
  msg.kind = static_cast<MessageKind>(p[4]);
  msg.timestamp = std::bit_cast<double>(get_be<std::uint64_t>(p + 5));
  if (!std::isfinite(msg.timestamp) || msg.timestamp < 0.0) malformed("timestamp not finite and >= 0");

  std::size_t pos = 13;
  const std::size_t label_len = get_be<std::uint16_t>(p + pos);
  pos += 2;
  if (n < pos + label_len + 4) return std::nullopt;
  msg.label.assign(reinterpret_cast<const char*>(p + pos), label_len);
  pos += label_len;
  const std::size_t body_len = get_be<std::uint32_t>(p + pos);
  pos += 4;
  if (msg.kind != MessageKind::Data && body_len != 0) malformed("NULL/END frame with a body");
  if (n < pos + body_len + 8) return std::nullopt;
  msg.body.assign(reinterpret_cast<const char*>(p + pos), body_len);
  pos += body_len;
  msg.seq = get_be<std::uint64_t>(p + pos);
  pos += 8;

  if (!is_valid_utf8(msg.label)) malformed("label is not UTF-8");
  if (!is_valid_utf8(msg.body)) malformed("body is not UTF-8");
  return DecodedPrefix{std::move(msg), pos};
}

TimestampedMessage decode(std::span<const std::uint8_t> bytes) {
  auto decoded = decode_prefix(bytes);
  if (!decoded) malformed("truncated");
  if (decoded->consumed != bytes.size()) malformed("trailing bytes");
  return std::move(decoded->message);
}

}  // namespace dms::mq

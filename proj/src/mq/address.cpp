#include "dms/mq/address.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <stdexcept>

#include <fmt/format.h>

namespace dms::mq {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool iequals_prefix(std::string_view text, std::string_view prefix) {
  if (text.size() < prefix.size()) return false;
  return std::equal(prefix.begin(), prefix.end(), text.begin(), [](char a, char b) {
    return std::tolower(static_cast<unsigned char>(a)) == std::tolower(static_cast<unsigned char>(b));
  });
}

bool valid_name(std::string_view s) {
  return !s.empty() && std::none_of(s.begin(), s.end(), [](char c) {
    return c == '/' || c == '\\' || c == ':' || std::isspace(static_cast<unsigned char>(c));
  });
}

[[noreturn]] void bad(std::string_view text, std::string_view why) {
  throw std::invalid_argument(fmt::format("bad queue address '{}': {}", text, why));
}

// DIRECT=OS:host\private$\name  (spaces around '=' tolerated)
QueueAddress parse_direct(std::string_view original, std::string_view rest) {
  rest = trim(rest);
  if (rest.empty() || rest.front() != '=') bad(original, "expected '=' after DIRECT");
  rest = trim(rest.substr(1));
  if (iequals_prefix(rest, "OS:")) {
    rest.remove_prefix(3);
  } else if (iequals_prefix(rest, "TCP:")) {
    rest.remove_prefix(4);
  } else {
    bad(original, "expected OS: or TCP: protocol");
  }
  const auto sep = rest.find('\\');
  if (sep == std::string_view::npos) bad(original, "missing '\\' after host");
  const std::string_view host = trim(rest.substr(0, sep));
  std::string_view path = rest.substr(sep + 1);
  if (iequals_prefix(path, "private$\\")) path.remove_prefix(9);
  path = trim(path);
  if (!valid_name(host)) bad(original, "empty or invalid host");
  if (!valid_name(path)) bad(original, "empty or invalid queue name");
  QueueAddress addr;
  addr.host = std::string(host);
  addr.queue = std::string(path);
  return addr;
}

}  // namespace

QueueAddress QueueAddress::parse(std::string_view text) {
  const std::string_view t = trim(text);
  if (iequals_prefix(t, "DIRECT")) return parse_direct(text, t.substr(6));

  const auto slash = t.find('/');
  if (slash == std::string_view::npos) bad(text, "expected host[:port]/queue");
  std::string_view authority = t.substr(0, slash);
  const std::string_view queue = t.substr(slash + 1);
  if (!valid_name(queue)) bad(text, "empty or invalid queue name");

  QueueAddress addr;
  addr.queue = std::string(queue);
  const auto colon = authority.rfind(':');
  if (colon != std::string_view::npos) {
    const std::string_view port_text = authority.substr(colon + 1);
    unsigned value = 0;
    auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), value);
    if (ec != std::errc() || ptr != port_text.data() + port_text.size() || value == 0 || value > 65535) {
      bad(text, "invalid port");
    }
    addr.port = static_cast<std::uint16_t>(value);
    authority = authority.substr(0, colon);
  }
  if (!valid_name(authority)) bad(text, "empty or invalid host");
  addr.host = std::string(authority);
  return addr;
}

std::string QueueAddress::str() const {
  if (port) return fmt::format("{}:{}/{}", host, *port, queue);
  return fmt::format("{}/{}", host, queue);
}

}  // namespace dms::mq

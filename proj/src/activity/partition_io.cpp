#include <charconv>
#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "dms/activity/partition.hpp"

namespace dms::activity {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename F>
void for_each_line(std::string_view text, F&& f) {
  std::size_t line_no = 0, pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (!line.empty()) f(line_no, line);
  }
}

[[noreturn]] void parse_fail(std::size_t line, const std::string& why) {
  throw ActivityError(ActivityError::Code::Parse, fmt::format("line {}: {}", line, why), line);
}

}  // namespace

std::string save_partition(const Partition& partition) {
  std::string out;
  for (const LpBlock& b : partition.blocks) out += fmt::format("lp {}: {}\n", b.id, fmt::join(b.leaves, ","));
  out += fmt::format("cut {}\n", partition.cut_weight);
  return out;
}

Partition parse_partition(std::string_view text) {
  Partition p;
  bool have_cut = false;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (line.starts_with("lp ")) {
      const auto colon = line.find(':');
      if (colon == std::string_view::npos) parse_fail(line_no, "expected 'lp <id>: <leaf,...>'");
      LpBlock b;
      b.id = std::string(trim(line.substr(3, colon - 3)));
      if (b.id.empty()) parse_fail(line_no, "empty LP id");
      std::string_view rest = trim(line.substr(colon + 1));
      while (!rest.empty()) {
        const auto comma = rest.find(',');
        const std::string_view leaf = trim(rest.substr(0, comma));
        if (leaf.empty()) parse_fail(line_no, "empty leaf name");
        b.leaves.emplace_back(leaf);
        if (comma == std::string_view::npos) break;
        rest = rest.substr(comma + 1);
      }
      p.blocks.push_back(std::move(b));
    } else if (line.starts_with("cut ")) {
      const std::string_view num = trim(line.substr(4));
      std::size_t v = 0;
      auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), v);
      if (ec != std::errc() || ptr != num.data() + num.size() || have_cut) parse_fail(line_no, "bad cut line");
      p.cut_weight = v;
      have_cut = true;
    } else {
      parse_fail(line_no, fmt::format("unexpected '{}'", line));
    }
  });
  return p;
}

std::string save_mapping(const Mapping& mapping) {
  std::string out;
  for (const auto& [lp, host] : mapping.assignment) out += fmt::format("map {} -> {}\n", lp, host);
  return out;
}

Mapping parse_mapping(std::string_view text) {
  Mapping m;
  std::set<std::string> lps;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (!line.starts_with("map ")) parse_fail(line_no, fmt::format("unexpected '{}'", line));
    const auto arrow = line.find("->");
    if (arrow == std::string_view::npos) parse_fail(line_no, "expected 'map <lp> -> <host:port>'");
    std::string lp(trim(line.substr(4, arrow - 4)));
    std::string host(trim(line.substr(arrow + 2)));
    if (lp.empty() || host.empty()) parse_fail(line_no, "empty LP or host");
    if (!lps.insert(lp).second) parse_fail(line_no, fmt::format("LP '{}' mapped twice", lp));
    m.assignment.emplace_back(std::move(lp), std::move(host));
  });
  return m;
}

}  // namespace dms::activity

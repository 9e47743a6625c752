#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace dms::mq {

// Direct address of a named queue.
//
// Canonical text form: `host[:port]/queue_name`, with host "local" for the
// in-process broker. The MSMQ direct format name
// `DIRECT=OS:host\private$\queue_name` (also `DIRECT=TCP:`) is accepted as an
// alias and normalized to the canonical form.
struct QueueAddress {
  std::string host = "local";
  std::optional<std::uint16_t> port;
  std::string queue;

  static QueueAddress local(std::string queue) { return QueueAddress{"local", std::nullopt, std::move(queue)}; }

  // Throws std::invalid_argument.
  static QueueAddress parse(std::string_view text);

  bool is_local() const { return host == "local"; }
  std::string str() const;

  friend bool operator==(const QueueAddress&, const QueueAddress&) = default;
};

inline std::string data_queue_name(std::string_view lp_id) { return "pq-" + std::string(lp_id); }
inline std::string sync_queue_name(std::string_view lp_id) { return "sq-" + std::string(lp_id); }

}  // namespace dms::mq

#include "dms/mq/transport.hpp"

#include <fmt/format.h>

namespace dms::mq {

std::unique_ptr<SendHandle> Transport::open_send(const QueueAddress& address) {
  if (address.is_local()) return local_->open_send(address.queue);
  if (!address.port) {
    throw TransportError(TransportError::Code::Unreachable, "remote address without port: " + address.str());
  }
  const std::string key = fmt::format("{}:{}", address.host, *address.port);
  std::lock_guard lock(mu_);
  auto it = connections_.find(key);
  if (it == connections_.end()) {
    it = connections_.emplace(key, TcpConnection::connect(address.host, *address.port, retry_)).first;
  }
  return std::make_unique<TcpSendHandle>(it->second);
}

std::unique_ptr<ReceiveHandle> Transport::open_receive(const QueueAddress& address, Consumer& consumer) {
  if (!address.is_local()) {
    throw TransportError(TransportError::Code::NotLocal, "cannot receive from remote queue " + address.str());
  }
  return consumer.open(address.queue);
}

void Transport::close() {
  std::lock_guard lock(mu_);
  for (auto& [key, connection] : connections_) connection->close();
  connections_.clear();
}

}  // namespace dms::mq

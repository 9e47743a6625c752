#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "dms/mq/address.hpp"
#include "dms/mq/queue_manager.hpp"
#include "dms/mq/tcp.hpp"

namespace dms::mq {

// Entry point used by one LP: local queues go through the in-process
// manager, remote ones through a pooled TCP connection per host:port.
class Transport {
 public:
  explicit Transport(std::shared_ptr<QueueManager> local, RetryPolicy retry = {})
      : local_(std::move(local)), retry_(retry) {}
  ~Transport() { close(); }
  Transport(const Transport&) = delete;
  Transport& operator=(const Transport&) = delete;

  const std::shared_ptr<QueueManager>& local() const { return local_; }

  // Throws Unreachable when a remote endpoint cannot be reached.
  std::unique_ptr<SendHandle> open_send(const QueueAddress& address);
  // Throws NotLocal for remote addresses, AlreadyBound for a second receiver.
  std::unique_ptr<ReceiveHandle> open_receive(const QueueAddress& address, Consumer& consumer);

  // Half-closes every pooled connection.
  void close();

 private:
  std::shared_ptr<QueueManager> local_;
  RetryPolicy retry_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<TcpConnection>> connections_;
};

}  // namespace dms::mq

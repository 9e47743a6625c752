#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "dms/mq/message.hpp"

namespace dms::mq {

class QueueManager;
class Consumer;

using Notification = std::function<void(TimestampedMessage)>;

// Sending side of a queue. send() stamps and returns the next sequence
// number for this (sender, queue) pair. Safe to call from several threads.
class SendHandle {
 public:
  virtual ~SendHandle() = default;
  virtual std::uint64_t send(TimestampedMessage msg) = 0;
  virtual void close() = 0;
};

// Receiving side of a local queue; at most one per queue.
class ReceiveHandle {
 public:
  ~ReceiveHandle();
  ReceiveHandle(const ReceiveHandle&) = delete;
  ReceiveHandle& operator=(const ReceiveHandle&) = delete;

  const std::string& queue() const { return queue_; }

  // Non-blocking receive of the oldest message.
  std::optional<TimestampedMessage> poll();
  // Arms a one-shot notification. The owning Consumer runs it for the next
  // message; re-arm from inside the callback to keep receiving.
  void notify(Notification callback);
  void close();

 private:
  friend class QueueManager;
  ReceiveHandle(std::shared_ptr<QueueManager> manager, std::string queue)
      : manager_(std::move(manager)), queue_(std::move(queue)) {}

  std::shared_ptr<QueueManager> manager_;
  std::string queue_;
  bool closed_ = false;
};

// One receiving execution context. Notifications for all queues bound to a
// consumer run on the thread calling pump(), one at a time, in the order the
// messages arrived at the manager (across queues).
class Consumer {
 public:
  explicit Consumer(std::shared_ptr<QueueManager> manager) : manager_(std::move(manager)) {}
  ~Consumer();
  Consumer(const Consumer&) = delete;
  Consumer& operator=(const Consumer&) = delete;

  std::unique_ptr<ReceiveHandle> open(const std::string& queue);

  // Delivers every armed, ready message; if none is ready, waits up to
  // `timeout` for one. Returns the number of callbacks run. Throws
  // TransportError(PeerLost) once the manager has failed.
  std::size_t pump(std::chrono::milliseconds timeout);

  // Wakes a thread blocked in pump() early.
  void interrupt();

 private:
  friend class QueueManager;
  friend class ReceiveHandle;
  std::shared_ptr<QueueManager> manager_;
  std::condition_variable cv_;
  std::vector<std::string> queues_;
  bool interrupted_ = false;
};

// The queues living in one process (one "workstation"). Remote senders reach
// them through a TcpListener; local senders call deliver() directly.
class QueueManager : public std::enable_shared_from_this<QueueManager> {
 public:
  static std::shared_ptr<QueueManager> create() { return std::shared_ptr<QueueManager>(new QueueManager()); }

  // Creates the queue if absent. Throws AlreadyBound if it has a receiver.
  std::unique_ptr<ReceiveHandle> open_receive(const std::string& queue, Consumer& consumer);
  std::unique_ptr<SendHandle> open_send(const std::string& queue);

  // Enqueues a message exactly as given (sequence numbers are the sender's).
  void deliver(const std::string& queue, TimestampedMessage msg);

  // Surfaces a transport failure (lost peer, malformed stream) to consumers.
  void fail(const std::string& reason);
  std::optional<std::string> failure() const;

  std::size_t depth(const std::string& queue) const;

 private:
  friend class ReceiveHandle;
  friend class Consumer;

  struct Pending {
    std::uint64_t arrival;
    TimestampedMessage message;
  };

  struct Queue {
    std::deque<Pending> items;
    Consumer* consumer = nullptr;
    Notification armed;
  };

  QueueManager() = default;

  mutable std::mutex mu_;
  std::map<std::string, Queue, std::less<>> queues_;
  std::vector<Consumer*> consumers_;
  std::uint64_t arrivals_ = 0;
  std::optional<std::string> failure_;
};

}  // namespace dms::mq

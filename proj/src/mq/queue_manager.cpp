#include "dms/mq/queue_manager.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace dms::mq {
namespace {

class LocalSendHandle final : public SendHandle {
 public:
  LocalSendHandle(std::shared_ptr<QueueManager> manager, std::string queue)
      : manager_(std::move(manager)), queue_(std::move(queue)) {}

  std::uint64_t send(TimestampedMessage msg) override {
    std::lock_guard lock(mu_);
    if (closed_) throw TransportError(TransportError::Code::Closed, "send on closed handle for " + queue_);
    msg.seq = ++seq_;
    // Delivery happens under our lock so concurrent senders on this handle
    // enqueue in sequence order.
    manager_->deliver(queue_, std::move(msg));
    return seq_;
  }

  void close() override {
    std::lock_guard lock(mu_);
    closed_ = true;
  }

 private:
  std::shared_ptr<QueueManager> manager_;
  std::string queue_;
  std::mutex mu_;
  std::uint64_t seq_ = 0;
  bool closed_ = false;
};

}  // namespace

// ---- ReceiveHandle ----

ReceiveHandle::~ReceiveHandle() { close(); }

std::optional<TimestampedMessage> ReceiveHandle::poll() {
  std::lock_guard lock(manager_->mu_);
  if (closed_) throw TransportError(TransportError::Code::Closed, "poll on closed queue " + queue_);
  auto& q = manager_->queues_.at(queue_);
  if (q.items.empty()) return std::nullopt;
  TimestampedMessage msg = std::move(q.items.front().message);
  q.items.pop_front();
  return msg;
}

void ReceiveHandle::notify(Notification callback) {
  std::lock_guard lock(manager_->mu_);
  if (closed_) throw TransportError(TransportError::Code::Closed, "notify on closed queue " + queue_);
  auto& q = manager_->queues_.at(queue_);
  q.armed = std::move(callback);
  if (!q.items.empty() && q.consumer) q.consumer->cv_.notify_all();
}

void ReceiveHandle::close() {
  if (!manager_) return;
  std::lock_guard lock(manager_->mu_);
  if (closed_) return;
  closed_ = true;
  auto it = manager_->queues_.find(queue_);
  if (it == manager_->queues_.end()) return;
  if (Consumer* c = it->second.consumer) {
    std::erase(c->queues_, queue_);
  }
  it->second.consumer = nullptr;
  it->second.armed = nullptr;
}

// ---- Consumer ----

Consumer::~Consumer() {
  std::lock_guard lock(manager_->mu_);
  for (const std::string& name : queues_) {
    auto it = manager_->queues_.find(name);
    if (it != manager_->queues_.end() && it->second.consumer == this) {
      it->second.consumer = nullptr;
      it->second.armed = nullptr;
    }
  }
  std::erase(manager_->consumers_, this);
}

std::unique_ptr<ReceiveHandle> Consumer::open(const std::string& queue) {
  return manager_->open_receive(queue, *this);
}

void Consumer::interrupt() {
  std::lock_guard lock(manager_->mu_);
  interrupted_ = true;
  cv_.notify_all();
}

std::size_t Consumer::pump(std::chrono::milliseconds timeout) {
  std::unique_lock lock(manager_->mu_);
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  std::size_t delivered = 0;

  auto next_ready = [&]() -> QueueManager::Queue* {
    QueueManager::Queue* best = nullptr;
    for (const std::string& name : queues_) {
      auto& q = manager_->queues_.at(name);
      if (!q.armed || q.items.empty()) continue;
      if (!best || q.items.front().arrival < best->items.front().arrival) best = &q;
    }
    return best;
  };

  while (true) {
    if (manager_->failure_) {
      throw TransportError(TransportError::Code::PeerLost, *manager_->failure_);
    }
    if (QueueManager::Queue* q = next_ready()) {
      TimestampedMessage msg = std::move(q->items.front().message);
      q->items.pop_front();
      Notification cb = std::move(q->armed);
      q->armed = nullptr;
      lock.unlock();
      cb(std::move(msg));
      lock.lock();
      ++delivered;
      continue;
    }
    if (delivered > 0 || interrupted_) break;
    if (cv_.wait_until(lock, deadline) == std::cv_status::timeout) {
      if (!next_ready() && !manager_->failure_) break;
    }
  }
  interrupted_ = false;
  return delivered;
}

// ---- QueueManager ----

std::unique_ptr<ReceiveHandle> QueueManager::open_receive(const std::string& queue, Consumer& consumer) {
  std::lock_guard lock(mu_);
  auto& q = queues_[queue];
  if (q.consumer) throw TransportError(TransportError::Code::AlreadyBound, "queue " + queue + " already has a receiver");
  q.consumer = &consumer;
  consumer.queues_.push_back(queue);
  if (std::find(consumers_.begin(), consumers_.end(), &consumer) == consumers_.end()) consumers_.push_back(&consumer);
  return std::unique_ptr<ReceiveHandle>(new ReceiveHandle(shared_from_this(), queue));
}

std::unique_ptr<SendHandle> QueueManager::open_send(const std::string& queue) {
  {
    std::lock_guard lock(mu_);
    queues_[queue];
  }
  return std::make_unique<LocalSendHandle>(shared_from_this(), queue);
}

void QueueManager::deliver(const std::string& queue, TimestampedMessage msg) {
  std::lock_guard lock(mu_);
  auto& q = queues_[queue];
  q.items.push_back(Pending{arrivals_++, std::move(msg)});
  if (q.consumer) q.consumer->cv_.notify_all();
}

void QueueManager::fail(const std::string& reason) {
  std::lock_guard lock(mu_);
  if (!failure_) failure_ = reason;
  for (Consumer* c : consumers_) c->cv_.notify_all();
}

std::optional<std::string> QueueManager::failure() const {
  std::lock_guard lock(mu_);
  return failure_;
}

std::size_t QueueManager::depth(const std::string& queue) const {
  std::lock_guard lock(mu_);
  auto it = queues_.find(queue);
  return it == queues_.end() ? 0 : it->second.items.size();
}

}  // namespace dms::mq

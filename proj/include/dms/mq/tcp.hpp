#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "dms/mq/frame.hpp"
#include "dms/mq/queue_manager.hpp"

namespace dms::mq {

struct RetryPolicy {
  int attempts = 100;
  std::chrono::milliseconds delay{100};
};

// Owned file descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket() { reset(); }
  Socket(Socket&& other) noexcept : fd_(other.release()) {}
  Socket& operator=(Socket&& other) noexcept {
    if (this != &other) {
      reset();
      fd_ = other.release();
    }
    return *this;
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  int release() {
    const int fd = fd_;
    fd_ = -1;
    return fd;
  }
  void reset();
  // Unblocks any thread sitting in accept()/recv() on this socket.
  void shutdown_both() const;

 private:
  int fd_ = -1;
};

// Long-lived outgoing stream to one remote endpoint. Frames are written back
// to back; writes from several handles are serialized.
class TcpConnection {
 public:
  // Retries `policy.attempts` times, then throws TransportError(Unreachable).
  static std::shared_ptr<TcpConnection> connect(const std::string& host, std::uint16_t port,
                                                const RetryPolicy& policy = {});

  explicit TcpConnection(Socket socket) : socket_(std::move(socket)) {}

  void write(const Frame& frame);
  void close();

 private:
  std::mutex mu_;
  Socket socket_;
  bool closed_ = false;
};

class TcpSendHandle final : public SendHandle {
 public:
  explicit TcpSendHandle(std::shared_ptr<TcpConnection> connection) : connection_(std::move(connection)) {}
  std::uint64_t send(TimestampedMessage msg) override;
  void close() override;

 private:
  std::shared_ptr<TcpConnection> connection_;
  std::mutex mu_;
  std::uint64_t seq_ = 0;
  bool closed_ = false;
};

// Accepts frame streams and routes them into a local QueueManager: DATA
// frames to `data_queue`, NULL/END frames to `sync_queue`. A stream that
// closes after anything but an END frame, or carries a malformed frame,
// fails the manager.
class TcpListener {
 public:
  struct Routing {
    std::string data_queue;
    std::string sync_queue;
  };

  // port 0 picks an ephemeral port (see port()).
  TcpListener(std::shared_ptr<QueueManager> manager, std::uint16_t port, Routing routing);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }
  void stop();

 private:
  void accept_loop();
  void read_loop(int fd);

  std::shared_ptr<QueueManager> manager_;
  Routing routing_;
  Socket listen_socket_;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  std::mutex mu_;
  std::vector<Socket> connections_;
  std::vector<std::thread> readers_;
};

}  // namespace dms::mq

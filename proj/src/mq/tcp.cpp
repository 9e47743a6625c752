#include "dms/mq/tcp.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include <fmt/format.h>

namespace dms::mq {
namespace {

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

Socket try_connect(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* result = nullptr;
  const std::string service = std::to_string(port);
  if (::getaddrinfo(host.c_str(), service.c_str(), &hints, &result) != 0) return Socket{};
  Socket connected;
  for (addrinfo* ai = result; ai; ai = ai->ai_next) {
    Socket s(::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol));
    if (!s.valid()) continue;
    if (::connect(s.fd(), ai->ai_addr, ai->ai_addrlen) == 0) {
      connected = std::move(s);
      break;
    }
  }
  ::freeaddrinfo(result);
  if (connected.valid()) set_nodelay(connected.fd());
  return connected;
}

}  // namespace

void Socket::reset() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

void Socket::shutdown_both() const {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

// ---- TcpConnection ----

std::shared_ptr<TcpConnection> TcpConnection::connect(const std::string& host, std::uint16_t port,
                                                      const RetryPolicy& policy) {
  for (int attempt = 0; attempt < std::max(1, policy.attempts); ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(policy.delay);
    Socket s = try_connect(host, port);
    if (s.valid()) return std::make_shared<TcpConnection>(std::move(s));
  }
  throw TransportError(TransportError::Code::Unreachable,
                       fmt::format("cannot connect to {}:{} after {} attempt(s)", host, port, policy.attempts));
}

void TcpConnection::write(const Frame& frame) {
  std::lock_guard lock(mu_);
  if (closed_) throw TransportError(TransportError::Code::Closed, "write on closed connection");
  const std::uint8_t* p = frame.data();
  std::size_t left = frame.size();
  while (left > 0) {
    const ssize_t n = ::send(socket_.fd(), p, left, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(TransportError::Code::Unreachable, fmt::format("send failed: {}", std::strerror(errno)));
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
}

void TcpConnection::close() {
  std::lock_guard lock(mu_);
  if (closed_) return;
  closed_ = true;
  ::shutdown(socket_.fd(), SHUT_WR);
  socket_.reset();
}

// ---- TcpSendHandle ----

std::uint64_t TcpSendHandle::send(TimestampedMessage msg) {
  std::lock_guard lock(mu_);
  if (closed_) throw TransportError(TransportError::Code::Closed, "send on closed handle");
  msg.seq = seq_ + 1;
  connection_->write(encode(msg));
  return ++seq_;
}

void TcpSendHandle::close() {
  std::lock_guard lock(mu_);
  closed_ = true;
}

// ---- TcpListener ----

TcpListener::TcpListener(std::shared_ptr<QueueManager> manager, std::uint16_t port, Routing routing)
    : manager_(std::move(manager)), routing_(std::move(routing)) {
  listen_socket_ = Socket(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!listen_socket_.valid()) {
    throw TransportError(TransportError::Code::Unreachable, fmt::format("socket: {}", std::strerror(errno)));
  }
  int one = 1;
  ::setsockopt(listen_socket_.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_ANY);
  addr.sin_port = htons(port);
  if (::bind(listen_socket_.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
      ::listen(listen_socket_.fd(), 16) != 0) {
    throw TransportError(TransportError::Code::Unreachable,
                         fmt::format("cannot listen on port {}: {}", port, std::strerror(errno)));
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listen_socket_.fd(), reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  acceptor_ = std::thread([this] { accept_loop(); });
}

TcpListener::~TcpListener() { stop(); }

void TcpListener::stop() {
  if (stopping_.exchange(true)) return;
  listen_socket_.shutdown_both();
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<std::thread> readers;
  {
    std::lock_guard lock(mu_);
    for (const Socket& s : connections_) s.shutdown_both();
    readers.swap(readers_);
  }
  for (std::thread& t : readers) t.join();
  std::lock_guard lock(mu_);
  connections_.clear();
  listen_socket_.reset();
}

void TcpListener::accept_loop() {
  while (!stopping_) {
    const int fd = ::accept4(listen_socket_.fd(), nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) {
      if (errno == EINTR) continue;
      return;  // listening socket shut down
    }
    set_nodelay(fd);
    std::lock_guard lock(mu_);
    if (stopping_) {
      ::close(fd);
      return;
    }
    connections_.emplace_back(fd);
    readers_.emplace_back([this, fd] { read_loop(fd); });
  }
}

void TcpListener::read_loop(int fd) {
  std::vector<std::uint8_t> buffer;
  std::uint8_t chunk[64 * 1024];
  bool saw_frame = false;
  MessageKind last_kind = MessageKind::Data;
  try {
    while (true) {
      const ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) break;
      buffer.insert(buffer.end(), chunk, chunk + n);
      std::size_t offset = 0;
      while (auto decoded = decode_prefix(std::span(buffer).subspan(offset))) {
        offset += decoded->consumed;
        last_kind = decoded->message.kind;
        saw_frame = true;
        const std::string& queue =
            last_kind == MessageKind::Data ? routing_.data_queue : routing_.sync_queue;
        manager_->deliver(queue, std::move(decoded->message));
      }
      buffer.erase(buffer.begin(), buffer.begin() + static_cast<std::ptrdiff_t>(offset));
    }
  } catch (const TransportError& e) {
    manager_->fail(e.what());
    return;
  }
  if (stopping_) return;
  if (!buffer.empty()) {
    manager_->fail("peer closed mid-frame");
  } else if (saw_frame && last_kind != MessageKind::End) {
    manager_->fail("peer closed the connection without END");
  }
}

}  // namespace dms::mq

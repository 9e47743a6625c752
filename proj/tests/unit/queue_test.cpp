#include <atomic>
#include <map>
#include <random>
#include <thread>

#include <gtest/gtest.h>

#include "dms/mq/tcp.hpp"
#include "dms/mq/transport.hpp"

namespace dms::mq {
namespace {

using namespace std::chrono_literals;

TimestampedMessage data(double t, std::string label, std::string body) {
  return TimestampedMessage{MessageKind::Data, t, std::move(label), std::move(body), 0};
}

TimestampedMessage sync(MessageKind kind, double t, std::string label) {
  return TimestampedMessage{kind, t, std::move(label), "", 0};
}

// Keeps a notification armed on a handle and records what it receives.
struct Collector {
  ReceiveHandle& handle;
  std::vector<TimestampedMessage> got;
  void arm() {
    handle.notify([this](TimestampedMessage m) {
      got.push_back(std::move(m));
      arm();
    });
  }
};

void pump_until(Consumer& c, const std::function<bool()>& done, std::chrono::seconds limit = 20s) {
  const auto deadline = std::chrono::steady_clock::now() + limit;
  while (!done()) {
    ASSERT_LT(std::chrono::steady_clock::now(), deadline) << "timed out";
    c.pump(50ms);
  }
}

TEST(QueueManager, OpenReceiveCreatesQueueAndDeliversOnce) {
  auto qm = QueueManager::create();
  Consumer c(qm);
  auto rx = c.open("pq-B");
  auto tx = qm->open_send("pq-B");
  EXPECT_EQ(tx->send(data(50.0, "A", "1000")), 1u);
  Collector col{*rx, {}};
  col.arm();
  EXPECT_EQ(c.pump(0ms), 1u);
  ASSERT_EQ(col.got.size(), 1u);
  EXPECT_EQ(col.got[0], (TimestampedMessage{MessageKind::Data, 50.0, "A", "1000", 1}));
  EXPECT_EQ(c.pump(0ms), 0u);
}

TEST(QueueManager, SecondReceiverIsRejected) {
  auto qm = QueueManager::create();
  Consumer c1(qm), c2(qm);
  auto rx = c1.open("pq-B");
  try {
    c2.open("pq-B");
    FAIL();
  } catch (const TransportError& e) {
    EXPECT_EQ(e.code(), TransportError::Code::AlreadyBound);
  }
}

TEST(QueueManager, PollReturnsArrivalOrder) {
  auto qm = QueueManager::create();
  Consumer c(qm);
  auto rx = c.open("sq-C");
  auto tx = qm->open_send("sq-C");
  tx->send(sync(MessageKind::Null, 1.0, "A"));
  tx->send(sync(MessageKind::Null, 2.0, "A"));
  tx->send(sync(MessageKind::End, 3.0, "A"));
  EXPECT_EQ(rx->poll()->timestamp, 1.0);
  EXPECT_EQ(rx->poll()->timestamp, 2.0);
  auto end = rx->poll();
  EXPECT_EQ(end->kind, MessageKind::End);
  EXPECT_EQ(end->seq, 3u);
  EXPECT_FALSE(rx->poll());
}

TEST(QueueManager, OneShotNotificationWaitsForRearm) {
  auto qm = QueueManager::create();
  Consumer c(qm);
  auto rx = c.open("q");
  auto tx = qm->open_send("q");
  tx->send(data(1, "A", "1"));
  tx->send(data(2, "A", "1"));
  int calls = 0;
  rx->notify([&](TimestampedMessage) { ++calls; });
  c.pump(0ms);
  EXPECT_EQ(calls, 1);
  EXPECT_EQ(qm->depth("q"), 1u);
}

TEST(QueueManager, ArrivalsDuringCallbackFollowInOrder) {
  auto qm = QueueManager::create();
  Consumer c(qm);
  auto rx = c.open("q");
  auto tx = qm->open_send("q");
  std::vector<double> got;
  std::function<void()> arm = [&] {
    rx->notify([&](TimestampedMessage m) {
      got.push_back(m.timestamp);
      if (m.timestamp == 0.0) {
        tx->send(data(1, "A", "1"));
        tx->send(data(2, "A", "1"));
      }
      arm();
    });
  };
  arm();
  tx->send(data(0, "A", "1"));
  pump_until(c, [&] { return got.size() == 3; });
  EXPECT_EQ(got, (std::vector<double>{0, 1, 2}));
}

TEST(QueueManager, ConsumerMergesQueuesInArrivalOrder) {
  auto qm = QueueManager::create();
  Consumer c(qm);
  auto pq = c.open("pq-C");
  auto sq = c.open("sq-C");
  auto tx_pq = qm->open_send("pq-C");
  auto tx_sq = qm->open_send("sq-C");
  tx_sq->send(sync(MessageKind::Null, 1.0, "A"));
  tx_pq->send(data(2.0, "A", "1000"));
  tx_sq->send(sync(MessageKind::Null, 3.0, "A"));
  tx_pq->send(data(4.0, "A", "1000"));
  std::vector<double> got;
  std::function<void(ReceiveHandle&)> arm = [&](ReceiveHandle& h) {
    h.notify([&](TimestampedMessage m) {
      got.push_back(m.timestamp);
      arm(h);
    });
  };
  arm(*pq);
  arm(*sq);
  pump_until(c, [&] { return got.size() == 4; });
  EXPECT_EQ(got, (std::vector<double>{1, 2, 3, 4}));
}

TEST(QueueManager, ConcurrentSendersKeepPerSenderFifo) {
  auto qm = QueueManager::create();
  Consumer c(qm);
  auto rx = c.open("pq-X");
  constexpr int kSenders = 4, kPerSender = 5000;
  std::vector<std::thread> threads;
  for (int s = 0; s < kSenders; ++s) {
    threads.emplace_back([&, s] {
      auto tx = qm->open_send("pq-X");
      for (int i = 0; i < kPerSender; ++i) tx->send(data(i, "S" + std::to_string(s), std::to_string(i)));
    });
  }
  Collector col{*rx, {}};
  col.arm();
  pump_until(c, [&] { return col.got.size() == kSenders * kPerSender; });
  for (auto& t : threads) t.join();
  std::map<std::string, std::uint64_t> last;
  for (const auto& m : col.got) {
    EXPECT_EQ(m.seq, last[m.label] + 1) << m.label;
    EXPECT_EQ(m.body, std::to_string(m.seq - 1));
    last[m.label] = m.seq;
  }
}

TEST(QueueManager, FailureSurfacesAsPeerLost) {
  auto qm = QueueManager::create();
  Consumer c(qm);
  auto rx = c.open("q");
  qm->fail("boom");
  try {
    c.pump(10ms);
    FAIL();
  } catch (const TransportError& e) {
    EXPECT_EQ(e.code(), TransportError::Code::PeerLost);
  }
}

TEST(QueueManager, ClosedHandlesRefuseUse) {
  auto qm = QueueManager::create();
  Consumer c(qm);
  auto rx = c.open("q");
  auto tx = qm->open_send("q");
  tx->close();
  rx->close();
  EXPECT_THROW(tx->send(data(1, "A", "1")), TransportError);
  EXPECT_THROW(rx->poll(), TransportError);
  // The queue can be bound again once released.
  EXPECT_NO_THROW(c.open("q"));
}

TEST(Transport, RemoteReceiveIsRejected) {
  Transport tr(QueueManager::create());
  Consumer c(tr.local());
  try {
    tr.open_receive(QueueAddress::parse("otherhost:5000/pq-B"), c);
    FAIL();
  } catch (const TransportError& e) {
    EXPECT_EQ(e.code(), TransportError::Code::NotLocal);
  }
}

TEST(Transport, UnreachableAfterBoundedRetries) {
  // Grab a free port, then close it so nothing listens there.
  std::uint16_t port;
  {
    TcpListener probe(QueueManager::create(), 0, {"pq", "sq"});
    port = probe.port();
  }
  Transport tr(QueueManager::create(), RetryPolicy{3, 10ms});
  const auto start = std::chrono::steady_clock::now();
  try {
    tr.open_send(QueueAddress{"127.0.0.1", port, "pq-C"});
    FAIL();
  } catch (const TransportError& e) {
    EXPECT_EQ(e.code(), TransportError::Code::Unreachable);
  }
  EXPECT_LT(std::chrono::steady_clock::now() - start, 5s);
}

TEST(Tcp, SequenceAuditOverTenThousandMessages) {
  auto receiver = QueueManager::create();
  Consumer c(receiver);
  auto pq = c.open("pq-B");
  auto sq = c.open("sq-B");
  TcpListener listener(receiver, 0, {"pq-B", "sq-B"});

  constexpr int kSenders = 3, kPerSender = 10000 / kSenders + 1;
  std::vector<std::vector<TimestampedMessage>> sent(kSenders);
  std::vector<std::thread> threads;
  for (int s = 0; s < kSenders; ++s) {
    threads.emplace_back([&, s] {
      Transport tr(QueueManager::create());
      auto tx_pq = tr.open_send(QueueAddress{"127.0.0.1", listener.port(), "pq-B"});
      auto tx_sq = tr.open_send(QueueAddress{"127.0.0.1", listener.port(), "sq-B"});
      std::mt19937_64 rng(s);
      const std::string label = "L" + std::to_string(s);
      double t = 0;
      for (int i = 0; i < kPerSender; ++i) {
        t += static_cast<double>(rng() % 100) / 10.0;
        TimestampedMessage m = rng() % 3 ? data(t, label, std::to_string(rng() % 5000))
                                         : sync(MessageKind::Null, t, label);
        auto& h = m.kind == MessageKind::Data ? tx_pq : tx_sq;
        m.seq = h->send(m);
        sent[s].push_back(m);
      }
      TimestampedMessage end = sync(MessageKind::End, t, label);
      end.seq = tx_sq->send(end);
      sent[s].push_back(end);
    });
  }

  // Both queues are drained through one consumer, which restores the order
  // each sender wrote its frames in.
  std::map<std::string, std::vector<TimestampedMessage>> got;
  std::size_t total = 0;
  std::function<void(ReceiveHandle&)> arm = [&](ReceiveHandle& h) {
    h.notify([&](TimestampedMessage m) {
      got[m.label].push_back(std::move(m));
      ++total;
      arm(h);
    });
  };
  arm(*pq);
  arm(*sq);
  pump_until(c, [&] { return total == static_cast<std::size_t>(kSenders * (kPerSender + 1)); });
  for (auto& t : threads) t.join();
  for (int s = 0; s < kSenders; ++s) {
    EXPECT_EQ(got["L" + std::to_string(s)], sent[s]);
  }
  EXPECT_FALSE(receiver->failure());
}

TEST(Tcp, CloseWithoutEndIsReported) {
  auto receiver = QueueManager::create();
  Consumer c(receiver);
  auto pq = c.open("pq-B");
  TcpListener listener(receiver, 0, {"pq-B", "sq-B"});
  {
    auto conn = TcpConnection::connect("127.0.0.1", listener.port());
    TcpSendHandle h(conn);
    h.send(data(1.0, "A", "1000"));
    conn->close();
  }
  Collector col{*pq, {}};
  col.arm();
  bool lost = false;
  const auto deadline = std::chrono::steady_clock::now() + 10s;
  while (!lost && std::chrono::steady_clock::now() < deadline) {
    try {
      c.pump(50ms);
    } catch (const TransportError& e) {
      EXPECT_EQ(e.code(), TransportError::Code::PeerLost);
      lost = true;
    }
  }
  EXPECT_TRUE(lost);
}

TEST(Tcp, MalformedStreamIsReported) {
  auto receiver = QueueManager::create();
  TcpListener listener(receiver, 0, {"pq-B", "sq-B"});
  auto conn = TcpConnection::connect("127.0.0.1", listener.port());
  conn->write(Frame{'X', 'X', 'X', 'X', 0});
  const auto deadline = std::chrono::steady_clock::now() + 10s;
  while (!receiver->failure() && std::chrono::steady_clock::now() < deadline) std::this_thread::sleep_for(5ms);
  ASSERT_TRUE(receiver->failure());
  EXPECT_NE(receiver->failure()->find("magic"), std::string::npos);
}

}  // namespace
}  // namespace dms::mq

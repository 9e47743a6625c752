#include <cstring>
#include <random>

#include <gtest/gtest.h>

#include "dms/mq/address.hpp"
#include "dms/mq/frame.hpp"

namespace dms::mq {
namespace {

TransportError::Code decode_error(const Frame& f) {
  try {
    decode(f);
  } catch (const TransportError& e) {
    return e.code();
  }
  ADD_FAILURE() << "decode accepted a malformed frame";
  return TransportError::Code::Closed;
}

TEST(Frame, DataFrameIs32Bytes) {
  const TimestampedMessage m{MessageKind::Data, 50.0, "A", "1000", 1};
  const Frame f = encode(m);
  EXPECT_EQ(f.size(), 32u);
  const Frame expected = {'D', 'M', 'S', '1', 0x00,                            // magic, kind
                          0x40, 0x49, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,      // 50.0
                          0x00, 0x01, 'A',                                     // label
                          0x00, 0x00, 0x00, 0x04, '1', '0', '0', '0',          // body
                          0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x01};     // seq
  EXPECT_EQ(f, expected);
  EXPECT_EQ(decode(f), m);
}

TEST(Frame, EmptyNullFrameIsTheBareLayout) {
  // 4 + 1 + 8 + 2 + 4 + 8 bytes with both text fields empty.
  const TimestampedMessage m{MessageKind::Null, 17.0, "", "", 9};
  const Frame f = encode(m);
  EXPECT_EQ(f.size(), 27u);
  EXPECT_EQ(f.size(), kFrameOverhead);
  EXPECT_EQ(decode(f), m);
}

TEST(Frame, RejectsBadMagic) {
  Frame f = encode({MessageKind::Data, 1.0, "A", "1", 1});
  f[0] = f[1] = f[2] = f[3] = 'X';
  EXPECT_EQ(decode_error(f), TransportError::Code::MalformedFrame);
}

TEST(Frame, RejectsTruncationAtEveryLength) {
  const Frame f = encode({MessageKind::Data, 3.5, "label", "body", 77});
  for (std::size_t n = 0; n < f.size(); ++n) {
    const Frame cut(f.begin(), f.begin() + static_cast<std::ptrdiff_t>(n));
    EXPECT_FALSE(decode_prefix(cut)) << n;
    EXPECT_EQ(decode_error(cut), TransportError::Code::MalformedFrame) << n;
  }
}

TEST(Frame, RejectsTrailingBytes) {
  Frame f = encode({MessageKind::End, 3.5, "A", "", 2});
  f.push_back(0);
  EXPECT_EQ(decode_error(f), TransportError::Code::MalformedFrame);
}

TEST(Frame, RejectsInvalidKind) {
  Frame f = encode({MessageKind::Null, 1.0, "A", "", 1});
  f[4] = 3;
  EXPECT_EQ(decode_error(f), TransportError::Code::MalformedFrame);
}

TEST(Frame, RejectsNonUtf8Text) {
  Frame f = encode({MessageKind::Data, 1.0, "AB", "x", 1});
  f[15] = 0xC3;  // lead byte with an ASCII continuation
  EXPECT_EQ(decode_error(f), TransportError::Code::MalformedFrame);
  EXPECT_THROW(encode({MessageKind::Data, 1.0, "\xff", "", 1}), TransportError);
}

TEST(Frame, RejectsBodyOnSyncMessages) {
  EXPECT_THROW(encode({MessageKind::Null, 1.0, "A", "x", 1}), TransportError);
  Frame f = encode({MessageKind::Data, 1.0, "A", "x", 1});
  f[4] = static_cast<std::uint8_t>(MessageKind::Null);
  EXPECT_EQ(decode_error(f), TransportError::Code::MalformedFrame);
}

TEST(Frame, RejectsNegativeOrNonFiniteTimestamps) {
  EXPECT_THROW(encode({MessageKind::Null, -1.0, "A", "", 1}), TransportError);
  Frame f = encode({MessageKind::Null, 1.0, "A", "", 1});
  for (int i = 5; i < 13; ++i) f[i] = 0xFF;  // NaN
  EXPECT_EQ(decode_error(f), TransportError::Code::MalformedFrame);
}

TEST(Frame, MaximumLabelLengthRoundTrips) {
  const TimestampedMessage m{MessageKind::Data, 1.0, std::string(kMaxLabelBytes, 'L'), "", 1};
  EXPECT_EQ(decode(encode(m)), m);
  TimestampedMessage too_long = m;
  too_long.label.push_back('L');
  EXPECT_THROW(encode(too_long), TransportError);
}

TEST(Frame, MaximumBodyLengthHeaderIsParsed) {
  // A header announcing a 2^32-1 byte body is well formed; the decoder waits
  // for the bytes rather than rejecting it.
  Frame f = encode({MessageKind::Data, 1.0, "A", "", 1});
  f.resize(16 + 4);
  f[16] = f[17] = f[18] = f[19] = 0xFF;
  EXPECT_FALSE(decode_prefix(f));
}

TEST(Frame, StreamDecodingSplitsBackToBackFrames) {
  Frame stream;
  std::vector<TimestampedMessage> sent;
  for (int i = 0; i < 5; ++i) {
    sent.push_back({i % 2 ? MessageKind::Null : MessageKind::Data, i * 1.5, "B", i % 2 ? "" : "1000",
                    static_cast<std::uint64_t>(i + 1)});
    const Frame f = encode(sent.back());
    stream.insert(stream.end(), f.begin(), f.end());
  }
  std::size_t offset = 0;
  std::vector<TimestampedMessage> got;
  while (auto d = decode_prefix(std::span(stream).subspan(offset))) {
    got.push_back(d->message);
    offset += d->consumed;
  }
  EXPECT_EQ(offset, stream.size());
  EXPECT_EQ(got, sent);
}

std::string random_utf8(std::mt19937_64& rng, std::size_t max_bytes) {
  static const char* pieces[] = {"a", "Z", "0", " ", "\xc3\xa9", "\xe2\x82\xac", "\xf0\x9f\x8f\xad"};
  std::uniform_int_distribution<std::size_t> len(0, max_bytes);
  std::uniform_int_distribution<int> pick(0, 6);
  const std::size_t target = len(rng);
  std::string s;
  while (true) {
    const char* p = pieces[pick(rng)];
    if (s.size() + std::strlen(p) > target) break;
    s += p;
  }
  return s;
}

TEST(Frame, RandomRoundTrip) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> ts(0.0, 1e7);
  std::uniform_int_distribution<int> kind(0, 2);
  for (int i = 0; i < 10000; ++i) {
    TimestampedMessage m;
    m.kind = static_cast<MessageKind>(kind(rng));
    m.timestamp = i % 10 == 0 ? 0.0 : ts(rng);
    m.label = random_utf8(rng, i % 100 == 0 ? kMaxLabelBytes : 32);
    if (m.kind == MessageKind::Data) m.body = random_utf8(rng, 64);
    m.seq = rng();
    ASSERT_EQ(decode(encode(m)), m);
  }
}

TEST(Frame, Utf8Validator) {
  EXPECT_TRUE(is_valid_utf8(""));
  EXPECT_TRUE(is_valid_utf8("plain"));
  EXPECT_TRUE(is_valid_utf8("\xe2\x82\xac"));
  EXPECT_FALSE(is_valid_utf8("\xc0\xaf"));          // overlong
  EXPECT_FALSE(is_valid_utf8("\xed\xa0\x80"));      // surrogate
  EXPECT_FALSE(is_valid_utf8("\xf4\x90\x80\x80"));  // above U+10FFFF
  EXPECT_FALSE(is_valid_utf8("\xe2\x82"));          // truncated
}

TEST(QueueAddress, CanonicalFormRoundTrips) {
  for (const char* text : {"local/pq-B", "hostX/pq-C", "10.0.0.7:5601/sq-A", "ws-3:80/q"}) {
    const QueueAddress a = QueueAddress::parse(text);
    EXPECT_EQ(a.str(), text);
    EXPECT_EQ(QueueAddress::parse(a.str()), a);
  }
  EXPECT_TRUE(QueueAddress::parse("local/pq-B").is_local());
  EXPECT_EQ(QueueAddress::parse("h:7/q").port, std::uint16_t{7});
}

TEST(QueueAddress, DirectFormatNameIsAnAlias) {
  const QueueAddress a = QueueAddress::parse("DIRECT=OS:ENG-4130-10\\private$\\pq-B");
  EXPECT_EQ(a.host, "ENG-4130-10");
  EXPECT_EQ(a.queue, "pq-B");
  EXPECT_EQ(a.str(), "ENG-4130-10/pq-B");
  EXPECT_EQ(QueueAddress::parse("direct = os:host\\PRIVATE$\\sq-C"), QueueAddress::parse("host/sq-C"));
  EXPECT_EQ(QueueAddress::parse("DIRECT=TCP:10.1.1.1\\q"), QueueAddress::parse("10.1.1.1/q"));
}

TEST(QueueAddress, RejectsMalformedText) {
  for (const char* text : {"", "nohost", "/q", "h/", "h:0/q", "h:99999/q", "h:x/q", "DIRECT=OS:host",
                           "DIRECT=HTTP:h\\q", "DIRECT=OS:\\q"}) {
    EXPECT_THROW(QueueAddress::parse(text), std::invalid_argument) << text;
  }
}

}  // namespace
}  // namespace dms::mq

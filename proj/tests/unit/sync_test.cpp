#include <gtest/gtest.h>

#include <deque>
#include <memory>

#include "dms/scenario/case_study.hpp"
#include "dms/sync/logical_process.hpp"
#include "random_scenario.hpp"

namespace dms::sync {
namespace {

using mq::MessageKind;
using mq::TimestampedMessage;

struct Sent {
  std::string dest;
  TimestampedMessage msg;
};

// LP wired to a vector instead of a transport.
struct Probe {
  std::vector<Sent> out;
  std::unique_ptr<LogicalProcess> lp;

  Probe(LpSpec spec, std::uint64_t seed = 1) {
    lp = std::make_unique<LogicalProcess>(std::move(spec), seed,
                                          [this](const std::string& d, TimestampedMessage m) { out.push_back({d, m}); });
  }
  std::vector<TimestampedMessage> of_kind(MessageKind kind) const {
    std::vector<TimestampedMessage> r;
    for (const Sent& s : out) {
      if (s.msg.kind == kind) r.push_back(s.msg);
    }
    return r;
  }
};

TimestampedMessage null_at(std::string label, double t) { return {MessageKind::Null, t, std::move(label), "", 0}; }
TimestampedMessage data_at(std::string label, double t, std::uint64_t seq) {
  return {MessageKind::Data, t, std::move(label), "1000", seq};
}
TimestampedMessage end_at(std::string label, double t) { return {MessageKind::End, t, std::move(label), "", 0}; }

LpSpec spec_of(std::string_view text, std::string_view lp) { return make_lp_spec(load_scenario_text(text), lp); }

// P -> Q -> R. Q forwards port entities through a const(2) service.
constexpr std::string_view kRelay = R"(
scenario relay
end_time 100
lp P lookahead=1
resource P m capacity=1
block P make create kind=X interarrival=const(50) first=0 next=work
block P work process resource=m service=const(1) next=out
block P out portsend dest=Q
lp Q lookahead=2
resource Q m capacity=1
block Q in createport source=P kind=X next=fwd
block Q fwd process resource=m service=const(2) next=out
block Q out portsend dest=R
block Q own create kind=Y interarrival=const(100) first=7.5 next=done
block Q done dispose
lp R lookahead=1
resource R m capacity=1
block R in createport source=Q kind=X next=done
block R done dispose
link P -> Q transfer=0
link Q -> R transfer=10
)";

TEST(SafeTime, MinimumOfChannelClocks) {
  Probe c(make_lp_spec(case_study::build_case_study(), "C"));
  c.lp->on_receive(null_at("A", 12.0));
  c.lp->on_receive(null_at("B", 7.5));
  EXPECT_EQ(c.lp->safe_time(), TimeBound(SimTime{7.5}));
  c.lp->on_receive(null_at("B", 9.0));
  EXPECT_EQ(c.lp->safe_time(), TimeBound(SimTime{9.0}));
}

TEST(SafeTime, NoInputsMeansEndOfLinks) {
  Probe a(make_lp_spec(case_study::build_case_study(), "A"));
  EXPECT_TRUE(a.lp->safe_time().is_end());
}

TEST(OnReceive, NullMovesClockOnly) {
  Probe c(make_lp_spec(case_study::build_case_study(), "C"));
  c.lp->on_receive(null_at("A", 10.0));
  c.lp->on_receive(null_at("A", 15.0));
  EXPECT_EQ(c.lp->channels()[0].clock, TimeBound(SimTime{15.0}));
  EXPECT_TRUE(c.lp->channels()[0].pending.empty());
}

TEST(OnReceive, DataIsBuffered) {
  Probe c(make_lp_spec(case_study::build_case_study(), "C"));
  c.lp->on_receive(data_at("A", 110.0, 1));
  ASSERT_EQ(c.lp->channels()[0].pending.size(), 1u);
  EXPECT_EQ(c.lp->channels()[0].pending.front().body, "1000");
}

TEST(OnReceive, CausalityViolations) {
  Probe c(make_lp_spec(case_study::build_case_study(), "C"));
  c.lp->on_receive(null_at("A", 10.0));
  try {
    c.lp->on_receive(data_at("A", 5.0, 1));
    FAIL();
  } catch (const SyncError& e) {
    EXPECT_EQ(e.code(), SyncError::Code::CausalityViolation);
  }
  c.lp->on_receive(end_at("A", 5000.0));
  EXPECT_THROW(c.lp->on_receive(null_at("A", 6000.0)), SyncError);
}

TEST(OnReceive, UnknownLabel) {
  Probe c(make_lp_spec(case_study::build_case_study(), "C"));
  try {
    c.lp->on_receive(data_at("Z", 1.0, 1));
    FAIL();
  } catch (const SyncError& e) {
    EXPECT_EQ(e.code(), SyncError::Code::UnknownLabel);
  }
}

TEST(Step, EqualToSafeTimeRunsLaterBlocks) {
  Probe q(spec_of(kRelay, "Q"));
  q.lp->on_receive(null_at("P", 7.5));
  ASSERT_TRUE(std::holds_alternative<Advanced>(q.lp->step()));
  EXPECT_EQ(q.lp->kernel().clock(), SimTime{7.5});

  Probe late(spec_of(std::string(kRelay).replace(std::string(kRelay).find("first=7.5"), 9, "first=8.0"), "Q"));
  late.lp->on_receive(null_at("P", 7.5));
  const Progress p = late.lp->step();
  ASSERT_TRUE(std::holds_alternative<Blocked>(p));
  EXPECT_EQ(std::get<Blocked>(p).until, TimeBound(SimTime{7.5}));
  EXPECT_FALSE(late.of_kind(MessageKind::Null).empty());
}

TEST(SendData, TimestampLabelAndBody) {
  Probe a(make_lp_spec(case_study::build_case_study(), "A"));
  a.lp->send_data("B", SimTime{40.0}, 1000);
  ASSERT_EQ(a.out.size(), 1u);
  EXPECT_EQ(a.out[0].dest, "B");
  EXPECT_EQ(a.out[0].msg.kind, MessageKind::Data);
  EXPECT_EQ(a.out[0].msg.timestamp, 50.0);
  EXPECT_EQ(a.out[0].msg.label, "A");
  EXPECT_EQ(a.out[0].msg.body, "1000");
  try {
    a.lp->send_data("Q", SimTime{41.0}, 1);
    FAIL();
  } catch (const SyncError& e) {
    EXPECT_EQ(e.code(), SyncError::Code::UnknownLink);
  }
}

TEST(SendData, ZeroTransferKeepsClock) {
  Probe p(spec_of(kRelay, "P"));
  p.lp->send_data("Q", SimTime{3.25}, 1);
  EXPECT_EQ(p.out.back().msg.timestamp, 3.25);
}

TEST(EmitNulls, LookaheadPlusTransfer) {
  Probe q(spec_of(std::string(kRelay).replace(std::string(kRelay).find("first=7.5"), 9, "first=900"), "Q"));
  q.lp->on_receive(null_at("P", 5.0));
  q.lp->emit_nulls();
  auto nulls = q.of_kind(MessageKind::Null);
  ASSERT_EQ(nulls.size(), 1u);
  EXPECT_EQ(nulls[0].timestamp, 17.0);
  q.lp->emit_nulls();
  EXPECT_EQ(q.of_kind(MessageKind::Null).size(), 1u);
  EXPECT_EQ(q.lp->counters().nulls_suppressed, 1u);
}

TEST(EmitNulls, TighterThanLookaheadWhenWorkIsPending) {
  // An entity in service until t=3 can reach R no earlier than 3.
  Probe q(spec_of(std::string(kRelay).replace(std::string(kRelay).find("first=7.5"), 9, "first=900"), "Q"));
  q.lp->on_receive(data_at("P", 1.0, 1));
  q.lp->on_receive(null_at("P", 30.0));
  ASSERT_TRUE(std::holds_alternative<Advanced>(q.lp->step()));  // release at 1 -> service until 3
  q.lp->emit_nulls();
  EXPECT_EQ(q.of_kind(MessageKind::Null).back().timestamp, 13.0);
}

TEST(EmitNulls, DownstreamSafeTimeIncreasesWhileUpstreamIdle) {
  LpSpec ps = spec_of(kRelay, "P");
  ps.null_quantum = 1;
  Probe p(ps);
  Probe q(spec_of(kRelay, "Q"));
  TimeBound last = q.lp->safe_time();
  for (int i = 0; i < 20 && !p.lp->locally_done(); ++i) {
    const std::size_t before = p.out.size();
    p.lp->step();
    for (std::size_t k = before; k < p.out.size(); ++k) {
      q.lp->on_receive(p.out[k].msg);
      if (p.out[k].msg.kind == MessageKind::Null) {
        EXPECT_GT(q.lp->safe_time(), last);
        last = q.lp->safe_time();
      }
    }
  }
  EXPECT_GT(p.lp->counters().nulls_sent, 1u);
}

TEST(Delivery, InterleavedSourcesInTimestampOrder) {
  Probe c(make_lp_spec(case_study::build_case_study(), "C"));
  std::vector<std::pair<double, std::string>> fired;
  c.lp->kernel().set_trace_sink([&](const TraceRecord& r) {
    if (r.block_id == "fromA" || r.block_id == "fromB") fired.emplace_back(r.time.hours(), r.block_id);
  });
  c.lp->on_receive(data_at("A", 20.0, 1));
  c.lp->on_receive(data_at("B", 15.0, 1));
  c.lp->on_receive(data_at("A", 30.0, 2));
  c.lp->on_receive(data_at("B", 30.0, 2));
  c.lp->on_receive(null_at("A", 40.0));
  c.lp->on_receive(null_at("B", 40.0));
  while (std::holds_alternative<Advanced>(c.lp->step())) {
  }
  const std::vector<std::pair<double, std::string>> expected{
      {15.0, "fromB"}, {20.0, "fromA"}, {30.0, "fromA"}, {30.0, "fromB"}};
  EXPECT_EQ(fired, expected);
}

TEST(Delivery, ReleaseAtSafeTimeWaits) {
  Probe c(make_lp_spec(case_study::build_case_study(), "C"));
  c.lp->on_receive(data_at("A", 20.0, 1));
  c.lp->on_receive(null_at("B", 20.0));
  c.lp->run_until_blocked();
  EXPECT_EQ(c.lp->counters().data_released, 0u);
  c.lp->on_receive(null_at("B", 20.5));
  c.lp->run_until_blocked();
  EXPECT_EQ(c.lp->counters().data_released, 0u);  // the A channel itself still sits at 20
  c.lp->on_receive(null_at("A", 20.5));
  c.lp->run_until_blocked();
  EXPECT_EQ(c.lp->counters().data_released, 1u);
}

// Single-threaded round robin over all LPs of a scenario with FIFO channels.
struct RoundRobin {
  std::vector<std::unique_ptr<Probe>> probes;
  std::map<std::string, std::size_t> index;
  std::uint64_t events = 0;

  RoundRobin(const Scenario& s, std::uint64_t quantum = 100) {
    for (const LpDecl& d : s.lps) {
      LpSpec spec = make_lp_spec(s, d.id());
      spec.null_quantum = quantum;
      index[d.id()] = probes.size();
      probes.push_back(std::make_unique<Probe>(std::move(spec), s.seed));
    }
  }

  // Returns false if no LP could move in a full round (deadlock).
  bool run() {
    std::vector<std::size_t> forwarded(probes.size(), 0);
    while (true) {
      bool all_done = true, moved = false;
      for (std::size_t i = 0; i < probes.size(); ++i) {
        Probe& p = *probes[i];
        for (int k = 0; k < 64; ++k) {
          const Progress pr = p.lp->step();
          if (std::holds_alternative<Advanced>(pr)) {
            ++events;
            moved = true;
          } else {
            break;
          }
        }
        for (; forwarded[i] < p.out.size(); ++forwarded[i]) {
          const Sent& s = p.out[forwarded[i]];
          probes[index.at(s.dest)]->lp->on_receive(s.msg);
          moved = true;
        }
        all_done = all_done && p.lp->finished();
      }
      if (all_done) return true;
      if (!moved) return false;
    }
  }
};

TEST(RoundRobin, CaseStudyFinishes) {
  RoundRobin rr(case_study::build_case_study());
  ASSERT_TRUE(rr.run());
  const auto& b = *rr.probes[rr.index.at("B")]->lp;
  EXPECT_GT(b.counters().data_received, 0u);
  EXPECT_EQ(b.report().final_clock, SimTime{5000.0});
  // Per-link DATA timestamps never decrease.
  for (const auto& p : rr.probes) {
    std::map<std::string, double> last;
    for (const DataRecord& d : p->lp->data_log()) {
      EXPECT_GE(d.timestamp, last[d.dest]);
      last[d.dest] = d.timestamp;
    }
  }
}

TEST(RoundRobin, RandomAcyclicAndCyclicFinish) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (bool cyclic : {false, true}) {
      RoundRobin rr(testing::random_scenario(seed, {2, 5, cyclic, 300.0}), 1 + seed % 7);
      EXPECT_TRUE(rr.run()) << "seed " << seed << " cyclic " << cyclic;
    }
  }
}

}  // namespace
}  // namespace dms::sync

#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "dms/kernel/kernel.hpp"

namespace dms {
namespace {

BlockSpec block(std::string id, BlockParams params, std::string next = {}) {
  return BlockSpec{std::move(id), std::move(params), std::move(next)};
}

LpModel single_server(Distribution interarrival, Distribution service, SimTime first = SimTime{0.0}) {
  LpModel lp;
  lp.lp_id = "A";
  lp.resources = {{"m", 1}};
  lp.blocks = {
      block("src", CreateParams{"X", interarrival, first}, "work"),
      block("work", ProcessParams{"m", service, std::nullopt}, "out"),
      block("out", DisposeParams{}),
  };
  return lp;
}

// A lone Dispose block, so events have a valid target.
KernelModel inert_model() {
  LpModel lp;
  lp.lp_id = "A";
  lp.blocks = {block("out", DisposeParams{})};
  return KernelModel{{lp}};
}

void run_until(Kernel& k, double end) {
  while (k.peek() && k.peek()->time.hours() <= end) k.step();
  k.finish(SimTime{end});
}

TEST(Kernel, ScheduleAtCurrentClockIsAccepted) {
  Kernel k(inert_model(), 1);
  k.schedule(Event{.time = SimTime{10.0}});
  ASSERT_TRUE(k.advance());
  EXPECT_EQ(k.clock(), SimTime{10.0});
  k.schedule(Event{.time = SimTime{10.0}});
  auto e = k.advance();
  ASSERT_TRUE(e);
  EXPECT_EQ(e->time, SimTime{10.0});
}

TEST(Kernel, ScheduleInThePastThrows) {
  Kernel k(inert_model(), 1);
  k.schedule(Event{.time = SimTime{10.0}});
  k.advance();
  try {
    k.schedule(Event{.time = SimTime{9.9}});
    FAIL() << "expected PastEvent";
  } catch (const KernelError& e) {
    EXPECT_EQ(e.code(), KernelError::Code::PastEvent);
  }
}

TEST(Kernel, EqualTimesBreakTiesBySeq) {
  Kernel k(inert_model(), 1);
  for (int i = 0; i < 8; ++i) k.schedule(Event{.time = SimTime{5.0}});
  std::uint64_t last = 0;
  for (int i = 0; i < 8; ++i) {
    auto e = k.advance();
    ASSERT_TRUE(e);
    if (i > 0) EXPECT_GT(e->seq, last);
    last = e->seq;
  }
}

TEST(Kernel, AdvanceReturnsMinimumAndMovesClock) {
  Kernel k(inert_model(), 1);
  k.schedule(Event{.time = SimTime{7.0}});
  k.schedule(Event{.time = SimTime{3.0}});
  auto e = k.advance();
  ASSERT_TRUE(e);
  EXPECT_EQ(e->time, SimTime{3.0});
  EXPECT_EQ(k.clock(), SimTime{3.0});
}

TEST(Kernel, AdvanceOnEmptyCalendarLeavesClock) {
  Kernel k(inert_model(), 1);
  EXPECT_FALSE(k.advance());
  EXPECT_EQ(k.clock(), SimTime{0.0});
}

TEST(Kernel, ExtractionMatchesStableSortOfInsertions) {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<int> coarse(0, 2000);  // forces many equal times
  std::uniform_int_distribution<int> prio(0, 1);
  Kernel k(inert_model(), 1);
  std::vector<std::pair<double, int>> inserted;
  for (int i = 0; i < 100000; ++i) {
    const double t = coarse(rng) * 0.25;
    const int p = prio(rng);
    inserted.emplace_back(t, p);
    k.schedule(Event{.time = SimTime{t}, .priority = static_cast<EventClass>(p)});
  }
  std::stable_sort(inserted.begin(), inserted.end());
  // Sequence numbers were assigned in insertion order, so a stable sort on
  // (time, priority) is the expected extraction order.
  std::uint64_t i = 0;
  while (auto e = k.advance()) {
    ASSERT_LT(i, inserted.size());
    EXPECT_EQ(e->time.hours(), inserted[i].first);
    EXPECT_EQ(static_cast<int>(e->priority), inserted[i].second);
    ++i;
  }
  EXPECT_EQ(i, inserted.size());
}

TEST(Kernel, SeparateAdds999ToMakeABatchOf1000) {
  LpModel lp;
  lp.lp_id = "B";
  lp.blocks = {
      block("in", CreatePortParams{"A", "X"}, "sep"),
      block("sep", SeparateParams{999}, "out"),
      block("out", DisposeParams{}),
  };
  Kernel k(KernelModel{{lp}}, 1);
  k.release_port_entity(k.find_block("B", "in"), SimTime{110.0}, 1);
  run_until(k, 200.0);
  const LocalReport r = k.report("B");
  ASSERT_EQ(r.departures.size(), 1u);
  EXPECT_EQ(r.departures[0].entities, 1u);
  EXPECT_EQ(r.departures[0].units, 1000u);
}

TEST(Kernel, SeparateWithZeroAddedIsIdentity) {
  LpModel lp;
  lp.lp_id = "B";
  lp.blocks = {
      block("in", CreatePortParams{"A", "X"}, "sep"),
      block("sep", SeparateParams{0}, "out"),
      block("out", DisposeParams{}),
  };
  Kernel k(KernelModel{{lp}}, 1);
  k.release_port_entity(0, SimTime{1.0}, 1);
  run_until(k, 2.0);
  EXPECT_EQ(k.report("B").departures.at(0).units, 1u);
}

TEST(Kernel, SingleServerFifoDepartures) {
  LpModel lp = single_server(Distribution::constant(1.0), Distribution::constant(5.0));
  Kernel k(KernelModel{{lp}}, 1);
  std::vector<double> departures;
  k.set_trace_sink([&](const TraceRecord& r) {
    if (r.block_id == "work") departures.push_back(r.time.hours());
  });
  k.start();
  run_until(k, 10.0);
  ASSERT_GE(departures.size(), 2u);
  EXPECT_EQ(departures[0], 5.0);
  EXPECT_EQ(departures[1], 10.0);
}

TEST(Kernel, PortReleasesHappenAtMessageTimestamp) {
  LpModel lp;
  lp.lp_id = "B";
  lp.blocks = {block("in", CreatePortParams{"A", "X"}, "out"), block("out", DisposeParams{})};
  Kernel k(KernelModel{{lp}}, 1);
  std::vector<double> releases;
  k.set_trace_sink([&](const TraceRecord& r) { releases.push_back(r.time.hours()); });
  // Sent at 40, 60, 80 over a 10-hour link.
  k.release_port_entity(0, SimTime{40.0 + 10.0}, 1);
  k.release_port_entity(0, SimTime{60.0 + 10.0}, 2);
  k.release_port_entity(0, SimTime{80.0 + 10.0}, 3);
  run_until(k, 100.0);
  EXPECT_EQ(releases, (std::vector<double>{50.0, 70.0, 90.0}));
}

TEST(Kernel, ZeroTransferReleasesAtSendTime) {
  LpModel lp;
  lp.lp_id = "B";
  lp.blocks = {block("in", CreatePortParams{"A", "X"}, "out"), block("out", DisposeParams{})};
  Kernel k(KernelModel{{lp}}, 1);
  std::vector<double> releases;
  k.set_trace_sink([&](const TraceRecord& r) { releases.push_back(r.time.hours()); });
  k.release_port_entity(0, SimTime{100.0}, 1);
  run_until(k, 100.0);
  EXPECT_EQ(releases, std::vector<double>{100.0});
}

TEST(Kernel, PortReleasesSortAfterLocalEventsAtTheSameTime) {
  LpModel lp = single_server(Distribution::constant(100.0), Distribution::constant(5.0));
  lp.blocks.insert(lp.blocks.begin(), block("in", CreatePortParams{"Z", "Y"}, "work"));
  Kernel k(KernelModel{{lp}}, 1);
  std::vector<std::string> order;
  k.set_trace_sink([&](const TraceRecord& r) { order.push_back(r.block_id); });
  k.release_port_entity(k.find_block("A", "in"), SimTime{0.0}, 1);
  k.start();
  k.step();
  k.step();
  EXPECT_EQ(order, (std::vector<std::string>{"src", "in"}));
}

TEST(Kernel, ReleaseOrderDependsOnLinkSeqNotCallOrder) {
  LpModel lp;
  lp.lp_id = "C";
  lp.blocks = {
      block("fromA", CreatePortParams{"A", "Z"}, "out"),
      block("fromB", CreatePortParams{"B", "XY"}, "out"),
      block("out", DisposeParams{}),
  };
  auto run = [&](bool reversed) {
    Kernel k(KernelModel{{lp}}, 1);
    std::vector<std::string> order;
    k.set_trace_sink([&](const TraceRecord& r) { order.push_back(r.block_id + "#" + std::to_string(r.seq)); });
    if (reversed) {
      k.release_port_entity(1, SimTime{5.0}, 1);
      k.release_port_entity(0, SimTime{5.0}, 2);
      k.release_port_entity(0, SimTime{5.0}, 1);
    } else {
      k.release_port_entity(0, SimTime{5.0}, 1);
      k.release_port_entity(0, SimTime{5.0}, 2);
      k.release_port_entity(1, SimTime{5.0}, 1);
    }
    run_until(k, 6.0);
    return order;
  };
  EXPECT_EQ(run(false), run(true));
}

TEST(Kernel, UtilizationIsBusyOverCapacityTimesElapsed) {
  LpModel lp = single_server(Distribution::constant(2000.0), Distribution::constant(500.0));
  Kernel k(KernelModel{{lp}}, 1);
  k.start();
  run_until(k, 1000.0);
  const ResourceStats* m = k.report("A").resource("m");
  ASSERT_NE(m, nullptr);
  EXPECT_DOUBLE_EQ(m->busy_time, 500.0);
  EXPECT_DOUBLE_EQ(m->utilization, 0.5);
}

TEST(Kernel, EmptyRunReportsZeros) {
  LpModel lp = single_server(Distribution::constant(1.0), Distribution::constant(1.0), SimTime{5000.0});
  Kernel k(KernelModel{{lp}}, 1);
  k.start();
  run_until(k, 1000.0);
  const LocalReport r = k.report("A");
  EXPECT_TRUE(r.departures.empty());
  EXPECT_EQ(r.resource("m")->utilization, 0.0);
  for (const BlockStats& b : r.blocks) EXPECT_EQ(b.entities_out, 0u);
}

TEST(Kernel, BatchEmitsOneEntityWithSummedUnits) {
  LpModel lp;
  lp.lp_id = "A";
  lp.blocks = {
      block("src", CreateParams{"X", Distribution::constant(1.0), SimTime{1.0}}, "batch"),
      block("batch", BatchParams{4}, "out"),
      block("out", DisposeParams{}),
  };
  Kernel k(KernelModel{{lp}}, 1);
  k.start();
  run_until(k, 10.0);  // 10 arrivals -> 2 batches, 2 units held
  const LocalReport r = k.report("A");
  EXPECT_EQ(r.departures.at(0).entities, 2u);
  EXPECT_EQ(r.departures.at(0).units, 8u);
  EXPECT_EQ(r.block("batch")->units_in, 10u);
}

TEST(Kernel, ResourceNeverExceedsCapacityAndServesFifo) {
  LpModel lp = single_server(Distribution::exponential(1.0), Distribution::uniform(0.5, 3.0));
  lp.resources[0].capacity = 3;
  lp.blocks[1].params = ProcessParams{"m", Distribution::constant(2.0), std::string("Xdone")};
  Kernel k(KernelModel{{lp}}, 7);
  // With constant service and FIFO seizing, entities leave in creation order.
  std::vector<double> created, finished;
  k.set_trace_sink([&](const TraceRecord& r) {
    if (r.block_id == "src") created.push_back(r.time.hours());
    if (r.block_id == "work") {
      EXPECT_EQ(r.entity_kind, "Xdone");
      finished.push_back(r.time.hours());
    }
  });
  k.start();
  run_until(k, 2000.0);
  ASSERT_GT(finished.size(), 100u);
  EXPECT_TRUE(std::is_sorted(finished.begin(), finished.end()));
  EXPECT_LE(k.report("A").resource("m")->utilization, 1.0);
  for (std::size_t i = 0; i < finished.size(); ++i) EXPECT_GE(finished[i], created[i] + 2.0);
}

TEST(Kernel, IdenticalSeedsGiveIdenticalTraces) {
  auto trace = [](std::uint64_t seed) {
    LpModel lp = single_server(Distribution::exponential(2.0), Distribution::triangular(0.5, 1.0, 3.0));
    Kernel k(KernelModel{{lp}}, seed);
    std::vector<std::string> lines;
    k.set_trace_sink([&](const TraceRecord& r) { lines.push_back(format_trace_line(r)); });
    k.start();
    run_until(k, 500.0);
    return lines;
  };
  EXPECT_EQ(trace(11), trace(11));
  EXPECT_NE(trace(11), trace(12));
}

TEST(Kernel, BlockStreamsDoNotDependOnOtherSections) {
  LpModel a = single_server(Distribution::exponential(2.0), Distribution::uniform(0.5, 1.5));
  LpModel other = single_server(Distribution::exponential(3.0), Distribution::uniform(0.1, 0.2));
  other.lp_id = "Q";
  auto trace_of_a = [&](KernelModel model) {
    Kernel k(std::move(model), 99);
    std::vector<std::string> lines;
    k.set_trace_sink([&](const TraceRecord& r) {
      if (r.lp_id == "A") lines.push_back(format_trace_line(r));
    });
    k.start();
    run_until(k, 300.0);
    return lines;
  };
  EXPECT_EQ(trace_of_a(KernelModel{{a}}), trace_of_a(KernelModel{{other, a}}));
}

TEST(Kernel, ConfigurationErrorsFailAtConstruction) {
  LpModel lp = single_server(Distribution::constant(1.0), Distribution::constant(1.0));
  lp.blocks[1].params = ProcessParams{"missing", Distribution::constant(1.0), std::nullopt};
  try {
    Kernel k(KernelModel{{lp}}, 1);
    FAIL();
  } catch (const KernelError& e) {
    EXPECT_EQ(e.code(), KernelError::Code::UnknownResource);
  }
  lp = single_server(Distribution::constant(1.0), Distribution::constant(1.0));
  lp.blocks[0].next = "nowhere";
  try {
    Kernel k(KernelModel{{lp}}, 1);
    FAIL();
  } catch (const KernelError& e) {
    EXPECT_EQ(e.code(), KernelError::Code::UnknownBlock);
  }
}

TEST(Kernel, TraceLineFormat) {
  const TraceRecord r{SimTime{50.0}, "A", "ship", "X", 1000, 3};
  EXPECT_EQ(format_trace_line(r), "t=50 lp=A block=ship entity_kind=X units=1000 seq=3");
  const TraceRecord frac{SimTime{0.1}, "A", "b", "X", 1, 0};
  EXPECT_EQ(format_trace_line(frac), "t=0.10000000000000001 lp=A block=b entity_kind=X units=1 seq=0");
}

TEST(Kernel, CsvReportUsesFourColumns) {
  LpModel lp = single_server(Distribution::constant(10.0), Distribution::constant(5.0));
  Kernel k(KernelModel{{lp}}, 1);
  k.start();
  run_until(k, 100.0);
  const std::string csv = to_csv({k.report("A")});
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "lp_id,object_id,metric,value");
  EXPECT_NE(csv.find("A,resource:m,utilization,0.5"), std::string::npos);
}

}  // namespace
}  // namespace dms

#include "dms/scenario/case_study.hpp"

namespace dms::case_study {
namespace {

Distribution d(const char* text) { return Distribution::parse(text); }

BlockSpec create(std::string id, std::string kind, const char* interarrival, std::string next) {
  return BlockSpec{std::move(id), CreateParams{std::move(kind), d(interarrival), SimTime{0.0}}, std::move(next)};
}

BlockSpec port(std::string id, std::string source, std::string kind, std::string next) {
  return BlockSpec{std::move(id), CreatePortParams{std::move(source), std::move(kind)}, std::move(next)};
}

BlockSpec process(std::string id, std::string resource, const char* service, std::string next,
                  std::optional<std::string> relabel = std::nullopt) {
  return BlockSpec{std::move(id), ProcessParams{std::move(resource), d(service), std::move(relabel)}, std::move(next)};
}

BlockSpec batch(std::string id, std::string next) { return BlockSpec{std::move(id), BatchParams{kBatchSize}, std::move(next)}; }

BlockSpec separate(std::string id, std::string next) {
  return BlockSpec{std::move(id), SeparateParams{kSeparateAdds}, std::move(next)};
}

BlockSpec send(std::string id, std::string dest) { return BlockSpec{std::move(id), PortSendParams{std::move(dest)}, {}}; }

BlockSpec dispose(std::string id) { return BlockSpec{std::move(id), DisposeParams{}, {}}; }

}  // namespace

Scenario build_case_study(const Illustrative& v) {
  Scenario s;
  s.name = "case_study";
  s.seed = v.seed;
  s.end_time = SimTime{kEndTime};

  LpDecl a;
  a.model.lp_id = "A";
  a.lookahead = SimTime{v.a_lookahead};
  a.model.resources = {{"machX", 1}, {"machZ", 1}, {"lineA", 1}};
  a.model.blocks = {
      create("makeX", "X", v.x_interarrival, "procX"),
      process("procX", "machX", v.x_service, "batchX"),
      batch("batchX", "toB"),
      send("toB", "B"),
      create("makeZ", "Z", v.z_interarrival, "procZ"),
      process("procZ", "machZ", v.z_service, "batchZ"),
      batch("batchZ", "toC"),
      send("toC", "C"),
      create("makePA", "PA", v.pa_interarrival, "procPA"),
      process("procPA", "lineA", v.pa_service, "shipPA"),
      dispose("shipPA"),
  };

  // X and Y share the assembly resource; the X batch leaves as XY.
  LpDecl b;
  b.model.lp_id = "B";
  b.lookahead = SimTime{v.b_lookahead};
  b.model.resources = {{"unitX", 1}, {"assembly", 1}, {"makerY", 1}, {"lineB", 1}};
  b.model.blocks = {
      port("fromA", "A", "X", "sepX"),
      separate("sepX", "procX"),
      process("procX", "unitX", v.x_unit_service, "assembleXY"),
      process("assembleXY", "assembly", v.xy_assembly, "toC", "XY"),
      send("toC", "C"),
      create("makeY", "Y", v.y_interarrival, "procY"),
      process("procY", "makerY", v.y_service, "fitY"),
      process("fitY", "assembly", v.y_fit, "usedY"),
      dispose("usedY"),
      create("makePB", "PB", v.pb_interarrival, "procPB"),
      process("procPB", "lineB", v.pb_service, "shipPB"),
      dispose("shipPB"),
  };

  LpDecl c;
  c.model.lp_id = "C";
  c.lookahead = SimTime{v.c_lookahead};
  c.model.resources = {{"cellZ", 1}, {"cellXY", 1}, {"final", 1}, {"lineC", 1}};
  c.model.blocks = {
      port("fromA", "A", "Z", "sepZ"),
      separate("sepZ", "procZ"),
      process("procZ", "cellZ", v.z_cell_service, "fitZ"),
      process("fitZ", "final", v.z_fit, "usedZ"),
      dispose("usedZ"),
      port("fromB", "B", "XY", "sepXY"),
      separate("sepXY", "procXY"),
      process("procXY", "cellXY", v.xy_cell_service, "assembleXYZ"),
      process("assembleXYZ", "final", v.xyz_assembly, "shipXYZ", "XYZ"),
      dispose("shipXYZ"),
      create("makePC", "PC", v.pc_interarrival, "procPC"),
      process("procPC", "lineC", v.pc_service, "shipPC"),
      dispose("shipPC"),
  };

  s.lps = {std::move(a), std::move(b), std::move(c)};
  s.links = {
      {"A", "B", SimTime{kTransferHours}},
      {"A", "C", SimTime{kTransferHours}},
      {"B", "C", SimTime{kTransferHours}},
  };
  return s;
}

}  // namespace dms::case_study

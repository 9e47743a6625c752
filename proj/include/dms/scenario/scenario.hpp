#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dms/kernel/model.hpp"
#include "dms/kernel/sim_time.hpp"

namespace dms {

struct LinkSpec {
  std::string from;
  std::string to;
  SimTime transfer{0.0};
  friend bool operator==(const LinkSpec&, const LinkSpec&) = default;
};

struct LpDecl {
  LpModel model;
  SimTime lookahead{1.0};
  const std::string& id() const { return model.lp_id; }
  friend bool operator==(const LpDecl&, const LpDecl&) = default;
};

struct Scenario {
  std::string name = "scenario";
  std::uint64_t seed = 1;
  SimTime end_time{5000.0};
  std::uint32_t replications = 1;
  std::vector<LpDecl> lps;
  std::vector<LinkSpec> links;

  const LpDecl* lp(std::string_view id) const;
  const LinkSpec* link(std::string_view from, std::string_view to) const;
  std::vector<LinkSpec> in_links(std::string_view lp_id) const;
  std::vector<LinkSpec> out_links(std::string_view lp_id) const;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& reason);
  std::size_t line() const { return line_; }
  const std::string& reason() const { return reason_; }

 private:
  std::size_t line_;
  std::string reason_;
};

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

// Syntax only; throws ParseError.
Scenario parse_scenario(std::string_view text);
// Every referential and range problem found; empty when valid.
std::vector<std::string> validation_problems(const Scenario& scenario);
// Throws ValidationError when validation_problems() is non-empty.
void validate(const Scenario& scenario);

// parse + validate.
Scenario load_scenario_text(std::string_view text);
Scenario load_scenario(const std::filesystem::path& path);

std::string save_scenario(const Scenario& scenario);
// The lp, resource and block lines of one LP.
std::string save_lp(const LpDecl& lp);

struct LookaheadWarning {
  std::string lp_id;
  std::string message;
};

// Per LP, the smallest summed service lower bound over its input-to-output
// block paths, compared against the declared lookahead.
std::vector<LookaheadWarning> effective_lookahead_check(const Scenario& scenario);

// Summed service lower bound from `block_id` (inclusive) to the PortSend its
// chain ends in, plus that PortSend's destination; nullopt if the chain ends
// in a Dispose. `unbounded` is set when an exponential service is crossed.
struct ChainBound {
  double hours = 0.0;
  std::string destination;
  bool unbounded = false;
};
std::optional<ChainBound> chain_bound(const LpModel& lp, std::string_view block_id);

}  // namespace dms

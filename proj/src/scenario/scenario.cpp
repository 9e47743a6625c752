#include "dms/scenario/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <sstream>

#include <fmt/format.h>

namespace dms {
namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

bool valid_id(std::string_view id) {
  return !id.empty() && std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  });
}

// The key=value tail of one line, consumed key by key.
class Options {
 public:
  Options(std::size_t line, std::span<const std::string_view> tokens) : line_(line) {
    for (std::string_view t : tokens) {
      const auto eq = t.find('=');
      if (eq == std::string_view::npos || eq == 0) throw ParseError(line, fmt::format("expected key=value, got '{}'", t));
      const std::string key(t.substr(0, eq));
      if (!values_.emplace(key, std::string(t.substr(eq + 1))).second) {
        throw ParseError(line, fmt::format("duplicate key '{}'", key));
      }
    }
  }

  std::string text(const std::string& key) {
    auto v = optional_text(key);
    if (!v) throw ParseError(line_, fmt::format("missing {}=", key));
    return *v;
  }

  std::optional<std::string> optional_text(const std::string& key) {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    std::string v = std::move(it->second);
    values_.erase(it);
    return v;
  }

  std::string id(const std::string& key) {
    std::string v = text(key);
    if (!valid_id(v)) throw ParseError(line_, fmt::format("invalid identifier '{}' for {}=", v, key));
    return v;
  }

  double number(const std::string& key) { return parse_number(line_, text(key), key); }

  std::uint64_t integer(const std::string& key) { return parse_integer(line_, text(key), key); }

  Distribution distribution(const std::string& key) {
    const std::string v = text(key);
    try {
      return Distribution::parse(v);
    } catch (const std::invalid_argument& e) {
      throw ParseError(line_, fmt::format("{}=: {}", key, e.what()));
    }
  }

  // Rejects keys nobody asked for.
  void finish() const {
    if (!values_.empty()) throw ParseError(line_, fmt::format("unknown key '{}'", values_.begin()->first));
  }

  static double parse_number(std::size_t line, std::string_view text, std::string_view what) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
      throw ParseError(line, fmt::format("{}: '{}' is not a number", what, text));
    }
    return v;
  }

  static std::uint64_t parse_integer(std::size_t line, std::string_view text, std::string_view what) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
      throw ParseError(line, fmt::format("{}: '{}' is not a non-negative integer", what, text));
    }
    return v;
  }

 private:
  std::size_t line_;
  std::map<std::string, std::string> values_;
};

BlockKind parse_kind(std::size_t line, std::string_view text) {
  for (BlockKind k : {BlockKind::Create, BlockKind::CreatePort, BlockKind::Process, BlockKind::Batch,
                      BlockKind::Separate, BlockKind::PortSend, BlockKind::Dispose}) {
    if (to_string(k) == text) return k;
  }
  throw ParseError(line, fmt::format("unknown block kind '{}'", text));
}

BlockSpec parse_block(std::size_t line, std::string id, BlockKind kind, Options& opt) {
  BlockSpec b;
  b.id = std::move(id);
  switch (kind) {
    case BlockKind::Create: {
      CreateParams p;
      p.entity_kind = opt.id("kind");
      p.interarrival = opt.distribution("interarrival");
      if (auto first = opt.optional_text("first")) p.first_arrival = SimTime{Options::parse_number(line, *first, "first")};
      b.params = std::move(p);
      break;
    }
    case BlockKind::CreatePort:
      b.params = CreatePortParams{opt.id("source"), opt.id("kind")};
      break;
    case BlockKind::Process: {
      ProcessParams p;
      p.resource = opt.id("resource");
      p.service = opt.distribution("service");
      if (auto relabel = opt.optional_text("relabel")) {
        if (!valid_id(*relabel)) throw ParseError(line, fmt::format("invalid relabel '{}'", *relabel));
        p.relabel = std::move(*relabel);
      }
      b.params = std::move(p);
      break;
    }
    case BlockKind::Batch:
      b.params = BatchParams{opt.integer("size")};
      break;
    case BlockKind::Separate:
      b.params = SeparateParams{opt.integer("add")};
      break;
    case BlockKind::PortSend:
      b.params = PortSendParams{opt.id("dest")};
      break;
    case BlockKind::Dispose:
      b.params = DisposeParams{};
      break;
  }
  if (has_successor(kind)) b.next = opt.id("next");
  opt.finish();
  return b;
}

std::string block_line(const std::string& lp, const BlockSpec& b) {
  std::string out = fmt::format("block {} {} {}", lp, b.id, to_string(b.kind()));
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, CreateParams>) {
          out += fmt::format(" kind={} interarrival={} first={}", p.entity_kind, p.interarrival.to_string(),
                             format_time(p.first_arrival));
        } else if constexpr (std::is_same_v<T, CreatePortParams>) {
          out += fmt::format(" source={} kind={}", p.source, p.entity_kind);
        } else if constexpr (std::is_same_v<T, ProcessParams>) {
          out += fmt::format(" resource={} service={}", p.resource, p.service.to_string());
          if (p.relabel) out += " relabel=" + *p.relabel;
        } else if constexpr (std::is_same_v<T, BatchParams>) {
          out += fmt::format(" size={}", p.size);
        } else if constexpr (std::is_same_v<T, SeparateParams>) {
          out += fmt::format(" add={}", p.added_units);
        } else if constexpr (std::is_same_v<T, PortSendParams>) {
          out += fmt::format(" dest={}", p.destination);
        }
      },
      b.params);
  if (has_successor(b.kind())) out += " next=" + b.next;
  return out;
}

LpDecl* find_lp(Scenario& s, std::string_view id) {
  for (LpDecl& lp : s.lps) {
    if (lp.id() == id) return &lp;
  }
  return nullptr;
}

void validate_lp(const Scenario& s, const LpDecl& lp, std::vector<std::string>& problems) {
  auto problem = [&](std::string text) { problems.push_back(fmt::format("LP {}: {}", lp.id(), text)); };
  if (!(lp.lookahead.hours() > 0.0)) problem("lookahead must be positive");

  std::set<std::string, std::less<>> resources;
  for (const ResourceSpec& r : lp.model.resources) {
    if (!resources.insert(r.id).second) problem(fmt::format("duplicate resource '{}'", r.id));
    if (r.capacity < 1) problem(fmt::format("resource '{}' needs capacity >= 1", r.id));
  }

  std::map<std::string, const BlockSpec*, std::less<>> blocks;
  for (const BlockSpec& b : lp.model.blocks) {
    if (!blocks.emplace(b.id, &b).second) problem(fmt::format("duplicate block '{}'", b.id));
  }

  std::set<std::string, std::less<>> port_sources;
  std::set<std::string, std::less<>> send_destinations;
  for (const BlockSpec& b : lp.model.blocks) {
    if (has_successor(b.kind())) {
      auto it = blocks.find(b.next);
      if (it == blocks.end()) {
        problem(fmt::format("block '{}' has unknown successor '{}'", b.id, b.next));
      } else if (it->second->kind() == BlockKind::Create || it->second->kind() == BlockKind::CreatePort) {
        problem(fmt::format("block '{}' feeds source block '{}'", b.id, b.next));
      }
    }
    if (const auto* p = std::get_if<ProcessParams>(&b.params)) {
      if (!resources.contains(p->resource)) {
        problem(fmt::format("block '{}' uses undeclared resource '{}'", b.id, p->resource));
      }
    } else if (const auto* p = std::get_if<BatchParams>(&b.params)) {
      if (p->size < 1) problem(fmt::format("batch '{}' needs size >= 1", b.id));
    } else if (const auto* p = std::get_if<CreatePortParams>(&b.params)) {
      if (!port_sources.insert(p->source).second) problem(fmt::format("two ports for source '{}'", p->source));
      if (!s.link(p->source, lp.id())) {
        problem(fmt::format("port '{}' expects link {} -> {} which is not declared", b.id, p->source, lp.id()));
      }
    } else if (const auto* p = std::get_if<PortSendParams>(&b.params)) {
      send_destinations.insert(p->destination);
      if (!s.link(lp.id(), p->destination)) {
        problem(fmt::format("port-send '{}' targets undeclared link {} -> {}", b.id, lp.id(), p->destination));
      }
    }
  }

  // Successor chains must end in a sink; a revisited block is a cycle.
  for (const BlockSpec& b : lp.model.blocks) {
    std::set<std::string_view> seen;
    const BlockSpec* cur = &b;
    while (cur && has_successor(cur->kind())) {
      if (!seen.insert(cur->id).second) {
        problem(fmt::format("block '{}' lies on a successor cycle", b.id));
        break;
      }
      auto it = blocks.find(cur->next);
      cur = it == blocks.end() ? nullptr : it->second;
    }
  }

  for (const LinkSpec& l : s.in_links(lp.id())) {
    if (!port_sources.contains(l.from)) problem(fmt::format("link {} -> {} has no receiving port", l.from, l.to));
  }
  for (const LinkSpec& l : s.out_links(lp.id())) {
    if (!send_destinations.contains(l.to)) problem(fmt::format("link {} -> {} has no port-send block", l.from, l.to));
  }
}

}  // namespace

ParseError::ParseError(std::size_t line, const std::string& reason)
    : std::runtime_error(fmt::format("line {}: {}", line, reason)), line_(line), reason_(reason) {}

ValidationError::ValidationError(std::vector<std::string> problems)
    : std::runtime_error([&] {
        std::string what = "invalid scenario:";
        for (const std::string& p : problems) what += "\n  " + p;
        return what;
      }()),
      problems_(std::move(problems)) {}

const LpDecl* Scenario::lp(std::string_view id) const {
  for (const LpDecl& lp : lps) {
    if (lp.id() == id) return &lp;
  }
  return nullptr;
}

const LinkSpec* Scenario::link(std::string_view from, std::string_view to) const {
  for (const LinkSpec& l : links) {
    if (l.from == from && l.to == to) return &l;
  }
  return nullptr;
}

std::vector<LinkSpec> Scenario::in_links(std::string_view lp_id) const {
  std::vector<LinkSpec> out;
  for (const LinkSpec& l : links) {
    if (l.to == lp_id) out.push_back(l);
  }
  return out;
}

std::vector<LinkSpec> Scenario::out_links(std::string_view lp_id) const {
  std::vector<LinkSpec> out;
  for (const LinkSpec& l : links) {
    if (l.from == lp_id) out.push_back(l);
  }
  return out;
}

Scenario parse_scenario(std::string_view text) {
  Scenario s;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    const std::string_view kw = tok[0];

    auto expect_args = [&](std::size_t n) {
      if (tok.size() != n) throw ParseError(line_no, fmt::format("'{}' takes {} argument(s)", kw, n - 1));
    };
    auto lp_ref = [&](std::string_view id) -> LpDecl& {
      LpDecl* lp = find_lp(s, id);
      if (!lp) throw ParseError(line_no, fmt::format("LP '{}' is not declared (yet)", id));
      return *lp;
    };
    auto checked_id = [&](std::string_view id) {
      if (!valid_id(id)) throw ParseError(line_no, fmt::format("invalid identifier '{}'", id));
      return std::string(id);
    };

    if (kw == "scenario") {
      expect_args(2);
      s.name = checked_id(tok[1]);
    } else if (kw == "seed") {
      expect_args(2);
      s.seed = Options::parse_integer(line_no, tok[1], "seed");
    } else if (kw == "end_time") {
      expect_args(2);
      s.end_time = SimTime{Options::parse_number(line_no, tok[1], "end_time")};
    } else if (kw == "replications") {
      expect_args(2);
      s.replications = static_cast<std::uint32_t>(Options::parse_integer(line_no, tok[1], "replications"));
    } else if (kw == "lp") {
      if (tok.size() < 2) throw ParseError(line_no, "lp needs an id");
      LpDecl lp;
      lp.model.lp_id = checked_id(tok[1]);
      if (find_lp(s, lp.model.lp_id)) throw ParseError(line_no, fmt::format("LP '{}' declared twice", tok[1]));
      Options opt(line_no, std::span(tok).subspan(2));
      lp.lookahead = SimTime{opt.number("lookahead")};
      opt.finish();
      s.lps.push_back(std::move(lp));
    } else if (kw == "resource") {
      if (tok.size() < 3) throw ParseError(line_no, "resource needs <lp> <id>");
      LpDecl& lp = lp_ref(tok[1]);
      Options opt(line_no, std::span(tok).subspan(3));
      const std::uint64_t cap = opt.integer("capacity");
      opt.finish();
      if (cap > UINT32_MAX) throw ParseError(line_no, "capacity too large");
      lp.model.resources.push_back(ResourceSpec{checked_id(tok[2]), static_cast<std::uint32_t>(cap)});
    } else if (kw == "block") {
      if (tok.size() < 4) throw ParseError(line_no, "block needs <lp> <id> <kind>");
      LpDecl& lp = lp_ref(tok[1]);
      Options opt(line_no, std::span(tok).subspan(4));
      lp.model.blocks.push_back(parse_block(line_no, checked_id(tok[2]), parse_kind(line_no, tok[3]), opt));
    } else if (kw == "link") {
      if (tok.size() < 4 || tok[2] != "->") throw ParseError(line_no, "expected 'link <from> -> <to> transfer=<h>'");
      Options opt(line_no, std::span(tok).subspan(4));
      LinkSpec l{checked_id(tok[1]), checked_id(tok[3]), SimTime{opt.number("transfer")}};
      opt.finish();
      s.links.push_back(std::move(l));
    } else {
      throw ParseError(line_no, fmt::format("unknown keyword '{}'", kw));
    }
  }
  return s;
}

std::vector<std::string> validation_problems(const Scenario& s) {
  std::vector<std::string> problems;
  if (!(s.end_time.hours() > 0.0)) problems.push_back("end_time must be positive");
  if (s.replications < 1) problems.push_back("replications must be at least 1");
  if (s.lps.empty()) problems.push_back("no LPs declared");

  std::set<std::pair<std::string, std::string>> seen_links;
  for (const LinkSpec& l : s.links) {
    const std::string name = fmt::format("link {} -> {}", l.from, l.to);
    if (!s.lp(l.from)) problems.push_back(fmt::format("{}: unknown LP '{}'", name, l.from));
    if (!s.lp(l.to)) problems.push_back(fmt::format("{}: unknown LP '{}'", name, l.to));
    if (l.from == l.to) problems.push_back(name + ": an LP cannot link to itself");
    if (!seen_links.emplace(l.from, l.to).second) problems.push_back(name + ": declared twice");
    if (!is_valid_time(l.transfer.hours())) problems.push_back(name + ": transfer must be finite and >= 0");
  }
  std::set<std::string> ids;
  for (const LpDecl& lp : s.lps) {
    if (!ids.insert(lp.id()).second) problems.push_back(fmt::format("LP '{}' declared twice", lp.id()));
    validate_lp(s, lp, problems);
  }
  return problems;
}

void validate(const Scenario& scenario) {
  auto problems = validation_problems(scenario);
  if (!problems.empty()) throw ValidationError(std::move(problems));
}

Scenario load_scenario_text(std::string_view text) {
  Scenario s = parse_scenario(text);
  validate(s);
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot open {}", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_scenario_text(buf.str());
}

std::string save_lp(const LpDecl& lp) {
  std::string out = fmt::format("lp {} lookahead={}\n", lp.id(), format_time(lp.lookahead));
  for (const ResourceSpec& r : lp.model.resources) {
    out += fmt::format("resource {} {} capacity={}\n", lp.id(), r.id, r.capacity);
  }
  for (const BlockSpec& b : lp.model.blocks) out += block_line(lp.id(), b) + "\n";
  return out;
}

std::string save_scenario(const Scenario& s) {
  std::string out;
  out += fmt::format("scenario {}\nseed {}\nend_time {}\nreplications {}\n", s.name, s.seed,
                     format_time(s.end_time), s.replications);
  for (const LpDecl& lp : s.lps) out += "\n" + save_lp(lp);
  if (!s.links.empty()) out += "\n";
  for (const LinkSpec& l : s.links) {
    out += fmt::format("link {} -> {} transfer={}\n", l.from, l.to, format_time(l.transfer));
  }
  return out;
}

std::optional<ChainBound> chain_bound(const LpModel& lp, std::string_view block_id) {
  ChainBound bound;
  std::string_view cur = block_id;
  for (std::size_t steps = 0; steps <= lp.blocks.size(); ++steps) {
    auto it = std::find_if(lp.blocks.begin(), lp.blocks.end(), [&](const BlockSpec& b) { return b.id == cur; });
    if (it == lp.blocks.end()) return std::nullopt;
    if (const auto* p = std::get_if<ProcessParams>(&it->params)) {
      bound.hours += p->service.lower_bound();
      bound.unbounded = bound.unbounded || p->service.unbounded_below();
    }
    if (const auto* p = std::get_if<PortSendParams>(&it->params)) {
      bound.destination = p->destination;
      return bound;
    }
    if (!has_successor(it->kind())) return std::nullopt;
    cur = it->next;
  }
  return std::nullopt;  // cycle; rejected by validation
}

std::vector<LookaheadWarning> effective_lookahead_check(const Scenario& s) {
  std::vector<LookaheadWarning> warnings;
  for (const LpDecl& lp : s.lps) {
    // Paths start where outside input enters; an LP without ports is judged
    // from its own Create blocks.
    const bool has_ports = std::any_of(lp.model.blocks.begin(), lp.model.blocks.end(),
                                       [](const BlockSpec& b) { return b.kind() == BlockKind::CreatePort; });
    const BlockKind source_kind = has_ports ? BlockKind::CreatePort : BlockKind::Create;
    std::optional<double> minimum;
    bool unbounded = false;
    for (const BlockSpec& b : lp.model.blocks) {
      if (b.kind() != source_kind) continue;
      auto bound = chain_bound(lp.model, b.id);
      if (!bound) continue;
      unbounded = unbounded || bound->unbounded;
      minimum = std::min(minimum.value_or(bound->hours), bound->hours);
    }
    if (!minimum) continue;
    const double declared = lp.lookahead.hours();
    if (declared > *minimum) {
      warnings.push_back(LookaheadWarning{
          lp.id(), fmt::format("declared lookahead {} exceeds the minimum input-to-output processing time {}{}",
                               format_double(declared), format_double(*minimum),
                               unbounded ? " (unbounded-below path: exponential service)" : "")});
    }
  }
  return warnings;
}

}  // namespace dms

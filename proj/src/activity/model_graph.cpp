#include "dms/activity/model_graph.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace dms::activity {
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

std::optional<ArcRole> parse_role(std::string_view text) {
  for (ArcRole r : {ArcRole::Input, ArcRole::Control, ArcRole::Output, ArcRole::Mechanism}) {
    if (to_string(r) == text) return r;
  }
  return std::nullopt;
}

[[noreturn]] void invalid(const std::string& what) { throw ActivityError(ActivityError::Code::InvalidModel, what); }

}  // namespace

std::string_view to_string(ArcRole role) {
  switch (role) {
    case ArcRole::Input:
      return "input";
    case ArcRole::Control:
      return "control";
    case ArcRole::Output:
      return "output";
    case ArcRole::Mechanism:
      return "mechanism";
  }
  return "?";
}

void ModelGraph::add_activity(std::string id, std::string name, std::optional<std::string> parent) {
  if (nodes_.contains(id)) invalid(fmt::format("activity '{}' declared twice", id));
  order_.push_back(id);
  nodes_.emplace(id, ActivityNode{id, std::move(name), std::move(parent), {}});
  // Children lists are rebuilt in declaration order so a child may be
  // declared before its parent.
  for (auto& [nid, node] : nodes_) node.children.clear();
  for (const std::string& nid : order_) {
    const ActivityNode& n = nodes_.at(nid);
    if (n.parent) {
      auto it = nodes_.find(*n.parent);
      if (it != nodes_.end()) it->second.children.push_back(nid);
    }
  }
}

void ModelGraph::add_arc(Arc arc) { arcs_.push_back(std::move(arc)); }

void ModelGraph::validate() const {
  if (nodes_.empty()) invalid("model has no activities");
  std::size_t roots = 0;
  for (const auto& [id, n] : nodes_) {
    if (!n.parent) {
      ++roots;
      continue;
    }
    if (!nodes_.contains(*n.parent)) invalid(fmt::format("activity '{}' has unknown parent '{}'", id, *n.parent));
    // Walk up; more steps than nodes means a parent cycle.
    std::string_view cur = id;
    for (std::size_t steps = 0;; ++steps) {
      if (steps > nodes_.size()) invalid(fmt::format("activity '{}' is on a parent cycle", id));
      const ActivityNode& c = nodes_.at(std::string(cur));
      if (!c.parent) break;
      cur = *c.parent;
    }
  }
  if (roots != 1) invalid(fmt::format("decomposition needs exactly one root activity, found {}", roots));
  for (const Arc& a : arcs_) {
    for (const std::string& end : {a.from, a.to}) {
      if (!nodes_.contains(end)) invalid(fmt::format("arc {} -> {} references unknown activity '{}'", a.from, a.to, end));
      if (!is_leaf(end)) invalid(fmt::format("arc {} -> {} touches non-leaf activity '{}'", a.from, a.to, end));
    }
    if (a.from == a.to) invalid(fmt::format("arc {} -> {} joins an activity to itself", a.from, a.to));
  }
}

const ActivityNode& ModelGraph::node(std::string_view id) const {
  auto it = nodes_.find(std::string(id));
  if (it == nodes_.end()) throw ActivityError(ActivityError::Code::UnknownNode, fmt::format("no activity '{}'", id));
  return it->second;
}

bool ModelGraph::is_leaf(std::string_view id) const { return node(id).children.empty(); }

std::vector<std::string> ModelGraph::leaves() const {
  std::vector<std::string> out;
  for (const auto& [id, n] : nodes_) {
    if (n.children.empty()) out.push_back(id);
  }
  return out;
}

ModelGraph parse_model(std::string_view text) {
  ModelGraph g;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    auto tok = split_ws(line);
    if (tok.empty()) continue;
    auto fail = [&](const std::string& why) -> void { throw ActivityError(ActivityError::Code::Parse, fmt::format("line {}: {}", line_no, why), line_no); };

    if (tok[0] == "activity") {
      if (tok.size() < 3) fail("expected 'activity <id> <name> [parent=<id>]'");
      std::optional<std::string> parent;
      if (tok.back().starts_with("parent=")) {
        parent = std::string(tok.back().substr(7));
        if (parent->empty()) fail("empty parent");
        tok.pop_back();
      }
      if (tok.size() < 3) fail("activity needs a name");
      std::string name;
      for (std::size_t i = 2; i < tok.size(); ++i) {
        if (!name.empty()) name += ' ';
        name += tok[i];
      }
      try {
        g.add_activity(std::string(tok[1]), std::move(name), std::move(parent));
      } catch (const ActivityError& e) {
        fail(e.what());
      }
    } else if (tok[0] == "arc") {
      if (tok.size() != 6 || tok[2] != "->") fail("expected 'arc <from> -> <to> role=<role> label=<flow>'");
      Arc arc{std::string(tok[1]), std::string(tok[3]), ArcRole::Output, {}};
      bool have_role = false, have_label = false;
      for (std::size_t i = 4; i < 6; ++i) {
        if (tok[i].starts_with("role=")) {
          auto role = parse_role(tok[i].substr(5));
          if (!role || have_role) fail(fmt::format("bad role '{}'", tok[i]));
          arc.role = *role;
          have_role = true;
        } else if (tok[i].starts_with("label=")) {
          arc.label = std::string(tok[i].substr(6));
          if (arc.label.empty() || have_label) fail("bad label");
          have_label = true;
        } else {
          fail(fmt::format("unexpected '{}'", tok[i]));
        }
      }
      g.add_arc(std::move(arc));
    } else {
      fail(fmt::format("unknown keyword '{}'", tok[0]));
    }
  }
  g.validate();
  return g;
}

ModelGraph load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot open {}", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str());
}

std::size_t interaction_count(const ModelGraph& graph, std::string_view a, std::string_view b) {
  for (std::string_view id : {a, b}) {
    if (!graph.is_leaf(id)) {
      throw ActivityError(ActivityError::Code::UnknownNode, fmt::format("'{}' is not a leaf activity", id));
    }
  }
  std::size_t count = 0;
  for (const Arc& arc : graph.arcs()) {
    if ((arc.from == a && arc.to == b) || (arc.from == b && arc.to == a)) ++count;
  }
  return count;
}

}  // namespace dms::activity

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dms::activity {

class ActivityError : public std::runtime_error {
 public:
  enum class Code { Parse, InvalidModel, UnknownNode, Infeasible, InvalidPartition, NotEnoughHosts };

  ActivityError(Code code, const std::string& what, std::size_t line = 0)
      : std::runtime_error(what), code_(code), line_(line) {}
  Code code() const { return code_; }
  // Source line for Parse errors, else 0.
  std::size_t line() const { return line_; }

 private:
  Code code_;
  std::size_t line_;
};

struct ActivityNode {
  std::string id;
  std::string name;
  std::optional<std::string> parent;
  std::vector<std::string> children;  // declaration order
};

// IDEF0 arrow roles (input, control, output, mechanism).
enum class ArcRole { Input, Control, Output, Mechanism };

std::string_view to_string(ArcRole role);

struct Arc {
  std::string from;
  std::string to;
  ArcRole role = ArcRole::Output;
  std::string label;
  friend bool operator==(const Arc&, const Arc&) = default;
};

// Hierarchical activity model. Arcs join leaf activities only; the leaves
// are what gets partitioned.
class ModelGraph {
 public:
  // Throws ActivityError(InvalidModel) on duplicate ids.
  void add_activity(std::string id, std::string name, std::optional<std::string> parent = std::nullopt);
  void add_arc(Arc arc);

  // Single root, acyclic parent links, arcs between distinct existing leaves.
  // Throws ActivityError(InvalidModel).
  void validate() const;

  const ActivityNode& node(std::string_view id) const;  // UnknownNode
  bool contains(std::string_view id) const { return nodes_.contains(std::string(id)); }
  bool is_leaf(std::string_view id) const;
  // Sorted by id; iteration order everywhere else derives from this.
  std::vector<std::string> leaves() const;
  const std::vector<Arc>& arcs() const { return arcs_; }
  const std::map<std::string, ActivityNode>& nodes() const { return nodes_; }

 private:
  std::map<std::string, ActivityNode> nodes_;
  std::vector<std::string> order_;
  std::vector<Arc> arcs_;
};

// `activity <id> <name...> [parent=<id>]` and
// `arc <from> -> <to> role=<input|control|output|mechanism> label=<flow>`;
// `#` starts a comment. Throws ActivityError(Parse) or (InvalidModel).
ModelGraph parse_model(std::string_view text);
ModelGraph load_model(const std::filesystem::path& path);

// Arcs between leaves a and b in either direction. UnknownNode unless both
// are leaves.
std::size_t interaction_count(const ModelGraph& graph, std::string_view a, std::string_view b);

}  // namespace dms::activity

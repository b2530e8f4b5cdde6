#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"

#include "gsim/errors.hpp"
#include "gsim/model.hpp"
#include "gsim/state.hpp"
#include "gsim/summation.hpp"

namespace gsim {

using NodeId = std::uint32_t;

enum class NodeStatus : std::uint8_t { Open, Expanded, Leaf, Truncated };

/// Materialized copy of one tree node.
struct TreeNode {
  NodeId id = 0;
  std::optional<NodeId> parent;
  SystemState state;
  double branch_prob = 1.0;
  double path_prob = 1.0;
  NodeStatus status = NodeStatus::Open;
  EndStateClass end_class;  // meaningful for Leaf only
  double guidance_weight = 1.0;
  std::vector<NodeId> children;
  std::string event_label;
};

struct StoppingCriteria {
  double mission_time = 0.0;
  double trunc_threshold = 0.0;
  std::size_t max_nodes = 1'000'000;
  std::optional<std::size_t> max_expansions;
  std::optional<std::size_t> target_hits;

  void validate() const {
    if (!(mission_time > 0.0) || !std::isfinite(mission_time))
      throw UsageError("stopping criteria: mission_time must be positive");
    if (!(trunc_threshold >= 0.0 && trunc_threshold < 1.0))
      throw UsageError("stopping criteria: truncation threshold must lie in [0, 1)");
    if (max_nodes < 1) throw UsageError("stopping criteria: max_nodes must be at least 1");
    if (target_hits && *target_hits < 1)
      throw UsageError("stopping criteria: target_hits must be positive");
  }
};

/// A successor prepared outside the tree, ready to be committed.
struct ChildSpec {
  SystemState state;
  double branch_prob = 0.0;
  std::string event_label;
  EndStateClass end_class;  // Ongoing means the child stays Open
  double guidance_weight = 1.0;
};

struct TrajectoryStep {
  SystemState state;
  double branch_prob = 1.0;
  std::string event_label;
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  double total_prob = 1.0;
  double importance_weight = 1.0;
  EndStateClass end_class;
};

/// Discrete dynamic event tree. Nodes live in flat arrays indexed by id;
/// the children of a node are always a contiguous id range because they
/// are committed together.
class ScenarioTree {
 public:
  static constexpr NodeId kNoParent = std::numeric_limits<NodeId>::max();

  ScenarioTree(std::size_t component_count, std::size_t process_dimension,
               const SystemState& root_state, const EndStateClass& root_class = {},
               double root_weight = 1.0)
      : components_(component_count), dims_(process_dimension) {
    if (root_state.config.size() != components_ || root_state.process.size() != dims_)
      throw UsageError("root state does not match the declared dimensions");
    labels_.emplace_back("");
    label_index_.emplace("", 0);
    classes_.push_back(EndStateClass::ongoing());
    push_node(kNoParent, root_state, 1.0, 1.0, 0, root_class, root_weight);
  }

  NodeId root() const noexcept { return 0; }
  std::size_t size() const noexcept { return records_.size(); }

  NodeStatus status(NodeId id) const { return rec(id).status; }
  double path_prob(NodeId id) const { return rec(id).path_prob; }
  double branch_prob(NodeId id) const { return rec(id).branch_prob; }
  double guidance_weight(NodeId id) const { return rec(id).guidance_weight; }
  double time(NodeId id) const { return rec(id).time; }
  std::optional<NodeId> parent(NodeId id) const {
    const auto p = rec(id).parent;
    return p == kNoParent ? std::nullopt : std::optional<NodeId>(p);
  }
  const std::string& event_label(NodeId id) const { return labels_[rec(id).label]; }
  const EndStateClass& end_class(NodeId id) const { return classes_[rec(id).end_class]; }

  Config config(NodeId id) const {
    Config c(components_);
    for (std::size_t i = 0; i < components_; ++i) c[i] = configs_[id * components_ + i];
    return c;
  }
  SystemState state(NodeId id) const {
    SystemState s;
    s.config = config(id);
    s.process.assign(process_.begin() + static_cast<std::ptrdiff_t>(id * dims_),
                     process_.begin() + static_cast<std::ptrdiff_t>((id + 1) * dims_));
    s.time = rec(id).time;
    return s;
  }
  std::vector<NodeId> children(NodeId id) const {
    const auto& r = rec(id);
    std::vector<NodeId> out(r.child_count);
    for (std::uint32_t k = 0; k < r.child_count; ++k) out[k] = r.first_child + k;
    return out;
  }

  TreeNode node(NodeId id) const {
    TreeNode n;
    n.id = id;
    n.parent = parent(id);
    n.state = state(id);
    n.branch_prob = branch_prob(id);
    n.path_prob = path_prob(id);
    n.status = status(id);
    n.end_class = end_class(id);
    n.guidance_weight = guidance_weight(id);
    n.children = children(id);
    n.event_label = event_label(id);
    return n;
  }

  double truncated_mass() const noexcept { return truncated_mass_; }
  const std::vector<std::pair<std::size_t, NodeId>>& expansion_log() const noexcept {
    return expansion_log_;
  }
  std::size_t expansion_count() const noexcept { return expansion_log_.size(); }

  std::vector<NodeId> open_nodes() const {
    std::vector<NodeId> out;
    for (NodeId id = 0; id < records_.size(); ++id)
      if (records_[id].status == NodeStatus::Open) out.push_back(id);
    return out;
  }

  const std::string& stop_reason() const noexcept { return stop_reason_; }
  void set_stop_reason(std::string reason) { stop_reason_ = std::move(reason); }
  const std::optional<std::string>& warning() const noexcept { return warning_; }
  void set_warning(std::string w) { warning_ = std::move(w); }

  /// Appends the children of an Open node and marks it Expanded. Children
  /// with a non-Ongoing class become Leaf nodes. Returns the new ids.
  std::vector<NodeId> commit_children(NodeId parent_id, std::vector<ChildSpec> kids) {
    auto& p = rec(parent_id);
    if (p.status != NodeStatus::Open)
      throw UsageError("node " + std::to_string(parent_id) + " is not Open");
    if (kids.empty()) throw UsageError("an expansion must create at least one child");
    if (records_.size() + kids.size() >= kNoParent) throw UsageError("tree id space exhausted");
    const double parent_path = p.path_prob;
    const auto first = static_cast<NodeId>(records_.size());
    std::vector<NodeId> ids;
    ids.reserve(kids.size());
    for (auto& k : kids) {
      if (k.state.config.size() != components_ || k.state.process.size() != dims_)
        throw UsageError("child state does not match the declared dimensions");
      ids.push_back(push_node(parent_id, k.state, k.branch_prob, parent_path * k.branch_prob,
                              intern_label(k.event_label), k.end_class, k.guidance_weight));
    }
    auto& pr = rec(parent_id);  // push_node may reallocate
    pr.first_child = first;
    pr.child_count = static_cast<std::uint32_t>(kids.size());
    pr.status = NodeStatus::Expanded;
    expansion_log_.emplace_back(expansion_log_.size(), parent_id);
    return ids;
  }

  void mark_truncated(NodeId id) {
    auto& r = rec(id);
    if (r.status != NodeStatus::Open) throw UsageError("only Open nodes can be truncated");
    r.status = NodeStatus::Truncated;
    truncated_mass_ += r.path_prob;
  }

  /// Sum of path_prob over Leaf, Truncated and Open nodes.
  double probability_balance() const {
    CompensatedSum s;
    for (const auto& r : records_)
      if (r.status != NodeStatus::Expanded) s.add(r.path_prob);
    return s.value();
  }

  void check_conservation(double tol = 1e-9) const {
    const double total = probability_balance();
    if (!(std::fabs(total - 1.0) <= tol))
      throw ConsistencyError("probability conservation violated: total mass " +
                             std::to_string(total));
  }

  // Rebuilds a node from serialized fields. Nodes must arrive in id order
  // with sibling ids contiguous.
  void load_node(NodeId id, std::optional<NodeId> parent_id, const SystemState& s,
                 double branch, double path, NodeStatus st, const EndStateClass& cls,
                 const std::string& label) {
    if (id != records_.size()) throw ConfigError("tree nodes out of order at id " + std::to_string(id));
    if (!parent_id) throw ConfigError("only the first node may lack a parent");
    if (*parent_id >= id) throw ConfigError("parent id must precede child id");
    if (s.config.size() != components_ || s.process.size() != dims_)
      throw ConfigError("node " + std::to_string(id) + " has wrong state dimensions");
    auto& p = rec(*parent_id);
    if (p.child_count == 0)
      p.first_child = id;
    else if (p.first_child + p.child_count != id)
      throw ConfigError("children of node " + std::to_string(*parent_id) + " are not contiguous");
    ++p.child_count;
    push_node(*parent_id, s, branch, path, intern_label(label), cls, 1.0);
    rec(id).status = st;
    if (st == NodeStatus::Truncated) truncated_mass_ += path;
  }

  void restore_root(NodeStatus st, const EndStateClass& cls) {
    auto& r = rec(0);
    r.status = st;
    r.end_class = intern_class(cls);
    if (st == NodeStatus::Truncated) truncated_mass_ += r.path_prob;
  }

 private:
  struct Record {
    NodeId parent = kNoParent;
    NodeId first_child = 0;
    std::uint32_t child_count = 0;
    std::uint32_t label = 0;
    double branch_prob = 1.0;
    double path_prob = 1.0;
    double guidance_weight = 1.0;
    double time = 0.0;
    NodeStatus status = NodeStatus::Open;
    std::uint8_t end_class = 0;
  };

  Record& rec(NodeId id) {
    if (id >= records_.size()) throw UsageError("unknown node id " + std::to_string(id));
    return records_[id];
  }
  const Record& rec(NodeId id) const {
    if (id >= records_.size()) throw UsageError("unknown node id " + std::to_string(id));
    return records_[id];
  }

  std::uint32_t intern_label(const std::string& label) {
    auto [it, inserted] = label_index_.try_emplace(label, static_cast<std::uint32_t>(labels_.size()));
    if (inserted) labels_.push_back(label);
    return it->second;
  }

  std::uint8_t intern_class(const EndStateClass& cls) {
    for (std::size_t i = 0; i < classes_.size(); ++i)
      if (classes_[i] == cls) return static_cast<std::uint8_t>(i);
    if (classes_.size() >= 255) throw UsageError("too many distinct end classes");
    classes_.push_back(cls);
    return static_cast<std::uint8_t>(classes_.size() - 1);
  }

  NodeId push_node(NodeId parent_id, const SystemState& s, double branch, double path,
                   std::uint32_t label, const EndStateClass& cls, double weight) {
    Record r;
    r.parent = parent_id;
    r.label = label;
    r.branch_prob = branch;
    r.path_prob = path;
    r.guidance_weight = weight;
    r.time = s.time;
    r.status = cls.is_ongoing() ? NodeStatus::Open : NodeStatus::Leaf;
    r.end_class = intern_class(cls);
    for (int v : s.config) configs_.push_back(static_cast<std::uint8_t>(v));
    process_.insert(process_.end(), s.process.begin(), s.process.end());
    records_.push_back(r);
    return static_cast<NodeId>(records_.size() - 1);
  }

  std::size_t components_;
  std::size_t dims_;
  std::vector<Record> records_;
  std::vector<std::uint8_t> configs_;
  std::vector<double> process_;
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::uint32_t> label_index_;
  std::vector<EndStateClass> classes_;
  double truncated_mass_ = 0.0;
  std::vector<std::pair<std::size_t, NodeId>> expansion_log_;
  std::string stop_reason_;
  std::optional<std::string> warning_;
};

/// Classifies a freshly advanced state: the model's verdict, or Success
/// once the horizon is reached while still Ongoing.
inline EndStateClass classify_at(const SystemModel& model, const SystemState& s, double horizon) {
  auto cls = model.classify(s);
  if (cls.is_ongoing() && s.time >= horizon - 1e-9) return EndStateClass::success();
  return cls;
}

/// Successors of `state` over one segment, without touching any tree.
inline std::vector<ChildSpec> compute_children(const SystemModel& model, const SystemState& state,
                                               double dt, double horizon) {
  if (state.time + dt > horizon + 1e-9)
    throw UsageError("expansion would pass the mission time");
  auto branches = branch_distribution(model, state, dt);
  std::vector<ChildSpec> kids;
  kids.reserve(branches.size());
  for (auto& b : branches) {
    ChildSpec k;
    k.event_label = event_label(model, state.config, b.config);
    k.state = advance(model, state, b.config, dt);
    k.branch_prob = b.probability;
    k.end_class = classify_at(model, k.state, horizon);
    kids.push_back(std::move(k));
  }
  return kids;
}

/// Expands one Open node over dt. Children reaching `horizon` (default:
/// the model's mission time) while Ongoing are labelled Success.
inline std::vector<NodeId> expand_node(ScenarioTree& tree, NodeId id, const SystemModel& model,
                                       double dt, std::optional<double> horizon = std::nullopt) {
  if (tree.status(id) != NodeStatus::Open)
    throw UsageError("cannot expand node " + std::to_string(id) + ": not Open");
  auto kids = compute_children(model, tree.state(id), dt, horizon.value_or(model.mission_time()));
  return tree.commit_children(id, std::move(kids));
}

/// Marks every Open node below eps as Truncated. Returns the count.
inline std::size_t truncate(ScenarioTree& tree, double eps) {
  if (!(eps >= 0.0 && eps < 1.0)) throw UsageError("truncation threshold must lie in [0, 1)");
  std::size_t n = 0;
  for (NodeId id : tree.open_nodes()) {
    if (tree.path_prob(id) < eps) {
      tree.mark_truncated(id);
      ++n;
    }
  }
  return n;
}

/// Root-to-node trajectory recovered by walking parent links backwards.
inline Trajectory reverse_trace(const ScenarioTree& tree, NodeId leaf) {
  if (leaf >= tree.size()) throw UsageError("unknown node id " + std::to_string(leaf));
  const auto st = tree.status(leaf);
  if (st != NodeStatus::Leaf && st != NodeStatus::Truncated)
    throw UsageError("node " + std::to_string(leaf) + " is neither Leaf nor Truncated");
  std::vector<NodeId> path;
  for (std::optional<NodeId> cur = leaf; cur; cur = tree.parent(*cur)) path.push_back(*cur);
  std::reverse(path.begin(), path.end());

  Trajectory t;
  t.steps.reserve(path.size());
  for (NodeId id : path) t.steps.push_back({tree.state(id), tree.branch_prob(id), tree.event_label(id)});
  t.total_prob = tree.path_prob(leaf);
  t.end_class = st == NodeStatus::Leaf ? tree.end_class(leaf) : EndStateClass::ongoing();
  return t;
}

struct LeafEntry {
  NodeId id;
  double path_prob;
};

/// Leaves matching the filter, by descending path_prob then ascending id.
inline std::vector<LeafEntry> extract_leaves(const ScenarioTree& tree,
                                             const std::optional<ClassFilter>& filter = {}) {
  std::vector<LeafEntry> out;
  for (NodeId id = 0; id < tree.size(); ++id) {
    if (tree.status(id) != NodeStatus::Leaf) continue;
    if (filter && !filter->matches(tree.end_class(id))) continue;
    out.push_back({id, tree.path_prob(id)});
  }
  std::sort(out.begin(), out.end(), [](const LeafEntry& a, const LeafEntry& b) {
    if (a.path_prob != b.path_prob) return a.path_prob > b.path_prob;
    return a.id < b.id;
  });
  return out;
}

struct ReplayResult {
  SystemState state;
  double probability = 1.0;
};

/// Re-runs a trajectory's events forward through the expansion semantics.
inline ReplayResult replay(const SystemModel& model, const Trajectory& traj, double dt) {
  if (traj.steps.empty()) throw UsageError("cannot replay an empty trajectory");
  ReplayResult r{traj.steps.front().state, traj.steps.front().branch_prob};
  for (std::size_t k = 1; k < traj.steps.size(); ++k) {
    const auto& want = traj.steps[k].event_label;
    auto branches = branch_distribution(model, r.state, dt);
    auto it = std::find_if(branches.begin(), branches.end(), [&](const Branch& b) {
      return event_label(model, r.state.config, b.config) == want;
    });
    if (it == branches.end())
      throw UsageError("event '" + want + "' is not available at step " + std::to_string(k));
    r.state = advance(model, r.state, it->config, dt);
    r.probability *= it->probability;
  }
  return r;
}

inline std::string status_string(const ScenarioTree& tree, NodeId id) {
  switch (tree.status(id)) {
    case NodeStatus::Open: return "open";
    case NodeStatus::Expanded: return "expanded";
    case NodeStatus::Truncated: return "truncated";
    case NodeStatus::Leaf: return "leaf:" + tree.end_class(id).key();
  }
  return "open";
}

/// One JSON object per line: id, parent, branch_prob, path_prob, status,
/// config, process, time, event_label.
inline void write_tree_jsonl(std::ostream& out, const ScenarioTree& tree) {
  for (NodeId id = 0; id < tree.size(); ++id) {
    nlohmann::ordered_json j;
    j["id"] = id;
    if (auto p = tree.parent(id))
      j["parent"] = *p;
    else
      j["parent"] = nullptr;
    j["branch_prob"] = tree.branch_prob(id);
    j["path_prob"] = tree.path_prob(id);
    j["status"] = status_string(tree, id);
    const auto s = tree.state(id);
    j["config"] = s.config;
    j["process"] = s.process;
    j["time"] = s.time;
    j["event_label"] = tree.event_label(id);
    out << j.dump() << '\n';
  }
}

inline ScenarioTree read_tree_jsonl(std::istream& in) {
  auto parse_status = [](const std::string& s, EndStateClass& cls) {
    cls = EndStateClass::ongoing();
    if (s == "open") return NodeStatus::Open;
    if (s == "expanded") return NodeStatus::Expanded;
    if (s == "truncated") return NodeStatus::Truncated;
    if (s.rfind("leaf:", 0) == 0) {
      auto c = EndStateClass::from_key(s.substr(5));
      if (!c || c->is_ongoing()) throw ConfigError("bad leaf class in status '" + s + "'");
      cls = *c;
      return NodeStatus::Leaf;
    }
    throw ConfigError("unknown node status '" + s + "'");
  };

  std::optional<ScenarioTree> tree;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      SystemState s;
      s.config = j.at("config").get<Config>();
      s.process = j.at("process").get<std::vector<double>>();
      s.time = j.at("time").get<double>();
      EndStateClass cls;
      const auto st = parse_status(j.at("status").get<std::string>(), cls);
      const auto id = j.at("id").get<NodeId>();
      if (!tree) {
        if (id != 0 || !j.at("parent").is_null()) throw ConfigError("first node must be the root");
        tree.emplace(s.config.size(), s.process.size(), s);
        tree->restore_root(st, cls);
        continue;
      }
      std::optional<NodeId> parent;
      if (!j.at("parent").is_null()) parent = j.at("parent").get<NodeId>();
      tree->load_node(id, parent, s, j.at("branch_prob").get<double>(),
                      j.at("path_prob").get<double>(), st, cls,
                      j.at("event_label").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("tree line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!tree) throw ConfigError("tree file is empty");
  return std::move(*tree);
}

}  // namespace gsim

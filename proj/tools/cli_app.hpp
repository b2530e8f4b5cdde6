#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gsim/gsim.hpp"

namespace gsim::cli {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int config = 2;
inline constexpr int model = 3;
inline constexpr int consistency = 4;
inline constexpr int no_leaf = 5;
}  // namespace exit_code

struct RunConfig {
  std::string model_path;
  std::string policy = "uniform";
  std::vector<std::string> policy_args;
  double dt = 1.0;
  double trunc = 0.0;
  std::size_t max_nodes = 1'000'000;
  std::optional<std::size_t> max_expansions;
  std::optional<std::size_t> target_hits;
  std::optional<double> mission;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string mode = "tree";
  std::size_t rollouts = 1000;
  std::string out_dir;
};

struct TraceConfig {
  std::string out_dir;
  std::string leaf = "top-target";
};

class NoLeafError : public Error {
 public:
  using Error::Error;
};

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("policy argument " + key + " expects a number, got '" + v + "'");
  }
}

inline int parse_int(const std::string& key, const std::string& v) {
  const double d = parse_double(key, v);
  if (d != static_cast<int>(d)) throw ConfigError("policy argument " + key + " expects an integer");
  return static_cast<int>(d);
}

struct ParsedPolicy {
  GuidancePolicy policy;
  std::size_t td_training = 2000;  // tree mode with td: rollouts used to fit the table
};

inline ParsedPolicy parse_policy(const RunConfig& cfg, const SystemModel& model) {
  ParsedPolicy out;
  std::vector<std::pair<std::string, std::string>> kv;
  for (const auto& a : cfg.policy_args) {
    const auto eq = a.rfind('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("policy argument '" + a + "' is not KEY=VAL");
    kv.emplace_back(a.substr(0, eq), a.substr(eq + 1));
  }
  auto unknown = [&](const std::string& k) {
    return ConfigError("unknown argument '" + k + "' for policy " + cfg.policy);
  };
  if (cfg.policy == "uniform") {
    if (!kv.empty()) throw unknown(kv.front().first);
    out.policy = UniformPolicy{};
  } else if (cfg.policy == "plan") {
    PlanBiasPolicy p;
    for (const auto& [k, v] : kv) {
      if (k == "file") {
        auto loaded = load_plan_weights(v);
        p.weights.insert(p.weights.end(), loaded.weights.begin(), loaded.weights.end());
      } else {
        p.weights.emplace_back(k, parse_double(k, v));
      }
    }
    out.policy = p;
  } else if (cfg.policy == "entropy") {
    EntropyLookaheadPolicy p;
    for (const auto& [k, v] : kv) {
      if (k == "horizon") p.horizon = parse_int(k, v);
      else throw unknown(k);
    }
    out.policy = p;
  } else if (cfg.policy == "td") {
    TDValuePolicy p;
    for (const auto& [k, v] : kv) {
      if (k == "alpha") p.alpha = parse_double(k, v);
      else if (k == "gamma") p.gamma = parse_double(k, v);
      else if (k == "epsilon") p.epsilon = parse_double(k, v);
      else if (k == "bins") p.bins.assign(model.process_dimension(), parse_int(k, v));
      else if (k == "train") out.td_training = static_cast<std::size_t>(parse_int(k, v));
      else throw unknown(k);
    }
    out.policy = p;
  } else {
    throw ConfigError("unknown policy '" + cfg.policy + "'; valid: uniform, plan, entropy, td");
  }
  try {
    validate_policy(out.policy);
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << text;
}

inline nlohmann::ordered_json steps_json(const Trajectory& t) {
  auto steps = nlohmann::ordered_json::array();
  for (const auto& s : t.steps)
    steps.push_back({{"time", s.state.time},
                     {"config", s.state.config},
                     {"process", s.state.process},
                     {"branch_prob", s.branch_prob},
                     {"event_label", s.event_label}});
  return steps;
}

inline RunMetadata metadata(const RunConfig& cfg, const SystemModel& model,
                            const GuidancePolicy& policy, double horizon) {
  RunMetadata m;
  m.tool_version = kVersion;
  m.model_name = model.name();
  m.policy = policy_name(policy);
  m.policy_params = policy_params(policy);
  m.dt = cfg.dt;
  m.mission_time = horizon;
  m.trunc_threshold = cfg.trunc;
  m.rollouts = cfg.rollouts;
  m.threads = cfg.threads;
  return m;
}

/// Executes one simulate/oracle run and writes its outputs. Errors are
/// reported as exceptions; run_cli maps them to exit codes.
inline std::string simulate(const RunConfig& cfg) {
  if (!std::filesystem::exists(cfg.model_path))
    throw ConfigError("model file not found: " + cfg.model_path);
  if (cfg.out_dir.empty()) throw ConfigError("--out is required");
  if (!(cfg.dt > 0.0)) throw ConfigError("--dt must be positive");
  if (cfg.threads < 1) throw ConfigError("--threads must be at least 1");
  const auto model = load_model(cfg.model_path);
  const double horizon = cfg.mission.value_or(model->mission_time());
  std::size_t steps = 0;
  try {
    steps = segment_count(horizon, cfg.dt);
  } catch (const UsageError& e) {
    throw ConfigError(e.what());
  }
  const auto parsed = parse_policy(cfg, *model);
  std::filesystem::create_directories(cfg.out_dir);
  const std::filesystem::path out(cfg.out_dir);
  auto meta = metadata(cfg, *model, parsed.policy, horizon);
  const auto classes = model->end_classes();
  std::ostringstream summary;
  summary << std::setprecision(10);

  if (cfg.mode == "tree") {
    StoppingCriteria stop;
    stop.mission_time = horizon;
    stop.trunc_threshold = cfg.trunc;
    stop.max_nodes = cfg.max_nodes;
    stop.max_expansions = cfg.max_expansions;
    stop.target_hits = cfg.target_hits;
    try {
      stop.validate();
    } catch (const UsageError& e) {
      throw ConfigError(e.what());
    }
    TreeRunOptions opts;
    opts.threads = cfg.threads;
    std::optional<ValueTable> table;
    if (std::holds_alternative<TDValuePolicy>(parsed.policy) && parsed.td_training > 0) {
      MonteCarloConfig mc{cfg.dt, horizon, parsed.td_training, cfg.seed, cfg.threads, true, {}};
      table = run_montecarlo(*model, parsed.policy, mc).table;
      opts.table = &*table;
    }
    const auto tree = run_tree(*model, parsed.policy, stop, cfg.dt, cfg.seed, opts);
    auto report = aggregate_tree(tree, classes);
    report.seed = cfg.seed;
    report.model_hash = model->content_hash();
    meta.warning = tree.warning();
    std::ostringstream lines;
    write_tree_jsonl(lines, tree);
    write_text(out / "tree.jsonl", lines.str());
    write_text(out / "report.json", report_to_json(report, meta).dump(2) + "\n");
    summary << "tree model=" << model->name() << " policy=" << meta.policy
            << " nodes=" << tree.size() << " expansions=" << report.expansion_count
            << " stop=\"" << report.stop_reason << "\" target_mass=" << report.target_mass()
            << " truncated=" << report.truncated_mass << " frontier=" << report.frontier_mass;
  } else if (cfg.mode == "montecarlo") {
    if (cfg.rollouts < 2) throw ConfigError("--rollouts must be at least 2");
    MonteCarloConfig mc{cfg.dt, horizon, cfg.rollouts, cfg.seed, cfg.threads, true, {}};
    const auto result = run_montecarlo(*model, parsed.policy, mc);
    auto report = aggregate_montecarlo(result.trajectories, classes);
    report.seed = cfg.seed;
    report.model_hash = model->content_hash();
    std::ostringstream lines;
    for (std::size_t i = 0; i < result.trajectories.size(); ++i) {
      const auto& t = result.trajectories[i];
      nlohmann::ordered_json j;
      j["index"] = i;
      j["end_class"] = t.end_class.key();
      j["total_prob"] = t.total_prob;
      j["importance_weight"] = t.importance_weight;
      j["steps"] = steps_json(t);
      lines << j.dump() << '\n';
    }
    write_text(out / "trajectories.jsonl", lines.str());
    write_text(out / "report.json", report_to_json(report, meta).dump(2) + "\n");
    summary << "montecarlo model=" << model->name() << " policy=" << meta.policy
            << " rollouts=" << cfg.rollouts;
    for (const auto& [k, e] : report.mc_estimates)
      summary << ' ' << k << '=' << e.mean << "+-" << e.standard_error;
  } else if (cfg.mode == "oracle") {
    const auto exact = enumerate_exact(*model, cfg.dt, steps);
    EstimateReport report;
    report.mode = "oracle";
    report.class_mass = exact.class_mass;
    report.seed = cfg.seed;
    report.model_hash = model->content_hash();
    report.stop_reason = "enumerated";
    meta.policy = "none";
    meta.policy_params = nlohmann::ordered_json::object();
    auto j = report_to_json(report, meta);
    j["path_nodes"] = exact.path_nodes;
    if (!model->process_dependence()) {
      nlohmann::ordered_json ctmc = nlohmann::ordered_json::object();
      for (const auto& [k, v] : ctmc_class_masses(*model, horizon)) ctmc[k] = v;
      j["ctmc_class_mass"] = ctmc;
    }
    write_text(out / "report.json", j.dump(2) + "\n");
    summary << "oracle model=" << model->name() << " steps=" << steps
            << " target_mass=" << exact.target_mass();
  } else {
    throw ConfigError("unknown mode '" + cfg.mode + "'; valid: tree, montecarlo, oracle");
  }
  return summary.str();
}

/// Writes trace.json for the selected leaf of a previous tree run.
inline std::string trace(const TraceConfig& cfg) {
  const std::filesystem::path dir(cfg.out_dir);
  std::ifstream in(dir / "tree.jsonl");
  if (!in) throw ConfigError("no tree.jsonl in " + cfg.out_dir);
  const auto tree = read_tree_jsonl(in);
  tree.check_conservation();

  NodeId leaf = 0;
  if (cfg.leaf == "top-target") {
    const auto leaves = extract_leaves(tree, ClassFilter::any_target());
    if (leaves.empty()) throw NoLeafError("tree has no Target leaf");
    leaf = leaves.front().id;
  } else {
    std::uint64_t id = 0;
    try {
      std::size_t used = 0;
      id = std::stoull(cfg.leaf, &used);
      if (used != cfg.leaf.size()) throw std::invalid_argument(cfg.leaf);
    } catch (const std::exception&) {
      throw ConfigError("leaf selector must be 'top-target' or a node id");
    }
    if (id >= tree.size()) throw NoLeafError("no node with id " + cfg.leaf);
    leaf = static_cast<NodeId>(id);
    const auto st = tree.status(leaf);
    if (st != NodeStatus::Leaf && st != NodeStatus::Truncated)
      throw NoLeafError("node " + cfg.leaf + " is not a leaf");
  }
  const auto traj = reverse_trace(tree, leaf);
  nlohmann::ordered_json j;
  j["leaf"] = leaf;
  j["end_class"] = traj.end_class.key();
  j["total_prob"] = traj.total_prob;
  j["importance_weight"] = traj.importance_weight;
  j["steps"] = steps_json(traj);
  write_text(dir / "trace.json", j.dump(2) + "\n");
  std::ostringstream s;
  s << std::setprecision(10) << "trace leaf=" << leaf << " class=" << traj.end_class.key()
    << " steps=" << traj.steps.size() << " total_prob=" << traj.total_prob;
  return s.str();
}

inline void add_run_flags(CLI::App& app, RunConfig& cfg, bool with_policy) {
  app.add_option("--model", cfg.model_path, "Model file (JSON)")->required();
  app.add_option("--dt", cfg.dt, "Branching interval in seconds");
  app.add_option("--mission", cfg.mission, "Horizon in seconds (default: model mission_time)");
  app.add_option("--seed", cfg.seed, "RNG seed (64-bit unsigned)");
  app.add_option("--out", cfg.out_dir, "Output directory")->required();
  if (!with_policy) return;
  app.add_option("--policy", cfg.policy, "uniform | plan | entropy | td");
  app.add_option("--policy-arg", cfg.policy_args, "Policy parameter KEY=VAL (repeatable)");
  app.add_option("--trunc", cfg.trunc, "Truncation threshold in [0, 1)");
  app.add_option("--max-nodes", cfg.max_nodes, "Node budget");
  app.add_option("--max-expansions", cfg.max_expansions, "Expansion budget");
  app.add_option("--target-hits", cfg.target_hits, "Stop after this many Target leaves");
  app.add_option("--threads", cfg.threads, "Worker threads");
  app.add_option("--mode", cfg.mode, "tree | montecarlo | oracle");
  app.add_option("--rollouts", cfg.rollouts, "Monte Carlo rollouts");
}

/// Entry point shared by the binary and the tests.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Guided discrete dynamic event tree simulator", "gsim"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  RunConfig sim_cfg;
  auto* sim = app.add_subcommand("simulate", "Grow a tree, run Monte Carlo, or enumerate exactly");
  add_run_flags(*sim, sim_cfg, true);

  RunConfig oracle_cfg;
  oracle_cfg.mode = "oracle";
  auto* orc = app.add_subcommand("oracle", "Exact enumeration and CTMC solution for a model");
  add_run_flags(*orc, oracle_cfg, false);

  TraceConfig trace_cfg;
  auto* trc = app.add_subcommand("trace", "Trace a leaf of a previous tree run back to the root");
  trc->add_option("--out", trace_cfg.out_dir, "Directory holding tree.jsonl")->required();
  trc->add_option("--leaf", trace_cfg.leaf, "'top-target' or a node id");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return exit_code::ok;
  } catch (const CLI::Success&) {
    out << app.help();
    return exit_code::ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::config;
  }

  try {
    if (sim->parsed())
      out << simulate(sim_cfg) << '\n';
    else if (orc->parsed())
      out << simulate(oracle_cfg) << '\n';
    else
      out << trace(trace_cfg) << '\n';
    return exit_code::ok;
  } catch (const NoLeafError& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::no_leaf;
  } catch (const ConsistencyError& e) {
    err << "internal consistency failure: " << e.what() << '\n';
    return exit_code::consistency;
  } catch (const ModelError& e) {
    err << "model error: " << e.what() << '\n';
    return exit_code::model;
  } catch (const Error& e) {
    err << "configuration error: " << e.what() << '\n';
    return exit_code::config;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "configuration error: " << e.what() << '\n';
    return exit_code::config;
  }
}

}  // namespace gsim::cli

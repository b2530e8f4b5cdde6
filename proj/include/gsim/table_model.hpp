#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <algorithm>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "gsim/errors.hpp"
#include "gsim/model.hpp"

namespace gsim {

/// 64-bit FNV-1a digest as 16 hex characters.
inline std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// A model defined by data: rate tables, drift rules and threshold
/// end states. See docs/formats.md for the file layout.
class TableModel final : public SystemModel {
 public:
  /// Conjunction of "component == state" requirements.
  struct Pattern {
    std::vector<std::pair<std::size_t, int>> required;
    bool matches(const Config& config) const {
      for (const auto& [comp, st] : required)
        if (config[comp] != st) return false;
      return true;
    }
  };

  /// Constant, or piecewise constant in one process variable:
  /// values[i] applies on [breaks[i-1], breaks[i]).
  struct RateExpr {
    double constant = 0.0;
    std::optional<std::size_t> variable;
    std::vector<double> breaks;
    std::vector<double> values;

    double eval(const std::vector<double>& process) const {
      if (!variable) return constant;
      const double x = process[*variable];
      std::size_t i = 0;
      while (i < breaks.size() && x >= breaks[i]) ++i;
      return values[i];
    }
  };

  struct RateRule {
    Pattern when;
    std::size_t component = 0;
    int from = 0;
    int to = 0;
    RateExpr rate;
  };

  struct DriftRule {
    Pattern when;
    std::size_t variable = 0;
    double constant = 0.0;
    std::vector<std::pair<std::size_t, double>> linear;
  };

  struct Threshold {
    enum class Op { Ge, Gt, Le, Lt };
    std::size_t variable = 0;
    Op op = Op::Ge;
    double value = 0.0;
    bool holds(double x) const {
      switch (op) {
        case Op::Ge: return x >= value;
        case Op::Gt: return x > value;
        case Op::Le: return x <= value;
        case Op::Lt: return x < value;
      }
      return false;
    }
  };

  struct EndRule {
    EndStateClass cls;
    Pattern when;
    std::vector<Threshold> thresholds;
  };

  static std::unique_ptr<TableModel> from_json(const nlohmann::json& doc);

  static std::unique_ptr<TableModel> from_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open model file: " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("model file " + path.string() + " is not valid JSON: " + e.what());
    }
    return from_json(doc);
  }

  std::vector<double> derivative(const SystemState& state) const override {
    std::vector<double> d(process_dimension(), 0.0);
    for (const auto& rule : drift_) {
      if (!rule.when.matches(state.config)) continue;
      double v = rule.constant;
      for (const auto& [var, coef] : rule.linear) v += coef * state.process[var];
      d[rule.variable] += v;
    }
    return d;
  }

  std::vector<TransitionCandidate> transitions(const SystemState& state) const override {
    std::vector<TransitionCandidate> out;
    for (const auto& rule : rates_) {
      if (state.config[rule.component] != rule.from || !rule.when.matches(state.config)) continue;
      const double r = rule.rate.eval(state.process);
      if (r == 0.0) continue;
      Config target = state.config;
      target[rule.component] = rule.to;
      out.push_back({std::move(target), r});
    }
    return out;
  }

  EndStateClass classify(const SystemState& state) const override {
    for (const auto& rule : end_rules_) {
      if (!rule.when.matches(state.config)) continue;
      bool all = true;
      for (const auto& th : rule.thresholds)
        if (!th.holds(state.process[th.variable])) {
          all = false;
          break;
        }
      if (all) return rule.cls;
    }
    return EndStateClass::ongoing();
  }

  std::vector<EndStateClass> end_classes() const override {
    std::vector<EndStateClass> out;
    for (const auto& r : end_rules_)
      if (std::find(out.begin(), out.end(), r.cls) == out.end()) out.push_back(r.cls);
    return out;
  }

  std::optional<std::string> process_dependence() const override {
    for (std::size_t i = 0; i < rates_.size(); ++i) {
      const auto& r = rates_[i];
      if (!r.rate.variable) continue;
      const auto& c = components()[r.component];
      return "rates[" + std::to_string(i) + "] (" + c.name + ":" + c.states[r.from] + "->" +
             c.states[r.to] + ") depends on process variable '" +
             process_variables()[*r.rate.variable].name + "'";
    }
    return std::nullopt;
  }

  std::string content_hash() const override { return hash_; }

  const nlohmann::json& document() const noexcept { return doc_; }

 private:
  TableModel(std::string name, std::vector<Component> comps, std::vector<ProcessVariable> proc,
             double mission, double h_max)
      : SystemModel(std::move(name), std::move(comps), std::move(proc), mission, h_max) {}

  std::vector<RateRule> rates_;
  std::vector<DriftRule> drift_;
  std::vector<EndRule> end_rules_;
  nlohmann::json doc_;
  std::string hash_;
};

namespace detail {

inline double finite_number(const nlohmann::json& j, const std::string& what) {
  if (!j.is_number()) throw ConfigError(what + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(what + " must be finite");
  return v;
}

inline std::size_t index_of(const std::vector<std::string>& names, const std::string& name,
                            const std::string& what) {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return i;
  throw ConfigError("unknown " + what + " '" + name + "'");
}

}  // namespace detail

inline std::unique_ptr<TableModel> TableModel::from_json(const nlohmann::json& doc) {
  using nlohmann::json;
  using detail::finite_number;
  using detail::index_of;
  try {
    if (!doc.is_object()) throw ConfigError("model document must be an object");
    const std::string name = doc.value("name", std::string("unnamed"));
    if (!doc.contains("mission_time")) throw ConfigError("model lacks mission_time");
    const double mission = finite_number(doc.at("mission_time"), "mission_time");
    const double h_max =
        doc.contains("max_substep") ? finite_number(doc.at("max_substep"), "max_substep") : 0.1;

    std::vector<Component> comps;
    std::vector<std::string> comp_names;
    for (const auto& jc : doc.at("components")) {
      Component c;
      c.name = jc.at("name").get<std::string>();
      c.states = jc.at("states").get<std::vector<std::string>>();
      c.initial = jc.contains("initial")
                      ? static_cast<int>(index_of(c.states, jc.at("initial").get<std::string>(),
                                                  "state of " + c.name))
                      : 0;
      comp_names.push_back(c.name);
      comps.push_back(std::move(c));
    }

    std::vector<ProcessVariable> proc;
    std::vector<std::string> proc_names;
    if (doc.contains("process")) {
      for (const auto& jp : doc.at("process")) {
        ProcessVariable p;
        p.name = jp.at("name").get<std::string>();
        p.unit = jp.value("unit", std::string());
        p.initial = finite_number(jp.at("initial"), "initial value of " + p.name);
        const auto& range = jp.at("range");
        p.lower = finite_number(range.at(0), "range of " + p.name);
        p.upper = finite_number(range.at(1), "range of " + p.name);
        if (!(p.upper > p.lower)) throw ConfigError("range of " + p.name + " is empty");
        proc_names.push_back(p.name);
        proc.push_back(std::move(p));
      }
    }

    std::unique_ptr<TableModel> m(new TableModel(name, comps, proc, mission, h_max));

    auto parse_pattern = [&](const json& j) {
      Pattern p;
      if (j.is_null()) return p;
      for (const auto& [cname, sname] : j.items()) {
        const auto ci = index_of(comp_names, cname, "component");
        const auto si = index_of(comps[ci].states, sname.get<std::string>(), "state of " + cname);
        p.required.emplace_back(ci, static_cast<int>(si));
      }
      return p;
    };

    if (doc.contains("rates")) {
      for (const auto& jr : doc.at("rates")) {
        RateRule r;
        r.component = index_of(comp_names, jr.at("component").get<std::string>(), "component");
        const auto& states = comps[r.component].states;
        r.from = static_cast<int>(index_of(states, jr.at("from").get<std::string>(), "state"));
        r.to = static_cast<int>(index_of(states, jr.at("to").get<std::string>(), "state"));
        if (r.from == r.to) throw ConfigError("rate rule with from == to");
        r.when = parse_pattern(jr.value("when", json()));
        const auto& jrate = jr.at("rate");
        if (jrate.is_number()) {
          r.rate.constant = finite_number(jrate, "rate");
          if (r.rate.constant < 0.0) throw ConfigError("negative rate");
        } else {
          r.rate.variable =
              index_of(proc_names, jrate.at("variable").get<std::string>(), "process variable");
          for (const auto& b : jrate.at("breaks")) r.rate.breaks.push_back(finite_number(b, "break"));
          for (const auto& v : jrate.at("values")) {
            const double x = finite_number(v, "rate value");
            if (x < 0.0) throw ConfigError("negative rate");
            r.rate.values.push_back(x);
          }
          if (r.rate.values.size() != r.rate.breaks.size() + 1)
            throw ConfigError("piecewise rate needs one more value than breaks");
          if (!std::is_sorted(r.rate.breaks.begin(), r.rate.breaks.end()))
            throw ConfigError("piecewise breaks must be ascending");
        }
        m->rates_.push_back(std::move(r));
      }
    }

    if (doc.contains("drift")) {
      for (const auto& jd : doc.at("drift")) {
        DriftRule d;
        d.when = parse_pattern(jd.value("when", json()));
        d.variable = index_of(proc_names, jd.at("variable").get<std::string>(), "process variable");
        if (jd.contains("constant")) d.constant = finite_number(jd.at("constant"), "drift constant");
        if (jd.contains("linear"))
          for (const auto& [vname, coef] : jd.at("linear").items())
            d.linear.emplace_back(index_of(proc_names, vname, "process variable"),
                                  finite_number(coef, "drift coefficient"));
        m->drift_.push_back(std::move(d));
      }
    }

    if (doc.contains("end_states")) {
      for (const auto& je : doc.at("end_states")) {
        EndRule e;
        const auto cls = je.at("class").get<std::string>();
        const auto label = je.value("label", std::string());
        if (cls == "success")
          e.cls = EndStateClass::success();
        else if (cls == "failure")
          e.cls = EndStateClass::failure(label);
        else if (cls == "target")
          e.cls = EndStateClass::target(label);
        else
          throw ConfigError("unknown end-state class '" + cls + "'");
        e.when = parse_pattern(je.value("config", json()));
        if (je.contains("process")) {
          for (const auto& jt : je.at("process")) {
            Threshold t;
            t.variable =
                index_of(proc_names, jt.at("variable").get<std::string>(), "process variable");
            const auto op = jt.at("op").get<std::string>();
            if (op == ">=") t.op = Threshold::Op::Ge;
            else if (op == ">") t.op = Threshold::Op::Gt;
            else if (op == "<=") t.op = Threshold::Op::Le;
            else if (op == "<") t.op = Threshold::Op::Lt;
            else throw ConfigError("unknown threshold operator '" + op + "'");
            t.value = finite_number(jt.at("value"), "threshold");
            e.thresholds.push_back(t);
          }
        }
        if (e.when.required.empty() && e.thresholds.empty())
          throw ConfigError("end state '" + e.cls.key() + "' has no condition");
        m->end_rules_.push_back(std::move(e));
      }
    }

    m->doc_ = doc;
    m->hash_ = fnv1a_hex(doc.dump());
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed model document: ") + e.what());
  }
}

inline std::unique_ptr<TableModel> load_model(const std::filesystem::path& path) {
  return TableModel::from_file(path);
}

}  // namespace gsim

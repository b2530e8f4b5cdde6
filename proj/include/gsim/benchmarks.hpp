#pragma once

#include <array>
#include <memory>
#include <string>
#include <string_view>

#include "gsim/errors.hpp"
#include "gsim/table_model.hpp"

namespace gsim {

// Copies of models/*.json; tests keep the two in sync.
namespace bundled {

inline constexpr std::string_view two_state = R"json({
  "name": "two_state",
  "mission_time": 10.0,
  "components": [
    {"name": "unit", "states": ["ok", "failed"], "initial": "ok"}
  ],
  "rates": [
    {"component": "unit", "from": "ok", "to": "failed", "rate": 0.1}
  ],
  "end_states": [
    {"class": "target", "label": "failure", "config": {"unit": "failed"}}
  ]
}
)json";

inline constexpr std::string_view holdup_tank = R"json({
  "name": "holdup_tank",
  "mission_time": 100.0,
  "max_substep": 0.1,
  "components": [
    {"name": "pump1", "states": ["on", "off"], "initial": "on"},
    {"name": "pump2", "states": ["off", "on"], "initial": "off"},
    {"name": "valve", "states": ["open", "closed"], "initial": "open"}
  ],
  "process": [
    {"name": "level", "unit": "m", "initial": 5.0, "range": [0.0, 10.0]}
  ],
  "rates": [
    {"component": "pump1", "from": "on", "to": "off", "rate": 0.01},
    {"component": "pump1", "from": "off", "to": "on",
     "rate": {"variable": "level", "breaks": [4.0], "values": [0.05, 0.0]}},
    {"component": "pump2", "from": "off", "to": "on",
     "rate": {"variable": "level", "breaks": [4.0], "values": [0.05, 0.002]}},
    {"component": "pump2", "from": "on", "to": "off",
     "rate": {"variable": "level", "breaks": [6.0], "values": [0.002, 0.05]}},
    {"component": "valve", "from": "open", "to": "closed",
     "rate": {"variable": "level", "breaks": [4.0], "values": [0.05, 0.005]}},
    {"component": "valve", "from": "closed", "to": "open",
     "rate": {"variable": "level", "breaks": [6.0], "values": [0.001, 0.05]}}
  ],
  "drift": [
    {"when": {"pump1": "on"}, "variable": "level", "constant": 0.1},
    {"when": {"pump2": "on"}, "variable": "level", "constant": 0.1},
    {"when": {"valve": "open"}, "variable": "level", "constant": -0.1}
  ],
  "end_states": [
    {"class": "target", "label": "overflow",
     "process": [{"variable": "level", "op": ">=", "value": 10.0}]},
    {"class": "target", "label": "dryout",
     "process": [{"variable": "level", "op": "<=", "value": 0.0}]}
  ]
}
)json";

inline constexpr std::string_view cascade3 = R"json({
  "name": "cascade3",
  "mission_time": 20.0,
  "components": [
    {"name": "a", "states": ["ok", "failed"], "initial": "ok"},
    {"name": "b", "states": ["ok", "failed"], "initial": "ok"},
    {"name": "c", "states": ["ok", "failed"], "initial": "ok"}
  ],
  "rates": [
    {"component": "a", "from": "ok", "to": "failed", "when": {"b": "ok", "c": "ok"}, "rate": 0.05},
    {"component": "a", "from": "ok", "to": "failed", "when": {"b": "ok", "c": "failed"}, "rate": 0.1},
    {"component": "a", "from": "ok", "to": "failed", "when": {"b": "failed", "c": "ok"}, "rate": 0.1},
    {"component": "a", "from": "ok", "to": "failed", "when": {"b": "failed", "c": "failed"}, "rate": 0.2},
    {"component": "b", "from": "ok", "to": "failed", "when": {"a": "ok", "c": "ok"}, "rate": 0.05},
    {"component": "b", "from": "ok", "to": "failed", "when": {"a": "ok", "c": "failed"}, "rate": 0.1},
    {"component": "b", "from": "ok", "to": "failed", "when": {"a": "failed", "c": "ok"}, "rate": 0.1},
    {"component": "b", "from": "ok", "to": "failed", "when": {"a": "failed", "c": "failed"}, "rate": 0.2},
    {"component": "c", "from": "ok", "to": "failed", "when": {"a": "ok", "b": "ok"}, "rate": 0.05},
    {"component": "c", "from": "ok", "to": "failed", "when": {"a": "ok", "b": "failed"}, "rate": 0.1},
    {"component": "c", "from": "ok", "to": "failed", "when": {"a": "failed", "b": "ok"}, "rate": 0.1},
    {"component": "c", "from": "ok", "to": "failed", "when": {"a": "failed", "b": "failed"}, "rate": 0.2}
  ],
  "end_states": [
    {"class": "target", "label": "all_failed", "config": {"a": "failed", "b": "failed", "c": "failed"}}
  ]
}
)json";

}  // namespace bundled

inline constexpr std::array<std::string_view, 3> benchmark_names = {"two_state", "holdup_tank",
                                                                    "cascade3"};

inline std::string_view benchmark_source(std::string_view name) {
  if (name == "two_state") return bundled::two_state;
  if (name == "holdup_tank") return bundled::holdup_tank;
  if (name == "cascade3") return bundled::cascade3;
  throw ConfigError("unknown benchmark '" + std::string(name) +
                    "'; valid names: two_state, holdup_tank, cascade3");
}

/// One of the bundled benchmark models by name.
inline std::unique_ptr<TableModel> build_benchmark(std::string_view name) {
  return TableModel::from_json(nlohmann::json::parse(benchmark_source(name)));
}

}  // namespace gsim

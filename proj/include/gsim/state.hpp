#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace gsim {

using Config = std::vector<int>;

/// A point of the hybrid state space: discrete component configuration,
/// continuous process vector and time in seconds.
struct SystemState {
  Config config;
  std::vector<double> process;
  double time = 0.0;

  friend bool operator==(const SystemState&, const SystemState&) = default;
};

/// One possible jump out of the current configuration.
struct TransitionCandidate {
  Config target_config;
  double rate = 0.0;  // 1/s
};

/// Terminal classification of a state.
class EndStateClass {
 public:
  enum class Kind : std::uint8_t { Ongoing, Success, Failure, Target };

  EndStateClass() = default;

  static EndStateClass ongoing() { return {}; }
  static EndStateClass success() { return EndStateClass(Kind::Success, {}); }
  static EndStateClass failure(std::string label) {
    return EndStateClass(Kind::Failure, std::move(label));
  }
  static EndStateClass target(std::string label) {
    return EndStateClass(Kind::Target, std::move(label));
  }

  Kind kind() const noexcept { return kind_; }
  const std::string& label() const noexcept { return label_; }
  bool is_ongoing() const noexcept { return kind_ == Kind::Ongoing; }
  bool is_target() const noexcept { return kind_ == Kind::Target; }

  /// Stable textual key: "ongoing", "success", "failure:<label>",
  /// "target:<label>". Used in reports and serialized trees.
  std::string key() const {
    switch (kind_) {
      case Kind::Ongoing: return "ongoing";
      case Kind::Success: return "success";
      case Kind::Failure: return "failure:" + label_;
      case Kind::Target: return "target:" + label_;
    }
    return "ongoing";
  }

  static std::optional<EndStateClass> from_key(const std::string& key) {
    if (key == "ongoing") return ongoing();
    if (key == "success") return success();
    if (key.rfind("failure:", 0) == 0) return failure(key.substr(8));
    if (key.rfind("target:", 0) == 0) return target(key.substr(7));
    return std::nullopt;
  }

  friend bool operator==(const EndStateClass&, const EndStateClass&) = default;

 private:
  EndStateClass(Kind kind, std::string label)
      : kind_(kind), label_(std::move(label)) {}

  Kind kind_ = Kind::Ongoing;
  std::string label_;
};

/// Selects end classes by kind and, optionally, label.
struct ClassFilter {
  EndStateClass::Kind kind = EndStateClass::Kind::Target;
  std::optional<std::string> label;

  bool matches(const EndStateClass& c) const {
    return c.kind() == kind && (!label || c.label() == *label);
  }

  static ClassFilter any_target() { return {EndStateClass::Kind::Target, {}}; }
};

}  // namespace gsim

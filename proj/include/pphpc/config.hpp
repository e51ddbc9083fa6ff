#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pphpc {

// Raised when a parameter combination cannot be simulated (e.g. too many
// ER workers for the grid height). The CLI maps it to its own exit code.
class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class AgentKind : std::uint8_t { Prey = 0, Predator = 1 };

inline const char* to_string(AgentKind k) {
  return k == AgentKind::Prey ? "prey" : "predator";
}

// Dynamics-related parameters. Reproduction probabilities are integer
// percentages.
struct DynamicsParams {
  std::int32_t gain_prey = 4;
  std::int32_t gain_predator = 20;
  std::int32_t loss_prey = 1;
  std::int32_t loss_predator = 1;
  std::int32_t repro_threshold_prey = 2;
  std::int32_t repro_threshold_predator = 2;
  std::int32_t repro_prob_prey = 4;
  std::int32_t repro_prob_predator = 5;
  std::int32_t cell_restart = 10;

  std::int32_t gain(AgentKind k) const { return k == AgentKind::Prey ? gain_prey : gain_predator; }
  std::int32_t loss(AgentKind k) const { return k == AgentKind::Prey ? loss_prey : loss_predator; }
  std::int32_t repro_threshold(AgentKind k) const {
    return k == AgentKind::Prey ? repro_threshold_prey : repro_threshold_predator;
  }
  std::int32_t repro_prob(AgentKind k) const {
    return k == AgentKind::Prey ? repro_prob_prey : repro_prob_predator;
  }

  void validate() const {
    auto check = [](bool ok, const char* what) {
      if (!ok) throw config_error(std::string("invalid dynamics parameters: ") + what);
    };
    check(repro_prob_prey >= 0 && repro_prob_prey <= 100, "prey reproduction probability outside 0..100");
    check(repro_prob_predator >= 0 && repro_prob_predator <= 100,
          "predator reproduction probability outside 0..100");
    check(repro_threshold_prey >= 1 && repro_threshold_predator >= 1, "reproduction threshold must be >= 1");
    check(cell_restart >= 1, "cell restart must be >= 1");
    check(gain_prey >= 0 && gain_predator >= 0, "energy gains must be >= 0");
    check(loss_prey >= 0 && loss_predator >= 0, "energy losses must be >= 0");
  }

  friend bool operator==(const DynamicsParams&, const DynamicsParams&) = default;
};

/// Named dynamics presets: set 1 and set 2.
inline DynamicsParams dynamics_preset(int set) {
  switch (set) {
    case 1:
      return DynamicsParams{4, 20, 1, 1, 2, 2, 4, 5, 10};
    case 2:
      return DynamicsParams{30, 10, 1, 1, 2, 2, 10, 5, 15};
    default:
      throw config_error("unknown dynamics preset " + std::to_string(set) + " (expected 1 or 2)");
  }
}

/// Steady-state cutoff associated with each dynamics preset.
inline std::int32_t steady_state_cutoff(int set) {
  switch (set) {
    case 1:
      return 1000;
    case 2:
      return 2000;
    default:
      throw config_error("no steady-state cutoff for preset " + std::to_string(set));
  }
}

inline constexpr std::int32_t kDefaultIterations = 4000;

struct SizeParams {
  std::int32_t x_env = 100;
  std::int32_t y_env = 100;
  std::int64_t init_prey = 400;
  std::int64_t init_predators = 200;
  std::int32_t iterations = kDefaultIterations;

  std::int64_t cells() const { return std::int64_t{x_env} * y_env; }

  void validate() const {
    if (x_env < 1 || y_env < 1) throw config_error("grid dimensions must be positive");
    if (cells() > INT32_MAX) throw config_error("grid too large");
    if (init_prey < 0 || init_predators < 0) throw config_error("initial populations must be >= 0");
    if (iterations < 1) throw config_error("iterations must be >= 1");
  }

  friend bool operator==(const SizeParams&, const SizeParams&) = default;
};

/// Size presets: a `size`×`size` grid with size²/25 prey and half as many
/// predators (100 → 400/200 up to 1600 → 102400/51200).
inline SizeParams size_preset(int size, std::int32_t iterations = kDefaultIterations) {
  switch (size) {
    case 100:
    case 200:
    case 400:
    case 800:
    case 1600:
    case 3200:
    case 6400:
    case 12800:
      break;
    default:
      throw config_error("unknown size preset " + std::to_string(size));
  }
  const std::int64_t prey = std::int64_t{size} * size / 25;
  return SizeParams{size, size, prey, prey / 2, iterations};
}

struct SimConfig {
  SizeParams size;
  DynamicsParams dynamics;

  void validate() const {
    size.validate();
    dynamics.validate();
  }
};

}  // namespace pphpc

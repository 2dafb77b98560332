#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "consensuslab/analysis.hpp"
#include "consensuslab/graph.hpp"
#include "consensuslab/noise.hpp"
#include "consensuslab/simulate.hpp"

namespace consensuslab {

/// Parse/usage error with the offending line; the CLI maps this to exit 2.
struct ConfigError : std::runtime_error {
  int line;
  ConfigError(int line_, const std::string& msg)
      : std::runtime_error(msg), line(line_) {}
};

/// Per-check switch for the verify command: auto enables a check exactly when
/// its assumptions hold.
enum class CheckMode { automatic, on, off };

struct VerifyOptions {
  CheckMode sandwich = CheckMode::automatic;     // m.s. rate envelope
  CheckMode ss_error = CheckMode::automatic;     // linear steady-state bound
  CheckMode growth_bound = CheckMode::off;       // growth-bound form (see README)
  CheckMode slopes = CheckMode::automatic;       // a.s. slope predictions
  CheckMode divergence = CheckMode::automatic;   // growth when certificates fail
  CheckMode unbiasedness = CheckMode::automatic; // E x* = initial average
  CheckMode lil = CheckMode::automatic;          // iterated-logarithm envelope
};

/// One experiment: graph + noise + gain + simulation grid + output locations.
struct ExperimentConfig {
  Graph graph;
  std::vector<std::pair<int, int>> edges;  // as parsed (for round-tripping)
  std::optional<std::string> graph_file;

  NoiseModel noise;
  GainMatrix gain;

  double dt = 1e-3;
  double horizon = 1.0;
  int trials = 1;
  std::uint64_t seed = 0;
  int stride = 0;  // 0 = auto
  std::vector<double> x0;

  std::string out_dir = "out";
  bool per_trial_csv = false;

  VerifyOptions verify;

  SimConfig sim_config() const;
};

/// Flat sectioned key=value text; '#' comments; unknown sections or keys are
/// rejected with the offending line number. `base_dir` resolves a relative
/// graph file path.
ExperimentConfig parse_config_text(const std::string& text,
                                   const std::string& base_dir = ".");
ExperimentConfig parse_config_file(const std::string& path);

/// Canonical serialization; parse(serialize(parse(x))) is semantically
/// idempotent.
std::string serialize_config(const ExperimentConfig& cfg);

}  // namespace consensuslab

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "consensuslab/analysis.hpp"
#include "consensuslab/config.hpp"
#include "consensuslab/simulate.hpp"

namespace consensuslab {

/// Human-readable key: value report. Infinite bounds print as "inf".
void write_analysis_text(std::ostream& os, const AnalysisReport& r);

/// Machine-readable variant; infinities are the string "inf", never a float.
std::string analysis_json(const AnalysisReport& r);

/// Columns: t, ms_delta_sq, se, consensus_mean_1..n. 17 significant digits.
void write_ms_curve_csv(std::ostream& os, const Ensemble& e);

/// Per-trial terminal data: trial, slope, terminal_err_sq, diverged,
/// consensus_1..n.
void write_trials_csv(std::ostream& os, const Ensemble& e);

struct CheckResult {
  std::string name;
  enum class Status { pass, fail, skipped } status;
  std::string detail;  // measured vs predicted, tolerances
};

struct VerifyReport {
  std::vector<CheckResult> checks;
  std::uint64_t seed = 0;
  bool all_passed() const;
};

/// Runs analysis + simulation for the config and compares simulation against
/// the analytical predictions; check selection follows cfg.verify (auto =
/// enabled exactly when the check's assumptions hold, otherwise SKIPPED).
VerifyReport run_verify(const ExperimentConfig& cfg);

void write_verify_text(std::ostream& os, const VerifyReport& r);

/// Simulation summary (terminal error, slopes, divergence counts).
void write_sim_summary(std::ostream& os, const ExperimentConfig& cfg, const Ensemble& e);

}  // namespace consensuslab

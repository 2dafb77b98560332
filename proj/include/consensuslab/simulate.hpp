#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "consensuslab/analysis.hpp"
#include "consensuslab/graph.hpp"
#include "consensuslab/noise.hpp"

namespace consensuslab {

struct SimConfig {
  Graph graph;
  NoiseModel noise;
  GainMatrix gain;
  std::vector<double> x0;  // N * n, agent-major

  double dt = 1e-3;
  double horizon = 1.0;
  int sample_stride = 0;  // 0 = auto (at most ~10^4 stored samples)
  std::uint64_t seed = 0;
  int trials = 1;

  // ensemble options
  int batches = 10;          // batch-means groups for rate standard errors
  double slope_window = 0.5; // trailing fraction for per-trial log-slopes
  bool keep_trajectories = false;
  bool store_states = false;
  bool store_brownian = false;
};

/// One sampled path. delta is the disagreement ((I - J_N) (x) I_n) x; the
/// integrator works in the orthonormal frame (xbar, dbar) so delta keeps full
/// relative precision even at magnitudes like 1e-130.
struct Trajectory {
  std::vector<double> times;
  std::vector<double> delta_norms;              // ||delta(t_k)||
  std::vector<double> log_delta_sq;             // log ||delta||^2 (NaN at exact zero)
  std::vector<double> qv_log_delta_sq;          // cumulative realized QV of log||delta||^2
  std::vector<std::vector<double>> consensus;   // xbar(t_k), n per sample
  std::vector<std::vector<double>> states;      // optional: x(t_k), N*n per sample
  std::vector<std::vector<double>> brownian;    // optional: w(t_k) per brownian id
  std::vector<double> brownian_terminal;        // w(T) per brownian id
  bool diverged = false;
  double truncated_time = -1.0;  // >= 0 when diverged

  int samples() const { return static_cast<int>(times.size()); }
};

/// Deterministic in (cfg.seed, trial_index). Channel increments are drawn in
/// fixed channel-id order each step.
Trajectory simulate_trajectory(const SimConfig& cfg, int trial_index);

/// Pre-drawn Brownian increments on a fine grid, for strong-convergence
/// comparisons across step sizes on a common path.
struct FinePath {
  double dt = 0.0;
  std::vector<std::vector<double>> increments;  // [brownian_id][fine step]
  std::vector<double> terminal() const;
};

FinePath sample_fine_path(const SimConfig& cfg, int trial_index, double dt_fine);

/// Euler-Maruyama on the given path with dt_coarse an integer multiple of
/// path.dt (increments are aggregated).
Trajectory simulate_with_path(const SimConfig& cfg, const FinePath& path, double dt_coarse);

struct Ensemble {
  std::vector<double> times;
  std::vector<int> sample_count;      // finite trials contributing per sample
  std::vector<double> ms_mean;        // E ||delta||^2
  std::vector<double> ms_se;
  std::vector<double> logsq_mean;     // E log ||delta||^2
  std::vector<double> qv_mean;        // E cumulative QV of log ||delta||^2
  std::vector<std::vector<double>> consensus_mean;  // per sample, n

  int batches = 0;
  std::vector<std::vector<double>> batch_logsq;  // [batch][sample] means
  std::vector<std::vector<double>> batch_qv;
  std::vector<int> batch_size;

  std::vector<double> slopes;            // per-trial trailing log||delta|| slopes (NaN if unusable)
  std::vector<double> terminal_err_sq;   // per-trial ||xbar(T) - xbar(0)||^2
  std::vector<std::vector<double>> terminal_consensus;  // per-trial xbar(T)
  std::vector<std::uint8_t> diverged;
  int diverged_count = 0;

  std::vector<Trajectory> trajectories;  // only when cfg.keep_trajectories

  int trials = 0;
  int state_dim = 1;
  std::uint64_t seed = 0;

  // E ||xbar(T) - xbar(0)||^2 with standard error
  std::pair<double, double> terminal_ms_error() const;
  /// Relative standard error of ms_mean[s]. The plain sample SE underestimates
  /// badly once the multiplicative-noise distribution turns heavy-tailed, so
  /// this returns the larger of the sample SE and the lognormal-model value
  /// sqrt((exp(Var log||delta||^2) - 1)/n) with the variance taken from the
  /// realized quadratic variation.
  double ms_relative_se(int sample) const;
  // ensemble mean of xbar(T) with per-component standard errors
  std::pair<std::vector<double>, std::vector<double>> consensus_mean_se() const;
  double median_slope() const;
  double fraction_slopes_negative() const;
};

/// Trials run in parallel (capped by CONSENSUSLAB_THREADS); aggregation is
/// reduced in trial-index order, so results do not depend on thread count.
Ensemble run_ensemble(const SimConfig& cfg);

struct RateFit {
  double rate = 0.0;  // decay rate r in E||delta||^2 ~ exp(-r t); negative = growth
  double se = 0.0;
};

/// Mean-square decay rate over [t_lo, t_hi] from the log-domain curve with
/// the realized-quadratic-variation correction
///   log E||delta(t)||^2 ~= E log||delta(t)||^2 + Var(log||delta(t)||^2)/2,
/// which stays well-behaved where the plain sample mean of ||delta||^2 is
/// dominated by rare paths. Standard error by batch means.
RateFit fit_ms_decay_rate(const Ensemble& e, double t_lo, double t_hi);

/// Plain OLS slope of log(ms_mean) over [t_lo, t_hi]; batch-means SE.
RateFit fit_log_ms_slope(const Ensemble& e, double t_lo, double t_hi);

struct SlopeEstimate {
  double slope = 0.0;
  int used = 0;
  int excluded = 0;  // zero-norm samples dropped from the regression
};

/// Least-squares slope of log||delta(t)|| over the trailing `window` fraction
/// of the horizon. Throws when delta(0) = 0 or fewer than two usable samples.
SlopeEstimate as_rate_estimate(const Trajectory& tr, double window = 0.5);

/// (log||delta(t)|| + (k + k^2 sigma^2/2) lambda_2 t) / sqrt(2 t log log t)
/// for samples with t > e; pairs of (t, value).
std::vector<std::pair<double, double>> lil_normalized_curve(const Trajectory& tr, double k,
                                                            double sigma,
                                                            const LaplacianSpectrum& spec);

/// Pathwise solution dbar(t) = exp(-A t + M(t)) dbar(0) for symmetric channel
/// wiring, scalar linear noise and symmetric K, where
///   A = Lambda0 (x) K + 1/2 sum_edges G_e^2,
///   G_e = (phi^T (B_ij + B_ji) phi) (x) (K sigma_e),
///   M(t) = sum_edges G_e w_e(t).
/// A carries the full Ito correction of the per-edge (shared-Brownian)
/// diffusion term; the formula is pathwise-exact when the G_e commute (e.g.
/// a single edge) and is used as a simulation oracle in that regime.
/// w_at_times: per requested time, w value per brownian id.
std::vector<std::vector<double>> closed_form_symmetric(
    const Graph& g, const LaplacianSpectrum& spec, const NoiseModel& noise,
    const GainMatrix& gain, const std::vector<double>& dbar0,
    const std::vector<double>& times, const std::vector<std::vector<double>>& w_at_times);

/// dbar(0) = (phi^T (x) I_n) x0
std::vector<double> reduced_initial(const LaplacianSpectrum& spec, int state_dim,
                                    const std::vector<double>& x0);

/// ||dbar|| equals ||delta||; reconstruct x = 1 (x) xbar + (phi (x) I_n) dbar.
std::vector<double> reconstruct_state(const LaplacianSpectrum& spec, int state_dim,
                                      const std::vector<double>& xbar,
                                      const std::vector<double>& dbar);

std::uint64_t trial_seed(std::uint64_t seed, int trial_index);

}  // namespace consensuslab

#pragma once

#include <optional>
#include <vector>

#include "consensuslab/graph.hpp"
#include "consensuslab/matrix.hpp"
#include "consensuslab/noise.hpp"

namespace consensuslab {

/// Control gain K (n x n); scalar_k is set when K = k I_n exactly.
struct GainMatrix {
  int n = 1;
  Matrix K;
  std::optional<double> scalar_k;

  static GainMatrix scalar(int n, double k);
  static GainMatrix full(Matrix K);

  bool is_symmetric() const { return consensuslab::is_symmetric(K, 1e-12); }
};

/// Open gain interval (lo, hi); hi may be +infinity.
struct GainInterval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double k) const { return k > lo && k < hi; }
};

/// Psi^f_L(K) = Lambda0 (x) (K+K^T)/2 - ((N-1)/N) ||K||^2 sigma_bar^2 (Lambda0 (x) I_n)
Matrix psi_f_matrix(const LaplacianSpectrum& spec, const GainMatrix& gain, double sigma_bar);

/// Small-consensus-gain interval (0, N/((N-1) sigma_bar^2)); (0, inf) when
/// sigma_bar = 0.
GainInterval small_gain_interval(int n_agents, double sigma_bar);

struct LinearCertificates {
  Matrix phi_K;  // sum over channels of (phi^T B^T phi phi^T B phi) (x) (Sigma^T K^T K Sigma)
  Matrix psi_K;  // Lambda0 (x) (K + K^T) - Phi_K
};

/// Certificate matrices for linear noise under independent channels. Rejects
/// the general (nonlinear) kind.
LinearCertificates linear_certificates(const Graph& g, const LaplacianSpectrum& spec,
                                   const NoiseModel& noise, const GainMatrix& gain);

/// (lambda_min, lambda_max) of Psi_K: the mean-square curve satisfies
/// ||d0||^2 exp(-lambda_max t) <= E||delta||^2 <= ||d0||^2 exp(-lambda_min t).
std::pair<double, double> ms_rate_bounds(const Matrix& psi_K);

/// Steady-state error bounds; +infinity when the corresponding certificate is
/// not positive definite.
struct SsErrorBounds {
  double growth = 0.0;        // ||K||^2 sigma_bar^2 lambda_N ||d0||^2 / (2 N^2 lambda_min(Psi^f))
  double linear = 0.0;        // lambda_max(Phi_K) ||d0||^2 / (N (N-1) lambda_min(Psi_K))
  double asymptotic = 0.0;  // sigma^2 k d(G) (N-1) / (2 N^2 (1 - ((N-1)/N) sigma^2 k))
};

SsErrorBounds steady_state_error_bounds(const Graph& g, const LaplacianSpectrum& spec,
                                        const NoiseModel& noise, const GainMatrix& gain,
                                        const std::vector<double>& x0);

struct TwoAgentClosedForm {
  double ms_error = 0.0;  // +infinity when ms_iff is false
  bool as_iff = false;
  bool ms_iff = false;
};

TwoAgentClosedForm two_agent_closed_form(double k, double sigma12, double sigma21,
                                         const std::vector<double>& x1_0,
                                         const std::vector<double>& x2_0);

/// Necessary and sufficient m.s. test for homogeneous noise and K = k I.
bool ms_decision_homogeneous(const Graph& g, double k, double sigma);

struct GainBands {
  bool sufficient = false;  // uses max sigma_ji
  bool necessary = false;   // uses min sigma_ji
};

GainBands gain_bands(const Graph& g, const NoiseModel& noise, double k);

/// lambda_K = lambda_min(Psi_K)
///          + 1/2 sum_c min|eig|^2 of (phi^T B phi)(x)(K Sigma) + transpose.
double lambda_K_bound(const Graph& g, const LaplacianSpectrum& spec,
                      const NoiseModel& noise, const GainMatrix& gain);

struct MuEstimate {
  double value = 0.0;  // numeric infimum estimate (not certified)
  int restarts = 0;
};

/// Multi-start projected gradient estimate of
/// mu = inf_u u^T Psi_K u + 2 sum_c (u^T H_c u)^2 over the unit sphere.
MuEstimate mu_estimate(const Graph& g, const LaplacianSpectrum& spec,
                       const NoiseModel& noise, const GainMatrix& gain,
                       int restarts = 64, std::uint64_t seed = 0);

struct AsRateMatrices {
  Matrix A;  // Lambda0 (x) K + 1/2 (phi^T (sum B^2 sigma^2) phi) (x) K^2
  Matrix B;  // (phi^T (sum B sigma) phi) (x) K
};

/// A.s.-rate matrices for symmetric channel wiring; requires scalar linear
/// noise with sigma_ji = sigma_ij and symmetric K.
AsRateMatrices as_rate_matrices(const Graph& g, const LaplacianSpectrum& spec,
                                const NoiseModel& noise, const GainMatrix& gain);

/// Symmetric homogeneous a.s. test: connected and k + k^2 sigma^2 / 2 > 0.
bool as_decision_homogeneous_symmetric(double k, double sigma, bool connected);

/// k* = N / (2 (N-1) sigma^2), the midpoint of the small-gain interval.
double optimal_gain(int n_agents, double sigma);

struct Verdicts {
  bool ms_sufficient = false;
  std::optional<bool> ms_iff;  // homogeneous K = kI only
  bool as_sufficient = false;
};

/// Everything the analyze command reports.
struct AnalysisReport {
  int n_agents = 0;
  int state_dim = 1;
  bool connected = false;
  GraphMetrics metrics;
  std::vector<double> laplacian_eigenvalues;

  double sigma_bar = 0.0;
  Matrix psi_f;
  std::optional<LinearCertificates> linear_certs;
  std::pair<double, double> ms_rate_interval{0.0, 0.0};  // valid when linear set
  SsErrorBounds ss_error;
  std::optional<double> lambda_K;
  std::optional<MuEstimate> mu;
  std::optional<AsRateMatrices> as_matrices;
  std::optional<GainBands> bands;

  Verdicts verdicts;
  GainInterval gain_interval;
  std::optional<double> optimal_k;  // homogeneous only
  std::optional<TwoAgentClosedForm> two_agent;  // N == 2, scalar linear only

  double delta0_sq = 0.0;
  std::uint64_t mu_seed = 0;
};

struct AnalyzeOptions {
  int mu_restarts = 64;
  std::uint64_t mu_seed = 2024;
};

AnalysisReport analyze(const Graph& g, const NoiseModel& noise, const GainMatrix& gain,
                       const std::vector<double>& x0, const AnalyzeOptions& opt = {});

/// ||((I - J_N) (x) I_n) x0||^2
double initial_disagreement_sq(const Graph& g, int state_dim, const std::vector<double>& x0);

}  // namespace consensuslab

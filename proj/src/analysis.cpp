#include "consensuslab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace consensuslab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Matrix reduced_channel_matrix(const LaplacianSpectrum& spec, const Graph& g, int i, int j) {
  // phi^T B_ij phi without forming the N x N product: B_ij = eta_i a_ij (eta_j - eta_i)^T
  const int nm = spec.phi.cols();
  Matrix r(nm, nm);
  const double a = g.adjacency(i - 1, j - 1);
  if (a == 0.0) return r;
  for (int p = 0; p < nm; ++p) {
    const double left = spec.phi(i - 1, p);
    for (int q = 0; q < nm; ++q)
      r(p, q) = left * a * (spec.phi(j - 1, q) - spec.phi(i - 1, q));
  }
  return r;
}

void require_linear(const NoiseModel& noise, const char* where) {
  if (!noise.is_linear())
    throw std::invalid_argument(std::string(where) + ": requires a linear noise kind");
}

}  // namespace

GainMatrix GainMatrix::scalar(int n, double k) {
  GainMatrix g;
  g.n = n;
  g.K = k * Matrix::identity(n);
  g.scalar_k = k;
  return g;
}

GainMatrix GainMatrix::full(Matrix K) {
  if (K.rows() != K.cols()) throw std::invalid_argument("GainMatrix: K must be square");
  GainMatrix g;
  g.n = K.rows();
  bool scalar = true;
  const double k = K(0, 0);
  for (int i = 0; i < K.rows() && scalar; ++i)
    for (int j = 0; j < K.cols() && scalar; ++j)
      if (K(i, j) != (i == j ? k : 0.0)) scalar = false;
  if (scalar) g.scalar_k = k;
  g.K = std::move(K);
  return g;
}

Matrix psi_f_matrix(const LaplacianSpectrum& spec, const GainMatrix& gain,
                    double sigma_bar) {
  const int n_agents = spec.full_transform.rows();
  const Matrix sym_k = symmetrize(gain.K);
  const double norm_k = spectral_norm(gain.K);
  const double coeff =
      (static_cast<double>(n_agents - 1) / n_agents) * norm_k * norm_k * sigma_bar * sigma_bar;
  Matrix psi = kron(spec.lambda0, sym_k);
  psi -= coeff * kron(spec.lambda0, Matrix::identity(gain.n));
  return psi;
}

GainInterval small_gain_interval(int n_agents, double sigma_bar) {
  if (n_agents < 2) throw std::invalid_argument("small_gain_interval: need N >= 2");
  GainInterval iv;
  iv.lo = 0.0;
  iv.hi = sigma_bar > 0.0 ? n_agents / ((n_agents - 1.0) * sigma_bar * sigma_bar) : kInf;
  return iv;
}

LinearCertificates linear_certificates(const Graph& g, const LaplacianSpectrum& spec,
                                   const NoiseModel& noise, const GainMatrix& gain) {
  require_linear(noise, "linear_certificates");
  const int n = gain.n;
  const Matrix ktk = gain.K.transpose() * gain.K;

  LinearCertificates out;
  out.phi_K = Matrix((g.n_agents - 1) * n, (g.n_agents - 1) * n);
  for (int i = 1; i <= g.n_agents; ++i) {
    for (int j = 1; j <= g.n_agents; ++j) {
      if (i == j || g.adjacency(i - 1, j - 1) == 0.0) continue;
      const Matrix b_red = reduced_channel_matrix(spec, g, i, j);
      const Matrix sig = noise.matrix_coefficient(j, i);
      out.phi_K += kron(b_red.transpose() * b_red, sig.transpose() * ktk * sig);
    }
  }
  out.psi_K = kron(spec.lambda0, gain.K + gain.K.transpose()) - out.phi_K;
  return out;
}

std::pair<double, double> ms_rate_bounds(const Matrix& psi_K) {
  const SymEigen e = sym_eigen(psi_K);
  return {e.values.front(), e.values.back()};
}

SsErrorBounds steady_state_error_bounds(const Graph& g, const LaplacianSpectrum& spec,
                                        const NoiseModel& noise, const GainMatrix& gain,
                                        const std::vector<double>& x0) {
  SsErrorBounds out;
  const double d0sq = initial_disagreement_sq(g, gain.n, x0);
  const double n_agents = g.n_agents;
  const double sigma_bar = growth_bound(noise);
  const double lam_n = spec.lambdaN();

  const Matrix psi_f = psi_f_matrix(spec, gain, sigma_bar);
  const double lmin_f = lambda_min(psi_f);
  if (lmin_f > 0.0) {
    const double nk = spectral_norm(gain.K);
    out.growth = nk * nk * sigma_bar * sigma_bar * lam_n * d0sq /
               (2.0 * n_agents * n_agents * lmin_f);
  } else {
    out.growth = d0sq == 0.0 ? 0.0 : kInf;
  }

  if (noise.is_linear()) {
    const LinearCertificates t3 = linear_certificates(g, spec, noise, gain);
    const double lmin = lambda_min(t3.psi_K);
    if (lmin > 0.0) {
      out.linear = lambda_max(t3.phi_K) * d0sq / (n_agents * (n_agents - 1.0) * lmin);
    } else {
      out.linear = d0sq == 0.0 ? 0.0 : kInf;
    }
  } else {
    out.linear = kInf;
  }

  if (d0sq == 0.0) {
    out.asymptotic = 0.0;  // already at consensus, the error is exactly zero
  } else if (noise.kind == NoiseKind::homogeneous && gain.scalar_k) {
    const double k = *gain.scalar_k;
    const double s2k = noise.sigma * noise.sigma * k;
    const double denom = 1.0 - (n_agents - 1.0) / n_agents * s2k;
    const double degree = graph_metrics(g).max_degree;
    if (denom > 0.0 && k > 0.0) {
      out.asymptotic =
          s2k * degree * (n_agents - 1.0) / (2.0 * n_agents * n_agents * denom);
    } else if (k == 0.0) {
      out.asymptotic = 0.0;
    } else {
      out.asymptotic = kInf;
    }
  } else {
    out.asymptotic = kInf;
  }
  return out;
}

TwoAgentClosedForm two_agent_closed_form(double k, double sigma12, double sigma21,
                                         const std::vector<double>& x1_0,
                                         const std::vector<double>& x2_0) {
  if (sigma12 <= 0.0 || sigma21 <= 0.0)
    throw std::invalid_argument("two_agent_closed_form: sigma12, sigma21 must be > 0");
  if (x1_0.size() != x2_0.size())
    throw std::invalid_argument("two_agent_closed_form: initial states differ in dimension");
  const double s = sigma12 * sigma12 + sigma21 * sigma21;
  TwoAgentClosedForm out;
  out.as_iff = 2.0 * k + 0.5 * k * k * s > 0.0;
  out.ms_iff = 4.0 * k - k * k * s > 0.0;
  double diff_sq = 0.0;
  for (std::size_t i = 0; i < x1_0.size(); ++i) {
    const double d = x1_0[i] - x2_0[i];
    diff_sq += d * d;
  }
  if (out.ms_iff) {
    const double denom = 4.0 * (4.0 - k * s);
    if (denom <= 0.0)
      throw std::logic_error("two_agent_closed_form: ms_iff true with denominator <= 0");
    out.ms_error = k * s * diff_sq / denom;
  } else {
    out.ms_error = diff_sq == 0.0 ? 0.0 : kInf;
  }
  return out;
}

bool ms_decision_homogeneous(const Graph& g, double k, double sigma) {
  if (!is_connected(g)) return false;
  return small_gain_interval(g.n_agents, sigma).contains(k);
}

GainBands gain_bands(const Graph& g, const NoiseModel& noise, double k) {
  if (noise.kind != NoiseKind::linear_scalar && noise.kind != NoiseKind::homogeneous)
    throw std::invalid_argument("gain_bands: requires scalar linear noise");
  double sig_max = 0.0, sig_min = kInf;
  if (noise.kind == NoiseKind::homogeneous) {
    sig_max = sig_min = noise.sigma;
  } else {
    for (const auto& [key, s] : noise.sigma_scalar) {
      sig_max = std::max(sig_max, s);
      sig_min = std::min(sig_min, s);
    }
  }
  const bool connected = is_connected(g);
  GainBands out;
  out.sufficient = connected && small_gain_interval(g.n_agents, sig_max).contains(k);
  out.necessary = connected && small_gain_interval(g.n_agents, sig_min).contains(k);
  return out;
}

namespace {

/// H_c = (phi^T B_ij phi) (x) (K Sigma_ji) for every ordered channel.
std::vector<Matrix> channel_h_matrices(const Graph& g, const LaplacianSpectrum& spec,
                                       const NoiseModel& noise, const GainMatrix& gain) {
  std::vector<Matrix> hs;
  for (int i = 1; i <= g.n_agents; ++i)
    for (int j = 1; j <= g.n_agents; ++j) {
      if (i == j || g.adjacency(i - 1, j - 1) == 0.0) continue;
      hs.push_back(kron(reduced_channel_matrix(spec, g, i, j),
                        gain.K * noise.matrix_coefficient(j, i)));
    }
  return hs;
}

}  // namespace

double lambda_K_bound(const Graph& g, const LaplacianSpectrum& spec,
                      const NoiseModel& noise, const GainMatrix& gain) {
  require_linear(noise, "lambda_K_bound");
  const LinearCertificates t3 = linear_certificates(g, spec, noise, gain);
  double sum = 0.0;
  for (const Matrix& h : channel_h_matrices(g, spec, noise, gain)) {
    const double lam = min_abs_eig(h + h.transpose());
    sum += lam * lam;
  }
  return lambda_min(t3.psi_K) + 0.5 * sum;
}

MuEstimate mu_estimate(const Graph& g, const LaplacianSpectrum& spec,
                       const NoiseModel& noise, const GainMatrix& gain, int restarts,
                       std::uint64_t seed) {
  require_linear(noise, "mu_estimate");
  const LinearCertificates t3 = linear_certificates(g, spec, noise, gain);
  const std::vector<Matrix> hs = channel_h_matrices(g, spec, noise, gain);
  std::vector<Matrix> sym_hs;
  sym_hs.reserve(hs.size());
  for (const Matrix& h : hs) sym_hs.push_back(symmetrize(h));

  const int dim = t3.psi_K.rows();

  auto value = [&](const std::vector<double>& u) {
    double f = quadratic_form(t3.psi_K, u, u);
    for (const Matrix& s : sym_hs) {
      const double q = quadratic_form(s, u, u);
      f += 2.0 * q * q;
    }
    return f;
  };
  auto gradient = [&](const std::vector<double>& u) {
    std::vector<double> grad = t3.psi_K * u;
    for (double& v : grad) v *= 2.0;
    for (const Matrix& s : sym_hs) {
      const double q = quadratic_form(s, u, u);
      const std::vector<double> su = s * u;
      for (int i = 0; i < dim; ++i) grad[i] += 8.0 * q * su[i];
    }
    return grad;
  };
  auto normalize = [&](std::vector<double>& u) {
    double nrm = 0.0;
    for (double v : u) nrm += v * v;
    nrm = std::sqrt(nrm);
    for (double& v : u) v /= nrm;
  };

  auto minimize_from = [&](std::vector<double> u) {
    normalize(u);
    double f = value(u);
    double step = 0.5;
    for (int it = 0; it < 500; ++it) {
      std::vector<double> grad = gradient(u);
      double ug = 0.0;
      for (int i = 0; i < dim; ++i) ug += u[i] * grad[i];
      double gnorm = 0.0;
      for (int i = 0; i < dim; ++i) {
        grad[i] -= ug * u[i];  // project onto the tangent space
        gnorm += grad[i] * grad[i];
      }
      gnorm = std::sqrt(gnorm);
      if (gnorm <= 1e-10 * (1.0 + std::abs(f))) break;
      bool moved = false;
      while (step > 1e-14) {
        std::vector<double> trial(dim);
        for (int i = 0; i < dim; ++i) trial[i] = u[i] - step * grad[i];
        normalize(trial);
        const double ft = value(trial);
        if (ft < f - 1e-14 * std::abs(f)) {
          u = std::move(trial);
          f = ft;
          step *= 1.5;
          moved = true;
          break;
        }
        step *= 0.5;
      }
      if (!moved) break;
    }
    return f;
  };

  MuEstimate out;
  out.restarts = restarts;
  double best = kInf;

  // deterministic starts: eigenvectors of Psi_K
  const SymEigen e = sym_eigen(t3.psi_K);
  for (int c = 0; c < dim; ++c) best = std::min(best, minimize_from(e.vectors.col(c)));

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  for (int r = 0; r < restarts; ++r) {
    std::vector<double> u(dim);
    for (double& v : u) v = nd(rng);
    best = std::min(best, minimize_from(std::move(u)));
  }
  out.value = best;
  return out;
}

AsRateMatrices as_rate_matrices(const Graph& g, const LaplacianSpectrum& spec,
                                const NoiseModel& noise, const GainMatrix& gain) {
  if (!noise.is_scalar_linear())
    throw std::invalid_argument("as_rate_matrices: requires scalar linear noise");
  if (!noise.symmetric_channels)
    throw std::invalid_argument("as_rate_matrices: requires symmetric channel wiring");
  if (!gain.is_symmetric())
    throw std::invalid_argument("as_rate_matrices: requires symmetric K");
  build_channels(g, noise);  // validates sigma_ji == sigma_ij

  const int n = g.n_agents;
  Matrix sum_b2(n, n);  // sum B_ij^2 sigma_ji^2 = -sum B_ij sigma_ji^2
  Matrix sum_b(n, n);   // sum B_ij sigma_ji
  for (int i = 1; i <= n; ++i)
    for (int j = 1; j <= n; ++j) {
      if (i == j || g.adjacency(i - 1, j - 1) == 0.0) continue;
      const double s = noise.scalar_coefficient(j, i);
      const Matrix b = channel_matrix(g, i, j);
      sum_b2 += (s * s) * (b * b);
      sum_b += s * b;
    }

  const Matrix phi_t = spec.phi.transpose();
  AsRateMatrices out;
  out.A = kron(spec.lambda0, gain.K) +
          0.5 * kron(phi_t * sum_b2 * spec.phi, gain.K * gain.K);
  out.A = symmetrize(out.A);
  out.B = kron(phi_t * sum_b * spec.phi, gain.K);
  out.B = symmetrize(out.B);
  return out;
}

bool as_decision_homogeneous_symmetric(double k, double sigma, bool connected) {
  return connected && k + 0.5 * k * k * sigma * sigma > 0.0;
}

double optimal_gain(int n_agents, double sigma) {
  if (n_agents < 2 || sigma <= 0.0)
    throw std::invalid_argument("optimal_gain: need N >= 2 and sigma > 0");
  return n_agents / (2.0 * (n_agents - 1.0) * sigma * sigma);
}

double initial_disagreement_sq(const Graph& g, int state_dim,
                               const std::vector<double>& x0) {
  const int n = g.n_agents;
  if (static_cast<int>(x0.size()) != n * state_dim)
    throw std::invalid_argument("initial state has wrong dimension");
  std::vector<double> mean(state_dim, 0.0);
  for (int a = 0; a < n; ++a)
    for (int c = 0; c < state_dim; ++c) mean[c] += x0[a * state_dim + c] / n;
  double d0sq = 0.0;
  for (int a = 0; a < n; ++a)
    for (int c = 0; c < state_dim; ++c) {
      const double d = x0[a * state_dim + c] - mean[c];
      d0sq += d * d;
    }
  return d0sq;
}

AnalysisReport analyze(const Graph& g, const NoiseModel& noise, const GainMatrix& gain,
                       const std::vector<double>& x0, const AnalyzeOptions& opt) {
  AnalysisReport r;
  r.n_agents = g.n_agents;
  r.state_dim = gain.n;
  r.metrics = graph_metrics(g);
  r.connected = r.metrics.connected;
  const LaplacianSpectrum spec = spectrum(g);
  r.laplacian_eigenvalues = spec.eigenvalues;
  r.sigma_bar = growth_bound(noise);
  r.delta0_sq = initial_disagreement_sq(g, gain.n, x0);

  r.psi_f = psi_f_matrix(spec, gain, r.sigma_bar);
  const double lmin_f = lambda_min(r.psi_f);
  r.gain_interval = small_gain_interval(g.n_agents, r.sigma_bar);
  r.ss_error = steady_state_error_bounds(g, spec, noise, gain, x0);

  bool ms_ok = lmin_f > 0.0;
  if (noise.is_linear() && !noise.symmetric_channels) {
    r.linear_certs = linear_certificates(g, spec, noise, gain);
    r.ms_rate_interval = ms_rate_bounds(r.linear_certs->psi_K);
    ms_ok = ms_ok || r.ms_rate_interval.first > 0.0;
    r.lambda_K = lambda_K_bound(g, spec, noise, gain);
    r.mu = mu_estimate(g, spec, noise, gain, opt.mu_restarts, opt.mu_seed);
    r.mu_seed = opt.mu_seed;
  } else if (noise.is_linear()) {
    // These certificate matrices assume independent Brownian channels; under
    // symmetric wiring they are still reportable but carry no guarantee.
    r.linear_certs = linear_certificates(g, spec, noise, gain);
    r.ms_rate_interval = ms_rate_bounds(r.linear_certs->psi_K);
  }
  r.verdicts.ms_sufficient = ms_ok;

  // The iff gain threshold and the band test hold for independent Brownian
  // channels; under symmetric wiring the threshold is not established.
  if (noise.kind == NoiseKind::homogeneous && gain.scalar_k && !noise.symmetric_channels)
    r.verdicts.ms_iff = ms_decision_homogeneous(g, *gain.scalar_k, noise.sigma);
  if (noise.kind == NoiseKind::homogeneous && gain.scalar_k && noise.sigma > 0.0)
    r.optimal_k = optimal_gain(g.n_agents, noise.sigma);
  if (noise.is_scalar_linear() && gain.scalar_k && !noise.symmetric_channels)
    r.bands = gain_bands(g, noise, *gain.scalar_k);

  bool as_ok = r.verdicts.ms_sufficient;  // the m.s. certificates give a.s. too
  if (r.lambda_K && *r.lambda_K > 0.0) as_ok = true;
  if (noise.kind == NoiseKind::homogeneous && noise.symmetric_channels && gain.scalar_k)
    as_ok = as_ok ||
            as_decision_homogeneous_symmetric(*gain.scalar_k, noise.sigma, r.connected);
  r.verdicts.as_sufficient = as_ok;

  if (noise.symmetric_channels && noise.is_scalar_linear() && gain.is_symmetric())
    r.as_matrices = as_rate_matrices(g, spec, noise, gain);

  // the two-agent closed form assumes independent Brownian channels
  if (g.n_agents == 2 && noise.is_scalar_linear() && gain.scalar_k && g.has_edge(1, 2) &&
      !noise.symmetric_channels) {
    const double s12 = noise.scalar_coefficient(1, 2);
    const double s21 = noise.scalar_coefficient(2, 1);
    std::vector<double> x1(x0.begin(), x0.begin() + gain.n);
    std::vector<double> x2(x0.begin() + gain.n, x0.end());
    if (s12 > 0.0 && s21 > 0.0)
      r.two_agent = two_agent_closed_form(*gain.scalar_k, s12, s21, x1, x2);
  }
  return r;
}

}  // namespace consensuslab

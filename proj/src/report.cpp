#include "consensuslab/report.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace consensuslab {

namespace {

using nlohmann::json;

std::string real_or_inf(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

json json_real(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return nullptr;
  return v > 0 ? "inf" : "-inf";
}

json json_matrix(const Matrix& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(json_real(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

const char* status_name(CheckResult::Status s) {
  switch (s) {
    case CheckResult::Status::pass: return "PASS";
    case CheckResult::Status::fail: return "FAIL";
    case CheckResult::Status::skipped: return "SKIPPED";
  }
  return "?";
}

}  // namespace

void write_analysis_text(std::ostream& os, const AnalysisReport& r) {
  os << std::setprecision(17);
  os << "agents: " << r.n_agents << "\n";
  os << "state_dim: " << r.state_dim << "\n";
  os << "connected: " << (r.connected ? "true" : "false") << "\n";
  os << "max_degree: " << r.metrics.max_degree << "\n";
  os << "diameter: "
     << (r.metrics.diameter == kInfiniteDiameter ? "inf"
                                                 : std::to_string(r.metrics.diameter))
     << "\n";
  os << "synchronizability: " << r.metrics.synchronizability << "\n";
  os << "laplacian_eigenvalues:";
  for (double v : r.laplacian_eigenvalues) os << ' ' << v;
  os << "\n";
  os << "sigma_bar: " << r.sigma_bar << "\n";
  os << "delta0_sq: " << r.delta0_sq << "\n";
  os << "gain_interval: (0, " << real_or_inf(r.gain_interval.hi) << ")\n";
  if (r.optimal_k) os << "optimal_k: " << *r.optimal_k << "\n";

  os << "lambda_min_psi_f: " << lambda_min(r.psi_f) << "\n";
  if (r.linear_certs) {
    os << "ms_rate_lower_exponent: " << r.ms_rate_interval.first << "\n";
    os << "ms_rate_upper_exponent: " << r.ms_rate_interval.second << "\n";
  }
  os << "ss_bound_growth: " << real_or_inf(r.ss_error.growth) << "\n";
  os << "ss_bound_linear: " << real_or_inf(r.ss_error.linear) << "\n";
  os << "ss_bound_asymptotic: " << real_or_inf(r.ss_error.asymptotic) << "\n";
  if (r.lambda_K) os << "lambda_K: " << *r.lambda_K << "\n";
  if (r.mu)
    os << "mu_estimate: " << r.mu->value << "  # non-certified, " << r.mu->restarts
       << " restarts, seed " << r.mu_seed << "\n";
  os << "ms_sufficient: " << (r.verdicts.ms_sufficient ? "true" : "false") << "\n";
  if (r.verdicts.ms_iff)
    os << "ms_iff: " << (*r.verdicts.ms_iff ? "true" : "false") << "\n";
  os << "as_sufficient: " << (r.verdicts.as_sufficient ? "true" : "false") << "\n";
  if (r.bands) {
    os << "band_sufficient: " << (r.bands->sufficient ? "true" : "false") << "\n";
    os << "band_necessary: " << (r.bands->necessary ? "true" : "false") << "\n";
  }
  if (r.two_agent) {
    os << "two_agent_ms_error: " << real_or_inf(r.two_agent->ms_error) << "\n";
    os << "two_agent_as_iff: " << (r.two_agent->as_iff ? "true" : "false") << "\n";
    os << "two_agent_ms_iff: " << (r.two_agent->ms_iff ? "true" : "false") << "\n";
  }
}

std::string analysis_json(const AnalysisReport& r) {
  json j;
  j["agents"] = r.n_agents;
  j["state_dim"] = r.state_dim;
  j["connected"] = r.connected;
  j["metrics"] = {{"max_degree", r.metrics.max_degree},
                  {"diameter", r.metrics.diameter == kInfiniteDiameter
                                   ? json("inf")
                                   : json(r.metrics.diameter)},
                  {"synchronizability", json_real(r.metrics.synchronizability)}};
  j["laplacian_eigenvalues"] = r.laplacian_eigenvalues;
  j["sigma_bar"] = json_real(r.sigma_bar);
  j["delta0_sq"] = json_real(r.delta0_sq);
  j["gain_interval"] = {{"lo", 0.0}, {"hi", json_real(r.gain_interval.hi)}};
  if (r.optimal_k) j["optimal_k"] = json_real(*r.optimal_k);
  j["psi_f"] = json_matrix(r.psi_f);
  j["lambda_min_psi_f"] = json_real(lambda_min(r.psi_f));
  if (r.linear_certs) {
    j["phi_K"] = json_matrix(r.linear_certs->phi_K);
    j["psi_K"] = json_matrix(r.linear_certs->psi_K);
    j["ms_rate_interval"] = {{"lower_exponent", json_real(r.ms_rate_interval.first)},
                             {"upper_exponent", json_real(r.ms_rate_interval.second)}};
  }
  j["ss_error_bounds"] = {{"growth", json_real(r.ss_error.growth)},
                          {"linear", json_real(r.ss_error.linear)},
                          {"asymptotic", json_real(r.ss_error.asymptotic)}};
  if (r.lambda_K) j["lambda_K"] = json_real(*r.lambda_K);
  if (r.mu)
    j["mu_estimate"] = {{"value", json_real(r.mu->value)},
                        {"restarts", r.mu->restarts},
                        {"seed", r.mu_seed},
                        {"certified", false}};
  if (r.as_matrices) {
    j["as_rate_A"] = json_matrix(r.as_matrices->A);
    j["as_rate_B"] = json_matrix(r.as_matrices->B);
  }
  json verdicts;
  verdicts["ms_sufficient"] = r.verdicts.ms_sufficient;
  if (r.verdicts.ms_iff) verdicts["ms_iff"] = *r.verdicts.ms_iff;
  verdicts["as_sufficient"] = r.verdicts.as_sufficient;
  j["verdicts"] = verdicts;
  if (r.bands)
    j["gain_bands"] = {{"sufficient", r.bands->sufficient},
                       {"necessary", r.bands->necessary}};
  if (r.two_agent)
    j["two_agent"] = {{"ms_error", json_real(r.two_agent->ms_error)},
                      {"as_iff", r.two_agent->as_iff},
                      {"ms_iff", r.two_agent->ms_iff}};
  return j.dump(2);
}

void write_ms_curve_csv(std::ostream& os, const Ensemble& e) {
  os << "t,ms_delta_sq,se";
  for (int c = 1; c <= e.state_dim; ++c) os << ",consensus_mean_" << c;
  os << "\n";
  os << std::setprecision(17);
  for (std::size_t s = 0; s < e.times.size(); ++s) {
    os << e.times[s] << ',' << e.ms_mean[s] << ',' << e.ms_se[s];
    for (int c = 0; c < e.state_dim; ++c) os << ',' << e.consensus_mean[s][c];
    os << "\n";
  }
}

void write_trials_csv(std::ostream& os, const Ensemble& e) {
  os << "trial,slope,terminal_err_sq,diverged";
  for (int c = 1; c <= e.state_dim; ++c) os << ",consensus_" << c;
  os << "\n";
  os << std::setprecision(17);
  for (int t = 0; t < e.trials; ++t) {
    os << t << ',' << e.slopes[t] << ',' << e.terminal_err_sq[t] << ','
       << static_cast<int>(e.diverged[t]);
    for (int c = 0; c < e.state_dim; ++c) os << ',' << e.terminal_consensus[t][c];
    os << "\n";
  }
}

bool VerifyReport::all_passed() const {
  for (const CheckResult& c : checks)
    if (c.status == CheckResult::Status::fail) return false;
  return true;
}

void write_verify_text(std::ostream& os, const VerifyReport& r) {
  os << "# verify report (seed " << r.seed << ")\n";
  for (const CheckResult& c : r.checks)
    os << status_name(c.status) << ' ' << c.name << ": " << c.detail << "\n";
  os << (r.all_passed() ? "RESULT: PASS" : "RESULT: FAIL") << "\n";
}

void write_sim_summary(std::ostream& os, const ExperimentConfig& cfg, const Ensemble& e) {
  os << std::setprecision(17);
  os << "# simulation summary (seed " << e.seed << ")\n";
  os << "trials: " << e.trials << "\n";
  os << "dt: " << cfg.dt << "\n";
  os << "horizon: " << cfg.horizon << "\n";
  const auto [term, term_se] = e.terminal_ms_error();
  os << "terminal_ms_error: " << term << "\n";
  os << "terminal_ms_error_se: " << term_se << "\n";
  const auto [cm, cse] = e.consensus_mean_se();
  os << "consensus_mean:";
  for (double v : cm) os << ' ' << v;
  os << "\n";
  os << "consensus_mean_se:";
  for (double v : cse) os << ' ' << v;
  os << "\n";
  os << "median_slope: " << e.median_slope() << "\n";
  os << "fraction_slopes_negative: " << e.fraction_slopes_negative() << "\n";
  os << "diverged_trials: " << e.diverged_count << "\n";
}

namespace {

using Status = CheckResult::Status;

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

}  // namespace

VerifyReport run_verify(const ExperimentConfig& cfg) {
  VerifyReport out;
  out.seed = cfg.seed;

  const Graph& g = cfg.graph;
  const NoiseModel& noise = cfg.noise;
  const GainMatrix& gain = cfg.gain;
  const AnalysisReport ar = analyze(g, noise, gain, cfg.x0);
  const Ensemble e = run_ensemble(cfg.sim_config());
  const double horizon = cfg.horizon;

  auto enabled = [&](CheckMode mode, bool applicable) {
    if (mode == CheckMode::off) return false;
    if (mode == CheckMode::on) return true;
    return applicable;
  };
  auto skip = [&](const std::string& name, const std::string& why) {
    out.checks.push_back({name, Status::skipped, why});
  };

  // m.s. sandwich: requires the independent-channel certificate matrices.
  {
    const bool applicable = ar.linear_certs.has_value() && !noise.symmetric_channels;
    if (!enabled(cfg.verify.sandwich, applicable)) {
      skip("ms_sandwich", noise.symmetric_channels
                              ? "needs independent Brownian channels"
                              : "needs a linear noise model");
    } else if (!applicable) {
      out.checks.push_back({"ms_sandwich", Status::fail,
                            "forced on but assumptions do not hold"});
    } else {
      const double lmin = ar.ms_rate_interval.first;
      const double lmax = ar.ms_rate_interval.second;
      bool ok = true;
      std::string worst;
      for (std::size_t s = 0; s < e.times.size() && ok; ++s) {
        const double t = e.times[s];
        const double ms = e.ms_mean[s];
        if (!std::isfinite(ms)) continue;
        const double up = ar.delta0_sq * std::exp(-lmin * t);
        const double lo = ar.delta0_sq * std::exp(-lmax * t);
        const double raw_rse = e.ms_relative_se(static_cast<int>(s));
        const double rse = std::isfinite(raw_rse) ? raw_rse : 0.0;
        if (ms > up * (1.0 + 3.0 * rse) + 1e-12 ||
            ms < lo * (1.0 - 3.0 * rse) - 1e-12) {
          ok = false;
          worst = "violated at t=" + fmt(t) + ": ms=" + fmt(ms) + " bounds=[" + fmt(lo) +
                  ", " + fmt(up) + "] rse=" + fmt(rse);
        }
      }
      out.checks.push_back({"ms_sandwich", ok ? Status::pass : Status::fail,
                            ok ? "ms curve within the decay-exponent band [" + fmt(lmin) +
                                     ", " + fmt(lmax) + "] x (1 +- 3 rse)"
                               : worst});
    }
  }

  // steady-state error bound from the linear certificates.
  {
    const bool applicable = ar.linear_certs.has_value() && !noise.symmetric_channels &&
                            ar.ms_rate_interval.first > 0.0;
    if (!enabled(cfg.verify.ss_error, applicable)) {
      skip("ss_error_linear", "needs a positive-definite Psi_K under independent channels");
    } else if (!applicable) {
      out.checks.push_back({"ss_error_linear", Status::fail,
                            "forced on but certificate does not hold"});
    } else {
      const auto [meas, se] = e.terminal_ms_error();
      const double bound = ar.ss_error.linear;
      const bool ok = meas <= bound * 1.0 + 3.0 * se + 1e-12;
      out.checks.push_back({"ss_error_linear", ok ? Status::pass : Status::fail,
                            "measured " + fmt(meas) + " +- " + fmt(se) + " vs bound " +
                                fmt(bound)});
    }
  }

  // growth-bound steady-state form, off by default (see README on its constant).
  {
    const bool applicable = lambda_min(ar.psi_f) > 0.0;
    if (!enabled(cfg.verify.growth_bound, applicable)) {
      skip("ss_error_growth", "off by default; enable with [verify] growth_bound = on");
    } else if (!applicable) {
      out.checks.push_back({"ss_error_growth", Status::fail,
                            "forced on but Psi_f is not positive definite"});
    } else {
      const auto [meas, se] = e.terminal_ms_error();
      const double bound = ar.ss_error.growth;
      const bool ok = meas <= bound + 3.0 * se + 1e-12;
      out.checks.push_back({"ss_error_growth", ok ? Status::pass : Status::fail,
                            "measured " + fmt(meas) + " +- " + fmt(se) + " vs bound " +
                                fmt(bound)});
    }
  }

  // a.s. slope vs -lambda_K/2 (independent channels).
  {
    const bool applicable =
        ar.lambda_K.has_value() && *ar.lambda_K > 0.0 && !noise.symmetric_channels;
    if (!enabled(cfg.verify.slopes, applicable)) {
      skip("as_slope", "needs lambda_K > 0 under independent channels");
    } else if (!applicable) {
      out.checks.push_back({"as_slope", Status::fail, "forced on but lambda_K <= 0"});
    } else {
      const double med = e.median_slope();
      const double predicted = -*ar.lambda_K / 2.0;
      const bool ok = med <= predicted + 0.5;  // engineering margin on a limsup claim
      out.checks.push_back({"as_slope", ok ? Status::pass : Status::fail,
                            "median trailing slope " + fmt(med) + " vs -lambda_K/2 = " +
                                fmt(predicted) + " (+0.5 margin)"});
    }
  }

  // a.s./m.s. gap: most trials contract pathwise while the ms curve grows.
  {
    const bool applicable = ar.verdicts.as_sufficient && !ar.verdicts.ms_sufficient &&
                            noise.symmetric_channels && horizon >= 4.0;
    if (!enabled(cfg.verify.slopes, applicable)) {
      skip("as_ms_gap", "needs as_sufficient && !ms_sufficient (symmetric wiring)");
    } else {
      const double frac = e.fraction_slopes_negative();
      const RateFit msfit =
          fit_log_ms_slope(e, 0.0, std::min(horizon, 2.0));
      bool ok = frac >= 0.95 && msfit.rate > 0.0;
      std::string detail = "fraction negative slopes " + fmt(frac) +
                           ", log-ms slope on [0," + fmt(std::min(horizon, 2.0)) +
                           "] = " + fmt(msfit.rate);
      if (noise.kind == NoiseKind::homogeneous && gain.scalar_k) {
        const double k = *gain.scalar_k;
        const LaplacianSpectrum sp = spectrum(g);
        const double rate = (k + 0.5 * k * k * noise.sigma * noise.sigma) * sp.lambda2();
        const double med = e.median_slope();
        ok = ok && med <= -(rate - 0.5);
        detail += ", median slope " + fmt(med) + " vs -(rate-0.5) = " + fmt(-(rate - 0.5));
      }
      out.checks.push_back({"as_ms_gap", ok ? Status::pass : Status::fail, detail});
    }
  }

  // divergence prediction when the homogeneous iff fails with k outside.
  {
    const bool applicable = ar.linear_certs.has_value() && !noise.symmetric_channels &&
                            ar.ms_rate_interval.second < -0.1;
    if (!enabled(cfg.verify.divergence, applicable)) {
      skip("ms_divergence", "needs a strictly negative-definite Psi_K");
    } else if (!applicable) {
      out.checks.push_back({"ms_divergence", Status::fail,
                            "forced on but Psi_K is not negative definite"});
    } else {
      const RateFit fit = fit_ms_decay_rate(e, horizon * 0.5, horizon);
      const bool ok = fit.rate < -0.1;
      out.checks.push_back(
          {"ms_divergence", ok ? Status::pass : Status::fail,
           "trailing ms decay rate " + fmt(fit.rate) + " +- " + fmt(fit.se) +
               " (predicted growth >= " + fmt(-ar.ms_rate_interval.second) + ")"});
    }
  }

  // unbiasedness of the consensus value under an m.s. certificate.
  {
    const bool applicable = ar.verdicts.ms_sufficient;
    if (!enabled(cfg.verify.unbiasedness, applicable)) {
      skip("unbiasedness", "needs an m.s. consensus certificate");
    } else {
      const auto [mean, se] = e.consensus_mean_se();
      std::vector<double> target(gain.n, 0.0);
      for (int a = 0; a < g.n_agents; ++a)
        for (int c = 0; c < gain.n; ++c) target[c] += cfg.x0[a * gain.n + c] / g.n_agents;
      bool ok = true;
      std::string detail;
      for (int c = 0; c < gain.n; ++c) {
        const double dev = std::abs(mean[c] - target[c]);
        if (dev > 3.0 * se[c] + 1e-9) ok = false;
        detail += (c ? "; " : "") + std::string("component ") + std::to_string(c + 1) +
                  ": mean " + fmt(mean[c]) + " target " + fmt(target[c]) + " se " +
                  fmt(se[c]);
      }
      out.checks.push_back({"unbiasedness", ok ? Status::pass : Status::fail, detail});
    }
  }

  // iterated-logarithm envelope (homogeneous symmetric case).
  {
    const bool applicable = noise.kind == NoiseKind::homogeneous &&
                            noise.symmetric_channels && gain.scalar_k.has_value() &&
                            ar.connected && horizon > 12.0 && noise.sigma > 0.0;
    if (!enabled(cfg.verify.lil, applicable)) {
      skip("lil_envelope",
           "needs homogeneous symmetric noise, K = kI, and horizon > 12");
    } else if (!applicable) {
      out.checks.push_back({"lil_envelope", Status::fail,
                            "forced on but assumptions do not hold"});
    } else {
      SimConfig sub = cfg.sim_config();
      sub.trials = std::min(cfg.trials, 100);
      sub.keep_trajectories = true;
      const Ensemble small = run_ensemble(sub);
      const LaplacianSpectrum sp = spectrum(g);
      const double k = *gain.scalar_k;
      const double envelope = std::abs(k) * noise.sigma * sp.lambdaN() + 1.0;
      long total = 0, exceed = 0;
      for (const Trajectory& tr : small.trajectories) {
        for (const auto& [t, v] : lil_normalized_curve(tr, k, noise.sigma, sp)) {
          if (t < 10.0 || t > 100.0) continue;
          ++total;
          if (v > envelope) ++exceed;
        }
      }
      const double frac = total > 0 ? static_cast<double>(exceed) / total : 0.0;
      const bool ok = total > 0 && frac < 0.05;
      out.checks.push_back({"lil_envelope", ok ? Status::pass : Status::fail,
                            fmt(100.0 * frac) + "% of " + std::to_string(total) +
                                " samples in t in [10,100] exceed " + fmt(envelope) +
                                " (" + std::to_string(sub.trials) + " trials)"});
    }
  }

  return out;
}

}  // namespace consensuslab

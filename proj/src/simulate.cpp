#include "consensuslab/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <limits>
#include <map>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>

namespace consensuslab {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
constexpr double kDivergenceSq = 1e300;  // ||state|| guard at 1e150

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

struct ChannelPlan {
  int brownian_id;
  NoiseKind kind;
  double sigma;              // scalar kinds
  Matrix sigma_mat;          // linear_matrix
  const IntensityFn* fn;     // general
  std::vector<double> p;     // phi row of the observer (N-1)
  std::vector<double> r;     // phi row(source) - phi row(observer)
};

struct Plan {
  int n = 1;        // state dim
  int nm = 0;       // N-1 modes
  int n_agents = 1;
  int brownian_count = 0;
  std::vector<double> lambdas;  // nm
  Matrix K;
  bool scalar_gain = false;
  double k = 0.0;
  std::vector<ChannelPlan> channels;
  LaplacianSpectrum spec;

  int total_steps = 0;
  int stride = 1;
  double dt = 0.0;
};

Plan make_plan(const SimConfig& cfg) {
  if (cfg.dt <= 0.0) throw std::invalid_argument("sim: dt must be > 0");
  if (cfg.horizon < cfg.dt) throw std::invalid_argument("sim: horizon must be >= dt");
  if (cfg.trials < 1) throw std::invalid_argument("sim: trials must be >= 1");
  if (static_cast<int>(cfg.x0.size()) != cfg.graph.n_agents * cfg.gain.n)
    throw std::invalid_argument("sim: x0 must have N*n entries, got " +
                                std::to_string(cfg.x0.size()));
  if (cfg.noise.state_dim != cfg.gain.n)
    throw std::invalid_argument("sim: noise state_dim and gain dimension disagree");

  Plan plan;
  plan.n = cfg.gain.n;
  plan.n_agents = cfg.graph.n_agents;
  plan.nm = cfg.graph.n_agents - 1;
  plan.K = cfg.gain.K;
  plan.scalar_gain = cfg.gain.scalar_k.has_value();
  plan.k = cfg.gain.scalar_k.value_or(0.0);
  plan.spec = spectrum(cfg.graph);
  if (plan.nm > 0)
    plan.lambdas.assign(plan.spec.eigenvalues.begin() + 1, plan.spec.eigenvalues.end());

  const ChannelSet set = build_channels(cfg.graph, cfg.noise);
  plan.brownian_count = set.brownian_count;
  for (const Channel& c : set.channels) {
    ChannelPlan cp;
    cp.brownian_id = c.brownian_id;
    cp.kind = cfg.noise.kind;
    cp.sigma = 0.0;
    cp.fn = nullptr;
    switch (cfg.noise.kind) {
      case NoiseKind::homogeneous:
        cp.sigma = cfg.noise.sigma;
        break;
      case NoiseKind::linear_scalar:
        cp.sigma = cfg.noise.scalar_coefficient(c.source, c.observer);
        break;
      case NoiseKind::linear_matrix:
        cp.sigma_mat = cfg.noise.matrix_coefficient(c.source, c.observer);
        break;
      case NoiseKind::general:
        cp.fn = &cfg.noise.intensity.at({c.source, c.observer});
        break;
    }
    cp.p.resize(plan.nm);
    cp.r.resize(plan.nm);
    for (int m = 0; m < plan.nm; ++m) {
      cp.p[m] = plan.spec.phi(c.observer - 1, m);
      cp.r[m] = plan.spec.phi(c.source - 1, m) - plan.spec.phi(c.observer - 1, m);
    }
    plan.channels.push_back(std::move(cp));
  }

  plan.dt = cfg.dt;
  plan.total_steps = static_cast<int>(std::llround(cfg.horizon / cfg.dt));
  if (plan.total_steps < 1) plan.total_steps = 1;
  plan.stride = cfg.sample_stride > 0
                    ? cfg.sample_stride
                    : std::max(1, (plan.total_steps + 9999) / 10000);
  return plan;
}

/// One Euler-Maruyama path in the (xbar, dbar) frame; `draw` fills per-step
/// Brownian increments (one per brownian id).
template <typename DrawFn>
Trajectory integrate(const SimConfig& cfg, const Plan& plan, DrawFn&& draw) {
  const int n = plan.n;
  const int nm = plan.nm;
  const int dim = nm * n;

  std::vector<double> dbar = reduced_initial(plan.spec, n, cfg.x0);
  if (nm == 0) dbar.clear();
  std::vector<double> xbar(n, 0.0);
  for (int a = 0; a < plan.n_agents; ++a)
    for (int c = 0; c < n; ++c) xbar[c] += cfg.x0[a * n + c] / plan.n_agents;

  std::vector<double> next(dim), diff(n), intensity_out(n), u(n);
  std::vector<double> dw(plan.brownian_count);
  std::vector<double> w_cum(plan.brownian_count, 0.0);

  Trajectory tr;
  const int approx_samples = plan.total_steps / plan.stride + 2;
  tr.times.reserve(approx_samples);
  tr.delta_norms.reserve(approx_samples);
  tr.log_delta_sq.reserve(approx_samples);
  tr.qv_log_delta_sq.reserve(approx_samples);
  tr.consensus.reserve(approx_samples);

  double qv = 0.0;
  double sq = 0.0;
  for (double v : dbar) sq += v * v;
  double prev_log = sq > 0.0 ? std::log(sq) : kNan;

  auto record = [&](int step) {
    tr.times.push_back(step * plan.dt);
    tr.delta_norms.push_back(std::sqrt(sq));
    tr.log_delta_sq.push_back(sq > 0.0 ? std::log(sq) : kNan);
    tr.qv_log_delta_sq.push_back(qv);
    tr.consensus.push_back(xbar);
    if (cfg.store_states)
      tr.states.push_back(reconstruct_state(plan.spec, n, xbar, dbar));
    if (cfg.store_brownian) tr.brownian.push_back(w_cum);
  };

  record(0);

  for (int step = 1; step <= plan.total_steps; ++step) {
    draw(dw);
    for (int b = 0; b < plan.brownian_count; ++b) w_cum[b] += dw[b];

    // drift: dbar -= dt * (Lambda0 (x) K) dbar
    for (int m = 0; m < nm; ++m) {
      const double lam_dt = plan.lambdas[m] * plan.dt;
      const double* src = dbar.data() + m * n;
      double* dst = next.data() + m * n;
      if (plan.scalar_gain) {
        const double f = plan.k * lam_dt;
        for (int c = 0; c < n; ++c) dst[c] = src[c] - f * src[c];
      } else {
        for (int c = 0; c < n; ++c) {
          double kv = 0.0;
          for (int cc = 0; cc < n; ++cc) kv += plan.K(c, cc) * src[cc];
          dst[c] = src[c] - lam_dt * kv;
        }
      }
    }

    for (const ChannelPlan& cp : plan.channels) {
      // diff = delta_source - delta_observer = ((phi_j - phi_i) (x) I) dbar
      for (int c = 0; c < n; ++c) diff[c] = 0.0;
      for (int m = 0; m < nm; ++m) {
        const double rm = cp.r[m];
        if (rm == 0.0) continue;
        const double* src = dbar.data() + m * n;
        for (int c = 0; c < n; ++c) diff[c] += rm * src[c];
      }
      switch (cp.kind) {
        case NoiseKind::homogeneous:
        case NoiseKind::linear_scalar:
          for (int c = 0; c < n; ++c) intensity_out[c] = cp.sigma * diff[c];
          break;
        case NoiseKind::linear_matrix:
          for (int c = 0; c < n; ++c) {
            double s = 0.0;
            for (int cc = 0; cc < n; ++cc) s += cp.sigma_mat(c, cc) * diff[cc];
            intensity_out[c] = s;
          }
          break;
        case NoiseKind::general: {
          const std::vector<double> f = (*cp.fn)(diff);
          for (int c = 0; c < n; ++c) intensity_out[c] = f[c];
          break;
        }
      }
      if (plan.scalar_gain) {
        for (int c = 0; c < n; ++c) u[c] = plan.k * intensity_out[c];
      } else {
        for (int c = 0; c < n; ++c) {
          double s = 0.0;
          for (int cc = 0; cc < n; ++cc) s += plan.K(c, cc) * intensity_out[cc];
          u[c] = s;
        }
      }
      const double s = dw[cp.brownian_id];
      for (int m = 0; m < nm; ++m) {
        const double coeff = s * cp.p[m];
        if (coeff == 0.0) continue;
        double* dst = next.data() + m * n;
        for (int c = 0; c < n; ++c) dst[c] += coeff * u[c];
      }
      const double sc = s / plan.n_agents;
      for (int c = 0; c < n; ++c) xbar[c] += sc * u[c];
    }

    dbar.swap(next);

    sq = 0.0;
    for (double v : dbar) sq += v * v;
    double xb_sq = 0.0;
    for (double v : xbar) xb_sq += v * v;
    if (!std::isfinite(sq) || sq > kDivergenceSq || !std::isfinite(xb_sq) ||
        xb_sq > kDivergenceSq) {
      tr.diverged = true;
      tr.truncated_time = step * plan.dt;
      break;
    }

    if (sq > 0.0 && std::isfinite(prev_log)) {
      const double lg = std::log(sq);
      const double dl = lg - prev_log;
      qv += dl * dl;
      prev_log = lg;
    } else {
      prev_log = sq > 0.0 ? std::log(sq) : kNan;
    }

    if (step % plan.stride == 0 || step == plan.total_steps) record(step);
  }

  tr.brownian_terminal = w_cum;
  return tr;
}

int thread_budget() {
  if (const char* env = std::getenv("CONSENSUSLAB_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

}  // namespace

std::uint64_t trial_seed(std::uint64_t seed, int trial_index) {
  return splitmix64(seed ^ splitmix64(0x51ab5e77ull + static_cast<std::uint64_t>(trial_index)));
}

Trajectory simulate_trajectory(const SimConfig& cfg, int trial_index) {
  const Plan plan = make_plan(cfg);
  std::mt19937_64 rng(trial_seed(cfg.seed, trial_index));
  std::normal_distribution<double> nd;
  const double sdt = std::sqrt(cfg.dt);
  return integrate(cfg, plan, [&](std::vector<double>& dw) {
    for (double& v : dw) v = sdt * nd(rng);
  });
}

std::vector<double> FinePath::terminal() const {
  std::vector<double> w(increments.size(), 0.0);
  for (std::size_t b = 0; b < increments.size(); ++b)
    for (double v : increments[b]) w[b] += v;
  return w;
}

FinePath sample_fine_path(const SimConfig& cfg, int trial_index, double dt_fine) {
  const ChannelSet set = build_channels(cfg.graph, cfg.noise);
  const int steps = static_cast<int>(std::llround(cfg.horizon / dt_fine));
  FinePath path;
  path.dt = dt_fine;
  path.increments.assign(set.brownian_count, std::vector<double>(steps));
  std::mt19937_64 rng(trial_seed(cfg.seed, trial_index));
  std::normal_distribution<double> nd;
  const double sdt = std::sqrt(dt_fine);
  // step-major to match the live integrator's draw order
  for (int s = 0; s < steps; ++s)
    for (int b = 0; b < set.brownian_count; ++b) path.increments[b][s] = sdt * nd(rng);
  return path;
}

Trajectory simulate_with_path(const SimConfig& cfg, const FinePath& path, double dt_coarse) {
  const int agg = static_cast<int>(std::llround(dt_coarse / path.dt));
  if (agg < 1 || std::abs(agg * path.dt - dt_coarse) > 1e-12 * dt_coarse)
    throw std::invalid_argument("simulate_with_path: dt_coarse must be a multiple of path.dt");
  SimConfig coarse = cfg;
  coarse.dt = dt_coarse;
  const Plan plan = make_plan(coarse);
  int fine_pos = 0;
  return integrate(coarse, plan, [&](std::vector<double>& dw) {
    for (std::size_t b = 0; b < dw.size(); ++b) {
      double s = 0.0;
      for (int a = 0; a < agg; ++a) s += path.increments[b][fine_pos + a];
      dw[b] = s;
    }
    fine_pos += agg;
  });
}

namespace {

struct TrialOut {
  Trajectory tr;
  double slope = kNan;
  double terminal_err_sq = kNan;
  std::vector<double> terminal_consensus;
};

TrialOut run_trial(const SimConfig& cfg, const Plan& plan, int trial) {
  std::mt19937_64 rng(trial_seed(cfg.seed, trial));
  std::normal_distribution<double> nd;
  const double sdt = std::sqrt(cfg.dt);
  TrialOut out;
  out.tr = integrate(cfg, plan, [&](std::vector<double>& dw) {
    for (double& v : dw) v = sdt * nd(rng);
  });

  if (!out.tr.diverged && out.tr.delta_norms[0] > 0.0) {
    try {
      out.slope = as_rate_estimate(out.tr, cfg.slope_window).slope;
    } catch (const std::exception&) {
      out.slope = kNan;
    }
  }
  out.terminal_consensus = out.tr.consensus.back();
  double err = 0.0;
  for (int c = 0; c < plan.n; ++c) {
    const double d = out.tr.consensus.back()[c] - out.tr.consensus.front()[c];
    err += d * d;
  }
  out.terminal_err_sq = err;
  return out;
}

}  // namespace

Ensemble run_ensemble(const SimConfig& cfg) {
  const Plan plan = make_plan(cfg);
  const int trials = cfg.trials;
  const int batches = std::max(1, std::min(cfg.batches, trials));

  // reference time grid from an untruncated run
  std::vector<double> times;
  {
    const int steps = plan.total_steps;
    for (int s = 0; s <= steps; ++s)
      if (s == 0 || s % plan.stride == 0 || s == steps) times.push_back(s * plan.dt);
  }
  const int nsamp = static_cast<int>(times.size());
  const int n = plan.n;

  Ensemble e;
  e.times = times;
  e.trials = trials;
  e.state_dim = n;
  e.seed = cfg.seed;
  e.batches = batches;
  e.sample_count.assign(nsamp, 0);
  e.ms_mean.assign(nsamp, 0.0);
  e.ms_se.assign(nsamp, 0.0);
  e.logsq_mean.assign(nsamp, 0.0);
  e.qv_mean.assign(nsamp, 0.0);
  e.consensus_mean.assign(nsamp, std::vector<double>(n, 0.0));
  e.batch_logsq.assign(batches, std::vector<double>(nsamp, 0.0));
  e.batch_qv.assign(batches, std::vector<double>(nsamp, 0.0));
  e.batch_size.assign(batches, 0);
  e.slopes.assign(trials, kNan);
  e.terminal_err_sq.assign(trials, kNan);
  e.terminal_consensus.assign(trials, std::vector<double>(n, 0.0));
  e.diverged.assign(trials, 0);

  std::vector<double> sq_sum(nsamp, 0.0), sq_sum2(nsamp, 0.0);
  std::vector<int> logsq_count(nsamp, 0);
  std::vector<std::vector<int>> batch_count(batches, std::vector<int>(nsamp, 0));

  auto reduce_one = [&](int t, TrialOut&& out) {
    const int b = static_cast<int>(static_cast<long long>(t) * batches / trials);
    e.batch_size[b] += 1;
    const Trajectory& tr = out.tr;
    const int avail = tr.samples();
    for (int s = 0; s < avail; ++s) {
      const double nrm = tr.delta_norms[s];
      const double sq = nrm * nrm;
      e.sample_count[s] += 1;
      sq_sum[s] += sq;
      sq_sum2[s] += sq * sq;
      for (int c = 0; c < n; ++c) e.consensus_mean[s][c] += tr.consensus[s][c];
      if (std::isfinite(tr.log_delta_sq[s])) {
        e.logsq_mean[s] += tr.log_delta_sq[s];
        logsq_count[s] += 1;
        e.batch_logsq[b][s] += tr.log_delta_sq[s];
        e.batch_qv[b][s] += tr.qv_log_delta_sq[s];
        batch_count[b][s] += 1;
      }
      e.qv_mean[s] += tr.qv_log_delta_sq[s];
    }
    e.slopes[t] = out.slope;
    e.terminal_err_sq[t] = out.terminal_err_sq;
    e.terminal_consensus[t] = std::move(out.terminal_consensus);
    if (tr.diverged) {
      e.diverged[t] = 1;
      e.diverged_count += 1;
    }
    if (cfg.keep_trajectories) e.trajectories.push_back(std::move(out.tr));
  };

  const int nthreads = std::min(thread_budget(), trials);
  if (nthreads <= 1) {
    for (int t = 0; t < trials; ++t) reduce_one(t, run_trial(cfg, plan, t));
  } else {
    std::mutex mtx;
    std::condition_variable cv_ready, cv_space;
    std::map<int, TrialOut> ready;
    int next_claim = 0;
    int next_reduce = 0;
    const std::size_t capacity = static_cast<std::size_t>(2 * nthreads + 2);

    auto worker = [&]() {
      for (;;) {
        int t;
        {
          std::lock_guard<std::mutex> lk(mtx);
          if (next_claim >= trials) return;
          t = next_claim++;
        }
        TrialOut out = run_trial(cfg, plan, t);
        std::unique_lock<std::mutex> lk(mtx);
        cv_space.wait(lk, [&] { return ready.size() < capacity || t == next_reduce; });
        ready.emplace(t, std::move(out));
        cv_ready.notify_all();
      }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < nthreads; ++w) pool.emplace_back(worker);
    {
      std::unique_lock<std::mutex> lk(mtx);
      while (next_reduce < trials) {
        cv_ready.wait(lk, [&] { return ready.count(next_reduce) > 0; });
        auto node = ready.extract(next_reduce);
        lk.unlock();
        reduce_one(next_reduce, std::move(node.mapped()));
        lk.lock();
        ++next_reduce;
        cv_space.notify_all();
      }
    }
    for (std::thread& th : pool) th.join();
  }

  for (int s = 0; s < nsamp; ++s) {
    const int c = e.sample_count[s];
    if (c > 0) {
      e.ms_mean[s] = sq_sum[s] / c;
      if (c > 1) {
        const double var = std::max(0.0, (sq_sum2[s] - sq_sum[s] * sq_sum[s] / c) / (c - 1));
        e.ms_se[s] = std::sqrt(var / c);
      }
      for (int cc = 0; cc < n; ++cc) e.consensus_mean[s][cc] /= c;
      e.qv_mean[s] /= c;
    } else {
      e.ms_mean[s] = kNan;
      e.ms_se[s] = kNan;
      e.qv_mean[s] = kNan;
    }
    e.logsq_mean[s] = logsq_count[s] > 0 ? e.logsq_mean[s] / logsq_count[s] : kNan;
    for (int b = 0; b < batches; ++b) {
      const int bc = batch_count[b][s];
      e.batch_logsq[b][s] = bc > 0 ? e.batch_logsq[b][s] / bc : kNan;
      e.batch_qv[b][s] = bc > 0 ? e.batch_qv[b][s] / bc : kNan;
    }
  }
  return e;
}

double Ensemble::ms_relative_se(int sample) const {
  const int n = sample_count[sample];
  if (n < 2 || !(ms_mean[sample] > 0.0)) return kNan;
  const double sample_rse = ms_se[sample] / ms_mean[sample];
  const double var_log = std::min(qv_mean[sample], 60.0);  // e^60 already saturates
  const double model_rse = std::sqrt((std::expm1(var_log)) / n);
  return std::max(sample_rse, model_rse);
}

std::pair<double, double> Ensemble::terminal_ms_error() const {
  double sum = 0.0, sum2 = 0.0;
  int c = 0;
  for (double v : terminal_err_sq) {
    if (!std::isfinite(v)) continue;
    sum += v;
    sum2 += v * v;
    ++c;
  }
  if (c == 0) return {kNan, kNan};
  const double mean = sum / c;
  const double var = c > 1 ? std::max(0.0, (sum2 - sum * sum / c) / (c - 1)) : 0.0;
  return {mean, std::sqrt(var / c)};
}

std::pair<std::vector<double>, std::vector<double>> Ensemble::consensus_mean_se() const {
  std::vector<double> mean(state_dim, 0.0), se(state_dim, 0.0);
  const int t = static_cast<int>(terminal_consensus.size());
  for (const auto& v : terminal_consensus)
    for (int c = 0; c < state_dim; ++c) mean[c] += v[c] / t;
  if (t > 1) {
    for (const auto& v : terminal_consensus)
      for (int c = 0; c < state_dim; ++c) {
        const double d = v[c] - mean[c];
        se[c] += d * d;
      }
    for (int c = 0; c < state_dim; ++c) se[c] = std::sqrt(se[c] / (t - 1) / t);
  }
  return {mean, se};
}

double Ensemble::median_slope() const {
  std::vector<double> v;
  for (double s : slopes)
    if (std::isfinite(s)) v.push_back(s);
  if (v.empty()) return kNan;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double Ensemble::fraction_slopes_negative() const {
  int neg = 0, tot = 0;
  for (double s : slopes) {
    if (!std::isfinite(s)) continue;
    ++tot;
    if (s < 0.0) ++neg;
  }
  return tot > 0 ? static_cast<double>(neg) / tot : kNan;
}

namespace {

std::pair<int, int> window_indices(const std::vector<double>& times, double t_lo,
                                   double t_hi) {
  int a = -1, b = -1;
  for (int s = 0; s < static_cast<int>(times.size()); ++s) {
    if (a < 0 && times[s] >= t_lo - 1e-12) a = s;
    if (times[s] <= t_hi + 1e-12) b = s;
  }
  if (a < 0 || b < 0 || b <= a)
    throw std::invalid_argument("rate fit: window [" + std::to_string(t_lo) + ", " +
                                std::to_string(t_hi) + "] has fewer than two samples");
  return {a, b};
}

}  // namespace

RateFit fit_ms_decay_rate(const Ensemble& e, double t_lo, double t_hi) {
  const auto [a, b] = window_indices(e.times, t_lo, t_hi);
  const double span = e.times[b] - e.times[a];
  RateFit fit;
  fit.rate = -((e.logsq_mean[b] - e.logsq_mean[a]) +
               0.5 * (e.qv_mean[b] - e.qv_mean[a])) /
             span;
  if (e.batches > 1) {
    std::vector<double> rates;
    for (int bb = 0; bb < e.batches; ++bb) {
      const double r = -((e.batch_logsq[bb][b] - e.batch_logsq[bb][a]) +
                         0.5 * (e.batch_qv[bb][b] - e.batch_qv[bb][a])) /
                       span;
      if (std::isfinite(r)) rates.push_back(r);
    }
    if (rates.size() > 1) {
      double mean = 0.0;
      for (double r : rates) mean += r / rates.size();
      double var = 0.0;
      for (double r : rates) var += (r - mean) * (r - mean);
      var /= (rates.size() - 1);
      fit.se = std::sqrt(var / rates.size());
    }
  }
  return fit;
}

RateFit fit_log_ms_slope(const Ensemble& e, double t_lo, double t_hi) {
  const auto [a, b] = window_indices(e.times, t_lo, t_hi);
  double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
  int cnt = 0;
  for (int s = a; s <= b; ++s) {
    if (!(e.ms_mean[s] > 0.0)) continue;
    const double t = e.times[s];
    const double y = std::log(e.ms_mean[s]);
    st += t;
    sy += y;
    stt += t * t;
    sty += t * y;
    ++cnt;
  }
  if (cnt < 2) throw std::invalid_argument("fit_log_ms_slope: fewer than two usable samples");
  RateFit fit;
  fit.rate = (cnt * sty - st * sy) / (cnt * stt - st * st);
  // crude dispersion from endpoint batches is not available for the plain
  // curve; report the OLS residual-based error instead
  double rss = 0.0;
  const double intercept = (sy - fit.rate * st) / cnt;
  for (int s = a; s <= b; ++s) {
    if (!(e.ms_mean[s] > 0.0)) continue;
    const double r = std::log(e.ms_mean[s]) - (intercept + fit.rate * e.times[s]);
    rss += r * r;
  }
  const double denom = stt - st * st / cnt;
  fit.se = cnt > 2 ? std::sqrt(rss / (cnt - 2) / denom) : 0.0;
  return fit;
}

SlopeEstimate as_rate_estimate(const Trajectory& tr, double window) {
  if (tr.times.empty()) throw std::invalid_argument("as_rate_estimate: empty trajectory");
  if (!(tr.delta_norms[0] > 0.0))
    throw std::invalid_argument("as_rate_estimate: delta(0) = 0, slope undefined");
  const double t_end = tr.times.back();
  const double t_start = t_end * (1.0 - window);
  double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
  SlopeEstimate out;
  for (int s = 0; s < tr.samples(); ++s) {
    if (tr.times[s] < t_start - 1e-12) continue;
    if (!(tr.delta_norms[s] > 0.0)) {
      ++out.excluded;
      continue;
    }
    const double t = tr.times[s];
    const double y = std::log(tr.delta_norms[s]);
    st += t;
    sy += y;
    stt += t * t;
    sty += t * y;
    ++out.used;
  }
  if (out.used < 2)
    throw std::invalid_argument("as_rate_estimate: fewer than two usable samples in window");
  out.slope = (out.used * sty - st * sy) / (out.used * stt - st * st);
  return out;
}

std::vector<std::pair<double, double>> lil_normalized_curve(const Trajectory& tr, double k,
                                                            double sigma,
                                                            const LaplacianSpectrum& spec) {
  const double rate = (k + 0.5 * k * k * sigma * sigma) * spec.lambda2();
  std::vector<std::pair<double, double>> out;
  const double e_const = std::exp(1.0);
  for (int s = 0; s < tr.samples(); ++s) {
    const double t = tr.times[s];
    if (t <= e_const) continue;
    if (!(tr.delta_norms[s] > 0.0)) continue;
    const double denom = std::sqrt(2.0 * t * std::log(std::log(t)));
    out.emplace_back(t, (std::log(tr.delta_norms[s]) + rate * t) / denom);
  }
  return out;
}

std::vector<std::vector<double>> closed_form_symmetric(
    const Graph& g, const LaplacianSpectrum& spec, const NoiseModel& noise,
    const GainMatrix& gain, const std::vector<double>& dbar0,
    const std::vector<double>& times, const std::vector<std::vector<double>>& w_at_times) {
  if (!noise.symmetric_channels)
    throw std::invalid_argument("closed_form_symmetric: requires symmetric channels");
  if (!noise.is_scalar_linear())
    throw std::invalid_argument("closed_form_symmetric: requires scalar linear noise");
  if (!gain.is_symmetric())
    throw std::invalid_argument("closed_form_symmetric: requires symmetric K");
  if (times.size() != w_at_times.size())
    throw std::invalid_argument("closed_form_symmetric: times and w series disagree");

  const ChannelSet set = build_channels(g, noise);
  const int dim = (g.n_agents - 1) * gain.n;
  std::vector<Matrix> g_edge(set.brownian_count, Matrix(dim, dim));
  for (const Channel& c : set.channels) {
    Matrix b_red(g.n_agents - 1, g.n_agents - 1);
    for (int p = 0; p < g.n_agents - 1; ++p)
      for (int q = 0; q < g.n_agents - 1; ++q)
        b_red(p, q) = spec.phi(c.observer - 1, p) *
                      (spec.phi(c.source - 1, q) - spec.phi(c.observer - 1, q));
    const double s = noise.scalar_coefficient(c.source, c.observer);
    g_edge[c.brownian_id] += kron(b_red, s * gain.K);
  }

  Matrix a = kron(spec.lambda0, gain.K);
  for (const Matrix& ge : g_edge) a += 0.5 * (ge * ge);
  a = symmetrize(a);

  std::vector<std::vector<double>> out;
  out.reserve(times.size());
  for (std::size_t idx = 0; idx < times.size(); ++idx) {
    if (static_cast<int>(w_at_times[idx].size()) != set.brownian_count)
      throw std::invalid_argument("closed_form_symmetric: w entry has wrong channel count");
    Matrix expo = (-times[idx]) * a;
    for (int b = 0; b < set.brownian_count; ++b) expo += w_at_times[idx][b] * g_edge[b];
    out.push_back(sym_expm(symmetrize(expo)) * dbar0);
  }
  return out;
}

std::vector<double> reduced_initial(const LaplacianSpectrum& spec, int state_dim,
                                    const std::vector<double>& x0) {
  const int n_agents = spec.full_transform.rows();
  const int nm = n_agents - 1;
  std::vector<double> dbar(static_cast<std::size_t>(nm) * state_dim, 0.0);
  for (int m = 0; m < nm; ++m)
    for (int a = 0; a < n_agents; ++a) {
      const double w = spec.phi(a, m);
      if (w == 0.0) continue;
      for (int c = 0; c < state_dim; ++c) dbar[m * state_dim + c] += w * x0[a * state_dim + c];
    }
  return dbar;
}

std::vector<double> reconstruct_state(const LaplacianSpectrum& spec, int state_dim,
                                      const std::vector<double>& xbar,
                                      const std::vector<double>& dbar) {
  const int n_agents = spec.full_transform.rows();
  const int nm = n_agents - 1;
  std::vector<double> x(static_cast<std::size_t>(n_agents) * state_dim, 0.0);
  for (int a = 0; a < n_agents; ++a)
    for (int c = 0; c < state_dim; ++c) {
      double v = xbar[c];
      for (int m = 0; m < nm; ++m) v += spec.phi(a, m) * dbar[m * state_dim + c];
      x[a * state_dim + c] = v;
    }
  return x;
}

}  // namespace consensuslab

#include "consensuslab/noise.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace consensuslab {

namespace {

std::string key_name(const ChannelKey& k) {
  return "(" + std::to_string(k.source) + "," + std::to_string(k.observer) + ")";
}

}  // namespace

NoiseModel NoiseModel::homogeneous(double sigma, bool symmetric, int state_dim) {
  if (sigma < 0.0) throw std::invalid_argument("homogeneous noise: sigma must be >= 0");
  NoiseModel m;
  m.kind = NoiseKind::homogeneous;
  m.sigma = sigma;
  m.symmetric_channels = symmetric;
  m.state_dim = state_dim;
  return m;
}

NoiseModel NoiseModel::linear_scalar(std::map<ChannelKey, double> values, bool symmetric,
                                     int state_dim) {
  NoiseModel m;
  m.kind = NoiseKind::linear_scalar;
  for (const auto& [key, sigma] : values)
    if (sigma <= 0.0)
      throw std::invalid_argument("linear_scalar noise: sigma" + key_name(key) +
                                  " must be > 0");
  m.sigma_scalar = std::move(values);
  m.symmetric_channels = symmetric;
  m.state_dim = state_dim;
  return m;
}

NoiseModel NoiseModel::linear_matrix(std::map<ChannelKey, Matrix> values, bool symmetric) {
  if (values.empty()) throw std::invalid_argument("linear_matrix noise: no channels");
  NoiseModel m;
  m.kind = NoiseKind::linear_matrix;
  m.state_dim = values.begin()->second.rows();
  for (const auto& [key, mat] : values)
    if (mat.rows() != m.state_dim || mat.cols() != m.state_dim)
      throw std::invalid_argument("linear_matrix noise: Sigma" + key_name(key) +
                                  " has inconsistent dimensions");
  m.sigma_matrix = std::move(values);
  m.symmetric_channels = symmetric;
  return m;
}

NoiseModel NoiseModel::general(std::map<ChannelKey, IntensityFn> fns, double sigma_bar,
                               bool symmetric, int state_dim) {
  if (sigma_bar < 0.0) throw std::invalid_argument("general noise: sigma_bar must be >= 0");
  NoiseModel m;
  m.kind = NoiseKind::general;
  m.intensity = std::move(fns);
  m.declared_sigma_bar = sigma_bar;
  m.symmetric_channels = symmetric;
  m.state_dim = state_dim;
  return m;
}

double NoiseModel::scalar_coefficient(int source, int observer) const {
  if (kind == NoiseKind::homogeneous) return sigma;
  if (kind == NoiseKind::linear_scalar) {
    const auto it = sigma_scalar.find({source, observer});
    if (it == sigma_scalar.end())
      throw std::invalid_argument("noise: no sigma for channel " +
                                  key_name({source, observer}));
    return it->second;
  }
  throw std::invalid_argument("noise: scalar coefficient requested from a non-scalar kind");
}

Matrix NoiseModel::matrix_coefficient(int source, int observer) const {
  switch (kind) {
    case NoiseKind::homogeneous:
      return sigma * Matrix::identity(state_dim);
    case NoiseKind::linear_scalar:
      return scalar_coefficient(source, observer) * Matrix::identity(state_dim);
    case NoiseKind::linear_matrix: {
      const auto it = sigma_matrix.find({source, observer});
      if (it == sigma_matrix.end())
        throw std::invalid_argument("noise: no Sigma for channel " +
                                    key_name({source, observer}));
      return it->second;
    }
    case NoiseKind::general:
      break;
  }
  throw std::invalid_argument("noise: matrix coefficient requested from general kind");
}

std::vector<double> evaluate_intensity(const NoiseModel& m, int i, int j,
                                       const std::vector<double>& x) {
  if (static_cast<int>(x.size()) != m.state_dim)
    throw std::invalid_argument("evaluate_intensity: x has wrong dimension");
  switch (m.kind) {
    case NoiseKind::homogeneous: {
      std::vector<double> r(x);
      for (double& v : r) v *= m.sigma;
      return r;
    }
    case NoiseKind::linear_scalar: {
      const double s = m.scalar_coefficient(j, i);
      std::vector<double> r(x);
      for (double& v : r) v *= s;
      return r;
    }
    case NoiseKind::linear_matrix:
      return m.matrix_coefficient(j, i) * x;
    case NoiseKind::general: {
      const auto it = m.intensity.find({j, i});
      if (it == m.intensity.end())
        throw std::invalid_argument("evaluate_intensity: no intensity for channel " +
                                    key_name({j, i}));
      return it->second(x);
    }
  }
  throw std::logic_error("evaluate_intensity: unreachable");
}

double growth_bound(const NoiseModel& m) {
  switch (m.kind) {
    case NoiseKind::homogeneous:
      return m.sigma;
    case NoiseKind::linear_scalar: {
      double r = 0.0;
      for (const auto& [key, s] : m.sigma_scalar) r = std::max(r, s);
      return r;
    }
    case NoiseKind::linear_matrix: {
      double r = 0.0;
      for (const auto& [key, mat] : m.sigma_matrix) r = std::max(r, spectral_norm(mat));
      return r;
    }
    case NoiseKind::general:
      return m.declared_sigma_bar;
  }
  throw std::logic_error("growth_bound: unreachable");
}

ChannelSet build_channels(const Graph& g, const NoiseModel& m) {
  const int n = g.n_agents;

  auto has_model = [&](int source, int observer) {
    const ChannelKey key{source, observer};
    switch (m.kind) {
      case NoiseKind::homogeneous:
        return true;
      case NoiseKind::linear_scalar:
        return m.sigma_scalar.count(key) > 0;
      case NoiseKind::linear_matrix:
        return m.sigma_matrix.count(key) > 0;
      case NoiseKind::general:
        return m.intensity.count(key) > 0;
    }
    return false;
  };

  ChannelSet set;
  std::map<std::pair<int, int>, int> edge_brownian;  // unordered edge -> id
  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= n; ++j) {
      if (i == j || g.adjacency(i - 1, j - 1) == 0.0) continue;
      if (!has_model(j, i))
        throw std::invalid_argument("build_channels: noise model missing channel " +
                                    key_name({j, i}));
      int id;
      if (m.symmetric_channels) {
        const auto edge = std::minmax(i, j);
        auto [it, inserted] =
            edge_brownian.try_emplace({edge.first, edge.second}, set.brownian_count);
        if (inserted) ++set.brownian_count;
        id = it->second;
      } else {
        id = set.brownian_count++;
      }
      set.channels.push_back({i, j, id});
    }
  }

  if (m.symmetric_channels && m.kind != NoiseKind::general) {
    for (const Channel& c : set.channels) {
      const Matrix fwd = m.matrix_coefficient(c.source, c.observer);
      const Matrix rev = m.matrix_coefficient(c.observer, c.source);
      if (max_abs_diff(fwd, rev) > 0.0)
        throw std::invalid_argument(
            "build_channels: symmetric wiring requires sigma_ji == sigma_ij, violated at " +
            key_name({c.source, c.observer}));
    }
  }
  return set;
}

double check_growth_bound(const Graph& g, const NoiseModel& m, int samples_per_edge,
                          std::uint64_t seed) {
  const double bound = growth_bound(m);
  const ChannelSet set = build_channels(g, m);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  double worst = 0.0;
  for (const Channel& c : set.channels) {
    for (int s = 0; s < samples_per_edge; ++s) {
      std::vector<double> x(m.state_dim);
      double nx = 0.0;
      for (double& v : x) {
        v = nd(rng);
        nx += v * v;
      }
      nx = std::sqrt(nx);
      if (nx == 0.0) continue;
      const std::vector<double> f = evaluate_intensity(m, c.observer, c.source, x);
      double nf = 0.0;
      for (double v : f) nf += v * v;
      nf = std::sqrt(nf);
      worst = std::max(worst, nf / nx);
      if (nf > bound * nx + 1e-12)
        throw std::runtime_error("noise growth bound violated: ||f(x)|| = " +
                                 std::to_string(nf) + " > " + std::to_string(bound) +
                                 " * ||x||");
    }
  }
  return worst;
}

}  // namespace consensuslab

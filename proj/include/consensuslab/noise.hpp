#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "consensuslab/graph.hpp"
#include "consensuslab/matrix.hpp"

namespace consensuslab {

enum class NoiseKind { general, linear_matrix, linear_scalar, homogeneous };

/// Key for an ordered measurement channel: agent `observer` measures agent
/// `source`. Subscript order follows f_{ji} = "intensity of agent i's
/// measurement of agent j", so the key is (source, observer).
struct ChannelKey {
  int source;    // j, 1-based
  int observer;  // i, 1-based
  auto operator<=>(const ChannelKey&) const = default;
};

using IntensityFn = std::function<std::vector<double>(const std::vector<double>&)>;

/// Measurement-noise intensity model. Immutable after construction.
struct NoiseModel {
  NoiseKind kind = NoiseKind::homogeneous;
  bool symmetric_channels = false;  // w_ji == w_ij wiring
  int state_dim = 1;

  double sigma = 0.0;                            // homogeneous (sigma >= 0; 0 = noise-free)
  std::map<ChannelKey, double> sigma_scalar;     // linear_scalar, sigma_ji > 0
  std::map<ChannelKey, Matrix> sigma_matrix;     // linear_matrix
  std::map<ChannelKey, IntensityFn> intensity;   // general
  double declared_sigma_bar = 0.0;               // general

  static NoiseModel homogeneous(double sigma, bool symmetric = false, int state_dim = 1);
  static NoiseModel linear_scalar(std::map<ChannelKey, double> values,
                                  bool symmetric = false, int state_dim = 1);
  static NoiseModel linear_matrix(std::map<ChannelKey, Matrix> values,
                                  bool symmetric = false);
  static NoiseModel general(std::map<ChannelKey, IntensityFn> fns, double sigma_bar,
                            bool symmetric = false, int state_dim = 1);

  bool is_linear() const { return kind != NoiseKind::general; }
  bool is_scalar_linear() const {
    return kind == NoiseKind::linear_scalar || kind == NoiseKind::homogeneous;
  }

  /// sigma_ji as a scalar (homogeneous / linear_scalar kinds only).
  double scalar_coefficient(int source, int observer) const;
  /// Sigma_ji as an n x n matrix (any linear kind).
  Matrix matrix_coefficient(int source, int observer) const;
};

/// f_{ji}(x): the intensity of agent i's measurement of agent j. Rejects
/// channels absent from per-edge models.
std::vector<double> evaluate_intensity(const NoiseModel& m, int i, int j,
                                       const std::vector<double>& x);

/// Certified linear growth rate sigma_bar: homogeneous -> sigma,
/// linear_scalar -> max sigma_ji, linear_matrix -> max spectral norm,
/// general -> declared bound.
double growth_bound(const NoiseModel& m);

struct Channel {
  int observer;     // i: the agent that is driven by this channel's noise
  int source;       // j: the measured neighbour
  int brownian_id;  // shared between (i,j) and (j,i) under symmetric wiring
};

struct ChannelSet {
  std::vector<Channel> channels;  // one per ordered pair with a_ij = 1
  int brownian_count = 0;
};

/// Wires one channel per ordered adjacency pair. Under symmetric wiring the
/// two directions of an edge share one Brownian motion and the per-edge
/// coefficients must match; mismatches are rejected. Per-edge models must
/// cover every ordered edge of the graph.
ChannelSet build_channels(const Graph& g, const NoiseModel& m);

/// Spot-check ||f_ji(x)|| <= growth_bound * ||x|| + slack on random inputs.
/// Returns the worst observed ratio ||f(x)||/||x||.
double check_growth_bound(const Graph& g, const NoiseModel& m, int samples_per_edge,
                          std::uint64_t seed);

}  // namespace consensuslab

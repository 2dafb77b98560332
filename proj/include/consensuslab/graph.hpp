#pragma once

#include <iosfwd>
#include <utility>
#include <vector>

#include "consensuslab/matrix.hpp"

namespace consensuslab {

/// Undirected 0-1 topology. Agents are 1-based in the public API, matching
/// the on-disk edge-list format.
struct Graph {
  int n_agents = 0;
  Matrix adjacency;           // N x N, symmetric, zero diagonal
  std::vector<int> degrees;   // deg_i = sum_j a_ij

  bool has_edge(int i, int j) const {  // 1-based
    return adjacency(i - 1, j - 1) != 0.0;
  }
};

/// Duplicate edges collapse; self-loops and out-of-range indices are rejected.
Graph build_graph(int n_agents, const std::vector<std::pair<int, int>>& edges);

/// L = D - A
Matrix laplacian(const Graph& g);

struct LaplacianSpectrum {
  std::vector<double> eigenvalues;  // ascending, eigenvalues[0] snapped to 0
  Matrix phi;                       // N x (N-1), unit eigenvectors of lambda_2..lambda_N
  Matrix lambda0;                   // diag(lambda_2..lambda_N)
  Matrix full_transform;            // N x N orthonormal, first column 1/sqrt(N)

  double lambda2() const { return eigenvalues.size() > 1 ? eigenvalues[1] : 0.0; }
  double lambdaN() const { return eigenvalues.back(); }
};

/// Eigen-structure of the Laplacian. The eigenbasis phi is unique only up to
/// orthonormal re-basis within eigenspaces; consumers must rely only on
/// basis-invariant quantities.
LaplacianSpectrum spectrum(const Graph& g);

/// B_ij with b_ii = -a_ij, b_ij = a_ij and zeros elsewhere (1-based i != j).
Matrix channel_matrix(const Graph& g, int i, int j);

/// lambda_2 > tol, cross-checked against BFS reachability; BFS wins on
/// disagreement.
bool is_connected(const Graph& g, double tol = 1e-9);

constexpr int kInfiniteDiameter = -1;

struct GraphMetrics {
  int max_degree = 0;
  int diameter = kInfiniteDiameter;  // kInfiniteDiameter when disconnected
  bool connected = false;
  double synchronizability = 0.0;    // lambda_2 / lambda_N, 0 when disconnected
};

GraphMetrics graph_metrics(const Graph& g);

/// Plain-text format: first line N, then one "i j" pair per line (1-based);
/// '#' starts a comment.
Graph parse_graph_file(std::istream& in);
Graph parse_graph_text(const std::string& text);

// canonical matrices from the notation section
std::vector<double> ones_vector(int n);
Matrix centering_matrix(int n);               // J_N = (1/N) 1 1^T
std::vector<double> unit_vector(int n, int i);  // eta_{N,i}, 1-based i

}  // namespace consensuslab

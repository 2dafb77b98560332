#include "consensuslab/graph.hpp"

#include <cmath>
#include <deque>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace consensuslab {

Graph build_graph(int n_agents, const std::vector<std::pair<int, int>>& edges) {
  if (n_agents < 1) throw std::invalid_argument("build_graph: need at least one agent");
  Graph g;
  g.n_agents = n_agents;
  g.adjacency = Matrix(n_agents, n_agents);
  for (const auto& [i, j] : edges) {
    if (i < 1 || i > n_agents || j < 1 || j > n_agents)
      throw std::invalid_argument("build_graph: edge (" + std::to_string(i) + "," +
                                  std::to_string(j) + ") out of range 1.." +
                                  std::to_string(n_agents));
    if (i == j)
      throw std::invalid_argument("build_graph: self-loop at agent " + std::to_string(i));
    g.adjacency(i - 1, j - 1) = 1.0;
    g.adjacency(j - 1, i - 1) = 1.0;
  }
  g.degrees.assign(n_agents, 0);
  for (int i = 0; i < n_agents; ++i) {
    int d = 0;
    for (int j = 0; j < n_agents; ++j) d += static_cast<int>(g.adjacency(i, j));
    g.degrees[i] = d;
  }
  return g;
}

Matrix laplacian(const Graph& g) {
  const int n = g.n_agents;
  Matrix l(n, n);
  for (int i = 0; i < n; ++i) {
    l(i, i) = g.degrees[i];
    for (int j = 0; j < n; ++j)
      if (i != j) l(i, j) = -g.adjacency(i, j);
  }
  return l;
}

LaplacianSpectrum spectrum(const Graph& g) {
  const int n = g.n_agents;
  const SymEigen e = sym_eigen(laplacian(g));
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));

  // The structural zero eigenvector is 1/sqrt(N); pick the computed column
  // closest to it (the zero eigenspace is degenerate for disconnected
  // graphs), pin it exactly, and re-orthonormalize the rest against it.
  int pick = 0;
  double best = -1.0;
  for (int c = 0; c < n; ++c) {
    double overlap = 0.0;
    for (int i = 0; i < n; ++i) overlap += e.vectors(i, c) * inv_sqrt_n;
    if (std::abs(overlap) > best) {
      best = std::abs(overlap);
      pick = c;
    }
  }
  if (std::abs(e.values[pick]) > 1e-9 || std::abs(e.values[0]) > 1e-9)
    throw std::runtime_error("spectrum: smallest Laplacian eigenvalue " +
                             std::to_string(e.values[0]) +
                             " is not zero; eigensolver failure");

  LaplacianSpectrum s;
  s.eigenvalues.reserve(n);
  s.eigenvalues.push_back(0.0);  // structural zero
  for (int c = 0; c < n; ++c)
    if (c != pick) s.eigenvalues.push_back(e.values[c]);

  s.full_transform = Matrix(n, n);
  for (int i = 0; i < n; ++i) s.full_transform(i, 0) = inv_sqrt_n;

  s.phi = Matrix(n, n - 1);
  int col = 1;
  for (int c = 0; c < n; ++c) {
    if (c == pick) continue;
    std::vector<double> v = e.vectors.col(c);
    for (int p = 0; p < col; ++p) {
      double dot = 0.0;
      for (int i = 0; i < n; ++i) dot += v[i] * s.full_transform(i, p);
      for (int i = 0; i < n; ++i) v[i] -= dot * s.full_transform(i, p);
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-6)
      throw std::runtime_error("spectrum: eigenbasis completion failed");
    for (int i = 0; i < n; ++i) {
      const double value = v[i] / norm;
      s.full_transform(i, col) = value;
      s.phi(i, col - 1) = value;
    }
    ++col;
  }

  std::vector<double> nonzero(s.eigenvalues.begin() + 1, s.eigenvalues.end());
  s.lambda0 = Matrix::diagonal(nonzero);
  return s;
}

Matrix channel_matrix(const Graph& g, int i, int j) {
  if (i == j) throw std::invalid_argument("channel_matrix: i == j");
  if (i < 1 || i > g.n_agents || j < 1 || j > g.n_agents)
    throw std::invalid_argument("channel_matrix: index out of range");
  Matrix b(g.n_agents, g.n_agents);
  const double a = g.adjacency(i - 1, j - 1);
  b(i - 1, i - 1) = -a;
  b(i - 1, j - 1) = a;
  return b;
}

namespace {

std::vector<int> bfs_distances(const Graph& g, int start) {  // 0-based start
  std::vector<int> dist(g.n_agents, -1);
  std::deque<int> queue{start};
  dist[start] = 0;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (int v = 0; v < g.n_agents; ++v) {
      if (g.adjacency(u, v) != 0.0 && dist[v] < 0) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
    }
  }
  return dist;
}

bool bfs_connected(const Graph& g) {
  for (int d : bfs_distances(g, 0))
    if (d < 0) return false;
  return true;
}

}  // namespace

bool is_connected(const Graph& g, double tol) {
  if (g.n_agents == 1) return true;
  const bool by_bfs = bfs_connected(g);
  const bool by_spectrum = spectrum(g).lambda2() > tol;
  (void)by_spectrum;  // BFS is authoritative when the two disagree
  return by_bfs;
}

GraphMetrics graph_metrics(const Graph& g) {
  GraphMetrics m;
  for (int d : g.degrees) m.max_degree = std::max(m.max_degree, d);
  m.connected = bfs_connected(g);
  if (!m.connected) return m;

  int diam = 0;
  for (int s = 0; s < g.n_agents; ++s)
    for (int d : bfs_distances(g, s)) diam = std::max(diam, d);
  m.diameter = diam;

  if (g.n_agents > 1) {
    const LaplacianSpectrum sp = spectrum(g);
    m.synchronizability = sp.lambda2() / sp.lambdaN();
  } else {
    m.synchronizability = 1.0;
  }
  return m;
}

Graph parse_graph_file(std::istream& in) {
  std::string line;
  int n = -1;
  std::vector<std::pair<int, int>> edges;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    if (n < 0) {
      if (ls >> n) {
        int extra;
        if (ls >> extra)
          throw std::invalid_argument("graph file line " + std::to_string(lineno) +
                                      ": expected a single agent count");
      }
      continue;
    }
    int i, j;
    if (ls >> i) {
      if (!(ls >> j))
        throw std::invalid_argument("graph file line " + std::to_string(lineno) +
                                    ": expected 'i j'");
      edges.emplace_back(i, j);
    }
  }
  if (n < 0) throw std::invalid_argument("graph file: missing agent count");
  return build_graph(n, edges);
}

Graph parse_graph_text(const std::string& text) {
  std::istringstream in(text);
  return parse_graph_file(in);
}

std::vector<double> ones_vector(int n) { return std::vector<double>(n, 1.0); }

Matrix centering_matrix(int n) {
  Matrix j(n, n, 1.0 / n);
  return j;
}

std::vector<double> unit_vector(int n, int i) {
  std::vector<double> v(n, 0.0);
  v[i - 1] = 1.0;
  return v;
}

}  // namespace consensuslab

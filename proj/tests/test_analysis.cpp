#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "consensuslab/analysis.hpp"
#include "oracles.hpp"

using namespace consensuslab;

namespace {

Graph k2() { return build_graph(2, {{1, 2}}); }
Graph k4() {
  return build_graph(4, {{1, 2}, {1, 3}, {1, 4}, {2, 3}, {2, 4}, {3, 4}});
}

NoiseModel hom(double sigma, bool sym = false, int n = 1) {
  return NoiseModel::homogeneous(sigma, sym, n);
}

constexpr double kInf = std::numeric_limits<double>::infinity();

/// homogeneous closed form coefficient of Lambda0 in Psi_K: 2k - 2(N-1)s^2k^2/N
double psi_coeff(int n_agents, double k, double sigma) {
  return 2.0 * k - 2.0 * (n_agents - 1.0) * sigma * sigma * k * k / n_agents;
}

}  // namespace

TEST_CASE("psi_f_matrix: two-agent value, zero gain, K4 closed form") {
  const auto s2 = spectrum(k2());
  const Matrix psi = psi_f_matrix(s2, GainMatrix::scalar(1, 1.0), 1.0);
  REQUIRE(psi.rows() == 1);
  CHECK(psi(0, 0) == doctest::Approx(1.0).epsilon(1e-12));

  const Matrix zero = psi_f_matrix(s2, GainMatrix::scalar(1, 0.0), 1.0);
  CHECK(max_abs(zero) == 0.0);

  const auto s4 = spectrum(k4());
  for (const double k : {0.3, 0.9}) {
    for (const double sbar : {0.5, 1.0}) {
      const Matrix got = psi_f_matrix(s4, GainMatrix::scalar(2, k), sbar);
      const double coeff = k - 0.75 * k * k * sbar * sbar;
      const Matrix want = coeff * kron(s4.lambda0, Matrix::identity(2));
      CHECK(max_abs_diff(got, want) <= 1e-12);
    }
  }
}

TEST_CASE("small_gain_interval") {
  const GainInterval i2 = small_gain_interval(2, 1.0);
  CHECK(i2.lo == 0.0);
  CHECK(i2.hi == doctest::Approx(2.0));
  CHECK(i2.contains(1.0));
  CHECK(!i2.contains(2.0));
  CHECK(!i2.contains(0.0));

  CHECK(small_gain_interval(4, 1.0).hi == doctest::Approx(4.0 / 3.0));
  CHECK(small_gain_interval(1000000, 1.0).hi == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(std::isinf(small_gain_interval(3, 0.0).hi));
}

TEST_CASE("linear_certificates: two-agent and zero-gain values") {
  const Graph g = k2();
  const auto s = spectrum(g);
  const auto t3 = linear_certificates(g, s, hom(1.0), GainMatrix::scalar(1, 1.0));
  REQUIRE(t3.psi_K.rows() == 1);
  CHECK(t3.phi_K(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(t3.psi_K(0, 0) == doctest::Approx(2.0).epsilon(1e-12));

  const auto z = linear_certificates(g, s, hom(1.0), GainMatrix::scalar(1, 0.0));
  CHECK(max_abs(z.phi_K) == 0.0);
  CHECK(max_abs(z.psi_K) == 0.0);

  const auto f = [](const std::vector<double>& x) { return x; };
  const NoiseModel gen = NoiseModel::general({{{2, 1}, f}, {{1, 2}, f}}, 1.0, false, 1);
  CHECK_THROWS_AS(linear_certificates(g, s, gen, GainMatrix::scalar(1, 1.0)),
                  std::invalid_argument);
}

TEST_CASE("linear_certificates: homogeneous closed forms on random connected graphs") {
  std::mt19937_64 rng(55);
  std::uniform_real_distribution<double> kd(-1.0, 1.5), sd(0.3, 1.5);
  for (int rep = 0; rep < 25; ++rep) {
    const Graph g = oracles::random_connected_graph(rng);
    const auto s = spectrum(g);
    const int n_state = 1 + static_cast<int>(rng() % 2);
    const double k = kd(rng), sigma = sd(rng);
    const auto t3 =
        linear_certificates(g, s, hom(sigma, false, n_state), GainMatrix::scalar(n_state, k));
    const double cphi = 2.0 * (g.n_agents - 1.0) * sigma * sigma * k * k / g.n_agents;
    const Matrix want_phi = cphi * kron(s.lambda0, Matrix::identity(n_state));
    const Matrix want_psi =
        psi_coeff(g.n_agents, k, sigma) * kron(s.lambda0, Matrix::identity(n_state));
    CHECK(max_abs_diff(t3.phi_K, want_phi) <= 1e-10);
    CHECK(max_abs_diff(t3.psi_K, want_psi) <= 1e-10);
  }
}

TEST_CASE("reduced channel identity sum phi^T B^T phi phi^T B phi = 2(N-1)/N Lambda0") {
  std::mt19937_64 rng(56);
  for (int rep = 0; rep < 25; ++rep) {
    const Graph g = oracles::random_connected_graph(rng);
    const auto s = spectrum(g);
    // recover the channel sum from the certificates with K = I, sigma = 1
    const auto t3 = linear_certificates(g, s, hom(1.0), GainMatrix::scalar(1, 1.0));
    const Matrix want = (2.0 * (g.n_agents - 1.0) / g.n_agents) * s.lambda0;
    CHECK(max_abs_diff(t3.phi_K, want) <= 1e-10);
  }
}

TEST_CASE("ms_rate_bounds") {
  const Graph g = k2();
  const auto s = spectrum(g);
  const auto t3 = linear_certificates(g, s, hom(1.0), GainMatrix::scalar(1, 1.0));
  const auto [lo, hi] = ms_rate_bounds(t3.psi_K);
  CHECK(lo == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(hi == doctest::Approx(2.0).epsilon(1e-12));

  const Graph g4 = k4();
  const auto s4 = spectrum(g4);
  for (const double k : {0.4, 0.66}) {
    const auto b = ms_rate_bounds(
        linear_certificates(g4, s4, hom(1.0), GainMatrix::scalar(1, k)).psi_K);
    CHECK(b.first == doctest::Approx(psi_coeff(4, k, 1.0) * 4.0).epsilon(1e-10));
    CHECK(b.second == doctest::Approx(psi_coeff(4, k, 1.0) * 4.0).epsilon(1e-10));
  }

  // outside the small-gain interval the lower exponent flips sign
  const auto bad = ms_rate_bounds(
      linear_certificates(g, s, hom(1.0), GainMatrix::scalar(1, 2.2)).psi_K);
  CHECK(bad.first < 0.0);
}

TEST_CASE("steady_state_error_bounds: two-agent exact, zero start, K4 asymptotic") {
  const Graph g = k2();
  const auto s = spectrum(g);
  const auto b =
      steady_state_error_bounds(g, s, hom(1.0), GainMatrix::scalar(1, 1.0), {1.0, -1.0});
  CHECK(b.linear == doctest::Approx(1.0).epsilon(1e-14));
  // growth-bound form: ||K||^2 sigma^2 lambda_N ||d0||^2 / (2 N^2 lambda_min) = 0.5
  CHECK(b.growth == doctest::Approx(0.5).epsilon(1e-14));

  const auto zs =
      steady_state_error_bounds(g, s, hom(1.0), GainMatrix::scalar(1, 1.0), {2.0, 2.0});
  CHECK(zs.growth == 0.0);
  CHECK(zs.linear == 0.0);
  CHECK(zs.asymptotic == 0.0);

  const Graph g4 = k4();
  const auto s4 = spectrum(g4);
  const auto a4 = steady_state_error_bounds(g4, s4, hom(1.0), GainMatrix::scalar(1, 0.5),
                                            {1.0, -1.0, 2.0, -2.0});
  CHECK(a4.asymptotic == doctest::Approx(0.225).epsilon(1e-14));

  // failed certificate reports an infinite sentinel
  const auto bad =
      steady_state_error_bounds(g, s, hom(1.0), GainMatrix::scalar(1, 2.2), {1.0, -1.0});
  CHECK(std::isinf(bad.growth));
  CHECK(std::isinf(bad.linear));
}

TEST_CASE("two_agent_closed_form") {
  const auto a = two_agent_closed_form(1.0, 1.0, 1.0, {1.0}, {-1.0});
  CHECK(a.ms_error == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(a.as_iff);
  CHECK(a.ms_iff);

  const auto b = two_agent_closed_form(2.2, 1.0, 1.0, {1.0}, {-1.0});
  CHECK(!b.ms_iff);
  CHECK(std::isinf(b.ms_error));

  const auto c = two_agent_closed_form(-3.0, 1.0, 1.0, {1.0}, {-1.0});
  CHECK(c.as_iff);
  CHECK(!c.ms_iff);

  CHECK_THROWS_AS(two_agent_closed_form(1.0, 0.0, 1.0, {1.0}, {0.0}),
                  std::invalid_argument);
}

TEST_CASE("ms_decision_homogeneous") {
  CHECK(ms_decision_homogeneous(k2(), 1.0, 1.0));
  CHECK(!ms_decision_homogeneous(k2(), 2.2, 1.0));
  const Graph disc = build_graph(4, {{1, 2}, {3, 4}});
  CHECK(!ms_decision_homogeneous(disc, 0.5, 1.0));
}

TEST_CASE("gain_bands") {
  const Graph g = k2();
  const NoiseModel ls =
      NoiseModel::linear_scalar({{{2, 1}, 0.5}, {{1, 2}, 1.5}}, false, 1);
  const auto b1 = gain_bands(g, ls, 0.8);
  CHECK(b1.sufficient);
  CHECK(b1.necessary);
  const auto b2 = gain_bands(g, ls, 4.0);
  CHECK(!b2.sufficient);
  CHECK(b2.necessary);
  const auto b3 = gain_bands(g, ls, 9.0);
  CHECK(!b3.sufficient);
  CHECK(!b3.necessary);
}

TEST_CASE("band nesting: equal sigmas reproduce the iff; sufficient implies necessary") {
  std::mt19937_64 rng(57);
  std::uniform_real_distribution<double> kd(-0.5, 3.0), sd(0.4, 1.6);
  for (int rep = 0; rep < 40; ++rep) {
    const Graph g = oracles::random_connected_graph(rng, 2, 6);
    const double k = kd(rng);

    const double sigma = sd(rng);
    const auto eq = gain_bands(g, hom(sigma), k);
    CHECK(eq.sufficient == ms_decision_homogeneous(g, k, sigma));
    CHECK((!eq.sufficient || eq.necessary));

    std::map<ChannelKey, double> values;
    for (int i = 1; i <= g.n_agents; ++i)
      for (int j = 1; j <= g.n_agents; ++j)
        if (i != j && g.has_edge(i, j)) values[{j, i}] = sd(rng);
    const auto bands = gain_bands(g, NoiseModel::linear_scalar(values), k);
    CHECK((!bands.sufficient || bands.necessary));
  }
}

TEST_CASE("lambda_K_bound: two-agent hand value and certified-floor inputs") {
  const Graph g = k2();
  const auto s = spectrum(g);
  CHECK(lambda_K_bound(g, s, hom(1.0), GainMatrix::scalar(1, 1.0)) ==
        doctest::Approx(6.0).epsilon(1e-12));
  CHECK(lambda_K_bound(g, s, hom(1.0), GainMatrix::scalar(1, 0.0)) ==
        doctest::Approx(0.0));

  std::mt19937_64 rng(58);
  std::uniform_real_distribution<double> kd(-1.0, 1.5);
  for (int rep = 0; rep < 20; ++rep) {
    const Graph gr = oracles::random_connected_graph(rng, 2, 5);
    const auto sr = spectrum(gr);
    const double k = kd(rng);
    const auto t3 = linear_certificates(gr, sr, hom(1.0), GainMatrix::scalar(1, k));
    CHECK(lambda_K_bound(gr, sr, hom(1.0), GainMatrix::scalar(1, k)) >=
          lambda_min(t3.psi_K) - 1e-12);
  }
}

TEST_CASE("mu_estimate: constant objective on the 1-sphere, zero gain, certified floor") {
  const Graph g = k2();
  const auto s = spectrum(g);
  const auto mu = mu_estimate(g, s, hom(1.0), GainMatrix::scalar(1, 1.0), 16, 7);
  CHECK(mu.value == doctest::Approx(6.0).epsilon(1e-9));

  const auto mu0 = mu_estimate(g, s, hom(1.0), GainMatrix::scalar(1, 0.0), 16, 7);
  CHECK(mu0.value == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));

  const Graph g3 = build_graph(3, {{1, 2}, {1, 3}, {2, 3}});
  const auto s3 = spectrum(g3);
  std::mt19937_64 rng(59);
  std::uniform_real_distribution<double> kd(-2.0, 2.0);
  for (int rep = 0; rep < 5; ++rep) {
    const double k = kd(rng);
    const double floor = lambda_K_bound(g3, s3, hom(1.0), GainMatrix::scalar(1, k));
    const auto m = mu_estimate(g3, s3, hom(1.0), GainMatrix::scalar(1, k), 64, 100 + rep);
    CHECK(m.value >= floor - 1e-8);
  }
}

TEST_CASE("as_rate_matrices: homogeneous closed form and rejection paths") {
  const Graph g = k2();
  const auto s = spectrum(g);
  const auto m = as_rate_matrices(g, s, hom(1.0, true), GainMatrix::scalar(1, 1.0));
  REQUIRE(m.A.rows() == 1);
  CHECK(m.A(0, 0) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(m.B(0, 0) == doctest::Approx(-2.0).epsilon(1e-12));

  const auto z = as_rate_matrices(g, s, hom(1.0, true), GainMatrix::scalar(1, 0.0));
  CHECK(max_abs(z.A) == 0.0);
  CHECK(max_abs(z.B) == 0.0);

  // independent wiring rejected; asymmetric K rejected
  CHECK_THROWS_AS(as_rate_matrices(g, s, hom(1.0, false), GainMatrix::scalar(1, 1.0)),
                  std::invalid_argument);
  Matrix bad(1, 1);
  bad(0, 0) = 1.0;
  GainMatrix gk = GainMatrix::full(bad);
  Matrix asym = Matrix::from_rows({{1.0, 0.4}, {0.0, 1.0}});
  CHECK_THROWS_AS(
      as_rate_matrices(g, s, hom(1.0, true, 2), GainMatrix::full(asym)),
      std::invalid_argument);

  std::mt19937_64 rng(60);
  std::uniform_real_distribution<double> kd(-2.0, 2.0), sd(0.4, 1.4);
  for (int rep = 0; rep < 25; ++rep) {
    const Graph gr = oracles::random_connected_graph(rng);
    const auto sr = spectrum(gr);
    const double k = kd(rng), sigma = sd(rng);
    const auto am = as_rate_matrices(gr, sr, hom(sigma, true), GainMatrix::scalar(1, k));
    const Matrix wantA = (k + 0.5 * k * k * sigma * sigma) * sr.lambda0;
    const Matrix wantB = (-k * sigma) * sr.lambda0;
    CHECK(max_abs_diff(am.A, wantA) <= 1e-10);
    CHECK(max_abs_diff(am.B, wantB) <= 1e-10);
  }
}

TEST_CASE("as_decision_homogeneous_symmetric") {
  CHECK(as_decision_homogeneous_symmetric(-3.0, 1.0, true));
  CHECK(!as_decision_homogeneous_symmetric(-1.0, 1.0, true));
  CHECK(as_decision_homogeneous_symmetric(0.1, 1.0, true));
  CHECK(!as_decision_homogeneous_symmetric(-3.0, 1.0, false));
}

TEST_CASE("optimal_gain") {
  CHECK(optimal_gain(2, 1.0) == doctest::Approx(1.0));
  CHECK(optimal_gain(4, 1.0) == doctest::Approx(2.0 / 3.0));
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> sd(0.3, 2.0);
  for (int n = 2; n <= 8; ++n) {
    const double sigma = sd(rng);
    const double ks = optimal_gain(n, sigma);
    CHECK(ks == doctest::Approx(0.5 * small_gain_interval(n, sigma).hi).epsilon(1e-14));
    // the homogeneous rate coefficient peaks at k*
    const double at = psi_coeff(n, ks, sigma);
    CHECK(at > psi_coeff(n, 0.5 * ks, sigma));
    CHECK(at > psi_coeff(n, 1.5 * ks, sigma));
  }
}

TEST_CASE("linear steady-state bound equals the two-agent closed form exactly") {
  std::mt19937_64 rng(62);
  std::uniform_real_distribution<double> sd(0.4, 1.4), xd(-2.0, 2.0);
  const Graph g = k2();
  const auto s = spectrum(g);
  for (int rep = 0; rep < 30; ++rep) {
    const double s12 = sd(rng), s21 = sd(rng);
    const double hi = 4.0 / (s12 * s12 + s21 * s21);
    const double k = 0.1 * hi + 0.8 * hi * (rng() % 1000) / 1000.0;
    const double x1 = xd(rng), x2 = xd(rng);
    const NoiseModel ls =
        NoiseModel::linear_scalar({{{1, 2}, s12}, {{2, 1}, s21}}, false, 1);
    const auto bounds =
        steady_state_error_bounds(g, s, ls, GainMatrix::scalar(1, k), {x1, x2});
    const auto closed = two_agent_closed_form(k, s12, s21, {x1}, {x2});
    REQUIRE(closed.ms_iff);
    CHECK(bounds.linear == doctest::Approx(closed.ms_error).epsilon(1e-12));
  }
}

TEST_CASE("analyze: report verdicts for the canonical configurations") {
  // inside-gain two-agent benchmark
  const AnalysisReport a = analyze(k2(), hom(1.0), GainMatrix::scalar(1, 1.0), {1.0, -1.0});
  REQUIRE(a.verdicts.ms_iff.has_value());
  CHECK(*a.verdicts.ms_iff);
  CHECK(a.verdicts.ms_sufficient);
  CHECK(a.verdicts.as_sufficient);
  CHECK(a.gain_interval.hi == doctest::Approx(2.0));
  CHECK(a.ss_error.linear == doctest::Approx(1.0).epsilon(1e-12));
  REQUIRE(a.two_agent.has_value());
  CHECK(a.two_agent->ms_error == doctest::Approx(1.0).epsilon(1e-12));
  REQUIRE(a.lambda_K.has_value());
  CHECK(*a.lambda_K == doctest::Approx(6.0).epsilon(1e-12));
  REQUIRE(a.mu.has_value());
  CHECK(a.mu->value == doctest::Approx(6.0).epsilon(1e-9));

  // negative gain, symmetric homogeneous: a.s. holds, m.s. does not
  const AnalysisReport b =
      analyze(k2(), hom(1.0, true), GainMatrix::scalar(1, -3.0), {1.0, -1.0});
  CHECK(b.verdicts.as_sufficient);
  CHECK(!b.verdicts.ms_sufficient);
  CHECK(!b.verdicts.ms_iff.has_value());  // the iff needs independent channels
  REQUIRE(b.as_matrices.has_value());

  // disconnected graph: everything off, bounds infinite
  const Graph disc = build_graph(4, {{1, 2}, {3, 4}});
  const AnalysisReport c =
      analyze(disc, hom(1.0), GainMatrix::scalar(1, 1.0), {1.0, -1.0, 2.0, 0.0});
  CHECK(!c.verdicts.ms_sufficient);
  REQUIRE(c.verdicts.ms_iff.has_value());
  CHECK(!*c.verdicts.ms_iff);
  CHECK(!c.verdicts.as_sufficient);
  CHECK(std::isinf(c.ss_error.growth));
  CHECK(std::isinf(c.ss_error.linear));
  CHECK(c.metrics.diameter == kInfiniteDiameter);
}

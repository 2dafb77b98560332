#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "consensuslab/matrix.hpp"
#include "oracles.hpp"

using namespace consensuslab;

TEST_CASE("sym_eigen: diagonal matrix") {
  const auto e = sym_eigen(Matrix::diagonal({3.0, 1.0, 2.0}));
  REQUIRE(e.values.size() == 3);
  CHECK(e.values[0] == doctest::Approx(1.0));
  CHECK(e.values[1] == doctest::Approx(2.0));
  CHECK(e.values[2] == doctest::Approx(3.0));
}

TEST_CASE("sym_eigen: 2x2 closed form") {
  Matrix m(2, 2);
  m(0, 1) = m(1, 0) = 1.0;
  const auto e = sym_eigen(m);
  CHECK(e.values[0] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(e.values[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sym_eigen: random 4x4 matches characteristic-polynomial oracle") {
  std::mt19937_64 rng(12345);
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix m = oracles::random_symmetric(rng, 4);
    const auto e = sym_eigen(m);
    const auto roots = oracles::eigenvalues_by_char_poly(m);
    REQUIRE(roots.size() == 4);
    for (int i = 0; i < 4; ++i) CHECK(e.values[i] == doctest::Approx(roots[i]).epsilon(1e-10));
  }
}

TEST_CASE("sym_eigen: reconstruction and orthonormality on random matrices") {
  std::mt19937_64 rng(777);
  std::uniform_int_distribution<int> dim(1, 12);
  for (int rep = 0; rep < 1000; ++rep) {
    const int n = dim(rng);
    const Matrix m = oracles::random_symmetric(rng, n);
    const auto e = sym_eigen(m);
    Matrix recon(n, n);
    for (int c = 0; c < n; ++c)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          recon(i, j) += e.values[c] * e.vectors(i, c) * e.vectors(j, c);
    REQUIRE(max_abs_diff(recon, m) <= 1e-10 * (1.0 + max_abs(m)));
    const Matrix vtv = e.vectors.transpose() * e.vectors;
    REQUIRE(max_abs_diff(vtv, Matrix::identity(n)) <= 1e-10);
  }
}

TEST_CASE("sym_eigen: rejects non-symmetric input") {
  Matrix m(2, 2);
  m(0, 1) = 1.0;
  m(1, 0) = 0.5;
  CHECK_THROWS_AS(sym_eigen(m), std::invalid_argument);
}

TEST_CASE("kron: identity, scalar, mixed product") {
  CHECK(max_abs_diff(kron(Matrix::identity(2), Matrix::identity(2)),
                     Matrix::identity(4)) == 0.0);

  Matrix s(1, 1);
  s(0, 0) = 2.0;
  std::mt19937_64 rng(5);
  const Matrix m = oracles::random_matrix(rng, 3, 2);
  CHECK(max_abs_diff(kron(s, m), 2.0 * m) == 0.0);

  for (int rep = 0; rep < 50; ++rep) {
    const Matrix a = oracles::random_matrix(rng, 2, 2);
    const Matrix b = oracles::random_matrix(rng, 2, 2);
    const Matrix c = oracles::random_matrix(rng, 2, 2);
    const Matrix d = oracles::random_matrix(rng, 2, 2);
    CHECK(max_abs_diff(kron(a, b) * kron(c, d), kron(a * c, b * d)) <= 1e-12);
  }
}

TEST_CASE("sym_expm: zero and diagonal") {
  CHECK(max_abs_diff(sym_expm(Matrix(3, 3)), Matrix::identity(3)) <= 1e-14);
  const Matrix e = sym_expm(Matrix::diagonal({std::log(2.0), 0.0}));
  CHECK(e(0, 0) == doctest::Approx(2.0).epsilon(1e-13));
  CHECK(e(1, 1) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(std::abs(e(0, 1)) <= 1e-14);
}

TEST_CASE("sym_expm: matches Taylor oracle on random symmetric 3x3") {
  std::mt19937_64 rng(99);
  for (int rep = 0; rep < 50; ++rep) {
    const Matrix m = oracles::random_symmetric(rng, 3);
    CHECK(max_abs_diff(sym_expm(m), oracles::expm_taylor(m)) <= 1e-9);
  }
}

TEST_CASE("sym_expm: exp(-M) exp(M) = I for moderate norms") {
  std::mt19937_64 rng(4242);
  for (int rep = 0; rep < 50; ++rep) {
    Matrix m = oracles::random_symmetric(rng, 4);
    const double norm = spectral_norm(m);
    if (norm > 5.0) m *= 5.0 / norm;
    CHECK(max_abs_diff(sym_expm(-m) * sym_expm(m), Matrix::identity(4)) <= 1e-8);
  }
}

TEST_CASE("sym_expm: overflow guard") {
  CHECK_THROWS_AS(sym_expm(Matrix::diagonal({800.0})), std::overflow_error);
}

TEST_CASE("min_abs_eig") {
  CHECK(min_abs_eig(Matrix::diagonal({-2.0, 3.0})) == doctest::Approx(2.0));
  CHECK(min_abs_eig(Matrix(2, 2)) == doctest::Approx(0.0));
  CHECK(min_abs_eig(Matrix::diagonal({-2.0, -2.0})) == doctest::Approx(2.0));
  Matrix asym(2, 2);
  asym(0, 1) = 2.0;
  CHECK(min_abs_eig(asym, true) == doctest::Approx(1.0));  // (M+M^T)/2 has eigs +-1
}

TEST_CASE("spectral_norm on a known matrix") {
  Matrix m(2, 2);
  m(0, 0) = 3.0;
  m(1, 1) = -4.0;
  CHECK(spectral_norm(m) == doctest::Approx(4.0).epsilon(1e-12));
}

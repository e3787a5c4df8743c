#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gramsyn/errors.hpp"
#include "gramsyn/linalg.hpp"
#include "gramsyn/rng.hpp"

using namespace gramsyn;

namespace {

Mat random_symmetric(Rng& rng, int n) {
  Mat a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) a(i, j) = a(j, i) = rng.uniform(-1.0, 1.0);
  return a;
}

}  // namespace

TEST_CASE("jacobi eigen on a known 2x2") {
  Mat a(2, 2);
  a(0, 0) = 2.0; a(0, 1) = 1.0;
  a(1, 0) = 1.0; a(1, 1) = 2.0;
  const SymmetricEigen eig = sym_eigen(a);
  CHECK(eig.values[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(eig.values[1] == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("jacobi eigen reconstructs random symmetric matrices") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial % 5;
    const Mat a = random_symmetric(rng, n);
    const SymmetricEigen eig = sym_eigen(a);
    for (int j = 1; j < n; ++j) CHECK(eig.values[j - 1] <= eig.values[j]);
    for (int j = 0; j < n; ++j) {
      Vec v(n);
      for (int i = 0; i < n; ++i) v[i] = eig.vectors(i, j);
      const Vec av = mat_vec(a, v);
      for (int i = 0; i < n; ++i)
        CHECK(av[i] == doctest::Approx(eig.values[j] * v[i]).epsilon(1e-10).scale(1.0));
      CHECK(norm2(v) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("spectral norm") {
  Mat swap(2, 2);
  swap(0, 1) = 1.0;
  swap(1, 0) = 1.0;
  CHECK(spectral_norm(swap) == doctest::Approx(1.0).epsilon(1e-13));

  Mat diag(2, 2);
  diag(0, 0) = 3.0;
  diag(1, 1) = -4.0;
  CHECK(spectral_norm(diag) == doctest::Approx(4.0).epsilon(1e-13));

  Mat wide(1, 3);
  wide(0, 0) = 1.0; wide(0, 1) = 2.0; wide(0, 2) = 2.0;
  CHECK(spectral_norm(wide) == doctest::Approx(3.0).epsilon(1e-13));
}

TEST_CASE("psd pseudoinverse zeroes the null directions") {
  Mat a(2, 2);
  a(0, 0) = 1.0;  // diag(1, 0)
  const SymmetricEigen eig = sym_eigen(a);
  const Vec x = psd_pinv_apply(eig, {2.0, 3.0}, 1e-12);
  CHECK(x[0] == doctest::Approx(2.0));
  CHECK(x[1] == doctest::Approx(0.0));
}

TEST_CASE("lu solve against direct multiplication") {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + trial % 4;
    Mat a(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) a(i, j) = rng.uniform(-1.0, 1.0);
      a(i, i) += 3.0;
    }
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = rng.uniform(-1.0, 1.0);
    const Vec b = mat_vec(a, x);
    const Vec solved = lu_solve(a, b);
    for (int i = 0; i < n; ++i) CHECK(solved[i] == doctest::Approx(x[i]).epsilon(1e-11));
  }
}

TEST_CASE("lu solve rejects singular systems") {
  Mat a(2, 2);
  a(0, 0) = 1.0; a(0, 1) = 2.0;
  a(1, 0) = 2.0; a(1, 1) = 4.0;
  CHECK_THROWS_AS(lu_solve(a, {1.0, 1.0}), Error);
}

TEST_CASE("kernel basis spans the null space orthonormally") {
  Mat l(1, 3);
  l(0, 0) = 1.0; l(0, 1) = 1.0; l(0, 2) = 1.0;
  const Mat basis = kernel_basis(l);
  REQUIRE(basis.cols() == 2);
  for (int j = 0; j < 2; ++j) {
    double img = 0.0, nrm = 0.0;
    for (int i = 0; i < 3; ++i) {
      img += l(0, i) * basis(i, j);
      nrm += basis(i, j) * basis(i, j);
    }
    CHECK(std::abs(img) < 1e-13);
    CHECK(nrm == doctest::Approx(1.0).epsilon(1e-13));
  }
  double cross = 0.0;
  for (int i = 0; i < 3; ++i) cross += basis(i, 0) * basis(i, 1);
  CHECK(std::abs(cross) < 1e-13);
}

TEST_CASE("kernel basis on a random wide matrix") {
  Rng rng(23);
  Mat l(3, 12);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 12; ++j) l(i, j) = rng.uniform(-1.0, 1.0);
  const Mat basis = kernel_basis(l);
  REQUIRE(basis.cols() == 9);
  for (int j = 0; j < basis.cols(); ++j) {
    Vec q(12);
    for (int i = 0; i < 12; ++i) q[i] = basis(i, j);
    const Vec img = mat_vec(l, q);
    CHECK(norm_inf(img) < 1e-12);
  }
}

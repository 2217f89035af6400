#include <doctest.h>

#include <Eigen/SVD>

#include "defocus/blind_deblur.hpp"
#include "defocus/kernel_constraints.hpp"
#include "test_support.hpp"

using namespace defocus;

namespace {

// The eight members of the dihedral group acting on index pairs.
std::vector<Matrix> orbit(const Matrix& m) {
  const Eigen::Index n = m.rows();
  std::vector<Matrix> out;
  for (int t = 0; t < 8; ++t) {
    Matrix img(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        Eigen::Index a = i, b = j;
        if (t & 1) std::swap(a, b);
        if (t & 2) a = n - 1 - a;
        if (t & 4) b = n - 1 - b;
        img(i, j) = m(a, b);
      }
    out.push_back(img);
  }
  return out;
}

int svd_rank(const Matrix& m, double ratio) {
  const Eigen::VectorXd s = Eigen::JacobiSVD<Matrix>(m).singularValues();
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) >= ratio * s(0)) ++r;
  return r;
}

}  // namespace

TEST_CASE("flips and transpose") {
  Matrix m(2, 2);
  m << 1, 2, 3, 4;
  Matrix rows(2, 2), cols(2, 2);
  rows << 3, 4, 1, 2;
  cols << 2, 1, 4, 3;
  CHECK(flip_rows(m) == rows);
  CHECK(flip_cols(m) == cols);
  CHECK(transpose(m) == m.transpose());

  std::mt19937_64 rng(1);
  const Matrix r = testing::random_matrix(rng, 5, 5);
  CHECK(transpose(transpose(r)) == r);
  CHECK(flip_rows(flip_rows(r)) == r);
  CHECK(flip_cols(flip_cols(r)) == r);
  // transpose o flip_rows is a quarter turn; four of them close the loop.
  Matrix q = r;
  for (int i = 0; i < 4; ++i) q = transpose(flip_rows(q));
  CHECK(q == r);
  const Matrix twice = transpose(flip_rows(transpose(flip_rows(r))));
  CHECK(twice == flip_rows(flip_cols(r)));
}

TEST_CASE("symmetrize is the orbit average") {
  Matrix e = Matrix::Zero(3, 3);
  e(0, 0) = 1.0;
  const Matrix s = symmetrize(e);
  CHECK(s(0, 0) == 0.25);
  CHECK(s(0, 2) == 0.25);
  CHECK(s(2, 0) == 0.25);
  CHECK(s(2, 2) == 0.25);
  CHECK(s.sum() == doctest::Approx(1.0));
  CHECK(s(1, 1) == 0.0);

  std::mt19937_64 rng(2);
  for (int n : {1, 4, 7}) {
    const Matrix m = testing::random_matrix(rng, n, n);
    Matrix avg = Matrix::Zero(n, n);
    for (const Matrix& img : orbit(m)) avg += img;
    avg /= 8.0;
    CHECK((symmetrize(m) - avg).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(symmetry_residual(symmetrize(m)) == 0.0);
  }

  const Matrix g = gaussian_kernel(1.5, 9).matrix();
  CHECK((symmetrize(g) - g).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("symmetry residual") {
  Matrix m = Matrix::Zero(3, 3);
  m(0, 1) = 1.0;
  CHECK(symmetry_residual(m) == 1.0);
  CHECK(symmetry_residual(Matrix::Constant(4, 4, 2.0)) == 0.0);
}

TEST_CASE("effective rank and truncation") {
  CHECK(effective_rank(Matrix::Zero(3, 3)) == 0);
  CHECK(effective_rank(Matrix::Identity(5, 5)) == 5);
  Eigen::VectorXd v(3);
  v << 1, 2, 3;
  CHECK(effective_rank(v * v.transpose()) == 1);

  std::mt19937_64 rng(3);
  const Matrix r1 = testing::random_matrix(rng, 6, 1) * testing::random_matrix(rng, 1, 6);
  CHECK((rank_truncate(r1, 1) - r1).norm() < 1e-12);
  const Matrix r5 = testing::random_matrix(rng, 5, 5);
  CHECK((rank_truncate(r5, 5) - r5).norm() < 1e-12);

  const Matrix r6 = testing::random_matrix(rng, 6, 6);
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Matrix>(r6).singularValues();
  CHECK((singular_values(r6) - sv).norm() < 1e-12);
  const double expect = std::sqrt(sv.tail(4).squaredNorm());
  CHECK((rank_truncate(r6, 2) - r6).norm() == doctest::Approx(expect).epsilon(1e-10));
  CHECK(svd_rank(rank_truncate(r6, 2), 1e-8) == 2);
}

TEST_CASE("simplex normalization") {
  CHECK(simplex_normalize(Matrix::Constant(2, 2, 0.2)).isApprox(Matrix::Constant(2, 2, 0.25), 1e-15));
  Matrix m(2, 2), expect(2, 2);
  m << -1, 3, 0, 1;
  expect << 0, 0.75, 0, 0.25;
  CHECK(simplex_normalize(m).isApprox(expect, 1e-15));
  CHECK_THROWS_AS(simplex_normalize(Matrix::Constant(3, 3, -1.0)), Error);
}

TEST_CASE("rank fixtures of the parametric families") {
  const Matrix g = gaussian_kernel(9, 27).matrix();
  const Matrix p = pillbox_kernel(23, 23).matrix();
  const Matrix gp = gaussian_pupil_kernel(23, 9, 23).matrix();
  CHECK(effective_rank(g) == 1);
  CHECK(effective_rank(p) == 8);
  CHECK(effective_rank(gp) == 7);
  CHECK(svd_rank(g, 1.0 / 30.0) == 1);
  CHECK(svd_rank(p, 1.0 / 30.0) == 8);
  CHECK(svd_rank(gp, 1.0 / 30.0) == 7);
}

TEST_CASE("project_omega") {
  const FeasibleSetParams defaults;
  SUBCASE("feasible input is a fixed point") {
    const Matrix g = gaussian_kernel(2.0, 11).matrix();
    CHECK((project_omega(g, defaults).matrix() - g).norm() <= 1e-10);
  }
  SUBCASE("noisy delta") {
    std::mt19937_64 rng(4);
    Matrix m = Kernel::delta(7).matrix() + 1e-3 * testing::random_matrix(rng, 7, 7);
    FeasibleSetParams p;
    p.rank_cap = 1;
    const Kernel k = project_omega(m, p);
    CHECK(symmetry_residual(k.matrix()) <= 1e-12);
    CHECK(k.matrix().sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(k.matrix().minCoeff() >= 0.0);
    CHECK(effective_rank(k.matrix()) == 1);
  }
  SUBCASE("random positive input") {
    std::mt19937_64 rng(5);
    const Matrix m = testing::random_matrix(rng, 31, 31, 0.0, 1.0);
    const int cap = rank_cap_for(m, defaults);
    CHECK(cap >= 1);
    const Kernel k = project_omega(m, defaults);
    const MembershipReport rep = membership(k.matrix());
    CHECK(rep.feasible(1e-12));
    CHECK(rep.rank <= cap);
  }
  SUBCASE("ablation switches") {
    std::mt19937_64 rng(6);
    const Matrix m = testing::random_matrix(rng, 9, 9, 0.0, 1.0);
    FeasibleSetParams p;
    p.symmetry = false;
    p.low_rank = false;
    const Kernel k = project_omega(m, p);
    CHECK(k.matrix().isApprox(m / m.sum(), 1e-14));
  }
  SUBCASE("no positive mass") { CHECK_THROWS_AS(project_omega(Matrix::Constant(5, 5, -1.0)), Error); }
}

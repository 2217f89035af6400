#include "defocus/kernel_constraints.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

namespace defocus {

namespace {

void require_square(const Matrix& m) {
  if (m.rows() != m.cols()) throw Error("expected a square matrix");
}

bool is_transpose_symmetric(const Matrix& m) { return m.rows() == m.cols() && m == m.transpose(); }

// Truncation of a symmetric matrix through its eigendecomposition: singular
// values are |lambda| and the kept components stay symmetric.
Matrix truncate_symmetric(const Matrix& m, double ratio, std::optional<int> cap) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  const Eigen::VectorXd& lam = es.eigenvalues();
  const Matrix& v = es.eigenvectors();
  const int n = static_cast<int>(lam.size());
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return std::abs(lam(a)) > std::abs(lam(b)); });
  const double smax = std::abs(lam(order[0]));
  int r = 0;
  for (int i : order)
    if (std::abs(lam(i)) >= ratio * smax) ++r;
  r = std::max(1, cap ? std::min(*cap, r) : r);
  Matrix out = Matrix::Zero(m.rows(), m.cols());
  for (int j = 0; j < r; ++j) {
    const int i = order[static_cast<std::size_t>(j)];
    out.noalias() += lam(i) * v.col(i) * v.col(i).transpose();
  }
  // Restore exact transpose symmetry lost to rounding.
  return 0.5 * (out + out.transpose());
}

Matrix truncate_general(const Matrix& m, double ratio, std::optional<int> cap) {
  const int r = cap ? std::max(1, std::min(*cap, effective_rank(m, ratio))) : std::max(1, effective_rank(m, ratio));
  return rank_truncate(m, r);
}

// Nonnegative part, normalized; nullopt when nothing positive remains.
std::optional<Matrix> clamp_normalize(const Matrix& m) {
  Matrix p = m.cwiseMax(0.0);
  const double s = p.sum();
  if (!(s > 0.0) || !std::isfinite(s)) return std::nullopt;
  p /= s;
  return p;
}

}  // namespace

Matrix transpose(const Matrix& m) { return m.transpose(); }

Matrix flip_rows(const Matrix& m) { return m.colwise().reverse(); }

Matrix flip_cols(const Matrix& m) { return m.rowwise().reverse(); }

Matrix symmetrize(const Matrix& m) {
  require_square(m);
  const int n = static_cast<int>(m.rows());
  Matrix out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const int fi = n - 1 - i, fj = n - 1 - j;
      std::array<std::pair<int, int>, 8> orbit{{{i, j}, {j, i}, {fi, j}, {i, fj}, {fi, fj}, {fj, i}, {j, fi}, {fj, fi}}};
      // Canonical summation order makes every orbit member identical.
      std::sort(orbit.begin(), orbit.end());
      double s = 0.0;
      for (const auto& [a, b] : orbit) s += m(a, b);
      out(i, j) = s / 8.0;
    }
  return out;
}

double symmetry_residual(const Matrix& m) {
  require_square(m);
  const Matrix t = m.transpose();
  double r = (m - t).cwiseAbs().maxCoeff();
  r = std::max(r, (m - flip_rows(m)).cwiseAbs().maxCoeff());
  r = std::max(r, (m - flip_cols(m)).cwiseAbs().maxCoeff());
  r = std::max(r, (m - flip_rows(t)).cwiseAbs().maxCoeff());
  r = std::max(r, (m - flip_cols(t)).cwiseAbs().maxCoeff());
  return r;
}

Eigen::VectorXd singular_values(const Matrix& m) {
  return Eigen::JacobiSVD<Matrix>(m).singularValues();
}

int effective_rank(const Matrix& m, double ratio) {
  const Eigen::VectorXd s = singular_values(m);
  if (s.size() == 0 || s(0) == 0.0) return 0;
  return static_cast<int>((s.array() >= ratio * s(0)).count());
}

Matrix rank_truncate(const Matrix& m, int rank) {
  if (rank < 1) throw Error("rank_truncate: rank must be >= 1");
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const int r = std::min<int>(rank, static_cast<int>(svd.singularValues().size()));
  return svd.matrixU().leftCols(r) * svd.singularValues().head(r).asDiagonal() * svd.matrixV().leftCols(r).transpose();
}

Matrix simplex_normalize(const Matrix& m) {
  auto p = clamp_normalize(m);
  if (!p) throw Error("degenerate kernel: no positive entry");
  return *p;
}

int rank_cap_for(const Matrix& m, const FeasibleSetParams& params) {
  const int adaptive = std::max(1, effective_rank(m, params.rank_threshold_ratio));
  return params.rank_cap ? std::max(1, std::min(*params.rank_cap, adaptive)) : adaptive;
}

Kernel project_omega(const Matrix& m, const FeasibleSetParams& params) {
  require_square(m);
  if (m.rows() % 2 == 0) throw Error("project_omega: kernel size must be odd");
  if (!m.allFinite()) throw Error("project_omega: non-finite input");

  // The cap comes from the input and holds for every pass.
  const std::optional<int> cap = params.low_rank ? std::optional<int>(rank_cap_for(m, params)) : std::nullopt;
  auto one_pass = [&](const Matrix& x) -> Matrix {
    Matrix y = x;
    if (params.low_rank) {
      y = is_transpose_symmetric(y) ? truncate_symmetric(y, params.rank_threshold_ratio, cap)
                                    : truncate_general(y, params.rank_threshold_ratio, cap);
    }
    if (params.symmetry) y = symmetrize(y);
    auto p = clamp_normalize(y);
    if (!p) throw Error("degenerate kernel: projection has no positive entry");
    return *p;
  };

  Matrix x = one_pass(m);
  if (params.low_rank) {
    // Clamping can reintroduce small singular values; iterate until stable.
    for (int pass = 1; pass < params.max_passes; ++pass) {
      Matrix y = one_pass(x);
      const double moved = (y - x).norm();
      x = std::move(y);
      if (moved <= params.pass_tolerance) break;
    }
  }
  return Kernel(std::move(x));
}

MembershipReport membership(const Matrix& k, double ratio) {
  MembershipReport rep;
  rep.min_entry = k.minCoeff();
  rep.sum_error = std::abs(k.sum() - 1.0);
  rep.symmetry_error = k.rows() == k.cols() ? symmetry_residual(k) : std::numeric_limits<double>::infinity();
  rep.rank = effective_rank(k, ratio);
  return rep;
}

}  // namespace defocus

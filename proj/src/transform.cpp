#include <array>
#include <cmath>

#include "defocus/solvers.hpp"

namespace defocus {

namespace {

using Taps = std::array<double, 3>;

const std::array<Taps, 3>& framelet_taps() {
  static const std::array<Taps, 3> taps{{
      {0.25, 0.5, 0.25},
      {std::sqrt(2.0) / 4.0, 0.0, -std::sqrt(2.0) / 4.0},
      {-0.25, 0.5, -0.25},
  }};
  return taps;
}

// out(r, c) = u(r, (c + s) mod w)
Grid shift_cols(const Grid& u, int s) {
  const int w = static_cast<int>(u.cols());
  s = ((s % w) + w) % w;
  if (s == 0) return u;
  Grid out(u.rows(), u.cols());
  out.leftCols(w - s) = u.rightCols(w - s);
  out.rightCols(s) = u.leftCols(s);
  return out;
}

Grid shift_rows(const Grid& u, int s) {
  const int h = static_cast<int>(u.rows());
  s = ((s % h) + h) % h;
  if (s == 0) return u;
  Grid out(u.rows(), u.cols());
  out.topRows(h - s) = u.bottomRows(h - s);
  out.bottomRows(s) = u.topRows(s);
  return out;
}

// Periodic correlation along one axis; adjoint flips the shift direction.
Grid filter_cols(const Grid& u, const Taps& h, bool adjoint) {
  Grid out = Grid::Zero(u.rows(), u.cols());
  for (int b = 0; b < 3; ++b)
    if (h[static_cast<std::size_t>(b)] != 0.0) out += h[static_cast<std::size_t>(b)] * shift_cols(u, adjoint ? 1 - b : b - 1);
  return out;
}

Grid filter_rows(const Grid& u, const Taps& h, bool adjoint) {
  Grid out = Grid::Zero(u.rows(), u.cols());
  for (int a = 0; a < 3; ++a)
    if (h[static_cast<std::size_t>(a)] != 0.0) out += h[static_cast<std::size_t>(a)] * shift_rows(u, adjoint ? 1 - a : a - 1);
  return out;
}

Coefficients framelet_apply(const Grid& u) {
  const auto& taps = framelet_taps();
  std::array<Grid, 3> by_col;
  for (std::size_t j = 0; j < 3; ++j) by_col[j] = filter_cols(u, taps[j], false);
  Coefficients out;
  out.reserve(9);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) out.push_back(filter_rows(by_col[j], taps[i], false));
  return out;
}

Grid framelet_adjoint(const Coefficients& coeffs) {
  const auto& taps = framelet_taps();
  Grid out = Grid::Zero(coeffs[0].rows(), coeffs[0].cols());
  for (std::size_t j = 0; j < 3; ++j) {
    Grid acc = Grid::Zero(out.rows(), out.cols());
    for (std::size_t i = 0; i < 3; ++i) acc += filter_rows(coeffs[3 * i + j], taps[i], true);
    out += filter_cols(acc, taps[j], true);
  }
  return out;
}

Coefficients difference_apply(const Grid& u) {
  const Eigen::Index h = u.rows(), w = u.cols();
  Grid dx = Grid::Zero(h, w), dy = Grid::Zero(h, w);
  if (w > 1) dx.leftCols(w - 1) = u.rightCols(w - 1) - u.leftCols(w - 1);
  if (h > 1) dy.topRows(h - 1) = u.bottomRows(h - 1) - u.topRows(h - 1);
  return {dx, dy};
}

Grid difference_adjoint(const Coefficients& coeffs) {
  const Grid& dx = coeffs[0];
  const Grid& dy = coeffs[1];
  const Eigen::Index h = dx.rows(), w = dx.cols();
  Grid out = Grid::Zero(h, w);
  if (w > 1) {
    out.rightCols(w - 1) += dx.leftCols(w - 1);
    out.leftCols(w - 1) -= dx.leftCols(w - 1);
  }
  if (h > 1) {
    out.bottomRows(h - 1) += dy.topRows(h - 1);
    out.topRows(h - 1) -= dy.topRows(h - 1);
  }
  return out;
}

}  // namespace

Coefficients SparsifyingTransform::apply(const Grid& u) const {
  if (u.size() == 0) throw Error("transform: empty image");
  return kind_ == TransformKind::framelet ? framelet_apply(u) : difference_apply(u);
}

Grid SparsifyingTransform::adjoint(const Coefficients& coeffs) const {
  if (static_cast<int>(coeffs.size()) != subbands()) throw Error("transform_adjoint: wrong number of subbands");
  for (const Grid& g : coeffs)
    if (g.rows() != coeffs[0].rows() || g.cols() != coeffs[0].cols() || g.size() == 0)
      throw Error("transform_adjoint: subband shape mismatch");
  return kind_ == TransformKind::framelet ? framelet_adjoint(coeffs) : difference_adjoint(coeffs);
}

Coefficients transform_apply(const Grid& u, const SparsifyingTransform& w) { return w.apply(u); }

Grid transform_adjoint(const Coefficients& coeffs, const SparsifyingTransform& w) { return w.adjoint(coeffs); }

double regularizer_l1(const Coefficients& coeffs, const SparsifyingTransform& w) {
  double s = 0.0;
  for (std::size_t b = 0; b < coeffs.size(); ++b)
    if (w.penalized(static_cast<int>(b))) s += coeffs[b].abs().sum();
  return s;
}

}  // namespace defocus

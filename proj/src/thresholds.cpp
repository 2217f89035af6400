#include <cmath>

#include "defocus/solvers.hpp"

namespace defocus {

double soft_threshold(double x, double tau) {
  if (tau < 0.0) throw Error("soft_threshold: negative threshold");
  const double m = std::abs(x) - tau;
  return m > 0.0 ? std::copysign(m, x) : 0.0;
}

Grid soft_threshold(const Grid& x, double tau) {
  if (tau < 0.0) throw Error("soft_threshold: negative threshold");
  return x.sign() * (x.abs() - tau).max(0.0);
}

Coefficients soft_threshold(const Coefficients& x, double tau) {
  Coefficients out;
  out.reserve(x.size());
  for (const Grid& g : x) out.push_back(soft_threshold(g, tau));
  return out;
}

Grid hard_threshold_weighted(const Grid& x, const Grid& weights, double lambda3) {
  if (x.rows() != weights.rows() || x.cols() != weights.cols()) throw Error("hard_threshold: shape mismatch");
  if (weights.size() > 0 && !(weights.minCoeff() >= 0.0)) throw Error("hard_threshold: weights must be nonnegative");
  return (0.5 * x.square() > lambda3 * weights).select(x, 0.0);
}

}  // namespace defocus

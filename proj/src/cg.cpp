#include <cmath>

#include "defocus/solvers.hpp"

namespace defocus {

namespace {
double dot(const Grid& a, const Grid& b) { return (a * b).sum(); }
}  // namespace

CgResult cg_solve(const LinearOperator& op, const Grid& rhs, const Grid& x0, const CgConfig& cfg) {
  if (x0.rows() != rhs.rows() || x0.cols() != rhs.cols()) throw Error("cg_solve: shape mismatch");
  CgResult res;
  res.x = x0;
  const double bnorm = std::sqrt(dot(rhs, rhs));
  if (bnorm == 0.0) {
    res.x = Grid::Zero(rhs.rows(), rhs.cols());
    res.converged = true;
    return res;
  }
  Grid r = rhs - op(res.x);
  double rr = dot(r, r);
  res.relative_residual = std::sqrt(rr) / bnorm;
  if (res.relative_residual <= cfg.tol) {
    res.converged = true;
    return res;
  }
  Grid p = r;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    const Grid ap = op(p);
    const double pap = dot(p, ap);
    if (!(pap > 0.0)) break;  // loss of positive definiteness
    const double step = rr / pap;
    res.x += step * p;
    r -= step * ap;
    const double rr_new = dot(r, r);
    res.iterations = it;
    res.relative_residual = std::sqrt(rr_new) / bnorm;
    if (res.relative_residual <= cfg.tol) {
      res.converged = true;
      break;
    }
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  return res;
}

CgResult cg_solve(const LinearOperator& op, const Grid& rhs, const CgConfig& cfg) {
  return cg_solve(op, rhs, Grid::Zero(rhs.rows(), rhs.cols()), cfg);
}

}  // namespace defocus

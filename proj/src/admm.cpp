#include <cmath>
#include <limits>

#include "defocus/solvers.hpp"

namespace defocus {

namespace {

void check_problem(const Kernel& k, const Grid& c, const Mask& alpha, const Grid& f) {
  if (c.rows() != f.rows() || c.cols() != f.cols() || alpha.height() != f.rows() || alpha.width() != f.cols())
    throw Error("image subproblem: dimension mismatch");
  if (k.size() > f.rows() || k.size() > f.cols()) throw Error("kernel larger than image");
}

}  // namespace

double u_objective(const Grid& u, const Kernel& k, const Grid& c, const Mask& alpha, const Grid& f, double lambda1,
                   const SparsifyingTransform& w) {
  check_problem(k, c, alpha, f);
  const Grid r = forward_masked(u, k.matrix(), alpha) - alpha.grid() * f - c;
  return 0.5 * r.square().sum() + lambda1 * regularizer_l1(w.apply(u), w);
}

AdmmResult admm_solve_u(const Kernel& k, const Grid& c, const Mask& alpha, const Grid& f, double lambda1,
                        const SparsifyingTransform& w, const AdmmConfig& cfg, const Grid* warm_start) {
  check_problem(k, c, alpha, f);
  if (!(cfg.rho > 0.0) || cfg.inner_iters < 1 || cfg.cg_iters < 1) throw Error("admm: invalid configuration");
  const int h = static_cast<int>(f.rows()), wd = static_cast<int>(f.cols());
  const Grid& mask = alpha.grid();

  BlurOperator blur(h, wd, k.size());
  blur.set_kernel(k.matrix());
  auto a_op = [&](const Grid& u) -> Grid { return blur.apply(u) * mask; };
  auto at_op = [&](const Grid& r) -> Grid { return blur.adjoint(Grid(r * mask)); };

  const Grid b = mask * f + c;
  const Grid atb = at_op(b);
  const double tau = lambda1 / cfg.rho;
  const bool tight = w.kind() == TransformKind::framelet;

  auto normal_op = [&](const Grid& u) -> Grid {
    const Grid reg = tight ? u : w.adjoint(w.apply(u));
    return at_op(a_op(u)) + cfg.rho * reg;
  };
  auto objective = [&](const Grid& u, const Coefficients& wu) {
    return 0.5 * (a_op(u) - b).square().sum() + lambda1 * regularizer_l1(wu, w);
  };

  AdmmResult best;
  Grid u = warm_start ? *warm_start : Grid::Zero(h, wd);
  if (u.rows() != h || u.cols() != wd) throw Error("admm: warm start dimension mismatch");
  Coefficients wu = w.apply(u);
  best.u = u;
  best.objective = objective(u, wu);

  Coefficients z = wu;
  Coefficients y(z.size(), Grid::Zero(h, wd));
  const CgConfig cg{cfg.cg_iters, cfg.cg_tol};

  for (int it = 0; it < cfg.inner_iters; ++it) {
    Coefficients zy(z.size());
    for (std::size_t j = 0; j < z.size(); ++j) zy[j] = z[j] - y[j];
    const Grid rhs = atb + cfg.rho * w.adjoint(zy);
    CgResult sol = cg_solve(normal_op, rhs, u, cg);
    if (!sol.converged) ++best.cg_failures;
    u = std::move(sol.x);
    wu = w.apply(u);
    for (std::size_t j = 0; j < z.size(); ++j) {
      const Grid v = wu[j] + y[j];
      z[j] = w.penalized(static_cast<int>(j)) ? soft_threshold(v, tau) : v;
      y[j] = v - z[j];
    }
    const double obj = objective(u, wu);
    if (obj < best.objective) {
      best.objective = obj;
      best.u = u;
    }
  }
  return best;
}

double objective_eval(const Grid& u, const Kernel& k, const Grid& c, const Mask& alpha, const Grid& f, double lambda1,
                      double lambda2, double lambda3, const Grid& weights, const SparsifyingTransform& w) {
  check_problem(k, c, alpha, f);
  if (weights.rows() != f.rows() || weights.cols() != f.cols()) throw Error("objective: weight map mismatch");
  const double data_and_image = u_objective(u, k, c, alpha, f, lambda1, w);
  const double kernel_term = lambda2 * k.matrix().squaredNorm();
  const double residual_term = lambda3 * (c != 0.0).select(weights, 0.0).sum();
  return data_and_image + kernel_term + residual_term;
}

}  // namespace defocus

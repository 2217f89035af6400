#include <cmath>

#include "defocus/solvers.hpp"

namespace defocus {

namespace {

void check_shapes(const Grid& u, const Grid& c, const Mask& alpha, const Grid& f) {
  if (u.rows() != f.rows() || u.cols() != f.cols() || c.rows() != f.rows() || c.cols() != f.cols() ||
      alpha.height() != f.rows() || alpha.width() != f.cols())
    throw Error("kernel subproblem: dimension mismatch");
}

}  // namespace

double kernel_objective(const Grid& u, const Grid& c, const Mask& alpha, const Grid& f, double lambda2,
                        const Matrix& k) {
  check_shapes(u, c, alpha, f);
  const Grid r = forward_masked(u, k, alpha) - alpha.grid() * f - c;
  return r.square().sum() + lambda2 * k.squaredNorm();
}

Matrix kernel_objective_gradient(const Grid& u, const Grid& c, const Mask& alpha, const Grid& f, double lambda2,
                                 const Matrix& k) {
  check_shapes(u, c, alpha, f);
  const Grid r = alpha.grid() * (forward_masked(u, k, alpha) - alpha.grid() * f - c);
  return gradient_wrt_kernel(u, r, static_cast<int>(k.rows())) + 2.0 * lambda2 * k;
}

PgaResult pga_solve_k(const Grid& u, const Grid& c, const Mask& alpha, const Grid& f, double lambda2,
                      const Kernel& k_init, const FeasibleSetParams& params, const PgaConfig& cfg, bool keep_trace) {
  check_shapes(u, c, alpha, f);
  if (cfg.max_iters < 1 || !(cfg.initial_step > 0.0)) throw Error("pga: invalid configuration");
  const int d = k_init.size();
  const Grid& mask = alpha.grid();
  const Grid b = mask * f + c;
  const KernelOperator op(u, d);

  const double eta0 = std::min(cfg.initial_step, 1.0 / (2.0 * u.square().sum() + 2.0 * lambda2));

  PgaResult res;
  res.k = k_init;
  if (keep_trace) res.trace.push_back(res.k);
  for (int n = 0; n < cfg.max_iters; ++n) {
    const Matrix& k = res.k.matrix();
    const Grid r = op.blur(k) * mask - b;
    const double eta = eta0 / static_cast<double>(n + 1);
    const Matrix g = op.gradient(Grid(r * mask)) + 2.0 * lambda2 * k;
    Kernel next;
    try {
      next = project_omega(k - eta * g, params);
    } catch (const Error&) {
      res.degenerate = true;
      break;
    }
    const double moved = (next.matrix() - k).norm();
    res.k = std::move(next);
    res.iterations = n + 1;
    if (keep_trace) res.trace.push_back(res.k);
    if (moved <= cfg.stop_tol) break;
  }
  return res;
}

}  // namespace defocus

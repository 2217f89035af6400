#pragma once

#include <functional>
#include <string>
#include <vector>

#include "defocus/conv.hpp"
#include "defocus/image.hpp"
#include "defocus/kernel_constraints.hpp"

namespace defocus {

// ---------------------------------------------------------------------------
// Sparsifying transforms

enum class TransformKind {
  finite_difference,  ///< forward differences along x and y, zero at the far edge
  framelet,           ///< undecimated piecewise-linear spline framelet, periodic
};

/// Stack of subband images, one per analysis filter.
using Coefficients = std::vector<Grid>;

class SparsifyingTransform {
 public:
  explicit SparsifyingTransform(TransformKind kind = TransformKind::framelet) : kind_(kind) {}

  TransformKind kind() const noexcept { return kind_; }
  int subbands() const noexcept { return kind_ == TransformKind::framelet ? 9 : 2; }
  /// The framelet low-pass band (index 0) carries image intensity and is not
  /// penalized by the l1 regularizer.
  bool penalized(int band) const noexcept { return kind_ != TransformKind::framelet || band != 0; }

  Coefficients apply(const Grid& u) const;
  Grid adjoint(const Coefficients& coeffs) const;

 private:
  TransformKind kind_;
};

Coefficients transform_apply(const Grid& u, const SparsifyingTransform& w);
Grid transform_adjoint(const Coefficients& coeffs, const SparsifyingTransform& w);

/// Sum of |coefficients| over the penalized subbands.
double regularizer_l1(const Coefficients& coeffs, const SparsifyingTransform& w);

// ---------------------------------------------------------------------------
// Thresholding

double soft_threshold(double x, double tau);
Grid soft_threshold(const Grid& x, double tau);
Coefficients soft_threshold(const Coefficients& x, double tau);

/// Exact minimizer of 1/2 (x - c)^2 + lambda3 * weights * [c != 0] per entry:
/// keeps x[r] when x[r]^2 / 2 > lambda3 * weights[r], else 0 (ties go to zero).
Grid hard_threshold_weighted(const Grid& x, const Grid& weights, double lambda3);

// ---------------------------------------------------------------------------
// Conjugate gradient

using LinearOperator = std::function<Grid(const Grid&)>;

struct CgConfig {
  int max_iters = 25;
  double tol = 1e-6;  ///< on ||r|| / ||rhs||
};

struct CgResult {
  Grid x;
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

/// Solves op(x) = rhs for symmetric positive definite op, starting from x0.
CgResult cg_solve(const LinearOperator& op, const Grid& rhs, const Grid& x0, const CgConfig& cfg);
CgResult cg_solve(const LinearOperator& op, const Grid& rhs, const CgConfig& cfg);

// ---------------------------------------------------------------------------
// Image subproblem: min_u 1/2 ||alpha.(k conv u) - alpha.f - c||^2 + lambda1 ||W u||_1

struct AdmmConfig {
  double rho = 0.05;
  int inner_iters = 30;
  int cg_iters = 25;
  double cg_tol = 1e-6;
};

struct AdmmResult {
  Grid u;
  double objective = 0.0;
  int cg_failures = 0;  ///< inner CG solves that hit the iteration cap
};

double u_objective(const Grid& u, const Kernel& k, const Grid& c, const Mask& alpha, const Grid& f, double lambda1,
                   const SparsifyingTransform& w);

/// ADMM on the splitting z = W u with a scaled dual. Returns the best iterate
/// seen, so the objective never exceeds its value at the warm start.
AdmmResult admm_solve_u(const Kernel& k, const Grid& c, const Mask& alpha, const Grid& f, double lambda1,
                        const SparsifyingTransform& w, const AdmmConfig& cfg, const Grid* warm_start = nullptr);

// ---------------------------------------------------------------------------
// Kernel subproblem: min_k ||alpha.(u conv k) - alpha.f - c||^2 + lambda2 ||k||^2, k in Omega

struct PgaConfig {
  /// Upper bound on the first step; the Lipschitz estimate 1/(2||u||^2 + 2 lambda2) wins when smaller.
  double initial_step = 1e-3;
  int max_iters = 50;
  double stop_tol = 1e-7;  ///< Frobenius change between iterates
};

double kernel_objective(const Grid& u, const Grid& c, const Mask& alpha, const Grid& f, double lambda2,
                        const Matrix& k);
Matrix kernel_objective_gradient(const Grid& u, const Grid& c, const Mask& alpha, const Grid& f, double lambda2,
                                 const Matrix& k);

struct PgaResult {
  Kernel k;
  int iterations = 0;
  bool degenerate = false;  ///< projection failed; k is the last feasible iterate
  std::vector<Kernel> trace;  ///< every iterate, when requested
};

/// Projected gradient with step eta_n = eta_0 / (n + 1).
PgaResult pga_solve_k(const Grid& u, const Grid& c, const Mask& alpha, const Grid& f, double lambda2,
                      const Kernel& k_init, const FeasibleSetParams& params, const PgaConfig& cfg,
                      bool keep_trace = false);

// ---------------------------------------------------------------------------

/// Full layer objective: 1/2 ||alpha.(k conv u) - alpha.f - c||^2 + lambda1 ||W u||_1
/// + lambda2 ||k||^2 + lambda3 sum_r weights[r] [c[r] != 0].
double objective_eval(const Grid& u, const Kernel& k, const Grid& c, const Mask& alpha, const Grid& f, double lambda1,
                      double lambda2, double lambda3, const Grid& weights, const SparsifyingTransform& w);

}  // namespace defocus

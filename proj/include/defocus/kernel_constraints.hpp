#pragma once

#include <optional>

#include <Eigen/Core>

#include "defocus/conv.hpp"

namespace defocus {

// Dihedral actions on square matrices. Each generator is an involution.
Matrix transpose(const Matrix& m);
Matrix flip_rows(const Matrix& m);  ///< M'(i, j) = M(m - 1 - i, j)
Matrix flip_cols(const Matrix& m);  ///< M'(i, j) = M(i, n - 1 - j)

/// Orbit average over the eight dihedral actions; the orthogonal projection onto
/// matrices invariant under transpose and both flips. Orbit members receive
/// bit-identical values.
Matrix symmetrize(const Matrix& m);

/// Largest entrywise deviation of m from its images under transpose, flip_rows,
/// flip_cols, (M^T) row-flipped and (M^T) column-flipped.
double symmetry_residual(const Matrix& m);

/// Singular values in decreasing order.
Eigen::VectorXd singular_values(const Matrix& m);

inline constexpr double kDefaultRankRatio = 1.0 / 30.0;

/// Number of singular values >= ratio * sigma_max; 0 for the zero matrix.
int effective_rank(const Matrix& m, double ratio = kDefaultRankRatio);

/// Best rank-r approximation (Eckart-Young).
Matrix rank_truncate(const Matrix& m, int rank);

/// Clamp at zero, then divide by the sum. Throws if nothing positive remains.
Matrix simplex_normalize(const Matrix& m);

struct FeasibleSetParams {
  /// Fixed rank cap; when empty the cap is recomputed from each input by the ratio rule
  /// and then held fixed through the passes of that projection.
  std::optional<int> rank_cap;
  double rank_threshold_ratio = kDefaultRankRatio;
  bool low_rank = true;  ///< ablation switch for the rank step
  bool symmetry = true;  ///< ablation switch for the symmetry step
  /// The rank/symmetry/positivity chain is repeated until the iterate stops moving.
  int max_passes = 1000;
  double pass_tolerance = 1e-14;
};

/// Rank cap used for m under params (>= 1).
int rank_cap_for(const Matrix& m, const FeasibleSetParams& params);

/// Heuristic projection onto the kernel feasible set: truncate rank, symmetrize,
/// clamp negatives, normalize; repeated to a fixed point.
/// Throws Error when an intermediate has no positive entry.
Kernel project_omega(const Matrix& m, const FeasibleSetParams& params = {});

struct MembershipReport {
  double min_entry = 0.0;
  double sum_error = 0.0;
  double symmetry_error = 0.0;
  int rank = 0;

  bool feasible(double tol) const { return min_entry >= 0.0 && sum_error <= tol && symmetry_error <= tol; }
};

MembershipReport membership(const Matrix& k, double ratio = kDefaultRankRatio);

}  // namespace defocus

#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "defocus/conv.hpp"
#include "defocus/image.hpp"
#include "defocus/kernel_constraints.hpp"
#include "defocus/solvers.hpp"

namespace defocus {

// ---------------------------------------------------------------------------
// Parametric kernel families

/// Antialiased disk: fraction of a 4x4 subpixel grid within `radius` of the
/// center, normalized. Radius below the first subsample gives the delta kernel.
Kernel disk_kernel(double radius, int d);

/// Normalized outer product of sampled 1-D Gaussians (rank 1).
Kernel gaussian_kernel(double sigma, int d);

/// Uniform disk spanning `diameter` pixel centers: disk_kernel((diameter - 1) / 2, d).
Kernel pillbox_kernel(double diameter, int d);

/// Pupil aperture (pixel centers within diameter / 2) times a centered Gaussian.
Kernel gaussian_pupil_kernel(double diameter, double sigma, int d);

/// Pearson correlation of the kernel entries.
double kernel_correlation(const Matrix& a, const Matrix& b);

// ---------------------------------------------------------------------------

struct SolverConfig {
  int kernel_size = 31;
  int outer_iters = 20;
  double lambda1 = 0.005;
  double lambda3 = 0.01;
  /// Overrides the value derived from the initial kernel.
  std::optional<double> lambda2;
  double lambda2_min = 1e4;
  double lambda2_max = 1.5e6;
  bool use_c_term = true;  ///< false is the same as lambda3 = infinity
  TransformKind transform = TransformKind::framelet;
  AdmmConfig admm{};
  PgaConfig pga{};
  FeasibleSetParams feasible{};
  double disk_radius_min = 1.0;
  double disk_radius_max = 14.0;
  int init_admm_iters = 10;
  /// Image weight of the short deblurs in the disk search.
  double init_lambda1 = 0.001;

  /// Throws Error on violated invariants (even kernel size, nonpositive weights, ...).
  void validate() const;
};

struct LayerProblem {
  Image f;  ///< full input image (1 or 3 channels)
  Mask alpha;
  SolverConfig config;
};

struct KernelInit {
  Kernel k;
  double radius = 0.0;
  double lambda2 = 0.0;
  std::vector<std::pair<double, double>> scores;  ///< (radius, tiles voting for it); coarse pass first
};

struct LayerSolution {
  Image u;
  Kernel k;
  Grid c;
  Grid weights;
  double lambda2 = 0.0;
  double init_radius = 0.0;
  std::vector<double> objective_trace;
  std::vector<std::string> warnings;
};

/// lambda2 = (-50 ||k||_F + 15) * 1e5, clamped to [lo, hi].
double lambda2_from_kernel(const Kernel& k, double lo, double hi);

/// Disk-radius search: deblur with each candidate disk; every textured 16x16
/// tile inside the mask votes for the radius whose result has the smallest
/// ||grad u||_1 / ||grad u||_2 there, and the median vote wins. Integer radii
/// first, then +-0.5 around the winner. The unknown extends kernel_size / 2
/// pixels past the image border.
KernelInit init_kernel(const LayerProblem& problem);

/// exp(-500 |alpha.(k conv u) - alpha.f|).
Grid weight_map(const Grid& u, const Kernel& k, const Mask& alpha, const Grid& f);

/// Alternating u / k / c minimization for one layer on the luminance channel,
/// on the same extended domain as init_kernel. Outputs are cropped to the image.
LayerSolution solve_layer(const LayerProblem& problem);

}  // namespace defocus

#include <cmath>

#include "defocus/blind_deblur.hpp"

namespace defocus {

namespace {

void check_size(int d) {
  if (d < 1 || d % 2 == 0) throw Error("kernel size must be a positive odd integer");
}

}  // namespace

Kernel disk_kernel(double radius, int d) {
  check_size(d);
  if (!(radius >= 0.0)) throw Error("disk radius must be nonnegative");
  if (2.0 * radius + 1.0 > d + 1e-12) throw Error("disk radius too large for kernel size");
  constexpr int kSub = 4;
  const int c = d / 2;
  const double r2 = radius * radius;
  Matrix m = Matrix::Zero(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      int inside = 0;
      for (int a = 0; a < kSub; ++a)
        for (int b = 0; b < kSub; ++b) {
          const double y = i - c + (a + 0.5) / kSub - 0.5;
          const double x = j - c + (b + 0.5) / kSub - 0.5;
          if (x * x + y * y <= r2) ++inside;
        }
      m(i, j) = inside;
    }
  if (m.sum() == 0.0) return Kernel::delta(d);
  return Kernel(m / m.sum());
}

Kernel gaussian_kernel(double sigma, int d) {
  check_size(d);
  if (!(sigma > 0.0)) throw Error("gaussian sigma must be positive");
  const int c = d / 2;
  Eigen::VectorXd g(d);
  for (int i = 0; i < d; ++i) g(i) = std::exp(-0.5 * (i - c) * (i - c) / (sigma * sigma));
  g /= g.sum();
  return Kernel(g * g.transpose());
}

Kernel pillbox_kernel(double diameter, int d) {
  if (!(diameter >= 1.0)) throw Error("pillbox diameter must be >= 1");
  return disk_kernel(0.5 * (diameter - 1.0), d);
}

Kernel gaussian_pupil_kernel(double diameter, double sigma, int d) {
  check_size(d);
  if (!(sigma > 0.0)) throw Error("gaussian sigma must be positive");
  if (!(diameter > 0.0) || diameter > d + 1e-12) throw Error("pupil diameter must lie in (0, d]");
  const int c = d / 2;
  const double r2 = 0.25 * diameter * diameter;
  Matrix m = Matrix::Zero(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      const double q = static_cast<double>((i - c) * (i - c) + (j - c) * (j - c));
      if (q <= r2) m(i, j) = std::exp(-0.5 * q / (sigma * sigma));
    }
  return Kernel(m / m.sum());
}

double kernel_correlation(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error("kernel_correlation: size mismatch");
  const Eigen::ArrayXXd x = a.array() - a.mean();
  const Eigen::ArrayXXd y = b.array() - b.mean();
  const double den = std::sqrt(x.square().sum() * y.square().sum());
  if (den == 0.0) return 0.0;
  return (x * y).sum() / den;
}

}  // namespace defocus

#pragma once

#include <complex>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "defocus/image.hpp"

namespace defocus {

using Matrix = Eigen::MatrixXd;

/// Blur kernel: odd-sized square, nonnegative, entries summing to 1.
class Kernel {
 public:
  Kernel() = default;
  /// Validates the invariants (sum within 1e-12, after which it is renormalized exactly).
  explicit Kernel(Matrix m);
  static Kernel delta(int d);
  static Kernel uniform(int d);

  int size() const noexcept { return static_cast<int>(m_.rows()); }
  int center() const noexcept { return size() / 2; }
  const Matrix& matrix() const noexcept { return m_; }
  double operator()(int r, int c) const { return m_(r, c); }

 private:
  Matrix m_;
};

/// Out-of-domain sample rule for convolution.
enum class Boundary {
  reflect,  ///< half-sample symmetric extension: x[-1] = x[0]
  zero,
};

// The functions below accept any d x d matrix (d odd); a Kernel converts via matrix().
// out(p) = sum_q k(q) img(p - q + center).

Grid convolve(const Grid& img, const Matrix& k, Boundary boundary = Boundary::reflect);

/// Convolution with the 180-degree rotated kernel. With Boundary::zero this is
/// the exact adjoint of convolve.
Grid correlate(const Grid& img, const Matrix& k, Boundary boundary = Boundary::reflect);

/// alpha .* convolve(u, k) with zero boundary.
Grid forward_masked(const Grid& u, const Matrix& k, const Mask& alpha);

/// correlate(alpha .* r, k) with zero boundary; adjoint of forward_masked.
Grid adjoint_masked(const Grid& r, const Matrix& k, const Mask& alpha);

/// G(q) = 2 sum_p residual(p) u(p - q + center), zero boundary: the gradient of
/// ||alpha .* (u conv k) - b||^2 with respect to k when residual is the masked residual.
Matrix gradient_wrt_kernel(const Grid& u, const Grid& residual, int d);

namespace detail {

/// Real 2-D FFT of a fixed padded size using FFTW. Not safe for concurrent use
/// of a single instance.
class Fft2 {
 public:
  Fft2(int rows, int cols);
  ~Fft2();
  Fft2(const Fft2&) = delete;
  Fft2& operator=(const Fft2&) = delete;

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  int spectrum_cols() const noexcept { return cols_ / 2 + 1; }

  using Spectrum = std::vector<std::complex<double>>;

  /// Zero-pads src (placed at the origin) to the transform size.
  Spectrum forward(const Grid& src) const;
  Spectrum forward(const Matrix& src) const;
  /// Unnormalized inverse; caller divides by rows * cols.
  Grid inverse(const Spectrum& spec) const;

 private:
  int rows_;
  int cols_;
  double* real_;
  void* cplx_;
  void* plan_fwd_;
  void* plan_inv_;
};

/// Smallest n' >= n whose only prime factors are 2, 3, 5, 7.
int fft_friendly_size(int n);

}  // namespace detail

/// Zero-boundary convolution operator for a fixed image shape and kernel size,
/// backed by FFTs. The kernel spectrum is cached between calls.
class BlurOperator {
 public:
  BlurOperator(int rows, int cols, int kernel_size);
  void set_kernel(const Matrix& k);

  Grid apply(const Grid& u) const;    ///< convolve(u, k, zero)
  Grid adjoint(const Grid& v) const;  ///< correlate(v, k, zero)

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  int kernel_size() const noexcept { return d_; }

 private:
  int rows_;
  int cols_;
  int d_;
  std::shared_ptr<detail::Fft2> fft_;
  detail::Fft2::Spectrum kspec_;
};

/// Kernel-side operator for a fixed sharp image u: k -> u conv k and the
/// kernel gradient for a residual, both zero-boundary.
class KernelOperator {
 public:
  KernelOperator(const Grid& u, int kernel_size);

  Grid blur(const Matrix& k) const;
  Matrix gradient(const Grid& residual) const;

 private:
  int rows_;
  int cols_;
  int d_;
  std::shared_ptr<detail::Fft2> fft_;
  detail::Fft2::Spectrum uspec_;
};

}  // namespace defocus

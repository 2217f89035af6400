#include "defocus/conv.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>

namespace defocus {

namespace {

// The FFTW planner is not thread-safe; execution of distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

void check_kernel_shape(const Matrix& k) {
  if (k.rows() != k.cols() || k.rows() % 2 == 0 || k.rows() < 1)
    throw Error("kernel must be square with odd size");
}

void check_fits(const Grid& img, const Matrix& k) {
  check_kernel_shape(k);
  if (k.rows() > img.rows() || k.rows() > img.cols()) throw Error("kernel larger than image");
}

// Direct sums are used below this many multiply-adds.
constexpr double kDirectWork = 1 << 18;

bool use_direct(const Grid& img, long d) {
  return static_cast<double>(img.size()) * static_cast<double>(d * d) <= kDirectWork;
}

Grid convolve_zero_direct(const Grid& u, const Matrix& k) {
  const int h = static_cast<int>(u.rows()), w = static_cast<int>(u.cols());
  const int d = static_cast<int>(k.rows()), c = d / 2;
  Grid out = Grid::Zero(h, w);
  for (int qr = 0; qr < d; ++qr)
    for (int qc = 0; qc < d; ++qc) {
      const double kv = k(qr, qc);
      if (kv == 0.0) continue;
      // out(p) += kv * u(p - q + c)
      const int dr = c - qr, dc = c - qc;
      const int r0 = std::max(0, -dr), r1 = std::min(h, h - dr);
      const int c0 = std::max(0, -dc), c1 = std::min(w, w - dc);
      if (r0 >= r1 || c0 >= c1) continue;
      out.block(r0, c0, r1 - r0, c1 - c0) += kv * u.block(r0 + dr, c0 + dc, r1 - r0, c1 - c0);
    }
  return out;
}

Matrix rotate180(const Matrix& k) { return k.reverse(); }

Grid convolve_zero(const Grid& u, const Matrix& k) {
  if (use_direct(u, k.rows())) return convolve_zero_direct(u, k);
  BlurOperator op(static_cast<int>(u.rows()), static_cast<int>(u.cols()), static_cast<int>(k.rows()));
  op.set_kernel(k);
  return op.apply(u);
}

Grid correlate_zero(const Grid& v, const Matrix& k) {
  if (use_direct(v, k.rows())) return convolve_zero_direct(v, rotate180(k));
  BlurOperator op(static_cast<int>(v.rows()), static_cast<int>(v.cols()), static_cast<int>(k.rows()));
  op.set_kernel(k);
  return op.adjoint(v);
}

int reflect_index(int i, int n) {
  // Half-sample symmetric: ... x1 x0 | x0 x1 ... x_{n-1} | x_{n-1} x_{n-2} ...
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

Grid reflect_pad(const Grid& img, int pad) {
  const int h = static_cast<int>(img.rows()), w = static_cast<int>(img.cols());
  Grid out(h + 2 * pad, w + 2 * pad);
  for (int r = 0; r < h + 2 * pad; ++r) {
    const int sr = reflect_index(r - pad, h);
    for (int c = 0; c < w + 2 * pad; ++c) out(r, c) = img(sr, reflect_index(c - pad, w));
  }
  return out;
}

void check_mask(const Grid& img, const Mask& alpha) {
  if (alpha.height() != img.rows() || alpha.width() != img.cols()) throw Error("mask dimension mismatch");
}

}  // namespace

// ---------------------------------------------------------------------------

Kernel::Kernel(Matrix m) : m_(std::move(m)) {
  check_kernel_shape(m_);
  if (!m_.allFinite() || m_.minCoeff() < 0.0) throw Error("kernel entries must be nonnegative");
  const double s = m_.sum();
  if (std::abs(s - 1.0) > 1e-9) throw Error("kernel entries must sum to 1");
  m_ /= s;
}

Kernel Kernel::delta(int d) {
  Matrix m = Matrix::Zero(d, d);
  m(d / 2, d / 2) = 1.0;
  return Kernel(std::move(m));
}

Kernel Kernel::uniform(int d) { return Kernel(Matrix::Constant(d, d, 1.0 / (static_cast<double>(d) * d))); }

Grid convolve(const Grid& img, const Matrix& k, Boundary boundary) {
  check_fits(img, k);
  if (boundary == Boundary::zero) return convolve_zero(img, k);
  const int c = static_cast<int>(k.rows()) / 2;
  const Grid full = convolve_zero(reflect_pad(img, c), k);
  return full.block(c, c, img.rows(), img.cols());
}

Grid correlate(const Grid& img, const Matrix& k, Boundary boundary) {
  check_fits(img, k);
  if (boundary == Boundary::zero) return correlate_zero(img, k);
  return convolve(img, rotate180(k), Boundary::reflect);
}

Grid forward_masked(const Grid& u, const Matrix& k, const Mask& alpha) {
  check_mask(u, alpha);
  return convolve(u, k, Boundary::zero) * alpha.grid();
}

Grid adjoint_masked(const Grid& r, const Matrix& k, const Mask& alpha) {
  check_mask(r, alpha);
  return correlate(Grid(r * alpha.grid()), k, Boundary::zero);
}

Matrix gradient_wrt_kernel(const Grid& u, const Grid& residual, int d) {
  if (u.rows() != residual.rows() || u.cols() != residual.cols()) throw Error("gradient: dimension mismatch");
  if (d < 1 || d % 2 == 0) throw Error("kernel size must be odd");
  if (d > u.rows() || d > u.cols()) throw Error("kernel size exceeds image size");
  if (!use_direct(u, d)) return KernelOperator(u, d).gradient(residual);

  const int h = static_cast<int>(u.rows()), w = static_cast<int>(u.cols()), c = d / 2;
  Matrix g(d, d);
  for (int qr = 0; qr < d; ++qr)
    for (int qc = 0; qc < d; ++qc) {
      // sum_p residual(p) u(p - q + c)
      const int dr = c - qr, dc = c - qc;
      const int r0 = std::max(0, -dr), r1 = std::min(h, h - dr);
      const int c0 = std::max(0, -dc), c1 = std::min(w, w - dc);
      double s = 0.0;
      if (r0 < r1 && c0 < c1)
        s = (residual.block(r0, c0, r1 - r0, c1 - c0) * u.block(r0 + dr, c0 + dc, r1 - r0, c1 - c0)).sum();
      g(qr, qc) = 2.0 * s;
    }
  return g;
}

// ---------------------------------------------------------------------------

namespace detail {

int fft_friendly_size(int n) {
  for (int m = std::max(n, 1);; ++m) {
    int r = m;
    for (int p : {2, 3, 5, 7})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

Fft2::Fft2(int rows, int cols) : rows_(rows), cols_(cols) {
  const std::size_t nreal = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  const std::size_t ncplx = static_cast<std::size_t>(rows) * static_cast<std::size_t>(spectrum_cols());
  real_ = fftw_alloc_real(nreal);
  auto* cplx = fftw_alloc_complex(ncplx);
  cplx_ = cplx;
  std::lock_guard<std::mutex> lock(planner_mutex());
  plan_fwd_ = fftw_plan_dft_r2c_2d(rows, cols, real_, cplx, FFTW_ESTIMATE);
  plan_inv_ = fftw_plan_dft_c2r_2d(rows, cols, cplx, real_, FFTW_ESTIMATE);
}

Fft2::~Fft2() {
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
    fftw_destroy_plan(static_cast<fftw_plan>(plan_inv_));
  }
  fftw_free(real_);
  fftw_free(cplx_);
}

Fft2::Spectrum Fft2::forward(const Grid& src) const {
  std::fill(real_, real_ + static_cast<std::size_t>(rows_) * cols_, 0.0);
  for (Eigen::Index r = 0; r < src.rows(); ++r)
    for (Eigen::Index c = 0; c < src.cols(); ++c) real_[r * cols_ + c] = src(r, c);
  fftw_execute(static_cast<fftw_plan>(plan_fwd_));
  const auto* out = reinterpret_cast<const std::complex<double>*>(cplx_);
  return Spectrum(out, out + static_cast<std::size_t>(rows_) * spectrum_cols());
}

Fft2::Spectrum Fft2::forward(const Matrix& src) const {
  std::fill(real_, real_ + static_cast<std::size_t>(rows_) * cols_, 0.0);
  for (Eigen::Index r = 0; r < src.rows(); ++r)
    for (Eigen::Index c = 0; c < src.cols(); ++c) real_[r * cols_ + c] = src(r, c);
  fftw_execute(static_cast<fftw_plan>(plan_fwd_));
  const auto* out = reinterpret_cast<const std::complex<double>*>(cplx_);
  return Spectrum(out, out + static_cast<std::size_t>(rows_) * spectrum_cols());
}

Grid Fft2::inverse(const Spectrum& spec) const {
  std::copy(spec.begin(), spec.end(), reinterpret_cast<std::complex<double>*>(cplx_));
  fftw_execute(static_cast<fftw_plan>(plan_inv_));
  return Eigen::Map<const Grid>(real_, rows_, cols_);
}

}  // namespace detail

namespace {

// Reads out(p) = full[(p + shift) mod size] for p in [0, rows) x [0, cols), scaled.
Grid gather(const Grid& full, int rows, int cols, int shift, double scale) {
  const int pr = static_cast<int>(full.rows()), pc = static_cast<int>(full.cols());
  Grid out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const int sr = ((r + shift) % pr + pr) % pr;
    for (int c = 0; c < cols; ++c) out(r, c) = scale * full(sr, ((c + shift) % pc + pc) % pc);
  }
  return out;
}

}  // namespace

BlurOperator::BlurOperator(int rows, int cols, int kernel_size) : rows_(rows), cols_(cols), d_(kernel_size) {
  if (kernel_size < 1 || kernel_size % 2 == 0) throw Error("kernel size must be odd");
  // A padding of half the kernel keeps both the forward and adjoint outputs alias-free.
  const int c = kernel_size / 2;
  fft_ = std::make_shared<detail::Fft2>(detail::fft_friendly_size(rows + c), detail::fft_friendly_size(cols + c));
}

void BlurOperator::set_kernel(const Matrix& k) {
  if (k.rows() != d_ || k.cols() != d_) throw Error("BlurOperator: kernel size mismatch");
  kspec_ = fft_->forward(k);
}

Grid BlurOperator::apply(const Grid& u) const {
  if (u.rows() != rows_ || u.cols() != cols_) throw Error("BlurOperator: image size mismatch");
  auto spec = fft_->forward(u);
  for (std::size_t i = 0; i < spec.size(); ++i) spec[i] *= kspec_[i];
  const double scale = 1.0 / (static_cast<double>(fft_->rows()) * fft_->cols());
  return gather(fft_->inverse(spec), rows_, cols_, d_ / 2, scale);
}

Grid BlurOperator::adjoint(const Grid& v) const {
  if (v.rows() != rows_ || v.cols() != cols_) throw Error("BlurOperator: image size mismatch");
  auto spec = fft_->forward(v);
  for (std::size_t i = 0; i < spec.size(); ++i) spec[i] *= std::conj(kspec_[i]);
  const double scale = 1.0 / (static_cast<double>(fft_->rows()) * fft_->cols());
  return gather(fft_->inverse(spec), rows_, cols_, -(d_ / 2), scale);
}

KernelOperator::KernelOperator(const Grid& u, int kernel_size)
    : rows_(static_cast<int>(u.rows())), cols_(static_cast<int>(u.cols())), d_(kernel_size) {
  if (kernel_size < 1 || kernel_size % 2 == 0) throw Error("kernel size must be odd");
  const int c = kernel_size / 2;
  fft_ = std::make_shared<detail::Fft2>(detail::fft_friendly_size(rows_ + c), detail::fft_friendly_size(cols_ + c));
  uspec_ = fft_->forward(u);
}

Grid KernelOperator::blur(const Matrix& k) const {
  if (k.rows() != d_ || k.cols() != d_) throw Error("KernelOperator: kernel size mismatch");
  auto spec = fft_->forward(k);
  for (std::size_t i = 0; i < spec.size(); ++i) spec[i] *= uspec_[i];
  const double scale = 1.0 / (static_cast<double>(fft_->rows()) * fft_->cols());
  return gather(fft_->inverse(spec), rows_, cols_, d_ / 2, scale);
}

Matrix KernelOperator::gradient(const Grid& residual) const {
  if (residual.rows() != rows_ || residual.cols() != cols_) throw Error("KernelOperator: residual size mismatch");
  auto spec = fft_->forward(residual);
  for (std::size_t i = 0; i < spec.size(); ++i) spec[i] *= std::conj(uspec_[i]);
  const Grid xc = fft_->inverse(spec);
  // xc[s] = sum_p residual(p) u(p - s); G(q) = 2 xc[q - c].
  const double scale = 2.0 / (static_cast<double>(fft_->rows()) * fft_->cols());
  const int c = d_ / 2, pr = fft_->rows(), pc = fft_->cols();
  Matrix g(d_, d_);
  for (int qr = 0; qr < d_; ++qr)
    for (int qc = 0; qc < d_; ++qc) g(qr, qc) = scale * xc(((qr - c) % pr + pr) % pr, ((qc - c) % pc + pc) % pc);
  return g;
}

}  // namespace defocus

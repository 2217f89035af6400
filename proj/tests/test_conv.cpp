#include <doctest.h>

#include "defocus/conv.hpp"
#include "test_support.hpp"

using namespace defocus;
using testing::brute_convolve;
using testing::inner;

TEST_CASE("kernel invariants") {
  CHECK(Kernel::delta(5)(2, 2) == 1.0);
  CHECK(Kernel::delta(5).matrix().sum() == 1.0);
  CHECK(Kernel::uniform(3)(0, 0) == doctest::Approx(1.0 / 9.0));
  CHECK_THROWS_AS(Kernel(Matrix::Constant(2, 2, 0.25)), Error);
  CHECK_THROWS_AS(Kernel(Matrix::Constant(3, 3, 0.5)), Error);
  Matrix neg = Matrix::Zero(3, 3);
  neg(1, 1) = 1.5;
  neg(0, 0) = -0.5;
  CHECK_THROWS_AS(Kernel{neg}, Error);
}

TEST_CASE("delta and constant images") {
  std::mt19937_64 rng(1);
  const Grid img = testing::random_grid(rng, 9, 11);
  for (Boundary b : {Boundary::reflect, Boundary::zero}) {
    CHECK((convolve(img, Kernel::delta(5).matrix(), b) == img).all());
    CHECK((correlate(img, Kernel::delta(5).matrix(), b) == img).all());
  }
  const Matrix k = testing::random_matrix(rng, 5, 5, 0.0, 1.0);
  const Grid flat = Grid::Constant(12, 10, 0.7);
  CHECK((convolve(flat, k / k.sum()) - 0.7).abs().maxCoeff() < 1e-14);
}

TEST_CASE("3x3 box sum") {
  Grid img(3, 3);
  img << 1, 2, 3, 4, 5, 6, 7, 8, 9;
  const Grid out = convolve(img, Kernel::uniform(3).matrix(), Boundary::zero);
  CHECK(out(1, 1) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(out(0, 0) == doctest::Approx(12.0 / 9.0).epsilon(1e-15));
}

TEST_CASE("convolve matches the defining sum on both paths") {
  std::mt19937_64 rng(2);
  struct Shape {
    int rows, cols, d;
  };
  // Small shapes take the direct loop, the larger ones the FFT.
  for (const Shape s : {Shape{7, 5, 3}, Shape{16, 13, 5}, Shape{64, 70, 9}, Shape{97, 80, 15}}) {
    const Grid img = testing::random_grid(rng, s.rows, s.cols);
    const Matrix k = testing::random_matrix(rng, s.d, s.d);
    for (bool reflect : {true, false}) {
      const Boundary b = reflect ? Boundary::reflect : Boundary::zero;
      CAPTURE(s.rows);
      CAPTURE(reflect);
      CHECK((convolve(img, k, b) - brute_convolve(img, k, reflect)).abs().maxCoeff() < 1e-11);
      CHECK((correlate(img, k, b) - brute_convolve(img, testing::rotate180(k), reflect)).abs().maxCoeff() < 1e-11);
    }
  }
}

TEST_CASE("kernel shape errors") {
  const Grid img = Grid::Zero(5, 5);
  CHECK_THROWS_AS(convolve(img, Matrix::Zero(2, 2)), Error);
  CHECK_THROWS_AS(convolve(img, Matrix::Zero(3, 5)), Error);
  CHECK_THROWS_AS(convolve(img, Matrix::Zero(7, 7)), Error);
}

TEST_CASE("symmetric kernel correlates like it convolves") {
  std::mt19937_64 rng(3);
  Matrix k = testing::random_matrix(rng, 5, 5, 0.0, 1.0);
  k = k + testing::rotate180(k);
  const Grid img = testing::random_grid(rng, 12, 12);
  CHECK(((convolve(img, k) - correlate(img, k)).abs() == 0.0).all());
}

TEST_CASE("zero-boundary adjoint identities") {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 20; ++t) {
    const Grid u = testing::random_grid(rng, 8, 8), v = testing::random_grid(rng, 8, 8);
    const Matrix k = testing::random_matrix(rng, 3, 3);
    const double lhs = inner(convolve(u, k, Boundary::zero), v);
    CHECK(lhs == doctest::Approx(inner(u, correlate(v, k, Boundary::zero))).epsilon(1e-12));
    const Mask a = testing::random_mask(rng, 8, 8);
    CHECK(inner(forward_masked(u, k, a), v) == doctest::Approx(inner(u, adjoint_masked(v, k, a))).epsilon(1e-12));
  }
}

TEST_CASE("masked operators") {
  std::mt19937_64 rng(5);
  const Grid u = testing::random_grid(rng, 4, 4);
  const Matrix k = testing::random_matrix(rng, 3, 3);
  Mask checker(4, 4);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) checker.set(r, c, (r + c) % 2 == 0);
  const Grid expect = checker.grid() * brute_convolve(u, k, false);
  CHECK((forward_masked(u, k, checker) - expect).abs().maxCoeff() < 1e-14);
  CHECK((forward_masked(u, k, Mask(4, 4, true)) - convolve(u, k, Boundary::zero)).abs().maxCoeff() == 0.0);
  CHECK((forward_masked(u, k, Mask(4, 4, false)) == 0.0).all());
  CHECK((adjoint_masked(u, k, Mask(4, 4, false)) == 0.0).all());
  CHECK((adjoint_masked(u, Kernel::delta(3).matrix(), Mask(4, 4, true)) == u).all());
  CHECK_THROWS_AS(forward_masked(u, k, Mask(5, 4, true)), Error);
}

TEST_CASE("kernel gradient") {
  SUBCASE("scalar case") {
    Grid u(1, 1), r(1, 1);
    u << 3.0;
    r << -0.5;
    const Matrix g = gradient_wrt_kernel(u, r, 1);
    CHECK(g(0, 0) == doctest::Approx(2.0 * 3.0 * -0.5));
  }
  SUBCASE("zero residual") {
    std::mt19937_64 rng(6);
    const Grid u = testing::random_grid(rng, 8, 8);
    CHECK(gradient_wrt_kernel(u, Grid::Zero(8, 8), 5).isZero(0.0));
  }
  SUBCASE("central differences") {
    std::mt19937_64 rng(7);
    for (const int n : {8, 40}) {
      const Grid u = testing::random_grid(rng, n, n);
      const Grid b = testing::random_grid(rng, n, n);
      const Mask a = testing::random_mask(rng, n, n, 0.7);
      const Matrix k = testing::random_matrix(rng, 5, 5);
      auto data = [&](const Matrix& kk) { return (forward_masked(u, kk, a) - a.grid() * b).square().sum(); };
      const Matrix g = gradient_wrt_kernel(u, forward_masked(u, k, a) - a.grid() * b, 5);
      const double h = 1e-6;
      double worst = 0.0;
      for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) {
          Matrix kp = k, km = k;
          kp(i, j) += h;
          km(i, j) -= h;
          const double fd = (data(kp) - data(km)) / (2.0 * h);
          worst = std::max(worst, std::abs(fd - g(i, j)) / std::max(1.0, std::abs(fd)));
        }
      CHECK(worst <= 1e-5);
    }
  }
}

TEST_CASE("operators agree with free functions") {
  std::mt19937_64 rng(8);
  const Grid u = testing::random_grid(rng, 21, 17);
  const Grid v = testing::random_grid(rng, 21, 17);
  const Matrix k = testing::random_matrix(rng, 7, 7);
  BlurOperator op(21, 17, 7);
  op.set_kernel(k);
  CHECK((op.apply(u) - brute_convolve(u, k, false)).abs().maxCoeff() < 1e-12);
  CHECK((op.adjoint(v) - brute_convolve(v, testing::rotate180(k), false)).abs().maxCoeff() < 1e-12);
  KernelOperator kop(u, 7);
  CHECK((kop.blur(k) - brute_convolve(u, k, false)).abs().maxCoeff() < 1e-12);

  // Oracle: G(q) = 2 sum_p r(p) u(p - q + c), zero outside.
  Matrix g = Matrix::Zero(7, 7);
  for (int qr = 0; qr < 7; ++qr)
    for (int qc = 0; qc < 7; ++qc)
      for (int pr = 0; pr < 21; ++pr)
        for (int pc = 0; pc < 17; ++pc) {
          const int sr = pr - qr + 3, sc = pc - qc + 3;
          if (sr >= 0 && sr < 21 && sc >= 0 && sc < 17) g(qr, qc) += 2.0 * v(pr, pc) * u(sr, sc);
        }
  CHECK((kop.gradient(v) - g).cwiseAbs().maxCoeff() < 1e-11);
  CHECK_THROWS_AS(op.set_kernel(Matrix::Zero(5, 5)), Error);
}

TEST_CASE("fft sizes") {
  CHECK(detail::fft_friendly_size(1) == 1);
  CHECK(detail::fft_friendly_size(11) == 12);
  CHECK(detail::fft_friendly_size(97) == 98);
  CHECK(detail::fft_friendly_size(128) == 128);
}

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "defocus/conv.hpp"
#include "defocus/image.hpp"

namespace defocus::testing {

/// Deterministic piecewise-smooth test picture in [0.05, 0.95]: rectangles,
/// disks and lines over a gentle gradient.
inline Grid test_pattern(int width, int height, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Grid g(height, width);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) g(r, c) = 0.3 + 0.2 * (static_cast<double>(r + c) / (width + height));
  const int shapes = std::max(8, width * height / 300);
  for (int s = 0; s < shapes; ++s) {
    const double v = 0.05 + 0.9 * uni(rng);
    const int kind = static_cast<int>(uni(rng) * 3.0);
    const double cx = uni(rng) * width, cy = uni(rng) * height;
    const double sz = 2.0 + uni(rng) * std::min(width, height) / 6.0;
    for (int r = 0; r < height; ++r)
      for (int c = 0; c < width; ++c) {
        const double dx = c - cx, dy = r - cy;
        bool in = false;
        if (kind == 0) in = std::abs(dx) <= sz && std::abs(dy) <= 0.6 * sz;
        else if (kind == 1) in = dx * dx + dy * dy <= sz * sz;
        else in = std::abs(dx * 0.6 - dy * 0.8) <= 1.0 && std::abs(dx * 0.8 + dy * 0.6) <= 2.0 * sz;
        if (in) g(r, c) = v;
      }
  }
  return g.max(0.05).min(0.95);
}

inline Grid random_grid(std::mt19937_64& rng, int rows, int cols, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> uni(lo, hi);
  Grid g(rows, cols);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = uni(rng);
  return g;
}

inline Matrix random_matrix(std::mt19937_64& rng, int rows, int cols, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> uni(lo, hi);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uni(rng);
  return m;
}

inline Mask random_mask(std::mt19937_64& rng, int rows, int cols, double p = 0.5) {
  std::bernoulli_distribution keep(p);
  Mask m(cols, rows);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m.set(r, c, keep(rng));
  return m;
}

inline double inner(const Grid& a, const Grid& b) { return (a * b).sum(); }

/// Direct translation of out(p) = sum_q k(q) img_ext(p - q + center).
inline Grid brute_convolve(const Grid& img, const Matrix& k, bool reflect) {
  const int h = static_cast<int>(img.rows()), w = static_cast<int>(img.cols());
  const int d = static_cast<int>(k.rows()), c = d / 2;
  auto sample = [&](int r, int col) -> double {
    if (reflect) {
      auto fold = [](int i, int n) {
        while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
        return i;
      };
      return img(fold(r, h), fold(col, w));
    }
    if (r < 0 || r >= h || col < 0 || col >= w) return 0.0;
    return img(r, col);
  };
  Grid out = Grid::Zero(h, w);
  for (int pr = 0; pr < h; ++pr)
    for (int pc = 0; pc < w; ++pc) {
      double s = 0.0;
      for (int qr = 0; qr < d; ++qr)
        for (int qc = 0; qc < d; ++qc) s += k(qr, qc) * sample(pr - qr + c, pc - qc + c);
      out(pr, pc) = s;
    }
  return out;
}

inline Matrix rotate180(const Matrix& k) { return k.reverse(); }

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("defocus_test_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

inline std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace defocus::testing

#pragma once

#include <filesystem>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace defocus {

/// Raised for malformed input: bad files, mismatched shapes, violated preconditions.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One real-valued plane, row-major, indexed (row, col).
using Grid = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Intensity image with one plane per channel (1 = gray, 3 = RGB).
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, double fill = 0.0);
  explicit Image(Grid plane);
  explicit Image(std::vector<Grid> planes);

  int width() const noexcept { return planes_.empty() ? 0 : static_cast<int>(planes_[0].cols()); }
  int height() const noexcept { return planes_.empty() ? 0 : static_cast<int>(planes_[0].rows()); }
  int channels() const noexcept { return static_cast<int>(planes_.size()); }

  const Grid& plane(int c) const { return planes_.at(static_cast<std::size_t>(c)); }
  Grid& plane(int c) { return planes_.at(static_cast<std::size_t>(c)); }
  const std::vector<Grid>& planes() const noexcept { return planes_; }

  double at(int row, int col, int c = 0) const { return plane(c)(row, col); }

 private:
  std::vector<Grid> planes_;
};

/// Binary region indicator; entries are exactly 0.0 or 1.0.
class Mask {
 public:
  Mask() = default;
  Mask(int width, int height, bool value = false);
  /// Throws if any entry is not exactly 0 or 1.
  explicit Mask(Grid values);

  /// Entries > threshold become 1.
  static Mask from_threshold(const Grid& values, double threshold);

  int width() const noexcept { return static_cast<int>(data_.cols()); }
  int height() const noexcept { return static_cast<int>(data_.rows()); }
  const Grid& grid() const noexcept { return data_; }
  bool operator()(int row, int col) const { return data_(row, col) != 0.0; }
  void set(int row, int col, bool v) { data_(row, col) = v ? 1.0 : 0.0; }
  long count() const;
  bool empty() const { return count() == 0; }

 private:
  Grid data_;
};

/// Nonnegative per-pixel blur degree.
class DefocusMap {
 public:
  DefocusMap() = default;
  explicit DefocusMap(Grid values);
  int width() const noexcept { return static_cast<int>(data_.cols()); }
  int height() const noexcept { return static_cast<int>(data_.rows()); }
  const Grid& grid() const noexcept { return data_; }

 private:
  Grid data_;
};

/// Reads PGM/PPM (P2, P3, P5, P6) or 8-bit PNG; intensities are divided by the format maximum.
Image load_image(const std::filesystem::path& path);

/// Writes 8-bit PGM/PPM (by channel count) or PNG when the extension is .png.
/// Intensities must lie in [0, 1].
void save_image(const Image& img, const std::filesystem::path& path);

/// Loads a mask image: any 8-bit value > 127 is inside.
Mask load_mask(const std::filesystem::path& path);

/// Loads an integer label map; each pixel value (0..255) is a layer index.
Grid load_labels(const std::filesystem::path& path);

Image to_luminance(const Image& img);

/// Returned by psnr when the images agree exactly on the region.
inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

/// 10 log10(1 / MSE) over all channels of the region pixels.
double psnr(const Image& a, const Image& b);
double psnr(const Image& a, const Image& b, const Mask& region);

}  // namespace defocus

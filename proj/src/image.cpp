#include "defocus/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>

namespace defocus {

namespace {

std::string lower_ext(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return ext;
}

// ---------------------------------------------------------------------------
// PNM

class PnmReader {
 public:
  explicit PnmReader(std::string bytes) : buf_(std::move(bytes)) {}

  void skip_space_and_comments() {
    while (pos_ < buf_.size()) {
      const char ch = buf_[pos_];
      if (ch == '#') {
        while (pos_ < buf_.size() && buf_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(ch))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  long next_int() {
    skip_space_and_comments();
    if (pos_ >= buf_.size() || !std::isdigit(static_cast<unsigned char>(buf_[pos_])))
      throw Error("corrupt PNM header or data");
    long v = 0;
    while (pos_ < buf_.size() && std::isdigit(static_cast<unsigned char>(buf_[pos_]))) {
      v = v * 10 + (buf_[pos_] - '0');
      if (v > 1'000'000'000) throw Error("corrupt PNM header: value out of range");
      ++pos_;
    }
    return v;
  }

  std::string magic() {
    if (buf_.size() < 2 || buf_[0] != 'P') throw Error("not a PNM file");
    pos_ = 2;
    return buf_.substr(0, 2);
  }

  // Exactly one whitespace byte separates the header from binary data.
  void end_header() {
    if (pos_ >= buf_.size() || !std::isspace(static_cast<unsigned char>(buf_[pos_])))
      throw Error("corrupt PNM header");
    ++pos_;
  }

  const unsigned char* raw(std::size_t n) {
    if (pos_ + n > buf_.size()) throw Error("truncated PNM data");
    const auto* p = reinterpret_cast<const unsigned char*>(buf_.data() + pos_);
    pos_ += n;
    return p;
  }

 private:
  std::string buf_;
  std::size_t pos_ = 0;
};

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Image load_pnm(const std::filesystem::path& path) {
  PnmReader rd(read_all(path));
  const std::string magic = rd.magic();
  int channels = 0;
  bool binary = false;
  if (magic == "P2") {
    channels = 1;
  } else if (magic == "P5") {
    channels = 1;
    binary = true;
  } else if (magic == "P3") {
    channels = 3;
  } else if (magic == "P6") {
    channels = 3;
    binary = true;
  } else {
    throw Error("unsupported PNM variant " + magic + ": " + path.string());
  }
  const long w = rd.next_int();
  const long h = rd.next_int();
  const long maxval = rd.next_int();
  if (w < 1 || h < 1) throw Error("corrupt PNM header: empty image");
  if (maxval < 1) throw Error("corrupt PNM header: maxval");
  if (maxval > 255) throw Error("unsupported bit depth (maxval " + std::to_string(maxval) + ")");

  Image img(static_cast<int>(w), static_cast<int>(h), channels);
  const double scale = 1.0 / static_cast<double>(maxval);
  if (binary) {
    rd.end_header();
    const unsigned char* p = rd.raw(static_cast<std::size_t>(w * h * channels));
    for (long r = 0; r < h; ++r)
      for (long c = 0; c < w; ++c)
        for (int ch = 0; ch < channels; ++ch) {
          const unsigned v = *p++;
          if (v > maxval) throw Error("PNM sample exceeds maxval");
          img.plane(ch)(r, c) = v * scale;
        }
  } else {
    for (long r = 0; r < h; ++r)
      for (long c = 0; c < w; ++c)
        for (int ch = 0; ch < channels; ++ch) {
          const long v = rd.next_int();
          if (v > maxval) throw Error("PNM sample exceeds maxval");
          img.plane(ch)(r, c) = static_cast<double>(v) * scale;
        }
  }
  return img;
}

unsigned char quantize(double v) {
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

void check_savable(const Image& img) {
  if (img.channels() != 1 && img.channels() != 3) throw Error("save_image: channels must be 1 or 3");
  for (const Grid& p : img.planes()) {
    if (!p.allFinite()) throw Error("save_image: non-finite intensity");
    if (p.minCoeff() < 0.0 || p.maxCoeff() > 1.0) throw Error("save_image: intensity outside [0,1]");
  }
}

void save_pnm(const Image& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write file: " + path.string());
  out << (img.channels() == 1 ? "P5" : "P6") << '\n' << img.width() << ' ' << img.height() << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(img.width() * img.channels()));
  for (int r = 0; r < img.height(); ++r) {
    std::size_t i = 0;
    for (int c = 0; c < img.width(); ++c)
      for (int ch = 0; ch < img.channels(); ++ch) row[i++] = quantize(img.at(r, c, ch));
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw Error("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// PNG

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

Image load_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw Error("cannot open file: " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error("libpng init failed");
  }
  std::vector<png_bytep> rows;
  std::vector<unsigned char> pixels;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("corrupt PNG: " + path.string());
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (depth == 16) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("unsupported bit depth 16: " + path.string());
  }
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_set_strip_16(png);
  png_read_update_info(png, info);

  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  pixels.resize(stride * static_cast<std::size_t>(h));
  rows.resize(static_cast<std::size_t>(h));
  for (int r = 0; r < h; ++r) rows[static_cast<std::size_t>(r)] = pixels.data() + stride * static_cast<std::size_t>(r);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  if (channels != 1 && channels != 3) throw Error("unsupported PNG channel layout: " + path.string());

  Image img(w, h, channels);
  for (int r = 0; r < h; ++r) {
    const unsigned char* p = rows[static_cast<std::size_t>(r)];
    for (int c = 0; c < w; ++c)
      for (int ch = 0; ch < channels; ++ch) img.plane(ch)(r, c) = *p++ / 255.0;
  }
  return img;
}

void save_png(const Image& img, const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw Error("cannot write file: " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("libpng init failed");
  }
  const int channels = img.channels();
  std::vector<unsigned char> row(static_cast<std::size_t>(img.width() * channels));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("PNG write failed: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()), static_cast<png_uint_32>(img.height()), 8,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < img.height(); ++r) {
    std::size_t i = 0;
    for (int c = 0; c < img.width(); ++c)
      for (int ch = 0; ch < channels; ++ch) row[i++] = quantize(img.at(r, c, ch));
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void check_same_shape(const Image& a, const Image& b) {
  if (a.width() != b.width() || a.height() != b.height() || a.channels() != b.channels())
    throw Error("psnr: dimension mismatch");
}

double psnr_from_mse(double sum_sq, double n) {
  const double mse = sum_sq / n;
  if (mse == 0.0) return kInfinitePsnr;
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace

// ---------------------------------------------------------------------------

Image::Image(int width, int height, int channels, double fill) {
  if (width < 1 || height < 1) throw Error("image dimensions must be positive");
  if (channels != 1 && channels != 3) throw Error("image channels must be 1 or 3");
  planes_.assign(static_cast<std::size_t>(channels), Grid::Constant(height, width, fill));
}

Image::Image(Grid plane) {
  if (plane.size() == 0) throw Error("image dimensions must be positive");
  planes_.push_back(std::move(plane));
}

Image::Image(std::vector<Grid> planes) : planes_(std::move(planes)) {
  if (planes_.size() != 1 && planes_.size() != 3) throw Error("image channels must be 1 or 3");
  for (const Grid& p : planes_) {
    if (p.size() == 0) throw Error("image dimensions must be positive");
    if (p.rows() != planes_[0].rows() || p.cols() != planes_[0].cols())
      throw Error("image planes differ in size");
  }
}

Mask::Mask(int width, int height, bool value) : data_(Grid::Constant(height, width, value ? 1.0 : 0.0)) {}

Mask::Mask(Grid values) : data_(std::move(values)) {
  if (!((data_ == 0.0) || (data_ == 1.0)).all()) throw Error("mask entries must be 0 or 1");
}

Mask Mask::from_threshold(const Grid& values, double threshold) {
  return Mask(Grid((values > threshold).cast<double>()));
}

long Mask::count() const { return static_cast<long>((data_ != 0.0).count()); }

DefocusMap::DefocusMap(Grid values) : data_(std::move(values)) {
  if (data_.size() > 0 && (!data_.allFinite() || data_.minCoeff() < 0.0))
    throw Error("defocus map entries must be finite and nonnegative");
}

Image load_image(const std::filesystem::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".png") return load_png(path);
  return load_pnm(path);
}

void save_image(const Image& img, const std::filesystem::path& path) {
  check_savable(img);
  if (lower_ext(path) == ".png")
    save_png(img, path);
  else
    save_pnm(img, path);
}

Mask load_mask(const std::filesystem::path& path) {
  const Image img = to_luminance(load_image(path));
  return Mask::from_threshold(img.plane(0), 127.0 / 255.0 + 1e-9);
}

Grid load_labels(const std::filesystem::path& path) {
  const Image img = load_image(path);
  if (img.channels() != 1) throw Error("label map must be single-channel: " + path.string());
  return (img.plane(0) * 255.0).round();
}

Image to_luminance(const Image& img) {
  if (img.channels() == 1) return img;
  if (img.channels() != 3) throw Error("to_luminance: channels must be 1 or 3");
  return Image(Grid(0.299 * img.plane(0) + 0.587 * img.plane(1) + 0.114 * img.plane(2)));
}

double psnr(const Image& a, const Image& b) {
  check_same_shape(a, b);
  double s = 0.0;
  for (int ch = 0; ch < a.channels(); ++ch) s += (a.plane(ch) - b.plane(ch)).square().sum();
  return psnr_from_mse(s, static_cast<double>(a.width()) * a.height() * a.channels());
}

double psnr(const Image& a, const Image& b, const Mask& region) {
  check_same_shape(a, b);
  if (region.width() != a.width() || region.height() != a.height()) throw Error("psnr: mask dimension mismatch");
  const long n = region.count();
  if (n == 0) throw Error("psnr: empty region");
  double s = 0.0;
  for (int ch = 0; ch < a.channels(); ++ch)
    s += ((a.plane(ch) - b.plane(ch)).square() * region.grid()).sum();
  return psnr_from_mse(s, static_cast<double>(n) * a.channels());
}

}  // namespace defocus

#include "defocus/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>

namespace defocus {

bool LayerSet::is_partition() const {
  if (masks.empty()) return false;
  Grid sum = Grid::Zero(masks[0].height(), masks[0].width());
  for (const Mask& m : masks) {
    if (m.width() != masks[0].width() || m.height() != masks[0].height()) return false;
    sum += m.grid();
  }
  return (sum == 1.0).all();
}

LayerSet layers_from_defocus_map(const DefocusMap& map, const std::vector<double>& thresholds) {
  for (std::size_t i = 1; i < thresholds.size(); ++i)
    if (!(thresholds[i] > thresholds[i - 1])) throw Error("thresholds must be strictly increasing");
  const Grid& g = map.grid();
  if (g.size() == 0) throw Error("empty defocus map");

  LayerSet out;
  out.thresholds = thresholds;
  if (thresholds.empty() && g.maxCoeff() > g.minCoeff())
    out.notes.push_back("no thresholds given for a non-constant defocus map; using a single layer");

  const std::size_t n = thresholds.size() + 1;
  for (std::size_t i = 0; i < n; ++i) {
    Grid sel = Grid::Ones(g.rows(), g.cols());
    if (i > 0) sel *= (g >= thresholds[i - 1]).cast<double>();
    if (i < thresholds.size()) sel *= (g < thresholds[i]).cast<double>();
    Mask m(std::move(sel));
    if (m.empty()) {
      out.notes.push_back("layer " + std::to_string(i) + " is empty and was dropped");
      if (i == 0) out.first_in_focus = false;
      continue;
    }
    out.masks.push_back(std::move(m));
  }
  return out;
}

LayerSet layers_from_labels(const Grid& labels) {
  if (labels.size() == 0) throw Error("empty label map");
  if (labels.minCoeff() < 0.0) throw Error("label map values must be nonnegative");
  const int top = static_cast<int>(labels.maxCoeff());
  LayerSet out;
  for (int i = 0; i <= top; ++i) {
    Mask m(Grid((labels == static_cast<double>(i)).cast<double>()));
    if (m.empty()) {
      if (i == 0) out.first_in_focus = false;
      continue;
    }
    out.masks.push_back(std::move(m));
  }
  if (!out.is_partition()) throw Error("label map values must be integers");
  return out;
}

Grid labels_from_layers(const LayerSet& layers) {
  if (layers.masks.empty()) throw Error("empty layer set");
  Grid out = Grid::Zero(layers.masks[0].height(), layers.masks[0].width());
  const int offset = layers.first_in_focus ? 0 : 1;
  for (std::size_t i = 0; i < layers.masks.size(); ++i)
    out += static_cast<double>(i + offset) * layers.masks[i].grid();
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    throw Error("scene: bad number for " + key + ": '" + v + "'");
  }
  if (used != v.size() || !std::isfinite(x)) throw Error("scene: bad number for " + key + ": '" + v + "'");
  return x;
}

KernelFamily parse_family(const std::string& v) {
  static const std::map<std::string, KernelFamily> names{{"delta", KernelFamily::delta},
                                                         {"disk", KernelFamily::disk},
                                                         {"gaussian", KernelFamily::gaussian},
                                                         {"pillbox", KernelFamily::pillbox},
                                                         {"gaussian_pupil", KernelFamily::gaussian_pupil}};
  const auto it = names.find(v);
  if (it == names.end()) throw Error("scene: unknown kernel family '" + v + "'");
  return it->second;
}

Rect parse_rect(const std::string& v) {
  std::vector<int> parts;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ',')) parts.push_back(static_cast<int>(parse_number("rect", trim(tok))));
  if (parts.size() != 4 || parts[2] <= 0 || parts[3] <= 0) throw Error("scene: rect must be x,y,w,h with w,h > 0");
  return {parts[0], parts[1], parts[2], parts[3]};
}

Mask region_mask(const LayerSpec& spec, int width, int height) {
  if (spec.mask) {
    if (spec.mask->width() != width || spec.mask->height() != height) throw Error("scene: layer mask size mismatch");
    return *spec.mask;
  }
  if (spec.mask_path) {
    Mask m = load_mask(*spec.mask_path);
    if (m.width() != width || m.height() != height) throw Error("scene: layer mask size mismatch");
    return m;
  }
  if (spec.rect) {
    Mask m(width, height, false);
    const Rect& r = *spec.rect;
    for (int y = std::max(0, r.y); y < std::min(height, r.y + r.h); ++y)
      for (int x = std::max(0, r.x); x < std::min(width, r.x + r.w); ++x) m.set(y, x, true);
    return m;
  }
  throw Error("scene: layer needs mask= or rect=");
}

}  // namespace

SceneSpec parse_scene(const std::string& text, const std::filesystem::path& base_dir) {
  SceneSpec spec;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "scene line " + std::to_string(lineno) + ": ";
    try {
      if (line.rfind("layer", 0) == 0 && (line.size() == 5 || line[5] == ' ' || line[5] == '\t')) {
        LayerSpec layer;
        bool has_kernel = false;
        std::istringstream toks(line.substr(5));
        std::string tok;
        while (toks >> tok) {
          const auto eq = tok.find('=');
          if (eq == std::string::npos) throw Error(where + "expected key=value, got '" + tok + "'");
          const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
          if (key == "kernel") {
            layer.family = parse_family(val);
            has_kernel = true;
          } else if (key == "radius") {
            layer.radius = parse_number(key, val);
          } else if (key == "sigma") {
            layer.sigma = parse_number(key, val);
          } else if (key == "diameter") {
            layer.diameter = parse_number(key, val);
          } else if (key == "rect") {
            layer.rect = parse_rect(val);
          } else if (key == "mask") {
            std::filesystem::path p(val);
            layer.mask_path = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
          } else {
            throw Error(where + "unknown layer key '" + key + "'");
          }
        }
        if (!has_kernel) throw Error(where + "layer needs kernel=");
        if (!layer.rect && !layer.mask_path) throw Error(where + "layer needs mask= or rect=");
        spec.layers.push_back(std::move(layer));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw Error(where + "expected key = value");
      const std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
      if (key == "noise_sigma" || key == "noise") {
        spec.noise_sigma = parse_number(key, val);
        if (spec.noise_sigma < 0.0) throw Error(where + "noise_sigma must be >= 0");
      } else if (key == "kernel_size") {
        spec.kernel_size = static_cast<int>(parse_number(key, val));
      } else {
        throw Error(where + "unknown key '" + key + "'");
      }
    } catch (const Error& e) {
      const std::string msg = e.what();
      if (msg.rfind("scene line", 0) == 0) throw;
      throw Error(where + (msg.rfind("scene: ", 0) == 0 ? msg.substr(7) : msg));
    }
  }
  return spec;
}

SceneSpec load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open scene file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scene(ss.str(), path.parent_path());
}

Kernel make_kernel(const LayerSpec& spec, int d) {
  switch (spec.family) {
    case KernelFamily::delta:
      return Kernel::delta(d);
    case KernelFamily::disk:
      return disk_kernel(spec.radius, d);
    case KernelFamily::gaussian:
      return gaussian_kernel(spec.sigma, d);
    case KernelFamily::pillbox:
      return pillbox_kernel(spec.diameter, d);
    case KernelFamily::gaussian_pupil:
      return gaussian_pupil_kernel(spec.diameter, spec.sigma, d);
  }
  throw Error("unknown kernel family");
}

SyntheticScene synthesize(const SceneSpec& spec, std::uint64_t seed) {
  if (spec.sharp.channels() == 0) throw Error("synthesize: missing sharp image");
  const int w = spec.sharp.width(), h = spec.sharp.height();
  const int d = spec.kernel_size;
  if (d < 1 || d % 2 == 0) throw Error("synthesize: kernel_size must be a positive odd integer");
  if (d > w || d > h) throw Error("synthesize: kernel larger than image");
  if (spec.noise_sigma < 0.0) throw Error("synthesize: negative noise");

  std::vector<Kernel> layer_kernels;
  std::vector<Mask> regions;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    try {
      layer_kernels.push_back(make_kernel(spec.layers[i], d));
    } catch (const Error& e) {
      throw Error("layer " + std::to_string(i + 1) + ": " + e.what());
    }
    regions.push_back(region_mask(spec.layers[i], w, h));
  }

  // Later layers override earlier ones; the unclaimed remainder is in focus.
  Grid owner = Grid::Zero(h, w);
  for (std::size_t i = 0; i < regions.size(); ++i)
    owner = (regions[i].grid() > 0.0).select(static_cast<double>(i + 1), owner);

  SyntheticScene out;
  out.truth = spec.sharp;
  for (std::size_t i = 0; i <= regions.size(); ++i) {
    Mask m(Grid((owner == static_cast<double>(i)).cast<double>()));
    if (m.empty()) {
      if (i == 0) out.layers.first_in_focus = false;
      continue;
    }
    out.layers.masks.push_back(std::move(m));
    out.kernels.push_back(i == 0 ? Kernel::delta(d) : layer_kernels[i - 1]);
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<Grid> planes;
  for (int ch = 0; ch < spec.sharp.channels(); ++ch) {
    const Grid& u = spec.sharp.plane(ch);
    Grid b = Grid::Zero(h, w);
    for (std::size_t i = 0; i < out.layers.masks.size(); ++i)
      b += out.layers.masks[i].grid() * convolve(u, out.kernels[i].matrix(), Boundary::reflect);
    if (spec.noise_sigma > 0.0)
      for (Eigen::Index r = 0; r < h; ++r)
        for (Eigen::Index c = 0; c < w; ++c) b(r, c) += spec.noise_sigma * noise(rng);
    planes.push_back(b.max(0.0).min(1.0));
  }
  out.blurred = Image(std::move(planes));
  return out;
}

// ---------------------------------------------------------------------------

int DeblurResult::failed_layers() const {
  return static_cast<int>(std::count_if(layers.begin(), layers.end(), [](const LayerOutcome& l) { return !l.ok; }));
}

int DeblurResult::solved_layers() const {
  return static_cast<int>(std::count_if(layers.begin(), layers.end(),
                                        [](const LayerOutcome& l) { return l.ok && !l.in_focus; }));
}

DeblurResult deblur_all(const Image& f, const LayerSet& layers, const SolverConfig& config, int threads) {
  if (!layers.is_partition()) throw Error("deblur_all: layers do not partition the image");
  if (layers.masks[0].width() != f.width() || layers.masks[0].height() != f.height())
    throw Error("deblur_all: layer masks do not match the image");
  config.validate();

  const std::size_t n = layers.masks.size();
  DeblurResult res;
  res.layers.resize(n);

  auto solve_one = [&](std::size_t i) {
    LayerOutcome& out = res.layers[i];
    out.index = static_cast<int>(i);
    out.in_focus = layers.first_in_focus && i == 0;
    if (out.in_focus) return;
    try {
      out.solution = solve_layer(LayerProblem{f, layers.masks[i], config});
    } catch (const std::exception& e) {
      out.ok = false;
      out.error = e.what();
    }
  };

  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) solve_one(i);
  } else {
    std::size_t next = 0;
    while (next < n) {
      std::vector<std::future<void>> batch;
      for (int t = 0; t < threads && next < n; ++t, ++next)
        batch.push_back(std::async(std::launch::async, solve_one, next));
      for (auto& fut : batch) fut.get();
    }
  }

  // Every pixel belongs to exactly one mask, so each is written once.
  std::vector<Grid> planes;
  for (int ch = 0; ch < f.channels(); ++ch) {
    Grid acc = Grid::Zero(f.height(), f.width());
    for (std::size_t i = 0; i < n; ++i) {
      const LayerOutcome& out = res.layers[i];
      const Grid& src = (out.in_focus || !out.ok) ? f.plane(ch) : out.solution->u.plane(ch);
      acc += layers.masks[i].grid() * src;
    }
    planes.push_back(acc.max(0.0).min(1.0));
  }
  res.all_in_focus = Image(std::move(planes));
  return res;
}

std::vector<EvalRow> evaluate(const Image& result, const Image& truth, const LayerSet& layers) {
  if (result.width() != truth.width() || result.height() != truth.height() || result.channels() != truth.channels())
    throw Error("evaluate: dimension mismatch");
  std::vector<EvalRow> rows;
  rows.push_back({"all", static_cast<long>(result.width()) * result.height(), psnr(result, truth)});
  const int offset = layers.first_in_focus ? 0 : 1;
  for (std::size_t i = 0; i < layers.masks.size(); ++i) {
    const Mask& m = layers.masks[i];
    if (m.width() != result.width() || m.height() != result.height()) throw Error("evaluate: mask dimension mismatch");
    rows.push_back({std::to_string(i + static_cast<std::size_t>(offset)), m.count(), psnr(result, truth, m)});
  }
  return rows;
}

std::string format_report(const std::vector<EvalRow>& rows) {
  std::ostringstream os;
  os << "layer\tpixels\tpsnr_db\n";
  for (const EvalRow& r : rows) {
    os << r.layer << '\t' << r.pixels << '\t';
    if (std::isinf(r.psnr_db))
      os << "+inf";
    else
      os << std::fixed << std::setprecision(4) << r.psnr_db;
    os << '\n';
  }
  return os.str();
}

std::string format_kernel_text(const Matrix& k) {
  if (k.rows() != k.cols() || k.rows() == 0) throw Error("kernel text: matrix must be square");
  std::ostringstream out;
  out.precision(17);
  out << k.rows() << "\n";
  for (Eigen::Index r = 0; r < k.rows(); ++r) {
    for (Eigen::Index c = 0; c < k.cols(); ++c) out << (c ? " " : "") << k(r, c);
    out << "\n";
  }
  return out.str();
}

Matrix parse_kernel_text(const std::string& text) {
  std::istringstream in(text);
  long d = 0;
  if (!(in >> d) || d < 1) throw Error("kernel text: bad size line");
  Matrix k(d, d);
  for (long r = 0; r < d; ++r)
    for (long c = 0; c < d; ++c)
      if (!(in >> k(r, c))) throw Error("kernel text: expected " + std::to_string(d * d) + " values");
  std::string extra;
  if (in >> extra) throw Error("kernel text: trailing data");
  return k;
}

Image kernel_image(const Matrix& k) {
  const double top = k.maxCoeff();
  Grid g = k.array();
  if (top > 0.0) g /= top;
  return Image(Grid(g.max(0.0).min(1.0)));
}

}  // namespace defocus

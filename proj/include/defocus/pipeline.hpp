#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "defocus/blind_deblur.hpp"
#include "defocus/image.hpp"

namespace defocus {

/// Disjoint masks covering the image. When first_in_focus is set, masks[0] is
/// the in-focus layer and is passed through untouched.
struct LayerSet {
  std::vector<Mask> masks;
  std::vector<double> thresholds;
  bool first_in_focus = true;
  std::vector<std::string> notes;

  /// True when the masks are pairwise disjoint and cover every pixel.
  bool is_partition() const;
};

/// Layer 0: defocus < t[0]; layer i: t[i-1] <= defocus < t[i]; last: the rest.
/// Empty layers are dropped.
LayerSet layers_from_defocus_map(const DefocusMap& map, const std::vector<double>& thresholds);

/// One layer per integer label value present; label 0 is the in-focus layer.
LayerSet layers_from_labels(const Grid& labels);

/// Integer label image (layer index per pixel) for a partition.
Grid labels_from_layers(const LayerSet& layers);

// ---------------------------------------------------------------------------
// Synthetic scenes

enum class KernelFamily { delta, disk, gaussian, pillbox, gaussian_pupil };

struct Rect {
  int x = 0, y = 0, w = 0, h = 0;
};

struct LayerSpec {
  KernelFamily family = KernelFamily::disk;
  double radius = 0.0;    ///< disk
  double sigma = 0.0;     ///< gaussian, gaussian_pupil
  double diameter = 0.0;  ///< pillbox, gaussian_pupil
  std::optional<Rect> rect;
  std::optional<std::filesystem::path> mask_path;
  std::optional<Mask> mask;  ///< takes precedence over rect / mask_path
};

/// Pixels not claimed by any listed layer form the in-focus layer 0. Later
/// layers override earlier ones where regions overlap.
struct SceneSpec {
  Image sharp;
  std::vector<LayerSpec> layers;
  double noise_sigma = 0.0;
  int kernel_size = 31;
};

/// Parses "key = value" globals and "layer key=value ..." lines; relative mask
/// paths resolve against base_dir. The sharp image is left empty.
SceneSpec parse_scene(const std::string& text, const std::filesystem::path& base_dir = {});
SceneSpec load_scene(const std::filesystem::path& path);

Kernel make_kernel(const LayerSpec& spec, int d);

struct SyntheticScene {
  Image blurred;
  Image truth;
  LayerSet layers;
  std::vector<Kernel> kernels;  ///< one per layer; kernels[0] is the delta
};

/// blurred = sum_i alpha_i .* (k_i conv u) + n, reflect boundary, Gaussian noise
/// from seed, clamped to [0, 1].
SyntheticScene synthesize(const SceneSpec& spec, std::uint64_t seed);

// ---------------------------------------------------------------------------

struct LayerOutcome {
  int index = 0;
  bool in_focus = false;
  bool ok = true;
  std::string error;
  std::optional<LayerSolution> solution;
};

struct DeblurResult {
  Image all_in_focus;
  std::vector<LayerOutcome> layers;
  int failed_layers() const;
  int solved_layers() const;
};

/// Solves every out-of-focus layer and composes sum_i alpha_i .* u_i (clamped
/// to [0, 1]); failed layers keep the input pixels.
DeblurResult deblur_all(const Image& f, const LayerSet& layers, const SolverConfig& config, int threads = 1);

struct EvalRow {
  std::string layer;  ///< "all" or the layer index
  long pixels = 0;
  double psnr_db = 0.0;
};

std::vector<EvalRow> evaluate(const Image& result, const Image& truth, const LayerSet& layers);

/// Tab-separated "layer pixels psnr_db" rows; infinite PSNR prints as +inf.
std::string format_report(const std::vector<EvalRow>& rows);

// ---------------------------------------------------------------------------
// Kernel files

/// First line d, then d rows of d values, round-trip exact.
std::string format_kernel_text(const Matrix& k);
Matrix parse_kernel_text(const std::string& text);

/// Grayscale view scaled so the largest entry is white.
Image kernel_image(const Matrix& k);

}  // namespace defocus

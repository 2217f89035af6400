#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "defocus/config.hpp"
#include "defocus/pipeline.hpp"

namespace fs = std::filesystem;
using namespace defocus;

namespace {

constexpr int kOk = 0;
constexpr int kInputError = 1;
constexpr int kSolverError = 2;

int verbosity = 1;

void log(int level, const std::string& msg) {
  if (level <= verbosity) std::cerr << msg << "\n";
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

void write_kernel(const fs::path& dir, const std::string& stem, const Matrix& k) {
  write_text(dir / (stem + ".txt"), format_kernel_text(k));
  save_image(kernel_image(k), dir / (stem + ".png"));
}

std::vector<double> parse_thresholds(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw Error("bad threshold '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw Error("--thresholds needs at least one value");
  return out;
}

// ---------------------------------------------------------------------------

struct DeblurArgs {
  std::string input;
  std::string defocus_map;
  std::string thresholds;
  std::string labels;
  std::vector<std::string> masks;
  std::string config;
  std::string out = ".";
  bool dump_kernels = false;
  bool dump_residual = false;
  bool no_c_term = false;
  int threads = 1;
  std::uint64_t seed = 0;
};

LayerSet load_layers(const DeblurArgs& a, int width, int height) {
  const int sources = !a.defocus_map.empty() + !a.labels.empty() + !a.masks.empty();
  if (sources != 1) throw Error("give exactly one of --defocus-map, --labels or --mask");
  if (!a.thresholds.empty() && a.defocus_map.empty()) throw Error("--thresholds requires --defocus-map");

  LayerSet layers;
  if (!a.defocus_map.empty()) {
    const Image map = load_image(a.defocus_map);
    const std::vector<double> t = a.thresholds.empty() ? std::vector<double>{} : parse_thresholds(a.thresholds);
    layers = layers_from_defocus_map(DefocusMap(to_luminance(map).plane(0)), t);
  } else if (!a.labels.empty()) {
    layers = layers_from_labels(load_labels(a.labels));
  } else {
    for (const std::string& p : a.masks) layers.masks.push_back(load_mask(p));
  }
  for (const Mask& m : layers.masks)
    if (m.width() != width || m.height() != height) throw Error("mask size does not match the input image");
  if (!layers.is_partition()) throw Error("layer masks must be disjoint and cover the image");
  for (const std::string& note : layers.notes) log(1, "note: " + note);
  return layers;
}

int run_deblur(const DeblurArgs& a) {
  Image f;
  LayerSet layers;
  SolverConfig cfg;
  try {
    f = load_image(a.input);
    layers = load_layers(a, f.width(), f.height());
    if (!a.config.empty()) cfg = load_config(a.config);
    if (a.no_c_term) cfg.use_c_term = false;
    cfg.validate();
    if (a.threads < 1) throw Error("--threads must be >= 1");
    fs::create_directories(a.out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }

  log(1, "deblurring " + std::to_string(layers.masks.size()) + " layers");
  const DeblurResult res = deblur_all(f, layers, cfg, a.threads);
  int out_of_focus = 0;
  for (const LayerOutcome& lo : res.layers) {
    if (lo.in_focus) continue;
    ++out_of_focus;
    if (!lo.ok) {
      log(0, "layer " + std::to_string(lo.index) + " failed: " + lo.error);
      continue;
    }
    std::ostringstream msg;
    msg << "layer " << lo.index << ": initial disk radius " << lo.solution->init_radius << ", kernel rank "
        << effective_rank(lo.solution->k.matrix());
    log(1, msg.str());
    for (const std::string& w : lo.solution->warnings) log(1, "layer " + std::to_string(lo.index) + ": " + w);
  }

  try {
    const fs::path dir(a.out);
    save_image(res.all_in_focus, dir / "all_in_focus.png");
    for (const LayerOutcome& lo : res.layers) {
      if (!lo.solution) continue;
      const std::string idx = std::to_string(lo.index);
      if (a.dump_kernels) write_kernel(dir, "kernel_" + idx, lo.solution->k.matrix());
      if (a.dump_residual)
        save_image(Image(Grid(lo.solution->c.abs().min(1.0))), dir / ("residual_" + idx + ".png"));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  if (out_of_focus > 0 && res.failed_layers() == out_of_focus) return kSolverError;
  return kOk;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string truth;
  std::string scene;
  std::uint64_t seed = 0;
  std::string out = ".";
};

int run_synth(const SynthArgs& a) {
  try {
    SceneSpec spec = load_scene(a.scene);
    spec.sharp = load_image(a.truth);
    const SyntheticScene scene = synthesize(spec, a.seed);
    const fs::path dir(a.out);
    fs::create_directories(dir);
    save_image(scene.blurred, dir / "blurred.png");
    save_image(Image(Grid(labels_from_layers(scene.layers) / 255.0)), dir / "labels.png");
    for (std::size_t i = 0; i < scene.kernels.size(); ++i)
      write_kernel(dir, "kernel_" + std::to_string(i), scene.kernels[i].matrix());
    log(1, "wrote " + std::to_string(scene.kernels.size()) + " layers to " + dir.string());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string result;
  std::string truth;
  std::string labels;
};

int run_eval(const EvalArgs& a) {
  try {
    const Image result = load_image(a.result);
    const Image truth = load_image(a.truth);
    LayerSet layers;
    if (!a.labels.empty()) {
      layers = layers_from_labels(load_labels(a.labels));
    } else {
      layers.masks.push_back(Mask(Grid::Ones(truth.height(), truth.width())));
    }
    std::cout << format_report(evaluate(result, truth, layers));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct KernelArgs {
  std::string input;
  std::string mask;
  std::string config;
  std::string out = ".";
  bool no_symmetry = false;
  bool no_lowrank = false;
};

int run_kernel(const KernelArgs& a) {
  LayerProblem problem;
  try {
    problem.f = load_image(a.input);
    problem.alpha = load_mask(a.mask);
    if (!a.config.empty()) problem.config = load_config(a.config);
    if (a.no_symmetry) problem.config.feasible.symmetry = false;
    if (a.no_lowrank) problem.config.feasible.low_rank = false;
    problem.config.validate();
    fs::create_directories(a.out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }

  LayerSolution sol;
  try {
    sol = solve_layer(problem);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSolverError;
  }
  const Matrix& k = sol.k.matrix();
  std::ostringstream msg;
  msg << "initial disk radius " << sol.init_radius << ", lambda2 " << sol.lambda2 << ", kernel rank "
      << effective_rank(k) << ", symmetry residual " << symmetry_residual(k);
  log(1, msg.str());
  try {
    write_kernel(a.out, "kernel", k);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blind deblurring of layered defocus blur"};
  app.require_subcommand(1);
  app.add_option("-v,--verbosity", verbosity, "0 quiet, 1 progress, 2 detail")->check(CLI::Range(0, 2));

  DeblurArgs deblur;
  auto* d = app.add_subcommand("deblur", "Deblur every out-of-focus layer and compose the result");
  d->add_option("--input", deblur.input, "Blurred image")->required();
  d->add_option("--defocus-map", deblur.defocus_map, "Defocus map image");
  d->add_option("--thresholds", deblur.thresholds, "Comma-separated defocus thresholds");
  d->add_option("--labels", deblur.labels, "Label image, pixel value = layer index");
  d->add_option("--mask", deblur.masks, "Layer mask image; repeat once per layer, in-focus first");
  d->add_option("--config", deblur.config, "key = value solver settings");
  d->add_option("--out", deblur.out, "Output directory");
  d->add_flag("--dump-kernels", deblur.dump_kernels, "Write estimated kernels");
  d->add_flag("--dump-residual", deblur.dump_residual, "Write |c| maps");
  d->add_flag("--no-c-term", deblur.no_c_term, "Disable the residual term");
  d->add_option("--threads", deblur.threads, "Layers solved in parallel");
  d->add_option("--seed", deblur.seed, "Random seed");

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Render a layered defocus scene");
  s->add_option("--truth", synth.truth, "Sharp image")->required();
  s->add_option("--scene", synth.scene, "Scene description")->required();
  s->add_option("--seed", synth.seed, "Noise seed");
  s->add_option("--out", synth.out, "Output directory");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "PSNR of a result against the truth, whole image and per layer");
  e->add_option("--result", eval.result, "Result image")->required();
  e->add_option("--truth", eval.truth, "Ground truth image")->required();
  e->add_option("--labels", eval.labels, "Label image");

  KernelArgs kernel;
  auto* k = app.add_subcommand("kernel", "Estimate the kernel of one layer");
  k->add_option("--input", kernel.input, "Blurred image")->required();
  k->add_option("--mask", kernel.mask, "Layer mask")->required();
  k->add_option("--config", kernel.config, "key = value solver settings");
  k->add_option("--out", kernel.out, "Output directory");
  k->add_flag("--no-symmetry", kernel.no_symmetry, "Drop the symmetry projection");
  k->add_flag("--no-lowrank", kernel.no_lowrank, "Drop the rank projection");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kInputError;
  }

  if (*d) return run_deblur(deblur);
  if (*s) return run_synth(synth);
  if (*e) return run_eval(eval);
  return run_kernel(kernel);
}

#include "defocus/blind_deblur.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace defocus {

namespace {

void check_problem(const LayerProblem& p) {
  p.config.validate();
  if (p.f.channels() < 1) throw Error("layer problem: empty image");
  if (p.alpha.width() != p.f.width() || p.alpha.height() != p.f.height())
    throw Error("layer problem: mask does not match image");
  if (p.alpha.empty()) throw Error("layer problem: empty mask");
  const int d = p.config.kernel_size;
  if (d > p.f.width() || d > p.f.height()) throw Error("layer problem: kernel larger than image");
}

// Edge-replicated border of width m on every side.
Grid pad_edge(const Grid& g, int m) {
  const Eigen::Index h = g.rows(), w = g.cols();
  Grid out(h + 2 * m, w + 2 * m);
  for (Eigen::Index r = 0; r < out.rows(); ++r)
    for (Eigen::Index c = 0; c < out.cols(); ++c)
      out(r, c) = g(std::clamp<Eigen::Index>(r - m, 0, h - 1), std::clamp<Eigen::Index>(c - m, 0, w - 1));
  return out;
}

Grid pad_zero(const Grid& g, int m) {
  Grid out = Grid::Zero(g.rows() + 2 * m, g.cols() + 2 * m);
  out.block(m, m, g.rows(), g.cols()) = g;
  return out;
}

Grid crop(const Grid& g, int m) { return g.block(m, m, g.rows() - 2 * m, g.cols() - 2 * m); }

// The unknown image extends kernel_size / 2 pixels past every border so that
// observed pixels near the frame are explained by scene content outside it.
struct Working {
  int margin;
  Grid f;
  Mask alpha;
};

Working working_problem(const Grid& f, const Mask& alpha, int d) {
  const int m = d / 2;
  return Working{m, pad_edge(f, m), Mask(pad_zero(alpha.grid(), m))};
}

std::vector<double> candidate_radii(double lo, double hi, int d) {
  std::vector<double> radii;
  const double cap = 0.5 * (d - 1);
  for (double r = std::ceil(lo); r <= std::min(hi, cap) + 1e-12; r += 1.0) radii.push_back(r);
  return radii;
}

constexpr int kScoreTile = 16;

struct Tile {
  Eigen::Index row;
  Eigen::Index col;
};

// Square blocks lying entirely inside the mask and carrying visible structure.
std::vector<Tile> score_tiles(const Grid& f, const Mask& alpha, int t) {
  const Grid& m = alpha.grid();
  std::vector<Tile> tiles;
  for (Eigen::Index r = 0; r + t <= m.rows(); r += t)
    for (Eigen::Index c = 0; c + t <= m.cols(); c += t) {
      if (m.block(r, c, t, t).minCoeff() < 1.0) continue;
      const auto blk = f.block(r, c, t, t);
      const double mean = blk.mean();
      if ((blk - mean).square().mean() > 1e-4) tiles.push_back({r, c});
    }
  return tiles;
}

// ||grad u||_1 / ||grad u||_2 over one block of the mask; lower means sharper.
double normalized_sparsity(const Grid& dx, const Grid& dy, const Grid& m, Eigen::Index r, Eigen::Index c,
                           Eigen::Index h, Eigen::Index w) {
  const auto bx = dx.block(r, c, h, w), by = dy.block(r, c, h, w);
  const auto bm = m.block(r, c, h, w);
  const double l1 = ((bx.abs() + by.abs()) * bm).sum();
  const double l2 = std::sqrt(((bx.square() + by.square()) * bm).sum());
  return l2 > 0.0 ? l1 / l2 : std::numeric_limits<double>::infinity();
}

// No tiles means the whole mask is scored as one region.
std::vector<double> tile_scores(const Grid& u, const Mask& alpha, const std::vector<Tile>& tiles, int t) {
  const Eigen::Index h = u.rows(), w = u.cols();
  Grid dx = Grid::Zero(h, w), dy = Grid::Zero(h, w);
  dx.leftCols(w - 1) = u.rightCols(w - 1) - u.leftCols(w - 1);
  dy.topRows(h - 1) = u.bottomRows(h - 1) - u.topRows(h - 1);
  std::vector<double> out;
  if (tiles.empty()) {
    out.push_back(normalized_sparsity(dx, dy, alpha.grid(), 0, 0, h, w));
  } else {
    for (const Tile& tile : tiles) out.push_back(normalized_sparsity(dx, dy, alpha.grid(), tile.row, tile.col, t, t));
  }
  return out;
}

// Each tile votes for its sharpest candidate; returns the lower median vote
// and fills the per-candidate vote counts.
std::size_t tile_vote(const std::vector<std::vector<double>>& scores, std::vector<int>& votes) {
  votes.assign(scores.size(), 0);
  std::vector<std::size_t> picks;
  for (std::size_t t = 0; t < scores.front().size(); ++t) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i)
      if (scores[i][t] < scores[best][t]) best = i;
    if (!std::isfinite(scores[best][t])) continue;
    ++votes[best];
    picks.push_back(best);
  }
  if (picks.empty()) throw Error("layer has insufficient texture");
  std::sort(picks.begin(), picks.end());
  return picks[(picks.size() - 1) / 2];
}

}  // namespace

void SolverConfig::validate() const {
  if (kernel_size < 1 || kernel_size % 2 == 0) throw Error("kernel_size must be a positive odd integer");
  if (outer_iters < 1) throw Error("outer_iters must be >= 1");
  if (!(lambda1 > 0.0) || !(lambda3 > 0.0)) throw Error("lambda1 and lambda3 must be positive");
  if (lambda2 && !(*lambda2 > 0.0)) throw Error("lambda2 must be positive");
  if (!(lambda2_min > 0.0) || lambda2_max < lambda2_min) throw Error("invalid lambda2 clamp range");
  if (!(admm.rho > 0.0) || admm.inner_iters < 1 || admm.cg_iters < 1 || !(admm.cg_tol > 0.0))
    throw Error("invalid ADMM settings");
  if (!(pga.initial_step > 0.0) || pga.max_iters < 1 || !(pga.stop_tol > 0.0)) throw Error("invalid PGA settings");
  if (!(feasible.rank_threshold_ratio > 0.0 && feasible.rank_threshold_ratio < 1.0))
    throw Error("rank_threshold_ratio must lie in (0, 1)");
  if (feasible.rank_cap && *feasible.rank_cap < 1) throw Error("rank_cap must be >= 1");
  if (!(disk_radius_min >= 0.0) || disk_radius_max < disk_radius_min) throw Error("invalid disk radius range");
  if (2.0 * disk_radius_min + 1.0 > kernel_size) throw Error("disk radius range exceeds kernel size");
  if (init_admm_iters < 1) throw Error("init_admm_iters must be >= 1");
  if (!(init_lambda1 > 0.0)) throw Error("init_lambda1 must be positive");
}

double lambda2_from_kernel(const Kernel& k, double lo, double hi) {
  const double raw = (-50.0 * k.matrix().norm() + 15.0) * 1e5;
  return std::clamp(raw, lo, hi);
}

namespace {

KernelInit search_disks(const Working& wp, const SolverConfig& cfg) {
  const int d = cfg.kernel_size;
  const Grid& f = wp.f;
  const Mask& alpha = wp.alpha;

  // A region without structure cannot discriminate between disks.
  const double n = static_cast<double>(alpha.count());
  const double mean = (f * alpha.grid()).sum() / n;
  const double var = ((f - mean).square() * alpha.grid()).sum() / n;
  if (!(var > 1e-10)) throw Error("layer has insufficient texture");

  const SparsifyingTransform w(cfg.transform);
  AdmmConfig admm = cfg.admm;
  admm.inner_iters = cfg.init_admm_iters;
  const Grid zero = Grid::Zero(f.rows(), f.cols());

  const std::vector<Tile> tiles = score_tiles(f, alpha, kScoreTile);
  auto sharpness = [&](double radius) {
    const Kernel k = disk_kernel(radius, d);
    const AdmmResult res = admm_solve_u(k, zero, alpha, f, cfg.init_lambda1, w, admm, &f);
    return tile_scores(res.u, alpha, tiles, kScoreTile);
  };
  auto search = [&](const std::vector<double>& radii, KernelInit& out) {
    std::vector<std::vector<double>> scores;
    for (double r : radii) scores.push_back(sharpness(r));
    std::vector<int> votes;
    const std::size_t pick = tile_vote(scores, votes);
    for (std::size_t i = 0; i < radii.size(); ++i) out.scores.emplace_back(radii[i], votes[i]);
    return radii[pick];
  };

  KernelInit best;
  const double coarse = search(candidate_radii(cfg.disk_radius_min, cfg.disk_radius_max, d), best);
  std::vector<double> fine;
  for (double r : {coarse - 0.5, coarse, coarse + 0.5})
    if (r >= cfg.disk_radius_min && r <= cfg.disk_radius_max && 2.0 * r + 1.0 <= d) fine.push_back(r);
  best.radius = fine.size() > 1 ? search(fine, best) : coarse;
  best.k = disk_kernel(best.radius, d);

  best.lambda2 = cfg.lambda2 ? *cfg.lambda2 : lambda2_from_kernel(best.k, cfg.lambda2_min, cfg.lambda2_max);
  return best;
}

}  // namespace

KernelInit init_kernel(const LayerProblem& problem) {
  check_problem(problem);
  const Grid f = to_luminance(problem.f).plane(0);
  return search_disks(working_problem(f, problem.alpha, problem.config.kernel_size), problem.config);
}

Grid weight_map(const Grid& u, const Kernel& k, const Mask& alpha, const Grid& f) {
  const Grid r = forward_masked(u, k.matrix(), alpha) - alpha.grid() * f;
  return (-500.0 * r.abs()).exp();
}

LayerSolution solve_layer(const LayerProblem& problem) {
  check_problem(problem);
  const SolverConfig& cfg = problem.config;
  const Working wp = working_problem(to_luminance(problem.f).plane(0), problem.alpha, cfg.kernel_size);
  const Grid& f = wp.f;
  const Mask& alpha = wp.alpha;
  const SparsifyingTransform w(cfg.transform);

  const KernelInit init = search_disks(wp, cfg);
  LayerSolution sol;
  sol.k = init.k;
  sol.lambda2 = init.lambda2;
  sol.init_radius = init.radius;
  Grid c = Grid::Zero(f.rows(), f.cols());
  Grid weights = Grid::Ones(f.rows(), f.cols());

  Grid u = f;
  int cg_failures = 0;
  int degenerate = 0;
  for (int n = 0; n < cfg.outer_iters; ++n) {
    const AdmmResult ures = admm_solve_u(sol.k, c, alpha, f, cfg.lambda1, w, cfg.admm, &u);
    u = ures.u;
    cg_failures += ures.cg_failures;

    const PgaResult kres = pga_solve_k(u, c, alpha, f, sol.lambda2, sol.k, cfg.feasible, cfg.pga);
    sol.k = kres.k;
    if (kres.degenerate) ++degenerate;

    // Weights come from the first-pass estimate and stay fixed.
    if (n == 0) weights = weight_map(u, sol.k, alpha, f);
    if (cfg.use_c_term) {
      const Grid r = forward_masked(u, sol.k.matrix(), alpha) - alpha.grid() * f;
      c = hard_threshold_weighted(r, weights, cfg.lambda3);
    }
    sol.objective_trace.push_back(
        objective_eval(u, sol.k, c, alpha, f, cfg.lambda1, sol.lambda2, cfg.lambda3, weights, w));
  }
  if (cg_failures > 0)
    sol.warnings.push_back(std::to_string(cg_failures) + " CG solves stopped at the iteration cap");
  if (degenerate > 0)
    sol.warnings.push_back(std::to_string(degenerate) + " kernel updates hit a degenerate projection");

  const int m = wp.margin;
  sol.c = crop(c, m);
  sol.weights = crop(weights, m);
  if (problem.f.channels() == 1) {
    sol.u = Image(crop(u, m));
  } else {
    std::vector<Grid> planes;
    for (int ch = 0; ch < problem.f.channels(); ++ch) {
      const Grid fc = pad_edge(problem.f.plane(ch), m);
      planes.push_back(crop(admm_solve_u(sol.k, c, alpha, fc, cfg.lambda1, w, cfg.admm, &fc).u, m));
    }
    sol.u = Image(std::move(planes));
  }
  return sol;
}

}  // namespace defocus

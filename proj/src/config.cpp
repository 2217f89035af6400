#include "defocus/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace defocus {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char* what) {
  throw Error("config: " + std::string(key) + " expects " + what + ", got '" + std::string(value) + "'");
}

int to_int(std::string_view key, std::string_view v) {
  int out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "a number");
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "true or false");
}

using Setter = std::function<void(SolverConfig&, std::string_view, std::string_view)>;

struct Entry {
  std::string key;
  Setter set;
};

Setter int_field(int SolverConfig::*field) {
  return [field](SolverConfig& c, std::string_view k, std::string_view v) { c.*field = to_int(k, v); };
}

Setter real_field(double SolverConfig::*field) {
  return [field](SolverConfig& c, std::string_view k, std::string_view v) { c.*field = to_double(k, v); };
}

const std::vector<Entry>& table() {
  static const std::vector<Entry> entries = {
      {"kernel_size", int_field(&SolverConfig::kernel_size)},
      {"outer_iters", int_field(&SolverConfig::outer_iters)},
      {"lambda1", real_field(&SolverConfig::lambda1)},
      {"lambda2",
       [](SolverConfig& c, auto k, auto v) {
         if (v == "auto") c.lambda2.reset();
         else c.lambda2 = to_double(k, v);
       }},
      {"lambda3", real_field(&SolverConfig::lambda3)},
      {"lambda2_min", real_field(&SolverConfig::lambda2_min)},
      {"lambda2_max", real_field(&SolverConfig::lambda2_max)},
      {"use_c_term", [](SolverConfig& c, auto k, auto v) { c.use_c_term = to_bool(k, v); }},
      {"transform",
       [](SolverConfig& c, auto k, auto v) {
         if (v == "framelet") c.transform = TransformKind::framelet;
         else if (v == "finite_difference") c.transform = TransformKind::finite_difference;
         else bad_value(k, v, "framelet or finite_difference");
       }},
      {"admm_rho", [](SolverConfig& c, auto k, auto v) { c.admm.rho = to_double(k, v); }},
      {"admm_inner_iters", [](SolverConfig& c, auto k, auto v) { c.admm.inner_iters = to_int(k, v); }},
      {"admm_cg_iters", [](SolverConfig& c, auto k, auto v) { c.admm.cg_iters = to_int(k, v); }},
      {"admm_cg_tol", [](SolverConfig& c, auto k, auto v) { c.admm.cg_tol = to_double(k, v); }},
      {"pga_initial_step", [](SolverConfig& c, auto k, auto v) { c.pga.initial_step = to_double(k, v); }},
      {"pga_max_iters", [](SolverConfig& c, auto k, auto v) { c.pga.max_iters = to_int(k, v); }},
      {"pga_stop_tol", [](SolverConfig& c, auto k, auto v) { c.pga.stop_tol = to_double(k, v); }},
      {"rank_cap",
       [](SolverConfig& c, auto k, auto v) {
         if (v == "auto") c.feasible.rank_cap.reset();
         else c.feasible.rank_cap = to_int(k, v);
       }},
      {"rank_threshold_ratio",
       [](SolverConfig& c, auto k, auto v) { c.feasible.rank_threshold_ratio = to_double(k, v); }},
      {"low_rank", [](SolverConfig& c, auto k, auto v) { c.feasible.low_rank = to_bool(k, v); }},
      {"symmetry", [](SolverConfig& c, auto k, auto v) { c.feasible.symmetry = to_bool(k, v); }},
      {"projection_max_passes", [](SolverConfig& c, auto k, auto v) { c.feasible.max_passes = to_int(k, v); }},
      {"projection_tolerance",
       [](SolverConfig& c, auto k, auto v) { c.feasible.pass_tolerance = to_double(k, v); }},
      {"disk_radius_min", real_field(&SolverConfig::disk_radius_min)},
      {"disk_radius_max", real_field(&SolverConfig::disk_radius_max)},
      {"init_admm_iters", int_field(&SolverConfig::init_admm_iters)},
      {"init_lambda1", real_field(&SolverConfig::init_lambda1)},
  };
  return entries;
}

}  // namespace

void apply_setting(SolverConfig& cfg, std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  for (const Entry& e : table())
    if (e.key == key) {
      e.set(cfg, key, value);
      return;
    }
  throw Error("config: unknown key '" + std::string(key) + "'");
}

SolverConfig parse_config(const std::string& text, SolverConfig base) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = line;
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) throw Error("config line " + std::to_string(lineno) + ": expected key = value");
    try {
      apply_setting(base, s.substr(0, eq), s.substr(eq + 1));
    } catch (const Error& e) {
      throw Error("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  base.validate();
  return base;
}

SolverConfig load_config(const std::filesystem::path& path, SolverConfig base) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const Entry& e : table()) out.push_back(e.key);
    return out;
  }();
  return keys;
}

}  // namespace defocus

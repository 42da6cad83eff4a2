#include "run_config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace dlab::cli {

using nlohmann::json;

std::string to_string(Command c) {
  switch (c) {
    case Command::solve_dyson: return "solve-dyson";
    case Command::stability: return "stability";
    case Command::density: return "density";
    case Command::simulate: return "simulate";
  }
  return "?";
}

Command command_from_string(const std::string& s) {
  for (Command c : {Command::solve_dyson, Command::stability, Command::density, Command::simulate})
    if (to_string(c) == s) return c;
  throw config_error("unknown command '" + s + "'");
}

RunConfig defaults_for(Command c, const std::string& experiment) {
  RunConfig r;
  r.command = c;
  if (c == Command::density) r.format = Format::csv;
  if (c != Command::simulate) return r;

  r.experiment = experiment;
  switch (experiment_from_string(experiment)) {
    case Experiment::radius:
      r.n = {128, 256, 512, 1024};
      break;
    case Experiment::locallaw:
      r.n = {128, 256, 512};
      r.z_re = 1.0;
      break;
    case Experiment::circlaw:
      r.n = {512};
      break;
    case Experiment::deloc:
      r.n = {512};
      r.trials = 10;
      break;
    case Experiment::girko:
      r.n = {64};
      r.trials = 1;
      break;
    case Experiment::cubic:
      r.n = {128, 256, 512};
      r.z_re = std::sqrt(0.99);
      r.eta_f_multiple = 10.0;
      break;
  }
  r.profile = "flat:" + std::to_string(r.n.front());
  return r;
}

namespace {

json calibration_json(const Calibration& k) {
  return {{"version", k.version},
          {"local_law", k.local_law},
          {"local_law_fraction", k.local_law_fraction},
          {"count", k.count},
          {"circlaw", k.circlaw},
          {"circlaw_fraction", k.circlaw_fraction},
          {"ginibre_factor", k.ginibre_factor},
          {"radius_median_max", k.radius_median_max},
          {"slope_lo", k.slope_lo},
          {"slope_hi", k.slope_hi},
          {"deloc_log_factor", k.deloc_log_factor},
          {"deloc_quantile", k.deloc_quantile},
          {"girko_tol", k.girko_tol},
          {"girko_gain_lo", k.girko_gain_lo},
          {"girko_gain_hi", k.girko_gain_hi},
          {"offdiag_fraction", k.offdiag_fraction},
          {"cubic_ratio_max", k.cubic_ratio_max}};
}

// Reads each known key that is present; any key not in the table is an error.
class Reader {
 public:
  explicit Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw config_error(where_ + " must be a JSON object");
  }

  template <class T>
  void field(const std::string& key, T& dst) {
    known_.emplace(key, true);
    if (!j_.contains(key)) return;
    const json& v = j_.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw config_error(where_ + "." + key + " must be a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw config_error(where_ + "." + key + " must be an integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw config_error(where_ + "." + key + " must be a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw config_error(where_ + "." + key + " must be a string");
    }
    dst = v.get<T>();
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!known_.count(it.key())) throw config_error("unknown key '" + it.key() + "' in " + where_);
  }

 private:
  const json& j_;
  std::string where_;
  std::map<std::string, bool> known_;
};

Calibration calibration_from_json(const json& j) {
  Calibration k;
  Reader r(j, "calibration");
  r.field("version", k.version);
  r.field("local_law", k.local_law);
  r.field("local_law_fraction", k.local_law_fraction);
  r.field("count", k.count);
  r.field("circlaw", k.circlaw);
  r.field("circlaw_fraction", k.circlaw_fraction);
  r.field("ginibre_factor", k.ginibre_factor);
  r.field("radius_median_max", k.radius_median_max);
  r.field("slope_lo", k.slope_lo);
  r.field("slope_hi", k.slope_hi);
  r.field("deloc_log_factor", k.deloc_log_factor);
  r.field("deloc_quantile", k.deloc_quantile);
  r.field("girko_tol", k.girko_tol);
  r.field("girko_gain_lo", k.girko_gain_lo);
  r.field("girko_gain_hi", k.girko_gain_hi);
  r.field("offdiag_fraction", k.offdiag_fraction);
  r.field("cubic_ratio_max", k.cubic_ratio_max);
  r.finish();
  return k;
}

}  // namespace

json to_json(const RunConfig& c) {
  return {{"command", to_string(c.command)},
          {"experiment", c.experiment},
          {"profile", c.profile},
          {"z_re", c.z_re},
          {"z_im", c.z_im},
          {"eta", c.eta},
          {"tol", c.tol},
          {"damping", c.damping},
          {"method", c.method},
          {"rmax", c.rmax},
          {"dr", c.dr},
          {"eta_min", c.eta_min},
          {"eta_max", c.eta_max},
          {"nodes", c.nodes},
          {"rho_star", c.rho_star},
          {"envelope", c.envelope},
          {"n", c.n},
          {"trials", c.trials},
          {"seed", c.seed},
          {"dist", c.dist},
          {"hook", c.hook},
          {"eta_f_multiple", c.eta_f_multiple},
          {"eta_exponent", c.eta_exponent},
          {"a", c.a},
          {"bump_radius", c.bump_radius},
          {"bump_amplitude", c.bump_amplitude},
          {"girko_center_re", c.girko_center_re},
          {"girko_center_im", c.girko_center_im},
          {"girko_radius", c.girko_radius},
          {"girko_grid", c.girko_grid},
          {"girko_refined", c.girko_refined},
          {"g_equals_m", c.g_equals_m},
          {"calibration", calibration_json(c.calibration)},
          {"output", c.output},
          {"csv", c.csv},
          {"format", c.format == Format::json ? "json" : "csv"},
          {"threads", c.threads}};
}

RunConfig run_config_from_json(const json& j) {
  try {
    if (!j.is_object()) throw config_error("config must be a JSON object");
    if (!j.contains("command") || !j.at("command").is_string()) throw config_error("config needs a 'command' string");
    const Command cmd = command_from_string(j.at("command").get<std::string>());
    std::string exp = "radius";
    if (j.contains("experiment")) {
      if (!j.at("experiment").is_string()) throw config_error("config.experiment must be a string");
      exp = j.at("experiment").get<std::string>();
    }
    RunConfig c = defaults_for(cmd, exp);
    Reader r(j, "config");
    std::string command_name, format = c.format == Format::json ? "json" : "csv";
    r.field("command", command_name);
    r.field("experiment", c.experiment);
    r.field("profile", c.profile);
    r.field("z_re", c.z_re);
    r.field("z_im", c.z_im);
    r.field("eta", c.eta);
    r.field("tol", c.tol);
    r.field("damping", c.damping);
    r.field("method", c.method);
    r.field("rmax", c.rmax);
    r.field("dr", c.dr);
    r.field("eta_min", c.eta_min);
    r.field("eta_max", c.eta_max);
    r.field("nodes", c.nodes);
    r.field("rho_star", c.rho_star);
    r.field("envelope", c.envelope);
    if (j.contains("n")) {
      const json& n = j.at("n");
      if (!n.is_array()) throw config_error("config.n must be an array of integers");
      c.n.clear();
      for (const json& x : n) {
        if (!x.is_number_integer()) throw config_error("config.n must be an array of integers");
        c.n.push_back(x.get<int>());
      }
    }
    std::vector<int> unused;
    r.field("n", unused);
    r.field("trials", c.trials);
    r.field("seed", c.seed);
    r.field("dist", c.dist);
    r.field("hook", c.hook);
    r.field("eta_f_multiple", c.eta_f_multiple);
    r.field("eta_exponent", c.eta_exponent);
    r.field("a", c.a);
    r.field("bump_radius", c.bump_radius);
    r.field("bump_amplitude", c.bump_amplitude);
    r.field("girko_center_re", c.girko_center_re);
    r.field("girko_center_im", c.girko_center_im);
    r.field("girko_radius", c.girko_radius);
    r.field("girko_grid", c.girko_grid);
    r.field("girko_refined", c.girko_refined);
    r.field("g_equals_m", c.g_equals_m);
    if (j.contains("calibration")) c.calibration = calibration_from_json(j.at("calibration"));
    json unused_cal;
    r.field("calibration", unused_cal);
    r.field("output", c.output);
    r.field("csv", c.csv);
    r.field("format", format);
    r.field("threads", c.threads);
    r.finish();
    if (format == "json")
      c.format = Format::json;
    else if (format == "csv")
      c.format = Format::csv;
    else
      throw config_error("config.format must be 'json' or 'csv'");
    return c;
  } catch (const json::exception& e) {
    throw config_error(std::string("malformed config: ") + e.what());
  }
}

RunConfig load_config_file(const std::string& path) {
  const std::filesystem::path p(path);
  const std::string ext = p.extension().string();
  if (ext == ".toml") throw config_error("TOML configs are not supported; use a .json config");
  std::ifstream in(path);
  if (!in) throw config_error("cannot read config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw config_error("config '" + path + "' is not valid JSON: " + e.what());
  }
  // A report written by this tool carries its config.
  if (j.is_object() && j.contains("config") && j.contains("version")) return run_config_from_json(j.at("config"));
  return run_config_from_json(j);
}

void validate(const RunConfig& c) {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw config_error(msg);
  };
  require(std::isfinite(c.z_re) && std::isfinite(c.z_im), "z must be finite");
  require(c.tol > 0.0 && c.tol < 1.0, "tol must lie in (0, 1)");
  require(c.damping > 0.0 && c.damping <= 1.0, "damping must lie in (0, 1]");
  require(c.method == "newton" || c.method == "fixed_point", "method must be 'newton' or 'fixed_point'");
  require(c.threads >= 1, "threads must be positive");
  require(c.rho_star > 0.0 && c.envelope > 0.0, "rho_star and envelope must be positive");
  if (c.format == Format::csv) require(c.command == Command::density, "--format csv is only available for density");
  if (!c.csv.empty()) require(c.command == Command::simulate, "--csv is only available for simulate");
  switch (c.command) {
    case Command::solve_dyson:
    case Command::stability:
      require(c.eta >= min_supported_eta && std::isfinite(c.eta), "eta must be finite and at least 1e-12");
      break;
    case Command::density:
      require(c.dr > 0.0 && c.dr <= 0.05, "dr must lie in (0, 0.05]");
      require(c.rmax >= 1.5 && std::isfinite(c.rmax), "rmax must be at least 1.5");
      require(c.eta_min >= min_supported_eta && c.eta_max > c.eta_min && std::isfinite(c.eta_max),
              "need 1e-12 <= eta_min < eta_max");
      require(c.nodes >= 2, "nodes must be at least 2");
      break;
    case Command::simulate:
      experiment_from_string(c.experiment);
      distribution_from_string(c.dist);
      matrix_hook_from_string(c.hook);
      require(!c.n.empty(), "simulate needs at least one n");
      require(c.trials >= 1, "trials must be positive");
      require(c.eta >= 0.0 && std::isfinite(c.eta), "eta must be finite and nonnegative");
      require(c.eta_f_multiple >= 0.0, "eta_f_multiple must be nonnegative");
      break;
  }
}

VarianceProfile load_profile(const std::string& source) {
  std::error_code ec;
  if (std::filesystem::is_regular_file(source, ec)) {
    std::ifstream in(source);
    try {
      return profile_from_json(json::parse(in));
    } catch (const json::exception& e) {
      throw config_error("profile file '" + source + "' is not valid JSON: " + e.what());
    }
  }
  return parse_profile_spec(source);
}

SolverOptions solver_options(const RunConfig& c) {
  SolverOptions o;
  o.tol = c.tol;
  o.damping = c.damping;
  o.method = c.method == "fixed_point" ? SolverMethod::fixed_point : SolverMethod::newton;
  return o;
}

StabilityOptions stability_options(const RunConfig& c) {
  StabilityOptions o;
  o.rho_star = c.rho_star;
  o.envelope = c.envelope;
  return o;
}

QuadratureOptions quadrature_options(const RunConfig& c) {
  QuadratureOptions q;
  q.eta_min = c.eta_min;
  q.eta_max = c.eta_max;
  q.nodes = c.nodes;
  q.solver = solver_options(c);
  return q;
}

ExperimentConfig experiment_config(const RunConfig& c) {
  ExperimentConfig e;
  e.experiment = experiment_from_string(c.experiment);
  e.profile = load_profile(c.profile);
  e.dist = distribution_from_string(c.dist);
  e.hook = matrix_hook_from_string(c.hook);
  e.n_list = c.n;
  e.trials = c.trials;
  e.seed = c.seed;
  e.z = cplx(c.z_re, c.z_im);
  e.eta = c.eta;
  e.eta_f_multiple = c.eta_f_multiple;
  e.eta_exponent = c.eta_exponent;
  e.a = c.a;
  e.z0 = e.z;
  e.bump = Bump{0.0, c.bump_radius, c.bump_amplitude};
  e.girko_bump = Bump{cplx(c.girko_center_re, c.girko_center_im), c.girko_radius, 1.0};
  e.girko_grid = c.girko_grid;
  e.girko_refined = c.girko_refined;
  e.g_equals_m = c.g_equals_m;
  e.threads = c.threads;
  e.cal = c.calibration;
  e.solver = solver_options(c);
  e.stability = stability_options(c);
  e.quadrature = quadrature_options(c);
  e.radial = RadialGrid{c.rmax, c.dr};
  return e;
}

}  // namespace dlab::cli

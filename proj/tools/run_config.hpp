#pragma once

#include <dysonlab/experiments.hpp>

#include <cstdint>
#include <json.hpp>
#include <string>
#include <vector>

namespace dlab::cli {

enum class Command { solve_dyson, stability, density, simulate };

std::string to_string(Command c);
Command command_from_string(const std::string& s);

enum class Format { json, csv };

// Everything a run depends on. Defaults are filled per command (and experiment) before any
// override, so a stored config is always fully explicit.
struct RunConfig {
  Command command = Command::solve_dyson;
  std::string experiment = "radius";     // simulate only
  std::string profile = "flat:256";      // inline spec or path to a JSON profile
  double z_re = 0.0, z_im = 0.0;
  double eta = 0.0;                      // simulate: 0 derives eta from eta_f_multiple / eta_exponent
  // solver
  double tol = 1e-12;
  double damping = 0.5;
  std::string method = "newton";
  // density
  double rmax = 1.5;
  double dr = 0.01;
  double eta_min = 1e-9;
  double eta_max = 1e4;
  int nodes = 200;
  // stability
  double rho_star = 0.2;
  double envelope = 50.0;
  // simulate
  std::vector<int> n;
  int trials = 20;
  std::uint64_t seed = 1;
  std::string dist = "complex_gaussian";
  std::string hook = "none";
  double eta_f_multiple = 0.0;
  double eta_exponent = -0.65;
  double a = 0.0;
  double bump_radius = 0.5;
  double bump_amplitude = 1.0;
  double girko_center_re = 0.0, girko_center_im = 0.0;
  double girko_radius = 0.8;
  int girko_grid = 200;
  int girko_refined = 400;
  bool g_equals_m = false;
  Calibration calibration;
  // output
  std::string output;                    // empty: stdout
  std::string csv;                       // simulate: optional per-trial CSV
  Format format = Format::json;
  int threads = 1;

  bool operator==(const RunConfig&) const = default;
};

// Defaults for a command; for simulate also the experiment's standard setup.
RunConfig defaults_for(Command c, const std::string& experiment = "radius");

nlohmann::json to_json(const RunConfig& c);
// Missing keys take defaults_for(command, experiment); unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& j);
// Reads a .json config, or the "config" member of a report written by this tool.
RunConfig load_config_file(const std::string& path);

// Range and consistency checks; throws config_error.
void validate(const RunConfig& c);

VarianceProfile load_profile(const std::string& source);
SolverOptions solver_options(const RunConfig& c);
StabilityOptions stability_options(const RunConfig& c);
QuadratureOptions quadrature_options(const RunConfig& c);
ExperimentConfig experiment_config(const RunConfig& c);

}  // namespace dlab::cli

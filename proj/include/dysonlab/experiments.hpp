#pragma once

#include <dysonlab/density.hpp>
#include <dysonlab/ensemble.hpp>
#include <dysonlab/stability.hpp>

#include <cstdint>
#include <json.hpp>
#include <string>
#include <vector>

namespace dlab {

enum class Experiment { radius, locallaw, circlaw, deloc, girko, cubic };

std::string to_string(Experiment e);
Experiment experiment_from_string(const std::string& s);

// f(w) = amplitude * (1 - |w - center|^2 / radius^2)^3 on the disc, 0 outside. C^2.
struct Bump {
  cplx center = 0.0;
  double radius = 0.5;
  double amplitude = 1.0;
};

double bump_value(const Bump& f, cplx w);
double bump_laplacian(const Bump& f, cplx w);
// ||Delta f||_1 = 32 pi / 9 * |amplitude|, independent of the radius.
double bump_laplacian_l1(const Bump& f);
// int f d^2w = pi radius^2 amplitude / 4
double bump_integral(const Bump& f);

struct GirkoResult {
  double lhs = 0.0;
  double rhs = 0.0;
  double rel_err = 0.0;
  int grid = 0;
  long jittered = 0;   // grid points moved off an exact eigenvalue collision
};

// lhs = (1/n) sum f(zeta_i); rhs = (1/4 pi n) int Delta f log|det H_z| d^2z by the midpoint rule
// on a grid x grid tensor grid over the bounding square of the bump.
GirkoResult girko_check(const CMat& X, const Bump& f, int grid);

// Frozen calibration constants.
struct Calibration {
  std::string version = "1";
  double local_law = 20.0;          // |<G - M>|, <R (G - M)> <= C / (n eta)
  double local_law_fraction = 0.9;
  double count = 20.0;              // median count <= C (n eta rho + 1)
  double circlaw = 20.0;
  double circlaw_fraction = 0.9;
  double ginibre_factor = 3.0;
  double radius_median_max = 0.1;
  double slope_lo = -0.65;
  double slope_hi = -0.35;
  double deloc_log_factor = 10.0;
  double deloc_quantile = 0.99;
  double girko_tol = 0.05;
  double girko_gain_lo = 1.4;
  double girko_gain_hi = 4.0;
  double offdiag_fraction = 0.7;
  double cubic_ratio_max = 1.0;

  bool operator==(const Calibration&) const = default;
};

struct ExperimentConfig {
  Experiment experiment = Experiment::radius;
  // Kind-generated profiles are regenerated at every n in n_list; custom profiles require
  // n_list == {profile.n}.
  VarianceProfile profile;
  Distribution dist = Distribution::complex_gaussian;
  MatrixHook hook = MatrixHook::none;
  std::vector<int> n_list;
  int trials = 20;
  std::uint64_t seed = 1;
  cplx z = 1.0;
  // eta: explicit value if > 0, else eta_f_multiple * eta_f(|z|^2, n) if > 0, else n^eta_exponent.
  double eta = 0.0;
  double eta_f_multiple = 0.0;
  double eta_exponent = -0.65;
  // circlaw: f_{z0,a}(w) = f(n^a (w - z0)) with the bump centered at 0.
  double a = 0.0;
  cplx z0 = 0.0;
  Bump bump;
  // girko
  Bump girko_bump{0.0, 0.8, 1.0};
  int girko_grid = 200;
  int girko_refined = 400;
  // cubic: replace G by M (then D = 0 exactly)
  bool g_equals_m = false;
  int threads = 1;
  Calibration cal;
  SolverOptions solver;
  StabilityOptions stability;
  QuadratureOptions quadrature;
  RadialGrid radial;
};

struct Check {
  std::string name;
  bool contract = true;   // false: trend, reported but never fails the run
  bool passed = false;
  double value = 0.0;
  double limit = 0.0;
  std::string detail;
};

struct ExperimentReport {
  Experiment experiment = Experiment::radius;
  std::vector<int> n_list;
  int trials = 0;
  std::uint64_t seed = 0;
  nlohmann::json seeds = nlohmann::json::array();       // {n, trial, trial_index}
  nlohmann::json per_trial = nlohmann::json::array();
  nlohmann::json aggregates = nlohmann::json::object();
  std::vector<Check> checks;

  bool contracts_passed() const;
  const Check* find(const std::string& name) const;
};

nlohmann::json to_json(const ExperimentReport& r);

// Stream index of trial t at dimension n.
std::uint64_t trial_stream(int n, int t);

// Regenerates a kind-generated profile at dimension n (normalized when the template is).
VarianceProfile profile_at(const VarianceProfile& tpl, int n);

double experiment_eta(const ExperimentConfig& cfg, int n);

// Least-squares slope of log y against log x.
double loglog_fit(const std::vector<double>& x, const std::vector<double>& y);

ExperimentReport spectral_radius_experiment(const ExperimentConfig& cfg);
ExperimentReport local_law_experiment(const ExperimentConfig& cfg);
ExperimentReport circular_law_experiment(const ExperimentConfig& cfg);
ExperimentReport delocalization_check(const ExperimentConfig& cfg);
ExperimentReport girko_experiment(const ExperimentConfig& cfg);
ExperimentReport cubic_residual_experiment(const ExperimentConfig& cfg);
ExperimentReport run_experiment(const ExperimentConfig& cfg);

}  // namespace dlab

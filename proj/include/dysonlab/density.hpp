#pragma once

#include <dysonlab/dyson.hpp>

#include <vector>

namespace dlab {

struct QuadratureOptions {
  double eta_min = 1e-9;
  double eta_max = 1e4;
  int nodes = 200;              // log-spaced, trapezoid in log eta
  int representative_dim = 32;  // solve dimension for flat / even two_block profiles
  SolverOptions solver;
};

struct LogPotential {
  double value = 0.0;
  double head = 0.0;        // int_0^eta_min, one-point estimate
  double body = 0.0;        // trapezoid on [eta_min, eta_max]
  double tail = 0.0;        // int_eta_max^inf from the large-eta expansion
  double tail_error = 0.0;  // size of the first neglected tail term
};

// L(z) = -(1/2pi) int_0^inf (<Im M(z, eta)> - 1/(1 + eta)) deta at z = r.
LogPotential log_potential_detail(const VarianceProfile& S, double r, const QuadratureOptions& q = {});
double log_potential(const VarianceProfile& S, double r, const QuadratureOptions& q = {});
// Same at a complex point; depends only on |z|.
double log_potential(const VarianceProfile& S, cplx z, const QuadratureOptions& q = {});

// Profile actually handed to the Dyson solver: flat and even-n two_block profiles have
// block-constant solutions, so a small dimension reproduces them exactly.
VarianceProfile density_solve_profile(const VarianceProfile& S, const QuadratureOptions& q);

struct RadialGrid {
  double rmax = 1.5;
  double dr = 0.01;
};

struct DensityProfile {
  std::vector<double> radii;
  std::vector<double> L_values;
  std::vector<double> sigma_values;   // clipped at 0
  std::vector<double> sigma_raw;      // unclipped finite differences
  double sigma_min_raw = 0.0;
  double total_mass = 0.0;            // 2 pi int sigma_raw r dr
  double support_radius_estimate = 0.0;
  bool mass_ok = false;
  bool nonnegative_ok = false;        // sigma_raw >= -1e-6
  bool exterior_ok = false;           // sigma <= 1e-4 for r >= 1.05
  bool invariants_ok() const { return mass_ok && nonnegative_ok && exterior_ok; }
};

// sigma = L'' + L'/r by fourth-order finite differences. Centered five-point stencils are used
// where they agree with the three-point ones to sigma_stencil_switch; across the edge of the
// support (where L'' jumps) a one-sided six-point stencil is used instead. At r = 0,
// sigma = 2 L''(0) from the even expansion of L.
inline constexpr double sigma_stencil_switch = 1e-3;
DensityProfile sigma_radial(const VarianceProfile& S, const RadialGrid& grid = {}, const QuadratureOptions& q = {},
                            int threads = 1);

double fluctuation_scale(double z2, long n);

struct ScaleRow {
  double z2 = 0.0;
  double eta_f = 0.0;
  double xi1_tilde = 0.0;
  double xi2_tilde = 0.0;
};

// xi tilde comparators: xi2 = |1 - |z|^2|^(1/2) + eta^(1/3), xi1 = xi2^2.
double xi2_tilde(double z2, double eta);
inline double xi1_tilde(double z2, double eta) { return xi2_tilde(z2, eta) * xi2_tilde(z2, eta); }

// One row per |z|^2, comparators evaluated at eta = eta_f.
std::vector<ScaleRow> scale_table(const std::vector<double>& z2_values, long n);

}  // namespace dlab

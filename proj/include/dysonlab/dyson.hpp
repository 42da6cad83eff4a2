#pragma once

#include <dysonlab/profile.hpp>

namespace dlab {

enum class SolverMethod { newton, fixed_point };

struct SolverOptions {
  double tol = 1e-12;
  double damping = 0.5;      // fixed-point mixing weight
  double eta0 = 10.0;        // continuation start
  double ratio = 0.7;        // continuation step
  long max_iter = 200000;    // per grid point
  long window = 2000;        // fixed-point divergence window
  SolverMethod method = SolverMethod::newton;
};

inline constexpr double min_supported_eta = 1e-12;

struct DysonSolution {
  cplx z;
  double eta = 0.0;
  Vec v1, v2, u;
  double rho = 0.0;
  long iterations = 0;
  double residual = 0.0;  // relative defect
  double update = 0.0;    // last relative update; may sit at the rounding floor when the operator is near-singular
};

// Im M = diag(v1, v2), M = Q U Q with Q = diag(q).
struct MdeMatrices {
  CMat M;
  CMat U;
  Vec q;
};

// Relative defect max_i |v_i * rhs_i - 1| of
//   1/v1 = eta + S v2 + |z|^2/(eta + S^t v1),  1/v2 = eta + S^t v1 + |z|^2/(eta + S v2).
double dyson_defect(const Mat& S, cplx z, double eta, const Vec& v1, const Vec& v2);

// Continuation from eta0 down to eta on a geometric grid.
DysonSolution solve_dyson(const VarianceProfile& S, cplx z, double eta, const SolverOptions& opt = {});

// Single solve at eta starting from (v1, v2).
DysonSolution solve_dyson_from(const VarianceProfile& S, cplx z, double eta, const Vec& v1, const Vec& v2,
                               const SolverOptions& opt = {});

// Solves along a decreasing list of eta values, each warm-started from the previous one.
std::vector<DysonSolution> solve_dyson_path(const VarianceProfile& S, cplx z, const std::vector<double>& etas,
                                            const SolverOptions& opt = {});

// Flat and even-n two_block profiles have block-constant solutions: solve at dimension
// `small` (rounded up to even) and tile. Other profiles are solved at full size.
DysonSolution solve_dyson_blockwise(const VarianceProfile& S, cplx z, double eta, const SolverOptions& opt = {},
                                    int small = 32);

MdeMatrices assemble_matrices(const DysonSolution& sol);

// || M^{-1} + [[i eta, z], [conj z, i eta]] + S[M] ||_max
double mde_residual(const CMat& M, const VarianceProfile& S, cplx z, double eta);
inline double mde_residual(const MdeMatrices& m, const VarianceProfile& S, cplx z, double eta) {
  return mde_residual(m.M, S, z, eta);
}

// [[i eta, z], [conj z, i eta]] as a 2n x 2n matrix.
CMat spectral_shift(Eigen::Index n, cplx z, double eta);

struct DerivativeCheck {
  double fd_norm = 0.0;
  double bound = 0.0;
  double rho = 0.0;
};

// Centered difference of M in eta with step eta/100, against C/(rho^2 + eta/rho).
DerivativeCheck eta_derivative_check(const VarianceProfile& S, cplx z, double eta, double C = 50.0,
                                     double rho_star = 0.2, const SolverOptions& opt = {});

}  // namespace dlab

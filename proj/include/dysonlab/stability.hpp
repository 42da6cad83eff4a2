#pragma once

#include <dysonlab/dyson.hpp>

#include <vector>

namespace dlab {

struct StabilityOptions {
  double rho_star = 0.2;          // small-rho regime: rho + eta/rho <= rho_star
  double envelope = 50.0;         // constant in all "~" checks
  double degeneracy = 1e-3;       // |beta - beta_*| < degeneracy * rho^2 flags a collision
  int inverse_iterations = 4;
};

// Four numbers, one per unstable direction.
struct DirectionSet {
  double B = 0.0, B_star = 0.0, B_hat = 0.0, B_hat_star = 0.0;
  double max() const;
};

struct StabilitySpectrum {
  cplx beta, beta_star;
  // Right eigen-matrices of B = 1 - C_M S and left eigen-matrices of its adjoint. The
  // left ones are diagonal.
  CMat B, B_star, B_hat, B_hat_star;
  // Their diagonals: right and left eigenvectors of the reduced matrix A for mu = 1 - beta.
  CVec d, d_star, l, l_star;
  cplx overlap_B, overlap_B_star;   // <B_hat, B>, <B_hat_star, B_star>
  cplx e_minus_B, e_minus_B_star;   // <E_-, B>, <E_-, B_star>
  double psi = 0.0;                 // rho^-4 <[(Im M)(Im M^-1)]^2>
  double gap_third = 0.0;           // |third-smallest eigenvalue of B|
  double rho = 0.0, eta = 0.0;
  bool regime = false;              // rho + eta/rho <= rho_star
  bool degenerate = false;
  bool isolated = false;            // gap_third >= 10 |beta|
  DirectionSet defect;              // relative direct-application defects
  DirectionSet alignment;           // ||c X - T|| after optimal scalar alignment
  std::vector<cplx> a_spectrum;     // eigenvalues of A, nearest to 1 first
};

// A = W S_blk with W_ab = M_ab M_ba and S_blk = [[0, S], [S^t, 0]].
CMat reduce_operator(const MdeMatrices& m, const VarianceProfile& S);

// R - M S[R] M and its adjoint R - S[M* R M*].
CMat apply_stability(const CMat& M, const Mat& S, const CMat& R);
CMat apply_stability_adjoint(const CMat& M, const Mat& S, const CMat& R);

// A[R, T] = (M S[R] T + M S[T] R) / 2
CMat bilinear_A(const CMat& M, const Mat& S, const CMat& R, const CMat& T);

// Targets of the leading-order eigenvector expansions.
struct EigenTargets {
  CMat B, B_star, B_hat, B_hat_star;
};
EigenTargets eigen_targets(const MdeMatrices& m, const DysonSolution& sol);

StabilitySpectrum stability_spectrum(const MdeMatrices& m, const DysonSolution& sol, const VarianceProfile& S,
                                     const StabilityOptions& opt = {});

struct FOperatorGap {
  double top = 0.0;
  double gap_rel = 0.0;
  bool symmetric = false;
  double asymmetry = 0.0;           // max_k |lambda_k + lambda_{2n-1-k}|
  double second = 0.0, third = 0.0; // next eigenvalues in decreasing order
};

// F = [[0, F], [F^t, 0]] with F r = sqrt(u v1/v2) S(r sqrt(u v2/v1)).
FOperatorGap f_operator_gap(const DysonSolution& sol, const VarianceProfile& S);

// Q[T] = T - <B_hat, T>/<B_hat, B> B - <B_hat_star, T>/<B_hat_star, B_star> B_star
CMat project_Q(const StabilitySpectrum& spec, const CMat& T);

struct BinvQResult {
  CMat X;
  double defect = 0.0;      // ||B[X] - Q[T]||_hs / ||T||_hs
  double condition = 0.0;   // condition estimate of the deflated reduced system
  bool ill_conditioned = false;
};

// Needs beta != beta_* (not degenerate); conditioning of the remaining spectrum is reported.
BinvQResult apply_Binv_Q(const StabilitySpectrum& spec, const MdeMatrices& m, const VarianceProfile& S,
                         const CMat& T);

struct CubicCoefficients {
  cplx mu3, mu2, mu1, mu0;   // mu1, mu0 without the X-dependent terms
  cplx xi1, xi2;
  double xi1_tilde = 0.0, xi2_tilde = 0.0;
  cplx a_B_Bstar;            // <B_hat, A[B, B_star]>
  cplx e_minus_Y2;           // <E_-, B^-1 Q A[B, B]>
  double xi2_over_rho = 0.0;
  double xi1_over_scale = 0.0;   // |xi1| / (eta/rho + rho^2)
};

CubicCoefficients cubic_coefficients(const StabilitySpectrum& spec, const MdeMatrices& m, const VarianceProfile& S,
                                     const DysonSolution& sol, const StabilityOptions& opt = {});

// The terms of mu1 and mu0 that depend on X = M D.
struct CubicXTerms {
  cplx mu1_x;     // -2<B_hat, A[B, Z]> + 2 <E_-,B>/<E_-,B_*> <B_hat, A[Z, B_*]>,  Z = B^-1 Q[X]
  cplx mu0;       // <B_hat, A[Z, Z] - X>
  double binvq_defect = 0.0;
};

CubicXTerms cubic_x_terms(const StabilitySpectrum& spec, const MdeMatrices& m, const VarianceProfile& S,
                          const CMat& X);

struct PerturbationCheck {
  cplx kappa;
  std::vector<double> deltas;
  std::vector<double> residuals;
  double slope = 0.0;   // NaN when every residual vanishes
};

// Compares eigenvalues of K + delta D near the isolated eigenvalue kappa of K (the one with
// the largest real part unless a hint is given) against the second-order expansion.
PerturbationCheck perturbation_second_order_check(const CMat& K, const CMat& D, const std::vector<double>& deltas);
PerturbationCheck perturbation_second_order_check(const CMat& K, const CMat& D, const std::vector<double>& deltas,
                                                  cplx kappa_hint);

}  // namespace dlab

#pragma once

#include <dysonlab/dyson.hpp>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace dlab {

enum class Distribution { complex_gaussian, real_gaussian, rademacher };

// Deterministic replacements for the random matrix, used by tests and sanity runs.
// permutation: cyclic shift X_{i, i+1 mod n} = 1. localized: X = I + e_1 e_1^t.
enum class MatrixHook { none, zero, permutation, localized };

std::string to_string(Distribution d);
Distribution distribution_from_string(const std::string& s);
std::string to_string(MatrixHook h);
MatrixHook matrix_hook_from_string(const std::string& s);

// Counter-based stream: every draw is a pure function of (seed, stream, counter).
std::uint64_t counter_bits(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter);
// Uniform on (0, 1].
double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter);

struct SampleSpec {
  VarianceProfile profile;
  Distribution dist = Distribution::complex_gaussian;
  std::uint64_t seed = 1;
  std::uint64_t trial_index = 0;
  MatrixHook hook = MatrixHook::none;
};

// Entry (i, j) uses counters 2e and 2e+1 with e = i n + j.
CMat sample_matrix(const SampleSpec& spec);

struct HermitizedSystem {
  cplx z;
  CMat H;
  Vec eigenvalues;     // ascending
  CMat eigenvectors;   // columns, empty unless requested
};

// H_z = [[0, X - z], [(X - z)*, 0]] and its Hermitian eigendecomposition.
HermitizedSystem hermitize(const CMat& X, cplx z, bool vectors = true);

// G = (H_z - i eta)^-1 = V diag(1 / (lambda - i eta)) V*.
CMat resolvent(const HermitizedSystem& sys, double eta);

// max_k |lambda_k + lambda_{2n+1-k}| over the sorted spectrum.
double chiral_pairing_defect(const HermitizedSystem& sys);

// Isotropic probe pairs (x, y) and averaged probe matrices R with ||R|| <= 1.
struct Probes {
  std::vector<std::pair<CVec, CVec>> vectors;
  std::vector<CMat> matrices;
};

// e_1, e_{n+1}, the normalized all-ones vector and two random unit vectors, all pairs;
// I, E_-, the block swap [[0, I], [I, 0]] and a random diagonal sign matrix.
Probes default_probes(Eigen::Index n, std::uint64_t seed = 7);

struct ResolventError {
  double iso_max = 0.0;
  double avg_max = 0.0;
  double e_minus_trace = 0.0;   // |<E_-, G>|
  double trace_error = 0.0;     // |<G - M>|
  double ward = 0.0;            // max_a |sum_b |G_ab|^2 - Im G_aa / eta| / (Im G_aa / eta)
};

ResolventError resolvent_error(const CMat& G, const CMat& M, double eta, const Probes& probes);
ResolventError resolvent_error(const HermitizedSystem& sys, const CMat& M, double eta, const Probes& probes);

// D = W G + S[G] G with W = H_z - E H_z, evaluated as I + ([[i eta, z], [conj z, i eta]] + S[G]) G.
CMat error_matrix(const CMat& G, const Mat& S, cplx z, double eta);

struct ErrorMatrixStats {
  std::vector<double> generic;    // |<R D>| for the generic panel
  std::vector<double> offdiag;    // |<R D>| for block off-diagonal R
  double generic_median = 0.0;
  double offdiag_median = 0.0;
  double offdiag_gain = 0.0;      // offdiag_median / generic_median
};

ErrorMatrixStats error_matrix_D(const CMat& G, const Mat& S, cplx z, double eta, std::uint64_t panel_seed = 11);
ErrorMatrixStats error_matrix_D(const HermitizedSystem& sys, const Mat& S, double eta, std::uint64_t panel_seed = 11);

// |{k : |lambda_k| <= eta}|
long eigenvalue_count_near_zero(const HermitizedSystem& sys, double eta);

double median(std::vector<double> v);
double quantile(std::vector<double> v, double q);

}  // namespace dlab

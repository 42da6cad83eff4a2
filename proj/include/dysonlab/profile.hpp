#pragma once

#include <dysonlab/linalg.hpp>

#include <json.hpp>
#include <string>
#include <vector>

namespace dlab {

enum class ProfileKind { flat, two_block, smooth_kernel, custom };

std::string to_string(ProfileKind k);
ProfileKind profile_kind_from_string(const std::string& s);

inline constexpr int max_profile_dim = 4096;

// Variance matrix S with entries E|x_ij|^2 and flatness bounds s_low/n <= S_ij <= s_high/n.
struct VarianceProfile {
  int n = 0;
  ProfileKind kind = ProfileKind::flat;
  std::vector<double> params;
  Mat entries;
  double s_low = 0.0;
  double s_high = 0.0;
  double perron_radius = 0.0;
};

struct PowerIterationOptions {
  double tol = 1e-12;
  long max_iter = 100000;
};

// flat: params {c} (default 1), entries c/n
// two_block: params {a, b, c}, blocks {a, b; b, c}/n on the halves [0, n/2), [n/2, n)
// smooth_kernel: params {amp, scale} (defaults 0.5, 1), entries scale*(1 + amp*sin(2pi(x+y)))/n
VarianceProfile make_profile(ProfileKind kind, int n, std::vector<double> params = {});

// Validates a dense matrix and wraps it. Rejects non-positive entries.
VarianceProfile profile_from_entries(Mat entries, ProfileKind kind = ProfileKind::custom,
                                     std::vector<double> params = {});

// Perron root by power iteration from the all-ones vector.
template <class Derived>
double spectral_radius(const Eigen::MatrixBase<Derived>& S, const PowerIterationOptions& opt = {}) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x =
      Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Ones(S.rows());
  x /= x.norm();
  Scalar lambda = (x.transpose() * S * x).value();
  for (long it = 0; it < opt.max_iter; ++it) {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> y = S * x;
    const Scalar ny = y.norm();
    if (!(ny > 0)) return 0.0;
    x = y / ny;
    const Scalar next = (x.transpose() * S * x).value();
    const bool done = std::abs(next - lambda) <= opt.tol * std::abs(next);
    lambda = next;
    if (done) return static_cast<double>(lambda);
  }
  throw numerical_error("power iteration did not converge within the iteration cap");
}

double spectral_radius(const VarianceProfile& S);

VarianceProfile scaled(const VarianceProfile& S, double c);
VarianceProfile normalize(const VarianceProfile& S);

// Inline shorthand: "flat:N", "flat:N:c", "two_block:N:a,b,c", "smooth_kernel:N:amp[,scale]".
VarianceProfile parse_profile_spec(const std::string& spec);

nlohmann::json to_json(const VarianceProfile& S, bool with_entries = false);
VarianceProfile profile_from_json(const nlohmann::json& j);

}  // namespace dlab

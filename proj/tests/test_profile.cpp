#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <dysonlab/profile.hpp>

#include "oracles.hpp"

#include <cmath>

using namespace dlab;

namespace {

// Largest-modulus eigenvalue from a dense non-symmetric eigensolve.
double dense_radius(const Mat& S) {
  Eigen::EigenSolver<Mat> es(S, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST_CASE("flat profile entries") {
  const auto S = make_profile(ProfileKind::flat, 4);
  CHECK(S.n == 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) CHECK(S.entries(i, j) == 0.25);
  CHECK(spectral_radius(S) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("two_block profile entries") {
  const auto S = make_profile(ProfileKind::two_block, 4, {0.5, 1.5, 1.0});
  const double want[4][4] = {{0.5, 0.5, 1.5, 1.5}, {0.5, 0.5, 1.5, 1.5}, {1.5, 1.5, 1.0, 1.0}, {1.5, 1.5, 1.0, 1.0}};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) CHECK(S.entries(i, j) == doctest::Approx(want[i][j] / 4).epsilon(1e-15));
}

TEST_CASE("smooth kernel range by dense evaluation") {
  const int n = 128;
  const auto S = make_profile(ProfileKind::smooth_kernel, n, {0.5});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double f = 1.0 + 0.5 * std::sin(2 * pi * (double(i) / n + double(j) / n));
      CHECK(S.entries(i, j) == doctest::Approx(f / n).epsilon(1e-14));
      CHECK(S.entries(i, j) >= 0.5 / n - 1e-15);
      CHECK(S.entries(i, j) <= 1.5 / n + 1e-15);
    }
}

TEST_CASE("rejects non-positive entries and bad dimensions") {
  CHECK_THROWS_AS(make_profile(ProfileKind::two_block, 4, {0.0, 1.0, 1.0}), config_error);
  CHECK_THROWS_AS(make_profile(ProfileKind::two_block, 4, {-0.5, 1.0, 1.0}), config_error);
  CHECK_THROWS_AS(make_profile(ProfileKind::flat, 1), config_error);
  CHECK_THROWS_AS(make_profile(ProfileKind::smooth_kernel, 16, {1.0}), config_error);
  Mat bad = Mat::Constant(3, 3, 1.0 / 3);
  bad(1, 2) = 0.0;
  CHECK_THROWS_AS(profile_from_entries(bad), config_error);
}

TEST_CASE("spectral radius against dense eigensolve") {
  const auto S = make_profile(ProfileKind::two_block, 256, {0.5, 1.5, 1.0});
  CHECK(rel(spectral_radius(S), dense_radius(S.entries)) <= 1e-10);
  CHECK(rel(S.perron_radius, spectral_radius(S.entries)) <= 1e-10);
  // the 2x2 block matrix {a, b; b, c}/2 carries the spectrum
  const double a = 0.5, b = 1.5, c = 1.0;
  const double top = ((a + c) + std::sqrt((a - c) * (a - c) + 4 * b * b)) / 4;
  CHECK(rel(spectral_radius(S), top) <= 1e-10);
}

TEST_CASE("flat radius is one at any n and scales") {
  for (int n : {2, 7, 64, 300}) CHECK(spectral_radius(make_profile(ProfileKind::flat, n)) == doctest::Approx(1.0));
  const auto S = make_profile(ProfileKind::flat, 32, {3.5});
  CHECK(rel(spectral_radius(S), 3.5) <= 1e-12);
}

TEST_CASE("scaling law and transpose invariance") {
  const auto S = make_profile(ProfileKind::smooth_kernel, 64, {0.4});
  const auto T = make_profile(ProfileKind::two_block, 64, {0.5, 1.5, 1.0});
  for (const auto* P : {&S, &T}) {
    const double r = spectral_radius(*P);
    for (double c : {0.5, 2.0, 10.0}) CHECK(rel(spectral_radius(scaled(*P, c)), c * r) <= 1e-10);
    const Mat St = P->entries.transpose();
    CHECK(rel(spectral_radius(St), r) <= 1e-10);
  }
  // a non-symmetric positive matrix
  Mat A(3, 3);
  A << 1, 2, 3, 0.5, 1, 4, 2, 1, 1;
  A /= 3;
  CHECK(rel(spectral_radius(A), dense_radius(A)) <= 1e-10);
  CHECK(rel(spectral_radius(Mat(A.transpose())), dense_radius(A)) <= 1e-10);
}

TEST_CASE("normalize") {
  const auto F = make_profile(ProfileKind::flat, 16);
  const auto N = normalize(F);
  CHECK((N.entries - F.entries).cwiseAbs().maxCoeff() <= 1e-15);
  const auto N2 = normalize(scaled(F, 2.0));
  CHECK((N2.entries - F.entries).cwiseAbs().maxCoeff() <= 1e-15);

  const auto K = normalize(make_profile(ProfileKind::smooth_kernel, 128, {0.5}));
  CHECK(std::abs(K.perron_radius - 1.0) <= 1e-12);
  CHECK(std::abs(spectral_radius(K.entries) - 1.0) <= 1e-10);
  CHECK(std::abs(dense_radius(K.entries) - 1.0) <= 1e-10);
  const auto K2 = normalize(K);
  CHECK((K2.entries - K.entries).cwiseAbs().maxCoeff() <= 1e-12 * K.entries.maxCoeff());
}

TEST_CASE("flatness bounds hold") {
  for (const auto& S : {make_profile(ProfileKind::flat, 8), make_profile(ProfileKind::two_block, 8, {0.5, 1.5, 1.0}),
                        make_profile(ProfileKind::smooth_kernel, 8, {0.3, 2.0})}) {
    CHECK(S.s_low > 0);
    CHECK(S.s_low <= S.s_high);
    CHECK(S.entries.minCoeff() >= S.s_low / S.n * (1 - 1e-15));
    CHECK(S.entries.maxCoeff() <= S.s_high / S.n * (1 + 1e-15));
  }
}

TEST_CASE("inline specs") {
  CHECK(parse_profile_spec("flat:8").entries(0, 0) == 0.125);
  CHECK(parse_profile_spec("flat:8:2").entries(3, 1) == 0.25);
  const auto T = parse_profile_spec("two_block:6:0.5,1.5,1");
  CHECK(T.kind == ProfileKind::two_block);
  CHECK(T.entries(0, 5) == doctest::Approx(1.5 / 6));
  CHECK(parse_profile_spec("smooth_kernel:10:0.25").kind == ProfileKind::smooth_kernel);
  CHECK_THROWS_AS(parse_profile_spec("flat"), config_error);
  CHECK_THROWS_AS(parse_profile_spec("wavy:8"), config_error);
  CHECK_THROWS_AS(parse_profile_spec("flat:abc"), config_error);
  CHECK_THROWS_AS(parse_profile_spec("flat:5000"), config_error);
}

TEST_CASE("json round trip") {
  const auto S = make_profile(ProfileKind::two_block, 6, {0.1 + 0.2, 1.0 / 3.0, 0.7});
  const auto R = profile_from_json(nlohmann::json::parse(to_json(S).dump()));
  CHECK(R.kind == S.kind);
  CHECK(R.params == S.params);
  CHECK(R.entries == S.entries);

  Mat E(2, 2);
  E << 0.3, 0.6, 0.2, 0.5;
  const auto C = profile_from_entries(E);
  const auto RC = profile_from_json(nlohmann::json::parse(to_json(C, true).dump()));
  CHECK(RC.entries == C.entries);
  CHECK(RC.perron_radius == C.perron_radius);

  auto j = to_json(S);
  j["colour"] = 1;
  CHECK_THROWS_AS(profile_from_json(j), config_error);
}

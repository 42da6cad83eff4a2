#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <dysonlab/stability.hpp>

#include "oracles.hpp"

#include <cmath>
#include <random>

using namespace dlab;

namespace {

struct Point {
  VarianceProfile S;
  DysonSolution sol;
  MdeMatrices m;
};

Point at(const VarianceProfile& S, cplx z, double eta) {
  Point p{S, solve_dyson(S, z, eta), {}};
  p.m = assemble_matrices(p.sol);
  return p;
}

CMat random_matrix(Eigen::Index N, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> g;
  CMat X(N, N);
  for (Eigen::Index j = 0; j < N; ++j)
    for (Eigen::Index i = 0; i < N; ++i) X(i, j) = cplx(g(gen), g(gen));
  return X;
}

bool within(double x, double env) { return x >= 1.0 / env && x <= env; }

}  // namespace

TEST_CASE("reduction equals the materialized operator at n = 6") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> unif(0.5, 1.5);
  Mat E(6, 6);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) E(i, j) = unif(gen) / 6;
  const auto S = normalize(profile_from_entries(E));
  for (auto [z, eta] : {std::pair<cplx, double>{cplx(0.99, 0.05), 1e-3}, {cplx(0.3, -0.95), 1e-5}, {1.02, 1e-4}}) {
    const auto p = at(S, z, eta);
    const CMat A = reduce_operator(p.m, S);
    std::vector<cplx> want;
    for (cplx mu : oracle::eigenvalues(A)) want.push_back(1.0 - mu);
    while (want.size() < 144) want.push_back(1.0);
    const auto got = oracle::eigenvalues(oracle::dense_stability_operator(p.m.M, S.entries));
    CHECK(oracle::match_distance(got, want) <= 1e-8);
  }
}

TEST_CASE("reduced operator structure") {
  const auto p = at(make_profile(ProfileKind::flat, 8), 0.0, 1.0);
  const CMat A = reduce_operator(p.m, p.S);
  const double v = p.sol.v1(0);
  // A = -v^2 S_blk
  Mat Sblk = Mat::Zero(16, 16);
  Sblk.topRightCorner(8, 8) = p.S.entries;
  Sblk.bottomLeftCorner(8, 8) = p.S.entries.transpose();
  CHECK((A + v * v * Sblk.cast<cplx>()).cwiseAbs().maxCoeff() <= 1e-14);
  auto ev = oracle::eigenvalues(A);
  CHECK(std::abs(ev.front() - cplx(-v * v)) <= 1e-12);
  CHECK(std::abs(ev.back() - cplx(v * v)) <= 1e-12);
  for (std::size_t k = 1; k + 1 < ev.size(); ++k) CHECK(std::abs(ev[k]) <= 1e-12);

  // A 1 = diag(M S[I] M)
  const auto q = at(make_profile(ProfileKind::smooth_kernel, 12, {0.4}), cplx(0.5, 0.6), 1e-2);
  const CMat Aq = reduce_operator(q.m, q.S);
  const CMat SI = self_energy(q.S.entries, CMat::Identity(24, 24));
  CHECK((Aq * CVec::Ones(24) - (q.m.M * SI * q.m.M).diagonal()).cwiseAbs().maxCoeff() <= 1e-14);

  // top two eigenvalues at the edge are real and distinct
  const auto e = at(make_profile(ProfileKind::flat, 16), std::sqrt(0.99), 1e-8);
  auto ee = oracle::eigenvalues(reduce_operator(e.m, e.S));
  std::sort(ee.begin(), ee.end(), [](cplx a, cplx b) { return std::abs(1.0 - a) < std::abs(1.0 - b); });
  CHECK(std::abs(ee[0].imag()) <= 1e-12);
  CHECK(std::abs(ee[1].imag()) <= 1e-12);
  CHECK(std::abs(ee[0] - ee[1]) > 1e-6);
}

TEST_CASE("eigen-matrices satisfy the eigen-equations") {
  for (const auto& S : {make_profile(ProfileKind::flat, 32), normalize(make_profile(ProfileKind::two_block, 32, {0.5, 1.5, 1.0})),
                        normalize(make_profile(ProfileKind::smooth_kernel, 32, {0.5}))}) {
    for (double eta : {1e-4, 1e-7}) {
      const auto p = at(S, cplx(0.0, std::sqrt(0.99)), eta);
      const auto spec = stability_spectrum(p.m, p.sol, S);
      CHECK(spec.defect.max() <= 1e-8);
      CHECK(std::abs(spec.beta_star) < std::abs(spec.beta));
      CHECK(std::abs(spec.e_minus_B_star) / hs_norm(spec.B_star) > std::abs(spec.e_minus_B) / hs_norm(spec.B));
      CHECK(spec.regime);
      CHECK_FALSE(spec.degenerate);
    }
  }
}

TEST_CASE("flat edge envelopes") {
  const auto S = make_profile(ProfileKind::flat, 64);
  for (double z2 : {0.99, 1.0, 1.01})
    for (double eta : {1e-6, 1e-8}) {
      CAPTURE(z2);
      CAPTURE(eta);
      const auto p = at(S, std::sqrt(z2), eta);
      const auto spec = stability_spectrum(p.m, p.sol, S);
      const double rho = spec.rho, small = rho * rho + eta / rho;
      CHECK(within(std::abs(spec.beta_star) / (eta / rho), 50));
      CHECK(within(std::abs(spec.beta) / small, 50));
      CHECK(spec.alignment.max() <= 50 * small);
      CHECK(std::abs(spec.e_minus_B) <= 50 * small);
      CHECK(std::abs(spec.e_minus_B_star) >= 1.0 / 50);
      CHECK(within(std::abs(spec.overlap_B), 50));
      CHECK(within(std::abs(spec.overlap_B_star), 50));
      CHECK(std::abs(spec.beta_star * spec.overlap_B_star - pi * eta / rho) <=
            50 * (rho * rho * rho + eta * rho + eta * eta / (rho * rho)));
      CHECK(spec.isolated);
    }
  const auto p = at(S, std::sqrt(0.99), 1e-8);
  CHECK(p.sol.rho == doctest::Approx(0.0318).epsilon(0.01));
}

TEST_CASE("psi on the flat family matches its closed form") {
  // flat: Im M = v, Im M^-1 = -(eta + v), rho = v / pi
  const auto S = make_profile(ProfileKind::flat, 16);
  for (double z2 : {0.99, 1.0, 1.01}) {
    const double eta = 1e-6;
    const auto p = at(S, std::sqrt(z2), eta);
    const auto spec = stability_spectrum(p.m, p.sol, S);
    const double v = oracle::flat_cubic_v(z2, eta);
    const double want = std::pow(pi, 4) * std::pow(1 + eta / v, 2);
    CHECK(spec.psi == doctest::Approx(want).epsilon(1e-8));
  }
}

TEST_CASE("F operator") {
  const auto S = make_profile(ProfileKind::flat, 16);
  const auto bulk = solve_dyson(S, 0.0, 1.0);
  const auto g = f_operator_gap(bulk, S);
  const double v = bulk.v1(0);
  // u = v / (1 + v) = v^2 because v^2 + v = 1
  CHECK(g.top == doctest::Approx(v * v).epsilon(1e-10));
  CHECK(g.symmetric);
  CHECK(g.asymmetry <= 1e-10);
  const double ratio = g.gap_rel / (bulk.eta / bulk.rho);
  CHECK(within(ratio, 50));

  const auto edge = solve_dyson(S, 1.0, 1e-6);
  const auto ge = f_operator_gap(edge, S);
  CHECK(ge.symmetric);
  CHECK(ge.third <= ge.top * (1 - 0.01));
  CHECK(within(ge.gap_rel / (edge.eta / edge.rho), 50));

  const auto T = normalize(make_profile(ProfileKind::smooth_kernel, 24, {0.5}));
  const auto gt = f_operator_gap(solve_dyson(T, cplx(0.4, 0.8), 1e-3), T);
  CHECK(gt.symmetric);
  CHECK(gt.top < 1.0);
}

TEST_CASE("B^-1 Q") {
  const auto S = normalize(make_profile(ProfileKind::two_block, 24, {0.5, 1.5, 1.0}));
  const auto p = at(S, cplx(0.7, 0.7), 1e-6);
  const auto spec = stability_spectrum(p.m, p.sol, S);
  REQUIRE(spec.isolated);

  const auto rB = apply_Binv_Q(spec, p.m, S, spec.B);
  CHECK(hs_norm(rB.X) <= 1e-8 * hs_norm(spec.B));
  CHECK(hs_norm(project_Q(spec, spec.B_star)) <= 1e-8 * hs_norm(spec.B_star));

  const CMat Ep = CMat::Identity(48, 48);
  const auto rI = apply_Binv_Q(spec, p.m, S, Ep);
  CHECK(rI.defect <= 1e-8);
  CHECK(hs_norm(apply_stability(p.m.M, S.entries, rI.X) - project_Q(spec, Ep)) <= 1e-8 * hs_norm(Ep));

  CMat T = random_matrix(48, 2);
  T.diagonal().setZero();
  const auto rT = apply_Binv_Q(spec, p.m, S, T);
  CHECK(rT.defect <= 1e-8);
  CHECK_FALSE(rT.ill_conditioned);

  CMat G = random_matrix(48, 3);
  const auto rG = apply_Binv_Q(spec, p.m, S, G);
  CHECK(hs_norm(apply_stability(p.m.M, S.entries, rG.X) - project_Q(spec, G)) <= 1e-8 * hs_norm(G));
}

TEST_CASE("cubic coefficients") {
  const auto S = make_profile(ProfileKind::flat, 64);
  {
    const auto p = at(S, 1.0, 1e-6);
    const auto spec = stability_spectrum(p.m, p.sol, S);
    const auto c = cubic_coefficients(spec, p.m, S, p.sol);
    CHECK(c.xi2_tilde == doctest::Approx(1e-2).epsilon(1e-12));
    CHECK(c.xi1_tilde == doctest::Approx(1e-4).epsilon(1e-12));
  }
  const auto p = at(S, std::sqrt(0.99), 1e-8);
  const auto spec = stability_spectrum(p.m, p.sol, S);
  const auto c = cubic_coefficients(spec, p.m, S, p.sol);
  CHECK(within(std::abs(c.xi2) / p.sol.rho, 50));
  CHECK(within(std::abs(c.xi1) / c.xi1_tilde, 50));
  CHECK(c.xi2_over_rho == doctest::Approx(std::abs(c.xi2) / p.sol.rho));
  CHECK(std::isfinite(std::abs(c.mu3)));
  CHECK(std::abs(c.mu3) > 0);

  // X = 0 leaves mu0 = 0 and no correction to mu1
  const auto x0 = cubic_x_terms(spec, p.m, S, CMat::Zero(128, 128));
  CHECK(std::abs(x0.mu0) == 0.0);
  CHECK(std::abs(x0.mu1_x) == 0.0);

  const auto bulk = at(S, 0.0, 1.0);
  const auto bspec = stability_spectrum(bulk.m, bulk.sol, S);
  CHECK_FALSE(bspec.regime);
  CHECK_THROWS_AS(cubic_coefficients(bspec, bulk.m, S, bulk.sol), precondition_error);
}

TEST_CASE("second-order perturbation formula") {
  const auto p = at(make_profile(ProfileKind::flat, 16), 0.0, 1.0);
  const CMat K = reduce_operator(p.m, p.S);
  const CMat D = random_matrix(32, 9);
  const auto r = perturbation_second_order_check(K, D, {1e-2, 1e-3, 1e-4});
  CHECK(r.slope >= 2.7);
  CHECK(r.slope <= 3.3);

  const auto z = perturbation_second_order_check(K, CMat::Zero(32, 32), {1e-2, 1e-3, 1e-4});
  for (double x : z.residuals) CHECK(x <= 1e-12);

  const CMat cI = CMat::Identity(32, 32) * cplx(0.7, -0.2);
  const auto id = perturbation_second_order_check(K, cI, {1e-2, 1e-3, 1e-4});
  for (double x : id.residuals) CHECK(x <= 1e-10);

  CHECK_THROWS_AS(perturbation_second_order_check(K, CMat::Zero(3, 3), {1e-2}), config_error);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <dysonlab/experiments.hpp>
#include <dysonlab/report.hpp>

#include "oracles.hpp"

#include <cmath>
#include <random>

using namespace dlab;

namespace {

SampleSpec spec_for(const VarianceProfile& S, Distribution d, std::uint64_t seed, std::uint64_t trial) {
  SampleSpec s;
  s.profile = S;
  s.dist = d;
  s.seed = seed;
  s.trial_index = trial;
  return s;
}

ExperimentConfig small_config(Experiment e, std::vector<int> n_list, int trials) {
  ExperimentConfig c;
  c.experiment = e;
  c.profile = make_profile(ProfileKind::flat, n_list.front());
  c.n_list = std::move(n_list);
  c.trials = trials;
  return c;
}

}  // namespace

TEST_CASE("counter stream") {
  CHECK(counter_bits(1, 2, 3) == counter_bits(1, 2, 3));
  CHECK(counter_bits(1, 2, 3) != counter_bits(1, 2, 4));
  CHECK(counter_bits(1, 2, 3) != counter_bits(1, 3, 3));
  CHECK(counter_bits(1, 2, 3) != counter_bits(2, 2, 3));
  double s = 0.0, lo = 1.0, hi = 0.0;
  const int N = 200000;
  for (int k = 0; k < N; ++k) {
    const double u = counter_uniform(9, 0, k);
    s += u;
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo > 0.0);
  CHECK(hi <= 1.0);
  CHECK(std::abs(s / N - 0.5) <= 5 * std::sqrt(1.0 / 12 / N));
}

TEST_CASE("sampling is deterministic") {
  const auto S = make_profile(ProfileKind::two_block, 16, {0.5, 1.5, 1.0});
  for (auto d : {Distribution::complex_gaussian, Distribution::real_gaussian, Distribution::rademacher}) {
    const CMat a = sample_matrix(spec_for(S, d, 42, 3)), b = sample_matrix(spec_for(S, d, 42, 3));
    CHECK(a == b);
    CHECK(a != sample_matrix(spec_for(S, d, 42, 4)));
  }
}

TEST_CASE("grand mean of a flat sample") {
  const int n = 1000, trials = 50;
  const auto S = make_profile(ProfileKind::flat, n);
  cplx sum = 0.0;
  for (int t = 0; t < trials; ++t) sum += sample_matrix(spec_for(S, Distribution::complex_gaussian, 1, t)).sum();
  // standard deviation of the grand mean is sqrt(1/n) / sqrt(n^2 trials)
  CHECK(std::abs(sum) / (double(n) * n * trials) <= 1e-3);
}

TEST_CASE("entry moments over many trials") {
  const auto S = make_profile(ProfileKind::two_block, 4, {0.5, 1.5, 1.0});
  const int trials = 10000;
  for (auto d : {Distribution::complex_gaussian, Distribution::real_gaussian, Distribution::rademacher}) {
    CAPTURE(to_string(d));
    double var00 = 0.0, var03 = 0.0;
    cplx m00 = 0.0, sq00 = 0.0;
    for (int t = 0; t < trials; ++t) {
      const CMat X = sample_matrix(spec_for(S, d, 5, t));
      var00 += std::norm(X(0, 0));
      var03 += std::norm(X(0, 3));
      m00 += X(0, 0);
      sq00 += X(0, 0) * X(0, 0);
      if (d != Distribution::complex_gaussian) CHECK(X.imag().cwiseAbs().maxCoeff() == 0.0);
      if (d == Distribution::rademacher) CHECK(std::abs(std::norm(X(2, 1)) - S.entries(2, 1)) <= 1e-15);
    }
    CHECK(std::abs(var00 / trials - S.entries(0, 0)) <= 0.1 * S.entries(0, 0));
    CHECK(std::abs(var03 / trials - S.entries(0, 3)) <= 0.1 * S.entries(0, 3));
    CHECK(std::abs(m00) / trials <= 5 * std::sqrt(S.entries(0, 0) / trials));
    if (d == Distribution::complex_gaussian) CHECK(std::abs(sq00) / trials <= 5 * S.entries(0, 0) / std::sqrt(trials));
  }
}

TEST_CASE("matrix hooks") {
  const auto S = make_profile(ProfileKind::flat, 5);
  SampleSpec s = spec_for(S, Distribution::complex_gaussian, 1, 0);
  s.hook = MatrixHook::zero;
  CHECK(sample_matrix(s).cwiseAbs().maxCoeff() == 0.0);
  s.hook = MatrixHook::permutation;
  const CMat P = sample_matrix(s);
  CHECK((P * P.adjoint() - CMat::Identity(5, 5)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(P(4, 0) == 1.0);
  s.hook = MatrixHook::localized;
  const CMat L = sample_matrix(s);
  CHECK(L(0, 0) == 2.0);
  CHECK(L(1, 1) == 1.0);
  for (auto h : {MatrixHook::none, MatrixHook::zero, MatrixHook::permutation, MatrixHook::localized})
    CHECK(matrix_hook_from_string(to_string(h)) == h);
  CHECK_THROWS_AS(matrix_hook_from_string("diagonal"), config_error);
  CHECK_THROWS_AS(distribution_from_string("cauchy"), config_error);
}

TEST_CASE("hermitization") {
  const auto sys0 = hermitize(CMat::Zero(6, 6), 1.0);
  for (Eigen::Index k = 0; k < 12; ++k) CHECK(std::abs(std::abs(sys0.eigenvalues(k)) - 1.0) <= 1e-14);

  const int n = 32;
  const auto S = make_profile(ProfileKind::flat, n);
  const CMat X = sample_matrix(spec_for(S, Distribution::complex_gaussian, 3, 0));
  const cplx z(0.4, -0.3);
  const auto sys = hermitize(X, z);
  CHECK(chiral_pairing_defect(sys) <= 1e-10);
  // block form and chiral symmetry
  const CMat Xz = X - z * CMat::Identity(n, n);
  CHECK((sys.H.topRightCorner(n, n) - Xz).cwiseAbs().maxCoeff() == 0.0);
  CHECK((sys.H.bottomLeftCorner(n, n) - Xz.adjoint()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(sys.H.topLeftCorner(n, n).cwiseAbs().maxCoeff() == 0.0);
  const Vec em = e_minus_diag(n);
  CHECK((em.asDiagonal() * sys.H * em.asDiagonal() + sys.H).cwiseAbs().maxCoeff() == 0.0);
  // smallest |lambda| against an SVD
  Eigen::JacobiSVD<CMat> svd(Xz);
  const double smin = svd.singularValues().minCoeff();
  CHECK(std::abs(sys.eigenvalues.cwiseAbs().minCoeff() - smin) <= 1e-10);
  // resolvent matches a direct inverse
  const CMat G = resolvent(sys, 0.05);
  const CMat Gd = (sys.H - cplx(0, 0.05) * CMat::Identity(2 * n, 2 * n)).inverse();
  CHECK((G - Gd).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("det H_z = |det(X - z)|^2") {
  for (int n : {8, 32, 64}) {
    const auto S = make_profile(ProfileKind::flat, n);
    const CMat X = sample_matrix(spec_for(S, Distribution::complex_gaussian, 11, n));
    const cplx z(0.2, 0.5);
    const auto sys = hermitize(X, z, false);
    double logdet_h = 0.0;
    for (Eigen::Index k = 0; k < sys.eigenvalues.size(); ++k) logdet_h += std::log(std::abs(sys.eigenvalues(k)));
    Eigen::PartialPivLU<CMat> lu(X - z * CMat::Identity(n, n));
    double logdet_x = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) logdet_x += std::log(std::abs(lu.matrixLU()(k, k)));
    CHECK(std::abs(std::expm1(logdet_h - 2 * logdet_x)) <= 1e-8);
  }
}

TEST_CASE("exact resolvent identities per sample") {
  const int n = 96;
  const auto S = make_profile(ProfileKind::flat, n);
  const auto probes = default_probes(n);
  CHECK(probes.vectors.size() == 25);
  CHECK(probes.matrices.size() == 4);
  for (int t = 0; t < 3; ++t) {
    const CMat X = sample_matrix(spec_for(S, Distribution::complex_gaussian, 2, t));
    const auto sys = hermitize(X, 1.0);
    const double eta = std::pow(n, -0.65);
    const auto sol = solve_dyson(S, 1.0, eta);
    const auto m = assemble_matrices(sol);
    const auto err = resolvent_error(sys, m.M, eta, probes);
    CHECK(err.e_minus_trace <= 1e-12);
    CHECK(err.ward <= 1e-10);
    CHECK(chiral_pairing_defect(sys) <= 1e-10);
    // oracle: Ward identity written out
    const CMat G = resolvent(sys, eta);
    for (Eigen::Index a : {Eigen::Index(0), Eigen::Index(n + 3)}) {
      const double lhs = G.row(a).cwiseAbs2().sum();
      CHECK(std::abs(lhs - G(a, a).imag() / eta) <= 1e-10 * lhs);
    }
    // trace error and the averaged maximum against dense products
    CHECK(err.trace_error == doctest::Approx(std::abs(avg(CMat(G - m.M)))).epsilon(1e-12));
    double am = 0.0;
    for (const auto& R : probes.matrices) am = std::max(am, std::abs(avg(CMat(R * (G - m.M)))));
    CHECK(err.avg_max == doctest::Approx(am).epsilon(1e-10));
    double im = 0.0;
    for (const auto& [x, y] : probes.vectors) im = std::max(im, std::abs(x.dot((G - m.M) * y)));
    CHECK(err.iso_max == doctest::Approx(im).epsilon(1e-10));
  }
}

TEST_CASE("error matrix") {
  const int n = 24;
  const auto S = make_profile(ProfileKind::flat, n);
  const cplx z(0.9, 0.1);
  const double eta = 0.1;
  // definition: D = W G + S[G] G with W = H_z - E H_z
  const CMat X = sample_matrix(spec_for(S, Distribution::complex_gaussian, 4, 0));
  const auto sys = hermitize(X, z);
  const CMat G = resolvent(sys, eta);
  CMat W = CMat::Zero(2 * n, 2 * n);
  W.topRightCorner(n, n) = X;
  W.bottomLeftCorner(n, n) = X.adjoint();
  const CMat Dref = W * G + self_energy(S.entries, G) * G;
  CHECK((error_matrix(G, S.entries, z, eta) - Dref).cwiseAbs().maxCoeff() <= 1e-12);

  // X = 0: W = 0 and D = S[G] G exactly
  const auto sys0 = hermitize(CMat::Zero(n, n), z);
  const CMat G0 = resolvent(sys0, eta);
  const CMat D0 = error_matrix(G0, S.entries, z, eta);
  CHECK((D0 - self_energy(S.entries, G0) * G0).cwiseAbs().maxCoeff() <= 1e-12);
  const auto st = error_matrix_D(sys0, S.entries, eta);
  CHECK(st.generic.size() == 4);
  CHECK(st.offdiag.size() == 4);
  for (double x : st.generic) CHECK(std::isfinite(x));
  for (double x : st.offdiag) CHECK(std::isfinite(x));
  CHECK(st.offdiag_gain == doctest::Approx(st.offdiag_median / st.generic_median));

  // G = M solves the MDE, so D = 0 up to rounding
  const auto sol = solve_dyson(S, z, eta);
  const CMat M = assemble_matrices(sol).M;
  CHECK(error_matrix(M, S.entries, z, eta).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("eigenvalue count near zero") {
  const auto sys0 = hermitize(CMat::Zero(8, 8), 1.0);
  CHECK(eigenvalue_count_near_zero(sys0, 0.5) == 0);
  CHECK(eigenvalue_count_near_zero(sys0, 1.0 + 1e-12) == 16);

  const int n = 256;
  const auto S = make_profile(ProfileKind::flat, n);
  std::vector<double> gap, bulk;
  const double eta_gap = std::pow(n, -2.0 / 3 + 0.1);
  const auto sol_bulk = solve_dyson(S, 0.0, 0.1);
  for (int t = 0; t < 5; ++t) {
    const CMat X = sample_matrix(spec_for(S, Distribution::complex_gaussian, 8, t));
    gap.push_back(double(eigenvalue_count_near_zero(hermitize(X, std::sqrt(1.5), false), eta_gap)));
    bulk.push_back(double(eigenvalue_count_near_zero(hermitize(X, 0.0, false), 0.1)));
  }
  CHECK(median(gap) <= 20);
  const double expect = 2 * n * 0.1 * sol_bulk.rho;
  CHECK(median(bulk) >= expect / 20);
  CHECK(median(bulk) <= expect * 20);
}

TEST_CASE("median and quantile") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK(quantile({0.0, 10.0}, 0.99) == doctest::Approx(9.9));
  CHECK(quantile({5.0}, 0.3) == 5.0);
}

TEST_CASE("bump calculus") {
  const Bump f{cplx(0.3, -0.2), 0.6, 1.5};
  CHECK(bump_value(f, f.center) == 1.5);
  CHECK(bump_value(f, f.center + 0.61) == 0.0);
  CHECK(bump_value(f, f.center + cplx(0, 0.6)) <= 1e-40);
  // numerical Laplacian and integrals against the closed forms
  const double h = 1e-4;
  const cplx w = f.center + cplx(0.21, 0.1);
  const double lap = (bump_value(f, w + h) + bump_value(f, w - h) + bump_value(f, w + cplx(0, h)) +
                      bump_value(f, w - cplx(0, h)) - 4 * bump_value(f, w)) /
                     (h * h);
  CHECK(bump_laplacian(f, w) == doctest::Approx(lap).epsilon(1e-5));
  const int g = 1200;
  const double step = 2 * f.radius / g;
  double integral = 0.0, l1 = 0.0;
  for (int i = 0; i < g; ++i)
    for (int j = 0; j < g; ++j) {
      const cplx p = f.center + cplx(-f.radius + (i + 0.5) * step, -f.radius + (j + 0.5) * step);
      integral += bump_value(f, p) * step * step;
      l1 += std::abs(bump_laplacian(f, p)) * step * step;
    }
  CHECK(bump_integral(f) == doctest::Approx(integral).epsilon(1e-4));
  CHECK(bump_laplacian_l1(f) == doctest::Approx(l1).epsilon(1e-3));
  CHECK(bump_laplacian_l1(f) == doctest::Approx(32 * pi / 9 * 1.5));
}

TEST_CASE("girko with X = 0 and a bump away from the origin") {
  const Bump f{cplx(1.5, 0.0), 0.4, 1.0};
  const auto r = girko_check(CMat::Zero(16, 16), f, 100);
  CHECK(r.lhs == 0.0);
  // rhs vanishes exactly in the continuum; only the quadrature error remains
  CHECK(std::abs(r.rhs) <= 1e-4);
  CHECK(r.rel_err == std::abs(r.rhs));
  CHECK(std::abs(girko_check(CMat::Zero(16, 16), f, 200).rhs) < std::abs(r.rhs));
  CHECK_THROWS_AS(girko_check(CMat::Zero(130, 130), f, 10), precondition_error);
}

TEST_CASE("girko converges under refinement on a sample") {
  const int n = 24;
  const auto S = make_profile(ProfileKind::flat, n);
  const CMat X = sample_matrix(spec_for(S, Distribution::complex_gaussian, 1, 0));
  const Bump f{0.0, 0.8, 1.0};
  const auto a = girko_check(X, f, 100), b = girko_check(X, f, 200);
  CHECK(a.rel_err <= 0.05);
  CHECK(b.rel_err < a.rel_err);
  double lhs = 0.0;
  Eigen::ComplexEigenSolver<CMat> es(X, false);
  for (Eigen::Index k = 0; k < n; ++k) lhs += bump_value(f, es.eigenvalues()(k));
  CHECK(a.lhs == doctest::Approx(lhs / n).epsilon(1e-10));
}

TEST_CASE("radius experiment with the zero hook") {
  auto c = small_config(Experiment::radius, {16, 32}, 2);
  c.hook = MatrixHook::zero;
  const auto r = run_experiment(c);
  for (const auto& t : r.per_trial) CHECK(t["spectral_radius"].get<double>() == 0.0);
  CHECK(r.find("ginibre_n32") == nullptr);
}

TEST_CASE("delocalization hooks") {
  auto c = small_config(Experiment::deloc, {64}, 1);
  c.hook = MatrixHook::permutation;
  auto r = run_experiment(c);
  CHECK(r.per_trial[0]["max"].get<double>() == doctest::Approx(1.0).epsilon(1e-10));

  c.hook = MatrixHook::localized;
  r = run_experiment(c);
  CHECK(r.per_trial[0]["max"].get<double>() == doctest::Approx(8.0).epsilon(1e-10));
  CHECK(r.per_trial[0]["defective_warning"].get<bool>());
}

TEST_CASE("circular law with f = 0") {
  auto c = small_config(Experiment::circlaw, {32}, 2);
  c.bump.amplitude = 0.0;
  c.quadrature.nodes = 60;
  const auto r = run_experiment(c);
  for (const auto& t : r.per_trial) {
    CHECK(t["discrepancy"].get<double>() == 0.0);
    CHECK(t["normalized"].get<double>() == 0.0);
  }
  CHECK(r.contracts_passed());
}

TEST_CASE("cubic with G = M") {
  auto c = small_config(Experiment::cubic, {32}, 2);
  c.z = std::sqrt(0.99);
  c.eta_f_multiple = 10;
  c.g_equals_m = true;
  const auto r = run_experiment(c);
  for (const auto& t : r.per_trial) {
    CHECK(t["theta_re"].get<double>() == 0.0);
    CHECK(t["theta_im"].get<double>() == 0.0);
    CHECK(t["full_ratio"].get<double>() == 0.0);
    CHECK(t["literal_ratio"].get<double>() == 0.0);
  }
}

TEST_CASE("girko experiment rejects rademacher") {
  auto c = small_config(Experiment::girko, {16}, 1);
  c.dist = Distribution::rademacher;
  CHECK_THROWS_AS(run_experiment(c), config_error);
}

TEST_CASE("reports do not depend on the thread count") {
  for (auto e : {Experiment::radius, Experiment::locallaw, Experiment::deloc, Experiment::cubic}) {
    CAPTURE(to_string(e));
    auto c = small_config(e, {16, 32}, 3);
    if (e == Experiment::cubic) {
      c.z = std::sqrt(0.99);
      c.eta_f_multiple = 10;
    }
    c.threads = 1;
    const auto a = to_json(run_experiment(c));
    c.threads = 3;
    const auto b = to_json(run_experiment(c));
    CHECK(dump_json(a) == dump_json(b));
  }
}

TEST_CASE("seeds are recorded") {
  auto c = small_config(Experiment::radius, {16}, 2);
  c.seed = 77;
  const auto r = run_experiment(c);
  REQUIRE(r.seeds.size() == 2);
  CHECK(r.seeds[1]["trial_index"].get<std::uint64_t>() == trial_stream(16, 1));
  CHECK(to_json(r)["seed"].get<std::uint64_t>() == 77);
}

TEST_CASE("loglog fit") {
  CHECK(loglog_fit({1, 2, 4, 8}, {1, 0.5, 0.25, 0.125}) == doctest::Approx(-1.0));
  CHECK(loglog_fit({10, 100}, {3, 30}) == doctest::Approx(oracle::loglog_slope({10, 100}, {3, 30})));
}

TEST_CASE("csv records") {
  const nlohmann::json recs = {{{"a", 1}, {"b", "x,y"}}, {{"b", 2.5}, {"c", true}}};
  CHECK(records_to_csv(recs) == "a,b,c\n1,\"x,y\",\n,2.5,true\n");
}

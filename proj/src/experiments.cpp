#include <dysonlab/experiments.hpp>
#include <dysonlab/parallel.hpp>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>

namespace dlab {

using nlohmann::json;

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::radius: return "radius";
    case Experiment::locallaw: return "locallaw";
    case Experiment::circlaw: return "circlaw";
    case Experiment::deloc: return "deloc";
    case Experiment::girko: return "girko";
    case Experiment::cubic: return "cubic";
  }
  return "?";
}

Experiment experiment_from_string(const std::string& s) {
  for (Experiment e : {Experiment::radius, Experiment::locallaw, Experiment::circlaw, Experiment::deloc,
                       Experiment::girko, Experiment::cubic})
    if (to_string(e) == s) return e;
  throw config_error("unknown experiment '" + s + "'");
}

double bump_value(const Bump& f, cplx w) {
  const double q = std::norm(w - f.center) / (f.radius * f.radius);
  if (q >= 1.0) return 0.0;
  const double t = 1.0 - q;
  return f.amplitude * t * t * t;
}

double bump_laplacian(const Bump& f, cplx w) {
  const double q = std::norm(w - f.center) / (f.radius * f.radius);
  if (q >= 1.0) return 0.0;
  return f.amplitude * 12.0 / (f.radius * f.radius) * (1.0 - q) * (3.0 * q - 1.0);
}

double bump_laplacian_l1(const Bump& f) { return 32.0 * pi / 9.0 * std::abs(f.amplitude); }

double bump_integral(const Bump& f) { return pi * f.radius * f.radius * f.amplitude / 4.0; }

namespace {

void check_bump(const Bump& f) {
  if (!(f.radius > 0.0) || !std::isfinite(f.radius) || !std::isfinite(f.amplitude))
    throw config_error("bump needs a finite positive radius and finite amplitude");
}

std::vector<cplx> eigenvalues_general(const CMat& X) {
  std::vector<cplx> out;
  if (X.imag().cwiseAbs().maxCoeff() == 0.0) {
    Eigen::EigenSolver<Mat> es(X.real(), false);
    if (es.info() != Eigen::Success) throw numerical_error("non-Hermitian eigensolver failed");
    for (Eigen::Index k = 0; k < X.rows(); ++k) out.push_back(es.eigenvalues()(k));
  } else {
    Eigen::ComplexEigenSolver<CMat> es(X, false);
    if (es.info() != Eigen::Success) throw numerical_error("non-Hermitian eigensolver failed");
    for (Eigen::Index k = 0; k < X.rows(); ++k) out.push_back(es.eigenvalues()(k));
  }
  return out;
}

// log|det(X - z)| from the pivoted LU; -inf when singular.
double log_abs_det_shifted(const CMat& X, cplx z) {
  CMat Y = X;
  Y.diagonal().array() -= z;
  Eigen::PartialPivLU<CMat> lu(Y);
  const CMat& U = lu.matrixLU();
  double s = 0.0;
  for (Eigen::Index k = 0; k < U.rows(); ++k) s += std::log(std::abs(U(k, k)));
  return s;
}

}  // namespace

GirkoResult girko_check(const CMat& X, const Bump& f, int grid) {
  if (X.rows() != X.cols() || X.rows() == 0) throw config_error("girko_check needs a nonempty square matrix");
  if (X.rows() > 128) throw precondition_error("girko_check is limited to n <= 128");
  if (grid < 2) throw config_error("girko grid needs at least 2 points per side");
  check_bump(f);
  const double n = static_cast<double>(X.rows());
  GirkoResult r;
  r.grid = grid;
  for (const cplx& zeta : eigenvalues_general(X)) r.lhs += bump_value(f, zeta);
  r.lhs /= n;

  const double h = 2.0 * f.radius / grid;
  double sum = 0.0;
  for (int i = 0; i < grid; ++i) {
    for (int j = 0; j < grid; ++j) {
      cplx z = f.center + cplx(-f.radius + (i + 0.5) * h, -f.radius + (j + 0.5) * h);
      const double lap = bump_laplacian(f, z);
      if (lap == 0.0) continue;
      double ld = log_abs_det_shifted(X, z);
      if (!std::isfinite(ld)) {
        z += cplx(1e-3 * h, 1e-3 * h);
        ld = log_abs_det_shifted(X, z);
        ++r.jittered;
        if (!std::isfinite(ld)) throw numerical_error("log|det| is not finite after jittering");
      }
      // log|det H_z| = 2 log|det(X - z)|
      sum += bump_laplacian(f, z) * 2.0 * ld;
    }
  }
  r.rhs = sum * h * h / (4.0 * pi * n);
  r.rel_err = r.lhs != 0.0 ? std::abs(r.lhs - r.rhs) / std::abs(r.lhs) : std::abs(r.rhs);
  return r;
}

bool ExperimentReport::contracts_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return !c.contract || c.passed; });
}

const Check* ExperimentReport::find(const std::string& name) const {
  for (const Check& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

json to_json(const ExperimentReport& r) {
  json checks = json::array();
  for (const Check& c : r.checks)
    checks.push_back({{"name", c.name},
                      {"kind", c.contract ? "contract" : "trend"},
                      {"passed", c.passed},
                      {"value", c.value},
                      {"limit", c.limit},
                      {"detail", c.detail}});
  return {{"experiment", to_string(r.experiment)},
          {"n", r.n_list},
          {"trials", r.trials},
          {"seed", r.seed},
          {"seeds", r.seeds},
          {"per_trial", r.per_trial},
          {"aggregates", r.aggregates},
          {"checks", checks},
          {"contracts_passed", r.contracts_passed()}};
}

std::uint64_t trial_stream(int n, int t) {
  return (static_cast<std::uint64_t>(n) << 32) | static_cast<std::uint32_t>(t);
}

VarianceProfile profile_at(const VarianceProfile& tpl, int n) {
  if (tpl.kind == ProfileKind::custom) {
    if (n != tpl.n) throw config_error("a custom profile only supports n = " + std::to_string(tpl.n));
    return tpl;
  }
  if (n == tpl.n) return tpl;
  VarianceProfile P = make_profile(tpl.kind, n, tpl.params);
  if (std::abs(tpl.perron_radius - 1.0) <= 1e-9 && std::abs(P.perron_radius - 1.0) > 1e-12) P = normalize(P);
  return P;
}

double experiment_eta(const ExperimentConfig& cfg, int n) {
  if (cfg.eta > 0.0) return cfg.eta;
  if (cfg.eta_f_multiple > 0.0) return cfg.eta_f_multiple * fluctuation_scale(std::norm(cfg.z), n);
  return std::pow(static_cast<double>(n), cfg.eta_exponent);
}

double loglog_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double mx = 0.0, my = 0.0;
  const double k = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]) / k;
    my += std::log(y[i]) / k;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

namespace {

struct TrialId {
  int n_pos;
  int n;
  int t;
  std::uint64_t stream;
};

void validate(const ExperimentConfig& cfg) {
  if (cfg.n_list.empty()) throw config_error("experiment needs at least one n");
  for (int n : cfg.n_list)
    if (n < 2 || n > max_profile_dim) throw config_error("experiment n must lie in [2, 4096]");
  if (cfg.trials < 1) throw config_error("experiment needs at least one trial");
  if (cfg.profile.n < 1) throw config_error("experiment needs a variance profile");
  if (!std::isfinite(cfg.z.real()) || !std::isfinite(cfg.z.imag())) throw config_error("z must be finite");
  if (cfg.threads < 1) throw config_error("threads must be positive");
}

ExperimentReport base_report(const ExperimentConfig& cfg, std::vector<TrialId>& ids) {
  ExperimentReport rep;
  rep.experiment = cfg.experiment;
  rep.n_list = cfg.n_list;
  rep.trials = cfg.trials;
  rep.seed = cfg.seed;
  for (std::size_t p = 0; p < cfg.n_list.size(); ++p)
    for (int t = 0; t < cfg.trials; ++t) {
      const int n = cfg.n_list[p];
      ids.push_back({static_cast<int>(p), n, t, trial_stream(n, t)});
      rep.seeds.push_back({{"n", n}, {"trial", t}, {"seed", cfg.seed}, {"trial_index", trial_stream(n, t)}});
    }
  return rep;
}

SampleSpec sample_spec(const ExperimentConfig& cfg, const VarianceProfile& S, const TrialId& id) {
  SampleSpec s;
  s.profile = S;
  s.dist = cfg.dist;
  s.seed = cfg.seed;
  s.trial_index = id.stream;
  s.hook = cfg.hook;
  return s;
}

void require_normalized(const VarianceProfile& S) {
  if (std::abs(S.perron_radius - 1.0) > 1e-8)
    throw precondition_error("experiment needs a normalized profile (spectral radius of S equal to 1)");
}

std::vector<VarianceProfile> profiles_for(const ExperimentConfig& cfg) {
  std::vector<VarianceProfile> out;
  for (int n : cfg.n_list) out.push_back(profile_at(cfg.profile, n));
  return out;
}

void add_check(ExperimentReport& rep, std::string name, bool contract, bool passed, double value, double limit,
               std::string detail = {}) {
  rep.checks.push_back({std::move(name), contract, passed, value, limit, std::move(detail)});
}

std::string tag(int n) { return "_n" + std::to_string(n); }

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

double fraction_at_most(const std::vector<double>& v, double limit) {
  if (v.empty()) return 0.0;
  const auto c = std::count_if(v.begin(), v.end(), [&](double x) { return x <= limit; });
  return static_cast<double>(c) / static_cast<double>(v.size());
}

double max_of(const std::vector<double>& v) { return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end()); }

}  // namespace

ExperimentReport spectral_radius_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  std::vector<TrialId> ids;
  ExperimentReport rep = base_report(cfg, ids);
  const std::vector<VarianceProfile> profiles = profiles_for(cfg);
  for (const auto& P : profiles) require_normalized(P);

  struct Row {
    double rho = 0.0;
    bool failed = false;
    std::string error;
  };
  std::vector<Row> rows(ids.size());
  parallel_for(ids.size(), cfg.threads, [&](std::size_t k) {
    const TrialId& id = ids[k];
    try {
      const CMat X = sample_matrix(sample_spec(cfg, profiles[id.n_pos], id));
      double r = 0.0;
      for (const cplx& l : eigenvalues_general(X)) r = std::max(r, std::abs(l));
      rows[k].rho = r;
    } catch (const numerical_error& e) {
      rows[k].failed = true;
      rows[k].error = e.what();
    }
  });

  std::vector<double> ns, meds;
  for (std::size_t p = 0; p < cfg.n_list.size(); ++p) {
    std::vector<double> dev, absdev;
    long failures = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (ids[k].n_pos != static_cast<int>(p)) continue;
      json rec = {{"n", ids[k].n}, {"trial", ids[k].t}, {"trial_index", ids[k].stream}, {"failed", rows[k].failed}};
      if (rows[k].failed) {
        ++failures;
        rec["error"] = rows[k].error;
      } else {
        rec["spectral_radius"] = rows[k].rho;
        dev.push_back(rows[k].rho - 1.0);
        absdev.push_back(std::abs(rows[k].rho - 1.0));
      }
      rep.per_trial.push_back(rec);
    }
    const int n = cfg.n_list[p];
    const double ln = std::log(static_cast<double>(n));
    const double gamma = std::log(n / (2.0 * pi)) - 2.0 * std::log(ln);
    const double ginibre = gamma > 0.0 ? std::sqrt(gamma / (4.0 * n)) : std::numeric_limits<double>::quiet_NaN();
    rep.aggregates["per_n"].push_back({{"n", n},
                                       {"median_abs_deviation", median(absdev)},
                                       {"median_deviation", median(dev)},
                                       {"ginibre_reference", ginibre},
                                       {"failures", failures},
                                       {"used", static_cast<long>(absdev.size())}});
    if (!absdev.empty()) {
      ns.push_back(n);
      meds.push_back(median(absdev));
    }
  }

  const double slope = loglog_fit(ns, meds);
  rep.aggregates["slope"] = slope;
  if (cfg.n_list.size() >= 2)
    add_check(rep, "slope", true, slope >= cfg.cal.slope_lo && slope <= cfg.cal.slope_hi, slope, cfg.cal.slope_hi,
              "log-log slope of median |rho(X) - 1| in [" + std::to_string(cfg.cal.slope_lo) + ", " +
                  std::to_string(cfg.cal.slope_hi) + "]");

  const auto top = std::max_element(cfg.n_list.begin(), cfg.n_list.end()) - cfg.n_list.begin();
  const json& agg_top = rep.aggregates["per_n"][static_cast<std::size_t>(top)];
  const double med_top = agg_top["median_abs_deviation"].get<double>();
  add_check(rep, "median" + tag(cfg.n_list[top]), true, med_top <= cfg.cal.radius_median_max, med_top,
            cfg.cal.radius_median_max, "median |rho(X) - 1| at the largest n");

  if (cfg.dist == Distribution::complex_gaussian && cfg.hook == MatrixHook::none && cfg.profile.kind == ProfileKind::flat) {
    const double ref = agg_top["ginibre_reference"].get<double>();
    const double ratio = agg_top["median_deviation"].get<double>() / ref;
    add_check(rep, "ginibre" + tag(cfg.n_list[top]), true,
              ratio >= 1.0 / cfg.cal.ginibre_factor && ratio <= cfg.cal.ginibre_factor, ratio, cfg.cal.ginibre_factor,
              "median(rho(X) - 1) / sqrt(gamma_n / 4n)");
  }
  return rep;
}

ExperimentReport local_law_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  std::vector<TrialId> ids;
  ExperimentReport rep = base_report(cfg, ids);
  const std::vector<VarianceProfile> profiles = profiles_for(cfg);

  struct PerN {
    double eta;
    DysonSolution sol;
    MdeMatrices m;
    Probes probes;
  };
  std::vector<PerN> per_n;
  for (std::size_t p = 0; p < cfg.n_list.size(); ++p) {
    const int n = cfg.n_list[p];
    const double eta = experiment_eta(cfg, n);
    DysonSolution sol = solve_dyson_blockwise(profiles[p], cfg.z, eta, cfg.solver);
    MdeMatrices m = assemble_matrices(sol);
    per_n.push_back({eta, std::move(sol), std::move(m), default_probes(n, cfg.seed)});
  }

  struct Row {
    ResolventError err;
    double chiral = 0.0;
    long count = 0;
    ErrorMatrixStats D;
  };
  std::vector<Row> rows(ids.size());
  parallel_for(ids.size(), cfg.threads, [&](std::size_t k) {
    const TrialId& id = ids[k];
    const PerN& P = per_n[id.n_pos];
    const CMat X = sample_matrix(sample_spec(cfg, profiles[id.n_pos], id));
    const HermitizedSystem sys = hermitize(X, cfg.z);
    const CMat G = resolvent(sys, P.eta);
    rows[k].err = resolvent_error(G, P.m.M, P.eta, P.probes);
    rows[k].chiral = chiral_pairing_defect(sys);
    rows[k].count = eigenvalue_count_near_zero(sys, P.eta);
    rows[k].D = error_matrix_D(G, profiles[id.n_pos].entries, cfg.z, P.eta);
  });

  std::vector<double> med_trace, med_D, gains_all;
  double max_em = 0.0, max_ward = 0.0, max_chiral = 0.0;
  for (std::size_t p = 0; p < cfg.n_list.size(); ++p) {
    const int n = cfg.n_list[p];
    const PerN& P = per_n[p];
    std::vector<double> trace, avgm, iso, cnt, dgen, gain;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (ids[k].n_pos != static_cast<int>(p)) continue;
      const Row& r = rows[k];
      rep.per_trial.push_back({{"n", n},
                               {"trial", ids[k].t},
                               {"trial_index", ids[k].stream},
                               {"eta", P.eta},
                               {"trace_error", r.err.trace_error},
                               {"avg_max", r.err.avg_max},
                               {"iso_max", r.err.iso_max},
                               {"e_minus_trace", r.err.e_minus_trace},
                               {"ward", r.err.ward},
                               {"chiral", r.chiral},
                               {"count_near_zero", r.count},
                               {"D_generic_median", r.D.generic_median},
                               {"D_offdiag_median", r.D.offdiag_median},
                               {"offdiag_gain", r.D.offdiag_gain}});
      trace.push_back(r.err.trace_error);
      avgm.push_back(r.err.avg_max);
      iso.push_back(r.err.iso_max);
      cnt.push_back(static_cast<double>(r.count));
      dgen.push_back(r.D.generic_median);
      gain.push_back(r.D.offdiag_gain);
      gains_all.push_back(r.D.offdiag_gain);
      max_em = std::max(max_em, r.err.e_minus_trace);
      max_ward = std::max(max_ward, r.err.ward);
      max_chiral = std::max(max_chiral, r.chiral);
    }
    const double bound = cfg.cal.local_law / (n * P.eta);
    const double count_bound = cfg.cal.count * (n * P.eta * P.sol.rho + 1.0);
    const double eta_f = fluctuation_scale(std::norm(cfg.z), n);
    const double frac = fraction_at_most(avgm, bound);
    rep.aggregates["per_n"].push_back({{"n", n},
                                       {"eta", P.eta},
                                       {"eta_f", eta_f},
                                       {"rho", P.sol.rho},
                                       {"bound", bound},
                                       {"median_trace_error", median(trace)},
                                       {"median_avg_max", median(avgm)},
                                       {"fraction_avg_max_within", frac},
                                       {"median_iso_max", median(iso)},
                                       {"median_count", median(cnt)},
                                       {"count_bound", count_bound},
                                       {"median_D_generic", median(dgen)},
                                       {"median_offdiag_gain", median(gain)}});
    med_trace.push_back(median(trace));
    med_D.push_back(median(dgen));
    add_check(rep, "trace_error" + tag(n), true, median(trace) <= bound, median(trace), bound,
              "median |<G - M>| <= C/(n eta)");
    add_check(rep, "avg_max" + tag(n), true, frac >= cfg.cal.local_law_fraction, frac, cfg.cal.local_law_fraction,
              "fraction of trials with max_R |<R (G - M)>| <= C/(n eta)");
    if (P.eta >= eta_f)
      add_check(rep, "count" + tag(n), true, median(cnt) <= count_bound, median(cnt), count_bound,
                "median |{|lambda| <= eta}| <= C (n eta rho + 1)");
  }
  rep.aggregates["max_e_minus_trace"] = max_em;
  rep.aggregates["max_ward"] = max_ward;
  rep.aggregates["max_chiral"] = max_chiral;
  add_check(rep, "e_minus_trace", true, max_em <= 1e-12, max_em, 1e-12, "|<E_-, G>| per sample");
  add_check(rep, "ward", true, max_ward <= 1e-10, max_ward, 1e-10, "Ward identity, relative");
  add_check(rep, "chiral", true, max_chiral <= 1e-10, max_chiral, 1e-10, "eigenvalue pairing");
  if (cfg.n_list.size() >= 2) {
    add_check(rep, "trace_error_decreasing", false, strictly_decreasing(med_trace), med_trace.back(),
              med_trace.front(), "median |<G - M>| decreasing in n");
    add_check(rep, "D_generic_decreasing", false, strictly_decreasing(med_D), med_D.back(), med_D.front(),
              "median generic |<R D>| decreasing in n");
  }
  const double gfrac = fraction_at_most(gains_all, std::nextafter(1.0, 0.0));
  add_check(rep, "offdiag_gain", false, gfrac >= cfg.cal.offdiag_fraction, gfrac, cfg.cal.offdiag_fraction,
            "fraction of trials with off-diagonal gain < 1");
  return rep;
}

namespace {

// Linear interpolation of a radial table, zero beyond its end.
double sigma_at(const DensityProfile& d, double r) {
  const std::size_t m = d.radii.size();
  if (m < 2 || r >= d.radii.back()) return 0.0;
  const double h = d.radii[1] - d.radii[0];
  const std::size_t k = std::min(m - 2, static_cast<std::size_t>(r / h));
  const double t = (r - d.radii[k]) / h;
  return (1.0 - t) * d.sigma_values[k] + t * d.sigma_values[k + 1];
}

// int f sigma d^2w in polar coordinates around the bump center, midpoint rule.
double bump_against_density(const Bump& f, const DensityProfile& d) {
  if (f.amplitude == 0.0) return 0.0;
  const int nr = 256, nt = 256;
  double s = 0.0;
  for (int i = 0; i < nr; ++i) {
    const double rr = (i + 0.5) / nr * f.radius;
    const double q = rr * rr / (f.radius * f.radius);
    const double fv = f.amplitude * (1.0 - q) * (1.0 - q) * (1.0 - q);
    double ring = 0.0;
    for (int j = 0; j < nt; ++j) {
      const double th = 2.0 * pi * (j + 0.5) / nt;
      ring += sigma_at(d, std::abs(f.center + std::polar(rr, th)));
    }
    s += fv * ring * rr;
  }
  return s * (f.radius / nr) * (2.0 * pi / nt);
}

}  // namespace

ExperimentReport circular_law_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  if (!(cfg.a >= 0.0 && cfg.a <= 0.5)) throw config_error("circlaw needs a in [0, 1/2]");
  check_bump(cfg.bump);
  std::vector<TrialId> ids;
  ExperimentReport rep = base_report(cfg, ids);
  const std::vector<VarianceProfile> profiles = profiles_for(cfg);
  for (const auto& P : profiles) require_normalized(P);

  std::vector<Bump> bumps;
  std::vector<double> rhs;
  for (std::size_t p = 0; p < cfg.n_list.size(); ++p) {
    Bump b = cfg.bump;
    b.center = cfg.z0;
    b.radius = cfg.bump.radius * std::pow(static_cast<double>(cfg.n_list[p]), -cfg.a);
    bumps.push_back(b);
    const DensityProfile d = sigma_radial(profiles[p], cfg.radial, cfg.quadrature, cfg.threads);
    if (!d.invariants_ok()) throw numerical_error("density invariants failed; quadrature is not trustworthy");
    rhs.push_back(bump_against_density(b, d));
  }
  const double l1 = bump_laplacian_l1(cfg.bump);

  std::vector<double> lhs(ids.size());
  parallel_for(ids.size(), cfg.threads, [&](std::size_t k) {
    const TrialId& id = ids[k];
    const CMat X = sample_matrix(sample_spec(cfg, profiles[id.n_pos], id));
    double s = 0.0;
    for (const cplx& z : eigenvalues_general(X)) s += bump_value(bumps[id.n_pos], z);
    lhs[k] = s / id.n;
  });

  std::vector<double> meds;
  bool finite = true;
  for (std::size_t p = 0; p < cfg.n_list.size(); ++p) {
    const int n = cfg.n_list[p];
    const double scale = l1 / std::pow(static_cast<double>(n), 1.0 - 2.0 * cfg.a);
    std::vector<double> norm;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (ids[k].n_pos != static_cast<int>(p)) continue;
      const double disc = std::abs(lhs[k] - rhs[p]);
      const double nd = scale > 0.0 ? disc / scale : disc;
      finite = finite && std::isfinite(nd);
      norm.push_back(nd);
      rep.per_trial.push_back({{"n", n},
                               {"trial", ids[k].t},
                               {"trial_index", ids[k].stream},
                               {"eigen_average", lhs[k]},
                               {"density_integral", rhs[p]},
                               {"discrepancy", disc},
                               {"normalized", nd}});
    }
    const double frac = fraction_at_most(norm, cfg.cal.circlaw);
    meds.push_back(median(norm));
    rep.aggregates["per_n"].push_back({{"n", n},
                                       {"density_integral", rhs[p]},
                                       {"bump_radius", bumps[p].radius},
                                       {"median_normalized", median(norm)},
                                       {"fraction_within", frac}});
    if (cfg.a == 0.0)
      add_check(rep, "normalized" + tag(n), true, frac >= cfg.cal.circlaw_fraction, frac, cfg.cal.circlaw_fraction,
                "fraction of trials with normalized discrepancy <= C");
  }
  add_check(rep, "finite", true, finite, finite ? 1.0 : 0.0, 1.0, "normalized discrepancies are finite");
  if (cfg.n_list.size() >= 2)
    add_check(rep, "normalized_decreasing", false, strictly_decreasing(meds), meds.back(), meds.front(),
              "median normalized discrepancy decreasing in n");
  return rep;
}

ExperimentReport delocalization_check(const ExperimentConfig& cfg) {
  validate(cfg);
  std::vector<TrialId> ids;
  ExperimentReport rep = base_report(cfg, ids);
  const std::vector<VarianceProfile> profiles = profiles_for(cfg);

  struct Row {
    std::vector<double> values;
    double min_gap = 0.0;
  };
  std::vector<Row> rows(ids.size());
  parallel_for(ids.size(), cfg.threads, [&](std::size_t k) {
    const TrialId& id = ids[k];
    const CMat X = sample_matrix(sample_spec(cfg, profiles[id.n_pos], id));
    Eigen::ComplexEigenSolver<CMat> es(X, true);
    if (es.info() != Eigen::Success) throw numerical_error("non-Hermitian eigensolver failed");
    const CMat& V = es.eigenvectors();
    const double sn = std::sqrt(static_cast<double>(id.n));
    for (Eigen::Index j = 0; j < V.cols(); ++j)
      rows[k].values.push_back(sn * V.col(j).cwiseAbs().maxCoeff() / V.col(j).norm());
    const CVec& ev = es.eigenvalues();
    double gap = std::numeric_limits<double>::infinity();
    for (Eigen::Index a = 0; a < ev.size(); ++a)
      for (Eigen::Index b = a + 1; b < ev.size(); ++b) gap = std::min(gap, std::abs(ev(a) - ev(b)));
    rows[k].min_gap = gap;
  });

  for (std::size_t p = 0; p < cfg.n_list.size(); ++p) {
    const int n = cfg.n_list[p];
    std::vector<double> all;
    long warnings = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (ids[k].n_pos != static_cast<int>(p)) continue;
      const Row& r = rows[k];
      // Repeated eigenvalues make the eigenvector basis non-unique (possibly defective).
      const bool warn = r.min_gap <= 1e-10;
      warnings += warn;
      rep.per_trial.push_back({{"n", n},
                               {"trial", ids[k].t},
                               {"trial_index", ids[k].stream},
                               {"max", max_of(r.values)},
                               {"median", median(r.values)},
                               {"min_eigenvalue_gap", r.min_gap},
                               {"defective_warning", warn}});
      all.insert(all.end(), r.values.begin(), r.values.end());
    }
    const double bound = cfg.cal.deloc_log_factor * std::log(static_cast<double>(n));
    const double q = quantile(all, cfg.cal.deloc_quantile);
    rep.aggregates["per_n"].push_back({{"n", n},
                                       {"p50", quantile(all, 0.5)},
                                       {"p90", quantile(all, 0.9)},
                                       {"p99", quantile(all, 0.99)},
                                       {"max", max_of(all)},
                                       {"bound", bound},
                                       {"defective_warnings", warnings}});
    add_check(rep, "quantile" + tag(n), true, q <= bound, q, bound, "quantile of sqrt(n) max|u_i| / ||u|| <= C log n");
  }
  return rep;
}

ExperimentReport girko_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  if (cfg.dist == Distribution::rademacher)
    throw config_error("the Girko check is sensitive to the smallest singular value; rademacher entries are not allowed");
  check_bump(cfg.girko_bump);
  if (cfg.girko_refined <= cfg.girko_grid) throw config_error("girko_refined must exceed girko_grid");
  for (int n : cfg.n_list)
    if (n > 128) throw precondition_error("girko is limited to n <= 128");
  std::vector<TrialId> ids;
  ExperimentReport rep = base_report(cfg, ids);
  const std::vector<VarianceProfile> profiles = profiles_for(cfg);

  std::vector<GirkoResult> coarse(ids.size()), fine(ids.size());
  parallel_for(ids.size(), cfg.threads, [&](std::size_t k) {
    const TrialId& id = ids[k];
    const CMat X = sample_matrix(sample_spec(cfg, profiles[id.n_pos], id));
    coarse[k] = girko_check(X, cfg.girko_bump, cfg.girko_grid);
    fine[k] = girko_check(X, cfg.girko_bump, cfg.girko_refined);
  });

  for (std::size_t p = 0; p < cfg.n_list.size(); ++p) {
    const int n = cfg.n_list[p];
    std::vector<double> ec, ef, gain;
    long jittered = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (ids[k].n_pos != static_cast<int>(p)) continue;
      const double g = coarse[k].rel_err / fine[k].rel_err;
      ec.push_back(coarse[k].rel_err);
      ef.push_back(fine[k].rel_err);
      gain.push_back(g);
      jittered += coarse[k].jittered + fine[k].jittered;
      rep.per_trial.push_back({{"n", n},
                               {"trial", ids[k].t},
                               {"trial_index", ids[k].stream},
                               {"lhs", coarse[k].lhs},
                               {"rhs_coarse", coarse[k].rhs},
                               {"rhs_fine", fine[k].rhs},
                               {"rel_err_coarse", coarse[k].rel_err},
                               {"rel_err_fine", fine[k].rel_err},
                               {"gain", g},
                               {"jittered", coarse[k].jittered + fine[k].jittered}});
    }
    const double mc = median(ec), mg = median(gain);
    rep.aggregates["per_n"].push_back({{"n", n},
                                       {"grid", cfg.girko_grid},
                                       {"refined_grid", cfg.girko_refined},
                                       {"median_rel_err", mc},
                                       {"median_rel_err_refined", median(ef)},
                                       {"median_gain", mg},
                                       {"jittered", jittered}});
    add_check(rep, "rel_err" + tag(n), true, mc <= cfg.cal.girko_tol, mc, cfg.cal.girko_tol,
              "median relative error on the coarse grid");
    add_check(rep, "refinement_gain" + tag(n), true, mg >= cfg.cal.girko_gain_lo, mg, cfg.cal.girko_gain_lo,
              "median coarse/refined error ratio");
    add_check(rep, "refinement_order" + tag(n), false, mg <= cfg.cal.girko_gain_hi, mg, cfg.cal.girko_gain_hi,
              "gain at most that of a second-order rule");
  }
  return rep;
}

ExperimentReport cubic_residual_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  std::vector<TrialId> ids;
  ExperimentReport rep = base_report(cfg, ids);
  const std::vector<VarianceProfile> profiles = profiles_for(cfg);

  struct PerN {
    double eta;
    DysonSolution sol;
    MdeMatrices m;
    StabilitySpectrum spec;
    CubicCoefficients c;
  };
  std::vector<PerN> per_n;
  for (std::size_t p = 0; p < cfg.n_list.size(); ++p) {
    const double eta = experiment_eta(cfg, cfg.n_list[p]);
    DysonSolution sol = solve_dyson_blockwise(profiles[p], cfg.z, eta, cfg.solver);
    MdeMatrices m = assemble_matrices(sol);
    StabilitySpectrum spec = stability_spectrum(m, sol, profiles[p], cfg.stability);
    // The regime is recorded as a check below instead of refusing the point.
    StabilityOptions unguarded = cfg.stability;
    unguarded.rho_star = std::numeric_limits<double>::infinity();
    CubicCoefficients c = cubic_coefficients(spec, m, profiles[p], sol, unguarded);
    per_n.push_back({eta, std::move(sol), std::move(m), std::move(spec), c});
  }

  struct Row {
    cplx theta;
    double literal = 0.0, full = 0.0;
    cplx mu1_x, mu0;
    double defect = 0.0;
  };
  std::vector<Row> rows(ids.size());
  parallel_for(ids.size(), cfg.threads, [&](std::size_t k) {
    const TrialId& id = ids[k];
    const PerN& P = per_n[id.n_pos];
    const VarianceProfile& S = profiles[id.n_pos];
    CMat G, D;
    if (cfg.g_equals_m) {
      G = P.m.M;
      D = CMat::Zero(G.rows(), G.cols());
    } else {
      const CMat X = sample_matrix(sample_spec(cfg, S, id));
      G = resolvent(hermitize(X, cfg.z), P.eta);
      D = error_matrix(G, S.entries, cfg.z, P.eta);
    }
    Row& r = rows[k];
    r.theta = inner(P.spec.B_hat, CMat(G - P.m.M)) / P.spec.overlap_B;
    const CubicXTerms xt = cubic_x_terms(P.spec, P.m, S, paired_mul(P.m.M, D));
    r.mu1_x = xt.mu1_x;
    r.mu0 = xt.mu0;
    r.defect = xt.binvq_defect;

    const cplx th = r.theta;
    const cplx l3 = th * th * th, l2 = P.c.xi2 * th * th, l1 = P.c.xi1 * th;
    r.literal = std::abs(l3 + l2 + l1) / std::max({std::abs(l3), std::abs(l2), std::abs(l1), 1e-300});
    const cplx f3 = P.c.mu3 * l3, f2 = P.c.mu2 * th * th, f1 = (P.c.mu1 + xt.mu1_x) * th, f0 = xt.mu0;
    r.full = std::abs(f3 + f2 + f1 + f0) /
             std::max({std::abs(f3), std::abs(f2), std::abs(f1), std::abs(f0), 1e-300});
  });

  std::vector<double> med_full, med_lit;
  for (std::size_t p = 0; p < cfg.n_list.size(); ++p) {
    const int n = cfg.n_list[p];
    const PerN& P = per_n[p];
    std::vector<double> full, lit, th;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (ids[k].n_pos != static_cast<int>(p)) continue;
      const Row& r = rows[k];
      full.push_back(r.full);
      lit.push_back(r.literal);
      th.push_back(std::abs(r.theta));
      rep.per_trial.push_back({{"n", n},
                               {"trial", ids[k].t},
                               {"trial_index", ids[k].stream},
                               {"eta", P.eta},
                               {"theta_re", r.theta.real()},
                               {"theta_im", r.theta.imag()},
                               {"full_ratio", r.full},
                               {"literal_ratio", r.literal},
                               {"mu1_x_abs", std::abs(r.mu1_x)},
                               {"mu0_abs", std::abs(r.mu0)},
                               {"binvq_defect", r.defect}});
    }
    med_full.push_back(median(full));
    med_lit.push_back(median(lit));
    rep.aggregates["per_n"].push_back({{"n", n},
                                       {"eta", P.eta},
                                       {"rho", P.sol.rho},
                                       {"regime_value", P.sol.rho + P.eta / P.sol.rho},
                                       {"isolated", P.spec.isolated},
                                       {"beta_abs", std::abs(P.spec.beta)},
                                       {"beta_star_abs", std::abs(P.spec.beta_star)},
                                       {"xi1_abs", std::abs(P.c.xi1)},
                                       {"xi2_abs", std::abs(P.c.xi2)},
                                       {"mu3_abs", std::abs(P.c.mu3)},
                                       {"median_abs_theta", median(th)},
                                       {"median_full_ratio", med_full.back()},
                                       {"median_literal_ratio", med_lit.back()}});
    const double regime = P.sol.rho + P.eta / P.sol.rho;
    add_check(rep, "regime" + tag(n), false, regime <= cfg.stability.rho_star, regime, cfg.stability.rho_star,
              "rho + eta/rho within the small-rho regime");
    add_check(rep, "full_ratio" + tag(n), true, med_full.back() <= cfg.cal.cubic_ratio_max, med_full.back(),
              cfg.cal.cubic_ratio_max, "median full cubic residual ratio");
    add_check(rep, "literal_ratio" + tag(n), false, med_lit.back() <= cfg.cal.cubic_ratio_max, med_lit.back(),
              cfg.cal.cubic_ratio_max, "median literal cubic residual ratio, D terms omitted");
  }
  if (cfg.n_list.size() >= 2) {
    const auto lo = std::min_element(cfg.n_list.begin(), cfg.n_list.end()) - cfg.n_list.begin();
    const auto hi = std::max_element(cfg.n_list.begin(), cfg.n_list.end()) - cfg.n_list.begin();
    add_check(rep, "full_ratio_decreasing", true, med_full[hi] <= med_full[lo], med_full[hi], med_full[lo],
              "median full ratio at the largest n <= at the smallest n");
    add_check(rep, "literal_ratio_decreasing", false, med_lit[hi] <= med_lit[lo], med_lit[hi], med_lit[lo],
              "median literal ratio at the largest n <= at the smallest n");
  }
  return rep;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  switch (cfg.experiment) {
    case Experiment::radius: return spectral_radius_experiment(cfg);
    case Experiment::locallaw: return local_law_experiment(cfg);
    case Experiment::circlaw: return circular_law_experiment(cfg);
    case Experiment::deloc: return delocalization_check(cfg);
    case Experiment::girko: return girko_experiment(cfg);
    case Experiment::cubic: return cubic_residual_experiment(cfg);
  }
  throw config_error("unknown experiment");
}

}  // namespace dlab

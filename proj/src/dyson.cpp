#include <dysonlab/dyson.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace dlab {

namespace {

struct Eval {
  Vec a, b, g1, g2;
  double defect = 0.0;
};

void evaluate(const Mat& S, double z2, double eta, const Vec& v1, const Vec& v2, Eval& e) {
  e.a = (S * v2).array() + eta;
  e.b = (S.transpose() * v1).array() + eta;
  e.g1 = (v1.array() * (e.a.array() + z2 / e.b.array()) - 1.0).matrix();
  e.g2 = (v2.array() * (e.b.array() + z2 / e.a.array()) - 1.0).matrix();
  e.defect = std::max(e.g1.cwiseAbs().maxCoeff(), e.g2.cwiseAbs().maxCoeff());
  if (!std::isfinite(e.defect)) e.defect = std::numeric_limits<double>::infinity();
}

// Jacobian of (g1, g2) with respect to (log v1, log v2).
Mat jacobian(const Mat& S, double z2, const Vec& v1, const Vec& v2, const Eval& e) {
  const Eigen::Index n = S.rows();
  Mat J(2 * n, 2 * n);
  const Vec c1 = (v1.array() * z2 / e.b.array().square()).matrix();
  const Vec c2 = (v2.array() * z2 / e.a.array().square()).matrix();
  J.topLeftCorner(n, n) = -(c1 * v1.transpose()).cwiseProduct(S.transpose());
  J.topRightCorner(n, n) = (v1 * v2.transpose()).cwiseProduct(S);
  J.bottomLeftCorner(n, n) = (v2 * v1.transpose()).cwiseProduct(S.transpose());
  J.bottomRightCorner(n, n) = -(c2 * v2.transpose()).cwiseProduct(S);
  J.diagonal().head(n) += (e.g1.array() + 1.0).matrix();
  J.diagonal().tail(n) += (e.g2.array() + 1.0).matrix();
  return J;
}

// (sum v1 - sum v2) / (sum v1 + sum v2); vanishes at the solution for every eta > 0.
double balance(const Vec& v1, const Vec& v2) { return (v1.sum() - v2.sum()) / (v1.sum() + v2.sum()); }

// Jacobian bordered by the balance constraint. The rescaling v1 -> c v1, v2 -> v2 / c is
// a near-null direction of order eta / rho; the border pins it.
Mat bordered_jacobian(const Mat& S, double z2, const Vec& v1, const Vec& v2, const Eval& e) {
  const Eigen::Index n = S.rows();
  Mat K = Mat::Zero(2 * n + 1, 2 * n + 1);
  K.topLeftCorner(2 * n, 2 * n) = jacobian(S, z2, v1, v2, e);
  const double A = v1.sum(), B = v2.sum(), T2 = (A + B) * (A + B);
  Vec c(2 * n);
  c << v1 * (2.0 * B / T2), v2 * (-2.0 * A / T2);
  K.row(2 * n).head(2 * n) = c.transpose();
  K.col(2 * n).head(2 * n) = c / c.cwiseAbs().maxCoeff();
  return K;
}

long newton(const Mat& S, double z2, double eta, Vec& v1, Vec& v2, const SolverOptions& opt,
            double& final_update) {
  const Eigen::Index n = S.rows();
  Eval e, trial;
  evaluate(S, z2, eta, v1, v2, e);
  Eigen::PartialPivLU<Mat> lu;
  bool need_factor = true;
  double last_update = std::numeric_limits<double>::infinity();
  double prev_update = last_update;
  bool last_fresh = false;
  Vec g(2 * n + 1), dw(2 * n + 1), t1(n), t2(n);

  for (long it = 0; it < opt.max_iter; ++it) {
    if (e.defect <= opt.tol) {
      final_update = last_update;
      if (last_update <= opt.tol) return it;
      // Rounding floor: a fresh Newton step no longer shrinks the update.
      if (last_fresh && last_update > 0.5 * prev_update) return it;
    }
    const bool fresh = need_factor;
    if (need_factor) {
      lu.compute(bordered_jacobian(S, z2, v1, v2, e));
      need_factor = false;
    }
    g << e.g1, e.g2, balance(v1, v2);
    dw = -lu.solve(g);
    if (!dw.allFinite()) throw numerical_error("Dyson Newton step is not finite");
    const double m = dw.head(2 * n).cwiseAbs().maxCoeff();
    if (m > 2.0) dw *= 2.0 / m;

    double step = 1.0;
    for (int ls = 0;; ++ls) {
      t1 = (v1.array() * (step * dw.head(n)).array().exp()).matrix();
      t2 = (v2.array() * (step * dw.segment(n, n)).array().exp()).matrix();
      evaluate(S, z2, eta, t1, t2, trial);
      const bool ok = trial.defect <= e.defect || trial.defect <= opt.tol;
      if (ok) break;
      if (!fresh) break;
      if (ls >= 30) throw numerical_error("Dyson Newton line search failed");
      step *= 0.5;
    }
    if (!fresh && !(trial.defect <= e.defect || trial.defect <= opt.tol)) {
      need_factor = true;
      continue;
    }
    if (!fresh && trial.defect > 0.25 * e.defect && trial.defect > opt.tol) need_factor = true;
    // Near convergence always confirm with a fresh factorization.
    if (trial.defect <= opt.tol && !fresh) need_factor = true;

    prev_update = last_update;
    last_fresh = fresh;
    last_update = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      last_update = std::max(last_update, std::abs(t1(i) - v1(i)) / v1(i));
      last_update = std::max(last_update, std::abs(t2(i) - v2(i)) / v2(i));
    }
    v1.swap(t1);
    v2.swap(t2);
    std::swap(e, trial);
  }
  throw numerical_error("Dyson Newton iteration hit the iteration cap");
}

long fixed_point(const Mat& S, double z2, double eta, Vec& v1, Vec& v2, const SolverOptions& opt,
                 double& final_update) {
  const double lam = opt.damping;
  if (!(lam > 0.0 && lam <= 1.0)) throw config_error("damping must lie in (0, 1]");
  Eval e;
  double window_start = std::numeric_limits<double>::infinity();
  for (long it = 0; it < opt.max_iter; ++it) {
    evaluate(S, z2, eta, v1, v2, e);
    if (it % opt.window == 0) {
      if (it > 0 && !(e.defect < window_start))
        throw numerical_error("Dyson fixed-point defect did not decrease over a window; adjust damping");
      window_start = e.defect;
    }
    const Vec p1 = (1.0 / (e.a.array() + z2 / e.b.array())).matrix();
    const Vec p2 = (1.0 / (e.b.array() + z2 / e.a.array())).matrix();
    const Vec n1 = (1.0 - lam) * v1 + lam * p1;
    const Vec n2 = (1.0 - lam) * v2 + lam * p2;
    const double upd = std::max(((n1 - v1).array() / v1.array()).abs().maxCoeff(),
                                ((n2 - v2).array() / v2.array()).abs().maxCoeff());
    v1 = n1;
    v2 = n2;
    final_update = upd;
    if (upd <= opt.tol && e.defect <= opt.tol) return it + 1;
  }
  throw numerical_error("Dyson fixed-point iteration hit the iteration cap");
}

void check_eta(double eta) {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw config_error("eta must be positive and finite");
  if (eta < min_supported_eta) throw config_error("eta below the smallest supported value 1e-12");
}

DysonSolution finish(const VarianceProfile& S, cplx z, double eta, Vec v1, Vec v2, long iters, double update) {
  DysonSolution s;
  s.update = update;
  s.z = z;
  s.eta = eta;
  s.u = (v1.array() / ((S.entries.transpose() * v1).array() + eta)).matrix();
  s.rho = (v1.sum() + v2.sum()) / (2.0 * S.n * pi);
  s.residual = dyson_defect(S.entries, z, eta, v1, v2);
  s.v1 = std::move(v1);
  s.v2 = std::move(v2);
  s.iterations = iters;
  if ((s.v1.array() <= 0.0).any() || (s.v2.array() <= 0.0).any())
    throw numerical_error("Dyson solution lost positivity");
  return s;
}

}  // namespace

double dyson_defect(const Mat& S, cplx z, double eta, const Vec& v1, const Vec& v2) {
  Eval e;
  evaluate(S, std::norm(z), eta, v1, v2, e);
  return e.defect;
}

DysonSolution solve_dyson_from(const VarianceProfile& S, cplx z, double eta, const Vec& v1, const Vec& v2,
                               const SolverOptions& opt) {
  check_eta(eta);
  if (v1.size() != S.n || v2.size() != S.n) throw config_error("warm start has the wrong dimension");
  Vec a = v1, b = v2;
  const double z2 = std::norm(z);
  double upd = 0.0;
  const long it = opt.method == SolverMethod::newton ? newton(S.entries, z2, eta, a, b, opt, upd)
                                                     : fixed_point(S.entries, z2, eta, a, b, opt, upd);
  return finish(S, z, eta, std::move(a), std::move(b), it, upd);
}

DysonSolution solve_dyson(const VarianceProfile& S, cplx z, double eta, const SolverOptions& opt) {
  check_eta(eta);
  if (!(opt.ratio > 0.0 && opt.ratio < 1.0)) throw config_error("continuation ratio must lie in (0, 1)");
  std::vector<double> etas;
  for (double e = opt.eta0; e > eta; e *= opt.ratio) etas.push_back(e);
  etas.push_back(eta);
  return solve_dyson_path(S, z, etas, opt).back();
}

std::vector<DysonSolution> solve_dyson_path(const VarianceProfile& S, cplx z, const std::vector<double>& etas,
                                            const SolverOptions& opt) {
  std::vector<DysonSolution> out;
  if (etas.empty()) return out;
  out.reserve(etas.size());
  Vec v1 = Vec::Constant(S.n, 1.0 / (etas.front() + 1.0));
  Vec v2 = v1;
  for (double e : etas) {
    out.push_back(solve_dyson_from(S, z, e, v1, v2, opt));
    v1 = out.back().v1;
    v2 = out.back().v2;
  }
  return out;
}

DysonSolution solve_dyson_blockwise(const VarianceProfile& S, cplx z, double eta, const SolverOptions& opt,
                                    int small) {
  const int m = std::max(2, small + small % 2);
  const bool tileable = S.kind == ProfileKind::flat || (S.kind == ProfileKind::two_block && S.n % 2 == 0);
  if (!tileable || S.n <= m) return solve_dyson(S, z, eta, opt);
  const DysonSolution r = solve_dyson(make_profile(S.kind, m, S.params), z, eta, opt);
  Vec v1(S.n), v2(S.n);
  for (int i = 0; i < S.n; ++i) {
    const int k = static_cast<int>((static_cast<long>(i) * m) / S.n);
    v1(i) = r.v1(k);
    v2(i) = r.v2(k);
  }
  DysonSolution out = finish(S, z, eta, std::move(v1), std::move(v2), r.iterations, r.update);
  if (!(out.residual <= 10.0 * opt.tol)) throw numerical_error("tiled Dyson solution does not solve the full system");
  return out;
}

MdeMatrices assemble_matrices(const DysonSolution& sol) {
  const Eigen::Index n = sol.v1.size();
  const cplx z = sol.z;
  MdeMatrices m;
  m.M = CMat::Zero(2 * n, 2 * n);
  m.U = CMat::Zero(2 * n, 2 * n);
  m.q.resize(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v1 = sol.v1(i), v2 = sol.v2(i), u = sol.u(i);
    m.M(i, i) = cplx(0.0, v1);
    m.M(i + n, i + n) = cplx(0.0, v2);
    m.M(i, i + n) = -z * u;
    m.M(i + n, i) = -std::conj(z) * u;

    const double s = std::sqrt(v1 * v2 / u), su = std::sqrt(u);
    m.U(i, i) = cplx(0.0, s);
    m.U(i + n, i + n) = cplx(0.0, s);
    m.U(i, i + n) = -z * su;
    m.U(i + n, i) = -std::conj(z) * su;

    m.q(i) = std::pow(u * v1 / v2, 0.25);
    m.q(i + n) = std::pow(u * v2 / v1, 0.25);
  }
  return m;
}

CMat spectral_shift(Eigen::Index n, cplx z, double eta) {
  CMat A = CMat::Zero(2 * n, 2 * n);
  A.diagonal().setConstant(cplx(0.0, eta));
  A.topRightCorner(n, n).diagonal().setConstant(z);
  A.bottomLeftCorner(n, n).diagonal().setConstant(std::conj(z));
  return A;
}

double mde_residual(const CMat& M, const VarianceProfile& S, cplx z, double eta) {
  const CMat Minv = M.partialPivLu().inverse();
  if (!Minv.allFinite()) throw numerical_error("M is singular");
  const CMat R = Minv + spectral_shift(S.n, z, eta) + self_energy(S.entries, M);
  return R.cwiseAbs().maxCoeff();
}

DerivativeCheck eta_derivative_check(const VarianceProfile& S, cplx z, double eta, double C, double rho_star,
                                     const SolverOptions& opt) {
  if (eta < min_supported_eta) throw precondition_error("finite-difference step underflows for eta < 1e-12");
  const DysonSolution sol = solve_dyson(S, z, eta, opt);
  const double rho = sol.rho;
  if (rho + eta / rho > rho_star)
    throw precondition_error("(z, eta) is outside the small-rho regime rho + eta/rho <= " +
                             std::to_string(rho_star));
  const double h = eta / 100.0;
  const DysonSolution up = solve_dyson_from(S, z, eta + h, sol.v1, sol.v2, opt);
  const DysonSolution dn = solve_dyson_from(S, z, eta - h, sol.v1, sol.v2, opt);
  const CMat fd = (assemble_matrices(up).M - assemble_matrices(dn).M) / (2.0 * h);
  DerivativeCheck out;
  out.fd_norm = paired_block_norm(fd);
  out.bound = C / (rho * rho + eta / rho);
  out.rho = rho;
  return out;
}

}  // namespace dlab

#include <dysonlab/stability.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace dlab {

double DirectionSet::max() const { return std::max({B, B_star, B_hat, B_hat_star}); }

namespace {

CVec start_vector(Eigen::Index N) {
  CVec x(N);
  for (Eigen::Index k = 0; k < N; ++k)
    x(k) = cplx(1.0 + 0.5 * std::sin(0.7 * k + 0.3), 0.25 * std::cos(1.3 * k));
  return x.normalized();
}

// Eigenvector of A for the (already accurate) eigenvalue mu.
CVec inverse_iteration(const CMat& A, cplx mu, int iters) {
  const Eigen::Index N = A.rows();
  cplx shift = mu;
  for (int attempt = 0; attempt < 4; ++attempt) {
    CMat T = A;
    T.diagonal().array() -= shift;
    Eigen::PartialPivLU<CMat> lu(T);
    CVec x = start_vector(N);
    bool ok = true;
    for (int it = 0; it < iters; ++it) {
      CVec y = lu.solve(x);
      const double ny = y.norm();
      if (!y.allFinite() || !(ny > 0.0)) {
        ok = false;
        break;
      }
      x = y / ny;
    }
    if (ok) return x;
    shift = mu + cplx(1.0, 1.0) * (1e-13 * std::pow(10.0, attempt) * (1.0 + std::abs(mu)));
  }
  throw numerical_error("inverse iteration failed to produce an eigenvector");
}

std::vector<cplx> eigenvalues_of(const CMat& A) {
  std::vector<cplx> ev;
  ev.reserve(A.rows());
  if (A.imag().cwiseAbs().maxCoeff() == 0.0) {
    Eigen::EigenSolver<Mat> es(A.real(), false);
    if (es.info() != Eigen::Success) throw numerical_error("eigensolver failed on the reduced operator");
    for (Eigen::Index k = 0; k < A.rows(); ++k) ev.push_back(es.eigenvalues()(k));
  } else {
    Eigen::ComplexEigenSolver<CMat> es(A, false);
    if (es.info() != Eigen::Success) throw numerical_error("eigensolver failed on the reduced operator");
    for (Eigen::Index k = 0; k < A.rows(); ++k) ev.push_back(es.eigenvalues()(k));
  }
  return ev;
}

CMat paired_inverse(const CMat& P) {
  const Eigen::Index n = P.rows() / 2;
  CMat out = CMat::Zero(2 * n, 2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index j = i + n;
    const cplx a = P(i, i), b = P(i, j), c = P(j, i), d = P(j, j);
    const cplx det = a * d - b * c;
    if (det == 0.0) throw numerical_error("M is singular");
    out(i, i) = d / det;
    out(i, j) = -b / det;
    out(j, i) = -c / det;
    out(j, j) = a / det;
  }
  return out;
}

CMat e_minus(Eigen::Index n) { return e_minus_diag(n).cast<cplx>().asDiagonal(); }

// Scales X by the least-squares factor against T and returns ||c X - T|| in operator norm.
double align(CMat& X, const CMat& T) {
  const cplx c = inner(X, T) / inner(X, X);
  X *= c;
  return paired_block_norm(X - T);
}

}  // namespace

CMat reduce_operator(const MdeMatrices& m, const VarianceProfile& S) {
  const Eigen::Index n = S.n;
  const CMat& M = m.M;
  CVec w11(n), w12(n), w22(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    w11(i) = M(i, i) * M(i, i);
    w12(i) = M(i, i + n) * M(i + n, i);
    w22(i) = M(i + n, i + n) * M(i + n, i + n);
  }
  // W S_blk with W = [[diag w11, diag w12], [diag w12, diag w22]] and S_blk = [[0, S], [S^t, 0]].
  CMat A(2 * n, 2 * n);
  const CMat Sc = S.entries.cast<cplx>();
  const CMat St = S.entries.transpose().cast<cplx>();
  A.topLeftCorner(n, n) = w12.asDiagonal() * St;
  A.topRightCorner(n, n) = w11.asDiagonal() * Sc;
  A.bottomLeftCorner(n, n) = w22.asDiagonal() * St;
  A.bottomRightCorner(n, n) = w12.asDiagonal() * Sc;
  return A;
}

CMat apply_stability(const CMat& M, const Mat& S, const CMat& R) {
  const CVec d = R.diagonal();
  return R - paired_sandwich(M, self_energy_diag(S, d));
}

CMat apply_stability_adjoint(const CMat& M, const Mat& S, const CMat& R) {
  const CMat Ms = M.adjoint();
  const CMat inner_prod = paired_mul_right(paired_mul(Ms, R), Ms);
  return R - self_energy(S, inner_prod);
}

CMat bilinear_A(const CMat& M, const Mat& S, const CMat& R, const CMat& T) {
  const CVec sR = self_energy_diag(S, CVec(R.diagonal()));
  const CVec sT = self_energy_diag(S, CVec(T.diagonal()));
  const CMat inside = sR.asDiagonal() * T + sT.asDiagonal() * R;
  return 0.5 * paired_mul(M, inside);
}

EigenTargets eigen_targets(const MdeMatrices& m, const DysonSolution& sol) {
  const Eigen::Index n = sol.v1.size();
  const double rho = sol.rho;
  const CMat ImM = im_part(m.M);
  const CMat ImMinv = im_part(paired_inverse(m.M));
  const CMat ReM = re_part(m.M);
  const CMat Em = e_minus(n);
  EigenTargets t;
  t.B = ImM / rho - (2.0 * I1 / rho) * paired_mul(paired_mul(ImM, ImMinv), ReM);
  t.B_star = Em * ImM / rho;
  t.B_hat = -ImMinv / rho;
  t.B_hat_star = -(Em * ImMinv) / rho;
  return t;
}

StabilitySpectrum stability_spectrum(const MdeMatrices& m, const DysonSolution& sol, const VarianceProfile& S,
                                     const StabilityOptions& opt) {
  const Eigen::Index n = S.n;
  const CMat& M = m.M;
  const CMat A = reduce_operator(m, S);

  StabilitySpectrum out;
  out.rho = sol.rho;
  out.eta = sol.eta;
  out.regime = sol.rho + sol.eta / sol.rho <= opt.rho_star;

  out.a_spectrum = eigenvalues_of(A);
  std::stable_sort(out.a_spectrum.begin(), out.a_spectrum.end(),
                   [](cplx a, cplx b) { return std::abs(1.0 - a) < std::abs(1.0 - b); });
  const cplx mu_a = out.a_spectrum[0], mu_b = out.a_spectrum[1];
  out.gap_third = std::min(1.0, std::abs(1.0 - out.a_spectrum[2]));

  const CMat AH = A.adjoint();
  auto right = [&](cplx mu) {
    const CVec d = inverse_iteration(A, mu, opt.inverse_iterations);
    if (std::abs(mu) < 1e-14) return CMat(d.asDiagonal());
    return CMat(paired_sandwich(M, self_energy_diag(S.entries, d)) / mu);
  };
  auto left = [&](cplx mu) {
    return CMat(inverse_iteration(AH, std::conj(mu), opt.inverse_iterations).asDiagonal());
  };
  CMat Ba = right(mu_a), Bb = right(mu_b);
  CMat La = left(mu_a), Lb = left(mu_b);

  const CMat Em = e_minus(n);
  const double ea = std::abs(inner(Em, Ba)) / hs_norm(Ba);
  const double eb = std::abs(inner(Em, Bb)) / hs_norm(Bb);
  cplx beta = 1.0 - mu_a, beta_star = 1.0 - mu_b;
  if (ea > eb) {
    std::swap(Ba, Bb);
    std::swap(La, Lb);
    std::swap(beta, beta_star);
  }
  out.beta = beta;
  out.beta_star = beta_star;
  out.B = std::move(Ba);
  out.B_star = std::move(Bb);
  out.B_hat = std::move(La);
  out.B_hat_star = std::move(Lb);

  const EigenTargets t = eigen_targets(m, sol);
  out.alignment.B = align(out.B, t.B);
  out.alignment.B_star = align(out.B_star, t.B_star);
  out.alignment.B_hat = align(out.B_hat, t.B_hat);
  out.alignment.B_hat_star = align(out.B_hat_star, t.B_hat_star);

  out.d = out.B.diagonal();
  out.d_star = out.B_star.diagonal();
  out.l = out.B_hat.diagonal();
  out.l_star = out.B_hat_star.diagonal();

  out.overlap_B = inner(out.B_hat, out.B);
  out.overlap_B_star = inner(out.B_hat_star, out.B_star);
  out.e_minus_B = inner(Em, out.B);
  out.e_minus_B_star = inner(Em, out.B_star);

  const CMat P = paired_mul(im_part(M), im_part(paired_inverse(M)));
  out.psi = avg(paired_mul(P, P)).real() / std::pow(sol.rho, 4);

  auto rel = [](const CMat& r, const CMat& X) { return paired_block_norm(r) / paired_block_norm(X); };
  out.defect.B = rel(apply_stability(M, S.entries, out.B) - out.beta * out.B, out.B);
  out.defect.B_star = rel(apply_stability(M, S.entries, out.B_star) - out.beta_star * out.B_star, out.B_star);
  out.defect.B_hat =
      rel(apply_stability_adjoint(M, S.entries, out.B_hat) - std::conj(out.beta) * out.B_hat, out.B_hat);
  out.defect.B_hat_star =
      rel(apply_stability_adjoint(M, S.entries, out.B_hat_star) - std::conj(out.beta_star) * out.B_hat_star,
          out.B_hat_star);

  out.degenerate = std::abs(out.beta - out.beta_star) < opt.degeneracy * sol.rho * sol.rho;
  out.isolated = out.gap_third >= 10.0 * std::abs(out.beta);
  return out;
}

FOperatorGap f_operator_gap(const DysonSolution& sol, const VarianceProfile& S) {
  const Eigen::Index n = S.n;
  const Vec left = (sol.u.array() * sol.v1.array() / sol.v2.array()).sqrt().matrix();
  const Vec right = (sol.u.array() * sol.v2.array() / sol.v1.array()).sqrt().matrix();
  const Mat F = left.asDiagonal() * S.entries * right.asDiagonal();
  Mat big = Mat::Zero(2 * n, 2 * n);
  big.topRightCorner(n, n) = F;
  big.bottomLeftCorner(n, n) = F.transpose();
  Eigen::SelfAdjointEigenSolver<Mat> es(big, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw numerical_error("symmetric eigensolver failed on F");
  const Vec& ev = es.eigenvalues();  // increasing
  const Eigen::Index N = ev.size();
  FOperatorGap g;
  g.top = ev(N - 1);
  g.second = ev(N - 2);
  g.third = ev(N - 3);
  g.gap_rel = 1.0 - g.top;
  for (Eigen::Index k = 0; k < N; ++k) g.asymmetry = std::max(g.asymmetry, std::abs(ev(k) + ev(N - 1 - k)));
  g.symmetric = g.asymmetry <= 1e-10 * std::max(1.0, g.top);
  return g;
}

CMat project_Q(const StabilitySpectrum& spec, const CMat& T) {
  const cplx c = inner(spec.B_hat, T) / spec.overlap_B;
  const cplx cs = inner(spec.B_hat_star, T) / spec.overlap_B_star;
  return T - c * spec.B - cs * spec.B_star;
}

BinvQResult apply_Binv_Q(const StabilitySpectrum& spec, const MdeMatrices& m, const VarianceProfile& S,
                         const CMat& T) {
  if (spec.degenerate) throw precondition_error("B^-1 Q needs beta and beta_* to be distinct");
  const CMat QT = project_Q(spec, T);
  const CVec y = QT.diagonal();

  // (1 - A) restricted to the complement of the two unstable directions; the deflation sends
  // their eigenvalues to 1 without touching the rest.
  CMat K = -reduce_operator(m, S);
  K.diagonal().array() += 1.0;
  const cplx pa = (spec.l.adjoint() * spec.d).value();
  const cplx pb = (spec.l_star.adjoint() * spec.d_star).value();
  K += ((1.0 - spec.beta) / pa) * spec.d * spec.l.adjoint();
  K += ((1.0 - spec.beta_star) / pb) * spec.d_star * spec.l_star.adjoint();

  Eigen::PartialPivLU<CMat> lu(K);
  BinvQResult r;
  r.condition = 1.0 / lu.rcond();
  r.ill_conditioned = !(r.condition <= 1e12);
  CVec x = lu.solve(y);
  x -= spec.d * ((spec.l.adjoint() * x).value() / pa);
  x -= spec.d_star * ((spec.l_star.adjoint() * x).value() / pb);

  r.X = QT + paired_sandwich(m.M, self_energy_diag(S.entries, x));
  const double tn = hs_norm(T);
  r.defect = tn > 0.0 ? hs_norm(apply_stability(m.M, S.entries, r.X) - QT) / tn : 0.0;
  return r;
}

CubicCoefficients cubic_coefficients(const StabilitySpectrum& spec, const MdeMatrices& m, const VarianceProfile& S,
                                     const DysonSolution& sol, const StabilityOptions& opt) {
  if (sol.rho + sol.eta / sol.rho > opt.rho_star)
    throw precondition_error("cubic coefficients need the small-rho regime rho + eta/rho <= rho_star");
  const CMat& M = m.M;
  const Mat& Se = S.entries;
  const CMat Em = e_minus(S.n);

  const CMat ABB = bilinear_A(M, Se, spec.B, spec.B);
  const CMat Y2 = apply_Binv_Q(spec, m, S, ABB).X;

  CubicCoefficients c;
  c.a_B_Bstar = inner(spec.B_hat, bilinear_A(M, Se, spec.B, spec.B_star));
  c.e_minus_Y2 = inner(Em, Y2);
  c.mu3 = 2.0 * inner(spec.B_hat, bilinear_A(M, Se, spec.B, Y2)) -
          2.0 * c.a_B_Bstar * c.e_minus_Y2 / spec.e_minus_B_star;
  c.mu2 = inner(spec.B_hat, ABB);
  c.mu1 = -spec.beta * spec.overlap_B;
  c.mu0 = 0.0;
  c.xi2 = c.mu2 / c.mu3;
  c.xi1 = c.mu1 / c.mu3;

  const double z2 = std::norm(sol.z);
  c.xi2_tilde = std::sqrt(std::abs(1.0 - z2)) + std::cbrt(sol.eta);
  c.xi1_tilde = c.xi2_tilde * c.xi2_tilde;
  c.xi2_over_rho = std::abs(c.xi2) / sol.rho;
  c.xi1_over_scale = std::abs(c.xi1) / (sol.eta / sol.rho + sol.rho * sol.rho);
  return c;
}

CubicXTerms cubic_x_terms(const StabilitySpectrum& spec, const MdeMatrices& m, const VarianceProfile& S,
                          const CMat& X) {
  const CMat& M = m.M;
  const Mat& Se = S.entries;
  const BinvQResult z = apply_Binv_Q(spec, m, S, X);
  const CMat& Z = z.X;
  CubicXTerms t;
  t.binvq_defect = z.defect;
  t.mu1_x = -2.0 * inner(spec.B_hat, bilinear_A(M, Se, spec.B, Z)) +
            2.0 * spec.e_minus_B / spec.e_minus_B_star * inner(spec.B_hat, bilinear_A(M, Se, Z, spec.B_star));
  t.mu0 = inner(spec.B_hat, CMat(bilinear_A(M, Se, Z, Z) - X));
  return t;
}

PerturbationCheck perturbation_second_order_check(const CMat& K, const CMat& D, const std::vector<double>& deltas) {
  const std::vector<cplx> ev = eigenvalues_of(K);
  const cplx hint = *std::max_element(ev.begin(), ev.end(), [](cplx a, cplx b) { return a.real() < b.real(); });
  return perturbation_second_order_check(K, D, deltas, hint);
}

PerturbationCheck perturbation_second_order_check(const CMat& K, const CMat& D, const std::vector<double>& deltas,
                                                  cplx kappa_hint) {
  if (K.rows() != K.cols() || D.rows() != K.rows() || D.cols() != K.cols())
    throw config_error("K and D must be square matrices of the same size");
  const Eigen::Index N = K.rows();
  const std::vector<cplx> ev = eigenvalues_of(K);
  const cplx kappa =
      *std::min_element(ev.begin(), ev.end(), [&](cplx a, cplx b) { return std::abs(a - kappa_hint) < std::abs(b - kappa_hint); });

  const CVec r = inverse_iteration(K, kappa, 4);
  const CVec l = inverse_iteration(K.adjoint(), std::conj(kappa), 4);
  const cplx lr = l.dot(r);  // l^H r
  auto Q = [&](const CVec& y) { return CVec(y - r * (l.dot(y) / lr)); };

  // (K - kappa)^-1 Q through the bordered system [[K - kappa, r], [l^H, 0]].
  CMat bord = CMat::Zero(N + 1, N + 1);
  bord.topLeftCorner(N, N) = K;
  bord.topLeftCorner(N, N).diagonal().array() -= kappa;
  bord.col(N).head(N) = r;
  bord.row(N).head(N) = l.adjoint();
  Eigen::PartialPivLU<CMat> blu(bord);
  auto R1 = [&](const CVec& y) {
    CVec rhs = CVec::Zero(N + 1);
    rhs.head(N) = Q(y);
    return CVec(blu.solve(rhs).head(N));
  };

  std::vector<std::size_t> order(deltas.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return std::abs(deltas[a]) < std::abs(deltas[b]); });

  PerturbationCheck out;
  out.kappa = kappa;
  out.deltas = deltas;
  out.residuals.assign(deltas.size(), 0.0);
  cplx prev = kappa;
  for (std::size_t idx : order) {
    const double delta = deltas[idx];
    const CMat Dd = delta * D;
    const CMat L_op = K + Dd;
    std::vector<cplx> pev = eigenvalues_of(L_op);
    std::sort(pev.begin(), pev.end(), [&](cplx a, cplx b) { return std::abs(a - prev) < std::abs(b - prev); });
    if (pev.size() > 1 && std::abs(pev[1] - prev) <= 2.0 * std::abs(pev[0] - prev) && std::abs(pev[1] - pev[0]) > 1e-14)
      throw numerical_error("eigenvalue tracking failed in the perturbation study");
    const cplx lambda = pev[0];
    prev = lambda;

    const CVec Lr = inverse_iteration(L_op, lambda, 4);
    const CVec Ll = inverse_iteration(L_op.adjoint(), std::conj(lambda), 4);
    const CVec Kr = r * (l.dot(Lr) / lr);
    const CVec Kl = l * (r.dot(Ll) / std::conj(lr));

    const cplx lhs = lambda * Ll.dot(Lr);
    const CVec DK = Dd * Kr;
    const CVec x2 = R1(R1(DK));
    const CVec w = 2.0 * kappa * x2 - K * x2;
    const cplx rhs = kappa * Kl.dot(Kr) + Kl.dot(DK) + Kl.dot(Dd * w);
    out.residuals[idx] = std::abs(lhs - rhs);
  }

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int k = 0;
  bool any = false;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (out.residuals[i] > 1e-14) any = true;
    if (!(out.residuals[i] > 0.0)) continue;
    const double lx = std::log(std::abs(deltas[i])), ly = std::log(out.residuals[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++k;
  }
  out.slope = (any && k >= 2) ? (k * sxy - sx * sy) / (k * sxx - sx * sx) : std::numeric_limits<double>::quiet_NaN();
  return out;
}

}  // namespace dlab

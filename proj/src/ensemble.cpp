#include <dysonlab/ensemble.hpp>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>

namespace dlab {

std::string to_string(Distribution d) {
  switch (d) {
    case Distribution::complex_gaussian: return "complex_gaussian";
    case Distribution::real_gaussian: return "real_gaussian";
    case Distribution::rademacher: return "rademacher";
  }
  return "?";
}

Distribution distribution_from_string(const std::string& s) {
  if (s == "complex_gaussian") return Distribution::complex_gaussian;
  if (s == "real_gaussian") return Distribution::real_gaussian;
  if (s == "rademacher") return Distribution::rademacher;
  throw config_error("unknown distribution '" + s + "'");
}

std::string to_string(MatrixHook h) {
  switch (h) {
    case MatrixHook::none: return "none";
    case MatrixHook::zero: return "zero";
    case MatrixHook::permutation: return "permutation";
    case MatrixHook::localized: return "localized";
  }
  return "?";
}

MatrixHook matrix_hook_from_string(const std::string& s) {
  if (s == "none") return MatrixHook::none;
  if (s == "zero") return MatrixHook::zero;
  if (s == "permutation") return MatrixHook::permutation;
  if (s == "localized") return MatrixHook::localized;
  throw config_error("unknown matrix hook '" + s + "'");
}

namespace {

// SplitMix64 finalizer
std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t counter_bits(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
  return mix(mix(mix(seed) ^ stream) ^ counter);
}

double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
  return static_cast<double>((counter_bits(seed, stream, counter) >> 11) + 1) * 0x1.0p-53;
}

namespace {

// Box-Muller pair from the two uniforms at counters 2e and 2e+1.
std::pair<double, double> normal_pair(std::uint64_t seed, std::uint64_t stream, std::uint64_t e) {
  const double u1 = counter_uniform(seed, stream, 2 * e);
  const double u2 = counter_uniform(seed, stream, 2 * e + 1);
  const double r = std::sqrt(-2.0 * std::log(u1));
  return {r * std::cos(2.0 * pi * u2), r * std::sin(2.0 * pi * u2)};
}

}  // namespace

CMat sample_matrix(const SampleSpec& spec) {
  const int n = spec.profile.n;
  if (n < 1 || spec.profile.entries.rows() != n || spec.profile.entries.cols() != n)
    throw config_error("sample_matrix needs a square variance profile");
  CMat X = CMat::Zero(n, n);
  switch (spec.hook) {
    case MatrixHook::zero: return X;
    case MatrixHook::permutation:
      for (int i = 0; i < n; ++i) X(i, (i + 1) % n) = 1.0;
      return X;
    case MatrixHook::localized:
      X.setIdentity();
      X(0, 0) = 2.0;
      return X;
    case MatrixHook::none: break;
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const std::uint64_t e = static_cast<std::uint64_t>(i) * n + j;
      const double sd = std::sqrt(spec.profile.entries(i, j));
      switch (spec.dist) {
        case Distribution::complex_gaussian: {
          const auto [a, b] = normal_pair(spec.seed, spec.trial_index, e);
          X(i, j) = cplx(a, b) * (sd / std::sqrt(2.0));
          break;
        }
        case Distribution::real_gaussian:
          X(i, j) = normal_pair(spec.seed, spec.trial_index, e).first * sd;
          break;
        case Distribution::rademacher:
          X(i, j) = (counter_bits(spec.seed, spec.trial_index, 2 * e) >> 63) ? sd : -sd;
          break;
      }
    }
  }
  return X;
}

HermitizedSystem hermitize(const CMat& X, cplx z, bool vectors) {
  if (X.rows() != X.cols() || X.rows() == 0) throw config_error("hermitize needs a nonempty square matrix");
  const Eigen::Index n = X.rows();
  HermitizedSystem sys;
  sys.z = z;
  sys.H = CMat::Zero(2 * n, 2 * n);
  CMat Y = X;
  Y.diagonal().array() -= z;
  sys.H.topRightCorner(n, n) = Y;
  sys.H.bottomLeftCorner(n, n) = Y.adjoint();
  Eigen::SelfAdjointEigenSolver<CMat> es(sys.H, vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw numerical_error("Hermitian eigensolver failed");
  sys.eigenvalues = es.eigenvalues();
  if (vectors) sys.eigenvectors = es.eigenvectors();
  return sys;
}

CMat resolvent(const HermitizedSystem& sys, double eta) {
  if (!(eta > 0.0)) throw config_error("resolvent needs eta > 0");
  if (sys.eigenvectors.size() == 0) throw config_error("resolvent needs eigenvectors");
  CVec w(sys.eigenvalues.size());
  for (Eigen::Index k = 0; k < w.size(); ++k) w(k) = 1.0 / cplx(sys.eigenvalues(k), -eta);
  const CMat VW = sys.eigenvectors * w.asDiagonal();
  return VW * sys.eigenvectors.adjoint();
}

double chiral_pairing_defect(const HermitizedSystem& sys) {
  const Eigen::Index m = sys.eigenvalues.size();
  double d = 0.0;
  for (Eigen::Index k = 0; k < m; ++k) d = std::max(d, std::abs(sys.eigenvalues(k) + sys.eigenvalues(m - 1 - k)));
  return d;
}

namespace {

CVec random_unit(Eigen::Index dim, std::uint64_t seed, std::uint64_t stream) {
  CVec x(dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    const auto [a, b] = normal_pair(seed, stream, static_cast<std::uint64_t>(i));
    x(i) = cplx(a, b);
  }
  return x / x.norm();
}

CMat paired_from_blocks(const CVec& d11, const CVec& d12, const CVec& d21, const CVec& d22) {
  const Eigen::Index n = d11.size();
  CMat R = CMat::Zero(2 * n, 2 * n);
  R.topLeftCorner(n, n).diagonal() = d11;
  R.topRightCorner(n, n).diagonal() = d12;
  R.bottomLeftCorner(n, n).diagonal() = d21;
  R.bottomRightCorner(n, n).diagonal() = d22;
  return R;
}

CVec random_phases(Eigen::Index n, std::uint64_t seed, std::uint64_t stream) {
  CVec p(n);
  for (Eigen::Index i = 0; i < n; ++i) p(i) = std::polar(1.0, 2.0 * pi * counter_uniform(seed, stream, i));
  return p;
}

CVec random_signs(Eigen::Index n, std::uint64_t seed, std::uint64_t stream) {
  CVec s(n);
  for (Eigen::Index i = 0; i < n; ++i) s(i) = (counter_bits(seed, stream, i) >> 63) ? 1.0 : -1.0;
  return s;
}

// <R X> for paired R, touching only the four block diagonals of X.
cplx paired_trace(const CMat& R, const CMat& X) {
  const Eigen::Index n = R.rows() / 2;
  cplx s = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    s += R(i, i) * X(i, i) + R(i, i + n) * X(i + n, i) + R(i + n, i) * X(i, i + n) + R(i + n, i + n) * X(i + n, i + n);
  }
  return s / static_cast<double>(2 * n);
}

}  // namespace

Probes default_probes(Eigen::Index n, std::uint64_t seed) {
  Probes p;
  std::vector<CVec> xs;
  CVec e = CVec::Zero(2 * n);
  e(0) = 1.0;
  xs.push_back(e);
  e.setZero();
  e(n) = 1.0;
  xs.push_back(e);
  xs.push_back(CVec::Ones(2 * n) / std::sqrt(2.0 * n));
  xs.push_back(random_unit(2 * n, seed, 1));
  xs.push_back(random_unit(2 * n, seed, 2));
  for (const auto& x : xs)
    for (const auto& y : xs) p.vectors.emplace_back(x, y);

  const CVec one = CVec::Ones(n), zero = CVec::Zero(n);
  p.matrices.push_back(paired_from_blocks(one, zero, zero, one));
  p.matrices.push_back(paired_from_blocks(one, zero, zero, -one));
  p.matrices.push_back(paired_from_blocks(zero, one, one, zero));
  const CVec s = random_signs(2 * n, seed, 3);
  p.matrices.push_back(paired_from_blocks(s.head(n), zero, zero, s.tail(n)));
  return p;
}

ResolventError resolvent_error(const CMat& G, const CMat& M, double eta, const Probes& probes) {
  if (!(eta > 0.0)) throw config_error("resolvent_error needs eta > 0");
  const Eigen::Index m = G.rows();
  const Eigen::Index n = m / 2;
  ResolventError r;
  const CMat Delta = G - M;

  if (!probes.vectors.empty()) {
    // Distinct right-hand vectors are shared between pairs; apply Delta once per vector.
    std::vector<CVec> ys;
    std::vector<int> idx;
    for (const auto& [x, y] : probes.vectors) {
      int k = -1;
      for (std::size_t j = 0; j < ys.size(); ++j)
        if (ys[j].size() == y.size() && ys[j] == y) k = static_cast<int>(j);
      if (k < 0) {
        ys.push_back(y);
        k = static_cast<int>(ys.size()) - 1;
      }
      idx.push_back(k);
    }
    CMat Y(m, static_cast<Eigen::Index>(ys.size()));
    for (std::size_t j = 0; j < ys.size(); ++j) Y.col(static_cast<Eigen::Index>(j)) = ys[j];
    const CMat DY = Delta * Y;
    for (std::size_t p = 0; p < probes.vectors.size(); ++p)
      r.iso_max = std::max(r.iso_max, std::abs(probes.vectors[p].first.dot(DY.col(idx[p]))));
  }
  for (const CMat& R : probes.matrices) {
    const cplx t = R.transpose().cwiseProduct(Delta).sum() / static_cast<double>(m);
    r.avg_max = std::max(r.avg_max, std::abs(t));
  }

  cplx em = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) em += G(i, i) - G(i + n, i + n);
  r.e_minus_trace = std::abs(em) / static_cast<double>(m);
  r.trace_error = std::abs(avg(Delta));

  const Vec rows = G.rowwise().squaredNorm();
  for (Eigen::Index a = 0; a < m; ++a) {
    const double rhs = G(a, a).imag() / eta;
    r.ward = std::max(r.ward, std::abs(rows(a) - rhs) / rhs);
  }
  return r;
}

ResolventError resolvent_error(const HermitizedSystem& sys, const CMat& M, double eta, const Probes& probes) {
  return resolvent_error(resolvent(sys, eta), M, eta, probes);
}

CMat error_matrix(const CMat& G, const Mat& S, cplx z, double eta) {
  const Eigen::Index n = S.rows();
  if (G.rows() != 2 * n || G.cols() != 2 * n) throw config_error("error_matrix: G and S sizes disagree");
  CMat P = spectral_shift(n, z, eta);
  CVec dg = G.diagonal();
  P.diagonal() += self_energy_diag(S, dg);
  CMat D = paired_mul(P, G);
  D.diagonal().array() += 1.0;
  return D;
}

ErrorMatrixStats error_matrix_D(const CMat& G, const Mat& S, cplx z, double eta, std::uint64_t panel_seed) {
  const Eigen::Index n = S.rows();
  const CMat D = error_matrix(G, S, z, eta);
  const CVec one = CVec::Ones(n), zero = CVec::Zero(n);
  const CVec ph = random_phases(n, panel_seed, 1);
  const CVec s = random_signs(2 * n, panel_seed, 2);

  const std::vector<CMat> generic = {
      paired_from_blocks(one, zero, zero, one),
      paired_from_blocks(one, zero, zero, -one),
      paired_from_blocks(s.head(n), zero, zero, s.tail(n)),
      paired_from_blocks(ph, zero, zero, ph.conjugate()),
  };
  const std::vector<CMat> offdiag = {
      paired_from_blocks(zero, one, one, zero),
      paired_from_blocks(zero, I1 * one, -I1 * one, zero),
      paired_from_blocks(zero, ph, ph.conjugate(), zero),
      paired_from_blocks(zero, s.head(n), s.tail(n), zero),
  };
  ErrorMatrixStats st;
  for (const CMat& R : generic) st.generic.push_back(std::abs(paired_trace(R, D)));
  for (const CMat& R : offdiag) st.offdiag.push_back(std::abs(paired_trace(R, D)));
  st.generic_median = median(st.generic);
  st.offdiag_median = median(st.offdiag);
  st.offdiag_gain = st.generic_median > 0.0 ? st.offdiag_median / st.generic_median
                                            : std::numeric_limits<double>::quiet_NaN();
  return st;
}

ErrorMatrixStats error_matrix_D(const HermitizedSystem& sys, const Mat& S, double eta, std::uint64_t panel_seed) {
  return error_matrix_D(resolvent(sys, eta), S, sys.z, eta, panel_seed);
}

long eigenvalue_count_near_zero(const HermitizedSystem& sys, double eta) {
  long c = 0;
  for (Eigen::Index k = 0; k < sys.eigenvalues.size(); ++k)
    if (std::abs(sys.eigenvalues(k)) <= eta) ++c;
  return c;
}

double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(v.size() - 1, lo + 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace dlab

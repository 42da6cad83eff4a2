#include <dysonlab/linalg.hpp>

#include <algorithm>
#include <cmath>

namespace dlab {

double paired_block_norm(const CMat& X) {
  const Eigen::Index n = X.rows() / 2;
  double best = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const cplx a = X(i, i), b = X(i, i + n), c = X(i + n, i), d = X(i + n, i + n);
    const double f = std::norm(a) + std::norm(b) + std::norm(c) + std::norm(d);
    const double det = std::abs(a * d - b * c);
    const double disc = std::max(0.0, f * f - 4.0 * det * det);
    best = std::max(best, std::sqrt(0.5 * (f + std::sqrt(disc))));
  }
  return best;
}

CMat paired_mul(const CMat& P, const CMat& X) {
  const Eigen::Index n = P.rows() / 2;
  const CVec p11 = P.topLeftCorner(n, n).diagonal(), p12 = P.topRightCorner(n, n).diagonal();
  const CVec p21 = P.bottomLeftCorner(n, n).diagonal(), p22 = P.bottomRightCorner(n, n).diagonal();
  CMat out(2 * n, X.cols());
  out.topRows(n) = p11.asDiagonal() * X.topRows(n) + p12.asDiagonal() * X.bottomRows(n);
  out.bottomRows(n) = p21.asDiagonal() * X.topRows(n) + p22.asDiagonal() * X.bottomRows(n);
  return out;
}

CMat paired_mul_right(const CMat& X, const CMat& P) {
  const Eigen::Index n = P.rows() / 2;
  const CVec p11 = P.topLeftCorner(n, n).diagonal(), p12 = P.topRightCorner(n, n).diagonal();
  const CVec p21 = P.bottomLeftCorner(n, n).diagonal(), p22 = P.bottomRightCorner(n, n).diagonal();
  CMat out(X.rows(), 2 * n);
  out.leftCols(n) = X.leftCols(n) * p11.asDiagonal() + X.rightCols(n) * p21.asDiagonal();
  out.rightCols(n) = X.leftCols(n) * p12.asDiagonal() + X.rightCols(n) * p22.asDiagonal();
  return out;
}

CMat paired_sandwich(const CMat& P, const CVec& s) {
  const Eigen::Index n = P.rows() / 2;
  CMat out = CMat::Zero(2 * n, 2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index j = i + n;
    const cplx a = P(i, i), b = P(i, j), c = P(j, i), d = P(j, j);
    const cplx s1 = s(i), s2 = s(j);
    out(i, i) = a * s1 * a + b * s2 * c;
    out(i, j) = a * s1 * b + b * s2 * d;
    out(j, i) = c * s1 * a + d * s2 * c;
    out(j, j) = c * s1 * b + d * s2 * d;
  }
  return out;
}

}  // namespace dlab

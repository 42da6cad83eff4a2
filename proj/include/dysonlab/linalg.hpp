#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>

namespace dlab {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXd;
using CMat = Eigen::MatrixXcd;

inline constexpr double pi = 3.14159265358979323846;
inline constexpr cplx I1{0.0, 1.0};

// Bad user input: unknown keys, out-of-range parameters, malformed profiles.
struct config_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A requested point lies outside the regime where an operation is defined.
struct precondition_error : std::domain_error {
  using std::domain_error::domain_error;
};

// Solver divergence, singular matrices, non-finite values.
struct numerical_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// <V, W> = Tr(V* W) / dim
template <class A, class B>
auto inner(const Eigen::MatrixBase<A>& V, const Eigen::MatrixBase<B>& W) {
  using S = typename Eigen::ScalarBinaryOpTraits<typename A::Scalar, typename B::Scalar>::ReturnType;
  S s = V.conjugate().cwiseProduct(W).sum();
  return s / static_cast<typename Eigen::NumTraits<S>::Real>(V.rows());
}

// <R> = Tr(R) / dim
template <class A>
typename A::Scalar avg(const Eigen::MatrixBase<A>& R) {
  return R.trace() / static_cast<typename Eigen::NumTraits<typename A::Scalar>::Real>(R.rows());
}

// Hermitian parts: X = Re X + i Im X
template <class A>
CMat im_part(const Eigen::MatrixBase<A>& X) {
  return (X - X.adjoint()) / cplx(0.0, 2.0);
}

template <class A>
CMat re_part(const Eigen::MatrixBase<A>& X) {
  return (X + X.adjoint()) / 2.0;
}

// Normalized Hilbert-Schmidt norm, matching inner().
template <class A>
double hs_norm(const Eigen::MatrixBase<A>& X) {
  return std::sqrt(X.squaredNorm() / static_cast<double>(X.rows()));
}

// E_- = diag(I, -I) of size 2n
inline Vec e_minus_diag(Eigen::Index n) {
  Vec d(2 * n);
  d.head(n).setOnes();
  d.tail(n).setConstant(-1.0);
  return d;
}

// The self-energy acting on the diagonal d = (r1, r2) of a 2n x 2n matrix:
// returns the diagonal (S r2, S^t r1) of S[R].
template <class Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>
self_energy_diag(const Mat& S, const Eigen::MatrixBase<Derived>& d) {
  const Eigen::Index n = S.rows();
  Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> out(2 * n);
  out.head(n).noalias() = S * d.tail(n);
  out.tail(n).noalias() = S.transpose() * d.head(n);
  return out;
}

template <class Derived>
CMat self_energy(const Mat& S, const Eigen::MatrixBase<Derived>& R) {
  CVec d = R.diagonal();
  return self_energy_diag(S, d).asDiagonal();
}

// "Paired" matrices: 2n x 2n with four diagonal n x n blocks (M, U, Q, B and their relatives).

// Spectral norm of a paired matrix.
double paired_block_norm(const CMat& X);

// P X and X P for paired P and arbitrary X, in O(n^2).
CMat paired_mul(const CMat& P, const CMat& X);
CMat paired_mul_right(const CMat& X, const CMat& P);

// P diag(s) P for paired P.
CMat paired_sandwich(const CMat& P, const CVec& s);

}  // namespace dlab

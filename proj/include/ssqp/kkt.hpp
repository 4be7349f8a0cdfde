#ifndef SSQP_KKT_HPP
#define SSQP_KKT_HPP

// Null-space solution of the SQP subproblem
//
//   [ H  J^T ] [ d ]     [ g ]
//   [ J   0  ] [ y ] = - [ c ]
//
// with J = grad c(x)^T (m x n, full row rank). The step is split as
// d = u + v, u in null(J), v in range(J^T).

#include <algorithm>
#include <sstream>

#include "ssqp/linalg.hpp"

namespace ssqp {

template <typename Scalar>
struct KktInputs {
  ConstMatRef<Scalar> hessian;      // H, n x n symmetric
  ConstMatRef<Scalar> jacobian;     // J, m x n
  ConstVecRef<Scalar> gradient;     // g, n
  ConstVecRef<Scalar> constraints;  // c, m
};

template <typename Scalar>
struct KktSolution {
  Vector<Scalar> d;
  Vector<Scalar> y;
  Vector<Scalar> u;  // tangential part, J u = 0
  Vector<Scalar> v;  // normal part, v in range(J^T)
  Matrix<Scalar> null_basis;  // Z, orthonormal, n x (n - m)
};

namespace kkt_tol {
// sigma_min(J) >= rank_rel * max(1, sigma_max(J)) declares full row rank.
inline constexpr double rank_rel = 1e-10;
inline constexpr double symmetry_rel = 1e-12;
}  // namespace kkt_tol

/// Orthogonal factorization J^T = [Q1 Q2] [R; 0] with the rank test applied.
/// Q2 is an orthonormal null-space basis of J; Q1 R^{-T} and R^{-1} Q1^T give
/// the pseudoinverse products used throughout.
template <typename Scalar>
class JacobianFactorization {
 public:
  template <typename Derived>
  explicit JacobianFactorization(const Eigen::MatrixBase<Derived>& jacobian)
      : m_(jacobian.rows()), n_(jacobian.cols()) {
    if (m_ > n_) {
      throw RankError("constraint Jacobian has more rows (" + std::to_string(m_) +
                      ") than columns (" + std::to_string(n_) + ")");
    }
    if (!jacobian.allFinite()) throw EvaluationError("constraint Jacobian is not finite");
    Eigen::HouseholderQR<Matrix<Scalar>> qr(jacobian.transpose());
    const Matrix<Scalar> q = qr.householderQ() * Matrix<Scalar>::Identity(n_, n_);
    q1_ = q.leftCols(m_);
    z_ = q.rightCols(n_ - m_);
    r_ = qr.matrixQR().topRows(m_).template triangularView<Eigen::Upper>();

    if (m_ > 0) {
      Eigen::JacobiSVD<Matrix<Scalar>> svd(r_);
      const auto& s = svd.singularValues();
      sigma_max_ = s(0);
      sigma_min_ = s(m_ - 1);
      using std::max;
      if (!(sigma_min_ >= Scalar(kkt_tol::rank_rel) * max(Scalar(1), sigma_max_))) {
        std::ostringstream os;
        os << "constraint Jacobian is rank deficient (sigma_min = " << sigma_min_
           << ", sigma_max = " << sigma_max_ << ")";
        throw RankError(os.str());
      }
    }
  }

  Index rows() const { return m_; }
  Index cols() const { return n_; }
  const Matrix<Scalar>& null_basis() const { return z_; }
  Scalar sigma_min() const { return sigma_min_; }
  Scalar sigma_max() const { return sigma_max_; }

  /// (J J^T)^{-1} J w
  Vector<Scalar> pinv(const ConstVecRef<Scalar>& w) const {
    Vector<Scalar> t = q1_.transpose() * w;
    r_.template triangularView<Eigen::Upper>().solveInPlace(t);
    return t;
  }

  /// J^T (J J^T)^{-1} c
  Vector<Scalar> pinv_transpose(const ConstVecRef<Scalar>& c) const {
    Vector<Scalar> t = c;
    r_.transpose().template triangularView<Eigen::Lower>().solveInPlace(t);
    return q1_ * t;
  }

  /// (J J^T)^{-1} J as a dense m x n matrix.
  Matrix<Scalar> pinv_matrix() const {
    Matrix<Scalar> t = q1_.transpose();
    r_.template triangularView<Eigen::Upper>().solveInPlace(t);
    return t;
  }

 private:
  Index m_;
  Index n_;
  Matrix<Scalar> q1_;
  Matrix<Scalar> z_;
  Matrix<Scalar> r_;
  Scalar sigma_min_ = Scalar(0);
  Scalar sigma_max_ = Scalar(0);
};

namespace detail {

template <typename Scalar>
void check_inputs(const KktInputs<Scalar>& in) {
  const Index n = in.hessian.rows();
  const Index m = in.jacobian.rows();
  if (in.hessian.cols() != n || in.jacobian.cols() != n || in.gradient.size() != n ||
      in.constraints.size() != m) {
    throw std::invalid_argument("KKT inputs have inconsistent dimensions");
  }
  if (!in.hessian.allFinite() || !in.gradient.allFinite() || !in.constraints.allFinite()) {
    throw EvaluationError("KKT inputs contain non-finite entries");
  }
  using std::max;
  const Scalar scale = max(Scalar(1), in.hessian.norm());
  if ((in.hessian - in.hessian.transpose()).norm() > Scalar(kkt_tol::symmetry_rel) * scale) {
    throw std::invalid_argument("Hessian approximation is not symmetric");
  }
}

// Factor Z^T H Z; throws CurvatureError when a pivot is not positive.
template <typename Scalar>
Eigen::LDLT<Matrix<Scalar>> factor_reduced(const Matrix<Scalar>& reduced, Scalar h_scale) {
  Eigen::LDLT<Matrix<Scalar>> ldlt(reduced);
  if (reduced.rows() == 0) return ldlt;
  using std::max;
  const Scalar floor = std::numeric_limits<Scalar>::epsilon() * max(Scalar(1), h_scale) *
                       Scalar(reduced.rows());
  const Scalar min_pivot = ldlt.vectorD().minCoeff();
  if (ldlt.info() != Eigen::Success || !(min_pivot > floor)) {
    std::ostringstream os;
    os << "reduced Hessian Z^T H Z is not positive definite (min pivot " << min_pivot
       << "); the approximation H must be positive definite on null(J)";
    throw CurvatureError(os.str());
  }
  return ldlt;
}

}  // namespace detail

/// Solve the KKT system using a caller-supplied orthonormal basis Z of null(J).
template <typename Scalar, typename DerivedZ>
KktSolution<Scalar> solve_kkt(const KktInputs<Scalar>& in,
                              const JacobianFactorization<Scalar>& fact,
                              const Eigen::MatrixBase<DerivedZ>& basis) {
  detail::check_inputs(in);
  const Index n = in.hessian.rows();
  if (basis.rows() != n || basis.cols() != n - fact.rows()) {
    throw std::invalid_argument("null-space basis has wrong shape");
  }
  KktSolution<Scalar> s;
  s.v = -fact.pinv_transpose(in.constraints);
  s.null_basis = basis;
  if (basis.cols() > 0) {
    const Matrix<Scalar> hz = in.hessian * basis;
    const Matrix<Scalar> reduced = basis.transpose() * hz;
    auto ldlt = detail::factor_reduced<Scalar>(reduced, in.hessian.norm());
    const Vector<Scalar> rhs = -(basis.transpose() * (in.gradient + in.hessian * s.v));
    s.u = basis * ldlt.solve(rhs);
  } else {
    s.u = Vector<Scalar>::Zero(n);
  }
  s.d = s.u + s.v;
  s.y = -fact.pinv(in.gradient + in.hessian * s.d);
  return s;
}

template <typename Scalar>
KktSolution<Scalar> solve_kkt(const KktInputs<Scalar>& in) {
  const JacobianFactorization<Scalar> fact(in.jacobian);
  return solve_kkt(in, fact, fact.null_basis());
}

/// ||H d + J^T y + g|| + ||J d + c||
template <typename Scalar, typename DerivedD, typename DerivedY>
Scalar kkt_residual(const KktInputs<Scalar>& in, const Eigen::MatrixBase<DerivedD>& d,
                    const Eigen::MatrixBase<DerivedY>& y) {
  return (in.hessian * d + in.jacobian.transpose() * y + in.gradient).norm() +
         (in.jacobian * d + in.constraints).norm();
}

template <typename Derived>
Matrix<typename Derived::Scalar> null_space_basis(const Eigen::MatrixBase<Derived>& jacobian) {
  return JacobianFactorization<typename Derived::Scalar>(jacobian).null_basis();
}

template <typename Scalar>
struct StepParts {
  Vector<Scalar> u;
  Vector<Scalar> v;
};

/// v = -J^T (J J^T)^{-1} c, u = d - v. Requires J d = -c.
template <typename DerivedD, typename DerivedJ, typename DerivedC>
StepParts<typename DerivedD::Scalar> decompose_step(const Eigen::MatrixBase<DerivedD>& d,
                                                    const Eigen::MatrixBase<DerivedJ>& jacobian,
                                                    const Eigen::MatrixBase<DerivedC>& c) {
  using Scalar = typename DerivedD::Scalar;
  if (jacobian.cols() != d.size() || jacobian.rows() != c.size()) {
    throw std::invalid_argument("decompose_step: dimension mismatch");
  }
  const JacobianFactorization<Scalar> fact(jacobian);
  const Scalar mismatch = (jacobian * d + c).norm();
  const Scalar scale = Scalar(1) + c.norm() + jacobian.norm() * d.norm();
  if (mismatch > Scalar(1e-8) * scale) {
    std::ostringstream os;
    os << "step is not consistent with the linearized constraints (||J d + c|| = " << mismatch
       << ")";
    throw ConsistencyError(os.str());
  }
  StepParts<Scalar> p;
  p.v = -fact.pinv_transpose(c);
  p.u = d - p.v;
  return p;
}

/// M = (J J^T)^{-1} J (I - H Z (Z^T H Z)^{-1} Z^T), an m x n matrix.
template <typename DerivedH, typename DerivedJ, typename DerivedZ>
Matrix<typename DerivedH::Scalar> multiplier_operator(const Eigen::MatrixBase<DerivedH>& hessian,
                                                      const Eigen::MatrixBase<DerivedJ>& jacobian,
                                                      const Eigen::MatrixBase<DerivedZ>& basis) {
  using Scalar = typename DerivedH::Scalar;
  const Index n = jacobian.cols();
  const JacobianFactorization<Scalar> fact(jacobian);
  Matrix<Scalar> proj = Matrix<Scalar>::Identity(n, n);
  if (basis.cols() > 0) {
    const Matrix<Scalar> hz = hessian * basis;
    const Matrix<Scalar> reduced = basis.transpose() * hz;
    auto ldlt = detail::factor_reduced<Scalar>(reduced, hessian.norm());
    proj -= hz * ldlt.solve(Matrix<Scalar>(basis.transpose()));
  }
  return fact.pinv_matrix() * proj;
}

/// y = M (H J^T (J J^T)^{-1} c - g)
template <typename DerivedM, typename DerivedH, typename DerivedJ, typename DerivedC,
          typename DerivedG>
Vector<typename DerivedM::Scalar> multiplier_via_operator(
    const Eigen::MatrixBase<DerivedM>& op, const Eigen::MatrixBase<DerivedH>& hessian,
    const Eigen::MatrixBase<DerivedJ>& jacobian, const Eigen::MatrixBase<DerivedC>& c,
    const Eigen::MatrixBase<DerivedG>& g) {
  using Scalar = typename DerivedM::Scalar;
  const JacobianFactorization<Scalar> fact(jacobian);
  return op * (hessian * fact.pinv_transpose(c) - g);
}

/// argmin_y ||g + J^T y||_2 = -(J J^T)^{-1} J g
template <typename DerivedJ, typename DerivedG>
Vector<typename DerivedJ::Scalar> least_squares_multiplier(const Eigen::MatrixBase<DerivedJ>& jacobian,
                                                           const Eigen::MatrixBase<DerivedG>& g) {
  return -JacobianFactorization<typename DerivedJ::Scalar>(jacobian).pinv(g);
}

}  // namespace ssqp

#endif  // SSQP_KKT_HPP

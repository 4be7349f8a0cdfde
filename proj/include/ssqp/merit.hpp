#ifndef SSQP_MERIT_HPP
#define SSQP_MERIT_HPP

// Merit function phi_tau(x) = tau f(x) + ||c(x)||_1, its local model q_tau,
// the model reduction, and the per-iterate trial quantities for the fixed
// merit parameter tau and ratio parameter xi.

#include <algorithm>

#include "ssqp/linalg.hpp"

namespace ssqp {

struct MeritParams {
  double tau = 0.1;
  double xi = 1.0;
  double nu = 0.5;

  void validate() const {
    if (!(tau > 0.0)) throw ConfigError("merit parameter tau must be positive");
    if (!(xi > 0.0)) throw ConfigError("ratio parameter xi must be positive");
    if (!(nu > 0.0 && nu < 1.0)) throw ConfigError("reduction fraction nu must lie in (0, 1)");
  }
};

template <typename Scalar, typename DerivedC>
Scalar phi(Scalar tau, Scalar f, const Eigen::MatrixBase<DerivedC>& c) {
  return tau * f + c.template lpNorm<1>();
}

namespace detail {
template <typename DerivedH, typename DerivedD>
typename DerivedD::Scalar clamped_curvature(const Eigen::MatrixBase<DerivedH>& h,
                                            const Eigen::MatrixBase<DerivedD>& d) {
  using Scalar = typename DerivedD::Scalar;
  using std::max;
  return max(Scalar(d.dot(h * d)), Scalar(0));
}
}  // namespace detail

/// q_tau(x, g, H, d) = tau (f + g^T d + max{d^T H d, 0} / 2) + ||c + J d||_1
template <typename Scalar, typename DerivedC, typename DerivedJ, typename DerivedG,
          typename DerivedH, typename DerivedD>
Scalar model_q(Scalar tau, Scalar f, const Eigen::MatrixBase<DerivedC>& c,
               const Eigen::MatrixBase<DerivedJ>& jacobian, const Eigen::MatrixBase<DerivedG>& g,
               const Eigen::MatrixBase<DerivedH>& h, const Eigen::MatrixBase<DerivedD>& d) {
  return tau * (f + g.dot(d) + Scalar(0.5) * detail::clamped_curvature(h, d)) +
         (c + jacobian * d).template lpNorm<1>();
}

/// Delta q_tau = -tau (g^T d + max{d^T H d, 0} / 2) + ||c||_1
template <typename Scalar, typename DerivedC, typename DerivedG, typename DerivedH,
          typename DerivedD>
Scalar reduction_delta_q(Scalar tau, const Eigen::MatrixBase<DerivedC>& c,
                         const Eigen::MatrixBase<DerivedG>& g, const Eigen::MatrixBase<DerivedH>& h,
                         const Eigen::MatrixBase<DerivedD>& d) {
  return -tau * (g.dot(d) + Scalar(0.5) * detail::clamped_curvature(h, d)) +
         c.template lpNorm<1>();
}

/// Delta q / (tau ||d||^2), infinite for d = 0.
template <typename Scalar, typename DerivedD>
Extended<Scalar> xi_trial(Scalar tau, Scalar delta_q, const Eigen::MatrixBase<DerivedD>& d) {
  const Scalar dd = d.squaredNorm();
  if (dd == Scalar(0)) return Extended<Scalar>::infinity();
  return Extended<Scalar>(delta_q / (tau * dd));
}

/// (1 - nu) ||c||_1 / rho with rho = grad^T d + max{d^T H d, 0}; infinite when rho <= 0.
template <typename Scalar, typename DerivedC, typename DerivedG, typename DerivedH,
          typename DerivedD>
Extended<Scalar> tau_trial_true(Scalar nu, const Eigen::MatrixBase<DerivedC>& c,
                                const Eigen::MatrixBase<DerivedG>& grad,
                                const Eigen::MatrixBase<DerivedH>& h,
                                const Eigen::MatrixBase<DerivedD>& d_true) {
  const Scalar rho = grad.dot(d_true) + detail::clamped_curvature(h, d_true);
  if (rho <= Scalar(0)) return Extended<Scalar>::infinity();
  return Extended<Scalar>((Scalar(1) - nu) * c.template lpNorm<1>() / rho);
}

template <typename Scalar>
struct ReductionCheck {
  bool holds;
  Scalar slack;  // lhs - rhs
  Scalar lhs;
  Scalar rhs;
};

/// Checks Delta q_tau(x, grad f, H, d_true) >= tau max{d^T H d, 0} / 2 + nu ||c||_1.
/// Only guaranteed when tau <= tau_trial_true; otherwise this is a diagnostic.
template <typename Scalar, typename DerivedC, typename DerivedG, typename DerivedH,
          typename DerivedD>
ReductionCheck<Scalar> check_reduction_lbnd(Scalar tau, Scalar nu,
                                            const Eigen::MatrixBase<DerivedC>& c,
                                            const Eigen::MatrixBase<DerivedG>& grad,
                                            const Eigen::MatrixBase<DerivedH>& h,
                                            const Eigen::MatrixBase<DerivedD>& d_true) {
  using std::abs;
  ReductionCheck<Scalar> r;
  r.lhs = reduction_delta_q(tau, c, grad, h, d_true);
  r.rhs = Scalar(0.5) * tau * detail::clamped_curvature(h, d_true) + nu * c.template lpNorm<1>();
  r.slack = r.lhs - r.rhs;
  r.holds = r.slack >= -Scalar(1e-10) * (Scalar(1) + abs(r.lhs));
  return r;
}

}  // namespace ssqp

#endif  // SSQP_MERIT_HPP

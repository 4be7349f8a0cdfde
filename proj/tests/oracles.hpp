#ifndef SSQP_TESTS_ORACLES_HPP
#define SSQP_TESTS_ORACLES_HPP

// Independent reference computations for the tests. None of these go through
// the library's QR/null-space route.

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "ssqp/linalg.hpp"
#include "ssqp/problem.hpp"

namespace oracle {

using ssqp::Index;
using ssqp::Mat;
using ssqp::Vec;

struct DenseKkt {
  Vec d;
  Vec y;
};

// Full (n+m) saddle-point system, pivoted LU.
inline DenseKkt dense_kkt(const Mat& h, const Mat& j, const Vec& g, const Vec& c) {
  const Index n = h.rows(), m = j.rows();
  Mat k = Mat::Zero(n + m, n + m);
  k.topLeftCorner(n, n) = h;
  k.topRightCorner(n, m) = j.transpose();
  k.bottomLeftCorner(m, n) = j;
  Vec rhs(n + m);
  rhs << -g, -c;
  const Vec sol = k.fullPivLu().solve(rhs);
  return {sol.head(n), sol.tail(m)};
}

// Null space from the SVD of J (right singular vectors past the rank).
inline Mat svd_null_basis(const Mat& j) {
  Eigen::JacobiSVD<Mat> svd(j, Eigen::ComputeFullV);
  return svd.matrixV().rightCols(j.cols() - j.rows());
}

// J^T (J J^T)^{-1} via normal equations, deliberately not QR.
inline Mat pinv_transpose_normal(const Mat& j) {
  return j.transpose() * (j * j.transpose()).inverse();
}

// Smallest kappa with 2 kh / sqrt(kappa) + kh / kappa <= zeta / 2: substitute
// s = 1 / sqrt(kappa) to get kh s^2 + 2 kh s - zeta / 2 = 0.
inline double kuv_closed_form(double zeta, double kappa_h) {
  const double s = std::sqrt(1.0 + zeta / (2.0 * kappa_h)) - 1.0;
  return 1.0 / (s * s);
}

struct Window {
  long k_prime;
  Vec mean;
};

// Forward reading of the window definition: try every k' from 1 upward and
// keep the first one for which the whole tail [k', k] sits in the ball.
inline Window forward_window(const std::vector<Vec>& xs, const std::vector<Vec>& ys, long k,
                             double eps) {
  const Vec& xk = xs[static_cast<std::size_t>(k - 1)];
  for (long kp = 1; kp <= k; ++kp) {
    bool ok = true;
    for (long j = kp; j <= k && ok; ++j) {
      ok = (xs[static_cast<std::size_t>(j - 1)] - xk).norm() <= eps;
    }
    if (ok) {
      Vec mean = Vec::Zero(ys.front().size());
      for (long j = kp; j <= k; ++j) mean += ys[static_cast<std::size_t>(j - 1)];
      return {kp, mean / static_cast<double>(k - kp + 1)};
    }
  }
  return {k, ys[static_cast<std::size_t>(k - 1)]};
}

inline Mat random_orthogonal(Index n, ssqp::Rng& rng) {
  std::normal_distribution<double> nd;
  Mat a(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) a(i, j) = nd(rng);
  Eigen::HouseholderQR<Mat> qr(a);
  return qr.householderQ() * Mat::Identity(n, n);
}

struct RandomKkt {
  Mat h, j;
  Vec g, c;
};

// Well-conditioned instance: J with singular values in [1, 3], H = Q diag Q^T
// with eigenvalues in [0.5, 4] (positive definite, so Z^T H Z is too).
inline RandomKkt random_kkt(Index n, Index m, ssqp::Rng& rng, bool identity_h = false) {
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  RandomKkt r;
  const Mat u = random_orthogonal(m, rng);
  const Mat v = random_orthogonal(n, rng);
  Vec s(m);
  for (Index i = 0; i < m; ++i) s(i) = 1.0 + 2.0 * unif(rng);
  r.j = u * s.asDiagonal() * v.leftCols(m).transpose();
  if (identity_h) {
    r.h = Mat::Identity(n, n);
  } else {
    const Mat q = random_orthogonal(n, rng);
    Vec e(n);
    for (Index i = 0; i < n; ++i) e(i) = 0.5 + 3.5 * unif(rng);
    r.h = q * e.asDiagonal() * q.transpose();
    r.h = 0.5 * (r.h + r.h.transpose()).eval();
  }
  r.g = Vec(n);
  r.c = Vec(m);
  for (Index i = 0; i < n; ++i) r.g(i) = nd(rng);
  for (Index i = 0; i < m; ++i) r.c(i) = nd(rng);
  return r;
}

// min 1/2 x^T Q x + p^T x  s.t.  A x = b, solved through its KKT matrix.
struct QpSolution {
  Vec x;
  Vec y;
};

inline QpSolution equality_qp(const Mat& q, const Vec& p, const Mat& a, const Vec& b) {
  const auto s = dense_kkt(q, a, p, -b);
  return {s.d, s.y};
}

inline ssqp::Problem quadratic_problem(const Mat& q, const Vec& p, const Mat& a, const Vec& b,
                                       const Vec& x0) {
  ssqp::Problem pr;
  pr.n = q.rows();
  pr.m = a.rows();
  pr.objective = [q, p](const Vec& x) { return 0.5 * x.dot(q * x) + p.dot(x); };
  pr.gradient = [q, p](const Vec& x) -> Vec { return q * x + p; };
  pr.constraints = [a, b](const Vec& x) -> Vec { return a * x - b; };
  pr.jacobian = [a](const Vec&) -> Mat { return a; };
  pr.initial_point = x0;
  pr.name = "qp";
  return pr;
}

// min x_1 s.t. ||x||^2 = 1 in R^2.
inline ssqp::Problem sphere_toy(const Vec& x0) {
  ssqp::Problem pr;
  pr.n = 2;
  pr.m = 1;
  pr.objective = [](const Vec& x) { return x(0); };
  pr.gradient = [](const Vec&) -> Vec { return Vec::Unit(2, 0); };
  pr.constraints = [](const Vec& x) -> Vec { return Vec::Constant(1, x.squaredNorm() - 1.0); };
  pr.jacobian = [](const Vec& x) -> Mat { return 2.0 * x.transpose(); };
  pr.initial_point = x0;
  pr.name = "sphere";
  return pr;
}

inline double median(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<long>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

// Least-squares slope of log(err) against log(k).
inline double loglog_slope(const std::vector<double>& ks, const std::vector<double>& errs) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(ks.size());
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const double x = std::log(ks[i]), y = std::log(errs[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace oracle

#endif  // SSQP_TESTS_ORACLES_HPP

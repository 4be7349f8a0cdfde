#include "ssqp/problem.hpp"

#include <algorithm>
#include <cmath>

namespace ssqp {

void Problem::validate() const {
  if (n <= 0) throw std::invalid_argument("problem dimension n must be positive");
  if (m < 0 || m > n) throw std::invalid_argument("constraint count must satisfy 0 <= m <= n");
  if (!objective || !gradient || !constraints || !jacobian) {
    throw std::invalid_argument("problem '" + name + "' is missing an evaluator");
  }
  if (initial_point.size() != n) {
    throw std::invalid_argument("initial point has wrong dimension");
  }
}

Evaluation eval_all(const Problem& p, const Vec& x) {
  if (x.size() != p.n) throw std::invalid_argument("eval_all: x has wrong dimension");
  if (!x.allFinite()) throw std::invalid_argument("eval_all: x is not finite");
  Evaluation e;
  e.f = p.objective(x);
  if (!std::isfinite(e.f)) throw EvaluationError("objective value is not finite");
  e.grad = p.gradient(x);
  if (e.grad.size() != p.n) throw EvaluationError("objective gradient has wrong dimension");
  if (!e.grad.allFinite()) throw EvaluationError("objective gradient is not finite");
  e.c = p.constraints(x);
  if (e.c.size() != p.m) throw EvaluationError("constraint vector has wrong dimension");
  if (!e.c.allFinite()) throw EvaluationError("constraint values are not finite");
  e.jac = p.jacobian(x);
  if (e.jac.rows() != p.m || e.jac.cols() != p.n) {
    throw EvaluationError("constraint Jacobian has wrong shape");
  }
  if (!e.jac.allFinite()) throw EvaluationError("constraint Jacobian is not finite");
  return e;
}

Vec sample_gradient(const StochasticGradientOracle& o, const Vec& x, Index batch, Rng& rng) {
  if (batch < 1) throw std::invalid_argument("mini-batch size must be at least 1");
  Vec g = o.sampler(x, batch, rng);
  if (g.size() != x.size()) throw EvaluationError("stochastic gradient has wrong dimension");
  if (!g.allFinite()) throw EvaluationError("stochastic gradient is not finite");
  return g;
}

double estimate_variance(const Problem& p, const StochasticGradientOracle& o, const Vec& x,
                         Index batch, int trials, Rng& rng) {
  if (trials < 2) throw std::invalid_argument("estimate_variance needs at least 2 trials");
  const Vec grad = p.gradient(x);
  double acc = 0.0;
  for (int t = 0; t < trials; ++t) {
    acc += (sample_gradient(o, x, batch, rng) - grad).squaredNorm();
  }
  return acc / trials;
}

StochasticGradientOracle exact_oracle(const Problem& p) {
  StochasticGradientOracle o;
  o.sampler = [grad = p.gradient](const Vec& x, Index, Rng&) { return grad(x); };
  o.variance = 0.0;
  o.name = "exact";
  return o;
}

StochasticGradientOracle gaussian_noise_oracle(const Problem& p, double sigma) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("noise level must be nonnegative");
  StochasticGradientOracle o;
  const double n = static_cast<double>(p.n);
  o.sampler = [grad = p.gradient, sigma, n](const Vec& x, Index batch, Rng& rng) {
    Vec g = grad(x);
    if (sigma == 0.0) return g;
    const double scale = sigma / std::sqrt(n * static_cast<double>(batch));
    g += scale * standard_normal(g.size(), rng);
    return g;
  };
  o.variance = sigma * sigma;
  o.name = "gaussian";
  return o;
}

void ProblemConstants::validate() const {
  const double positive[] = {kappa_x, kappa_grad_f, kappa_c, kappa_grad_c, r,
                             lipschitz_grad, lipschitz_c, gamma, zeta, kappa_h};
  for (double v : positive) {
    if (!(v > 0.0)) throw ConfigError("problem constants must be strictly positive");
  }
  if (!(sigma >= 0.0)) throw ConfigError("noise bound sigma must be nonnegative");
  if (!std::isfinite(f_inf)) throw ConfigError("f_inf must be finite");
  if (r > kappa_grad_c) throw ConfigError("need r <= kappa_grad_c");
  if (zeta > kappa_h) throw ConfigError("need zeta <= kappa_h");
}

Vec standard_normal(Index n, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Vec v(n);
  for (Index i = 0; i < n; ++i) v(i) = dist(rng);
  return v;
}

namespace {

// Uniform point in the ball of given radius around center.
Vec ball_point(const Vec& center, double radius, Rng& rng) {
  Vec dir = standard_normal(center.size(), rng);
  dir.normalize();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double rad = radius * std::pow(unif(rng), 1.0 / static_cast<double>(center.size()));
  return center + rad * dir;
}

}  // namespace

double estimate_lipschitz_vector(const std::function<Vec(const Vec&)>& fn, const Vec& center,
                                 double radius, int probes, Rng& rng) {
  double best = 0.0;
  for (int t = 0; t < probes; ++t) {
    const Vec a = ball_point(center, radius, rng);
    const Vec b = ball_point(center, radius, rng);
    const double dx = (a - b).norm();
    if (dx == 0.0) continue;
    best = std::max(best, (fn(a) - fn(b)).norm() / dx);
  }
  return 2.0 * best;
}

double estimate_lipschitz_matrix(const std::function<Mat(const Vec&)>& fn, const Vec& center,
                                 double radius, int probes, Rng& rng) {
  double best = 0.0;
  for (int t = 0; t < probes; ++t) {
    const Vec a = ball_point(center, radius, rng);
    const Vec b = ball_point(center, radius, rng);
    const double dx = (a - b).norm();
    if (dx == 0.0) continue;
    const Mat diff = fn(a) - fn(b);
    Eigen::JacobiSVD<Mat> svd(diff);
    const double spec = svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0;
    best = std::max(best, spec / dx);
  }
  return 2.0 * best;
}

DerivativeCheck check_derivatives(const Problem& p, const Vec& center, double radius, int probes,
                                  double h, Rng& rng) {
  DerivativeCheck out;
  std::uniform_int_distribution<Index> coord(0, p.n - 1);
  for (int t = 0; t < probes; ++t) {
    const Vec x = ball_point(center, radius, rng);
    const Index i = coord(rng);
    Vec xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    if (p.m > 0) {
      const Vec fd = (p.constraints(xp) - p.constraints(xm)) / (2.0 * h);
      const Vec col = p.jacobian(x).col(i);
      out.max_constraint_error = std::max(out.max_constraint_error, (fd - col).norm());
    }
    const double fd_f = (p.objective(xp) - p.objective(xm)) / (2.0 * h);
    out.max_gradient_error = std::max(out.max_gradient_error, std::abs(fd_f - p.gradient(x)(i)));
    ++out.probes;
  }
  return out;
}

}  // namespace ssqp

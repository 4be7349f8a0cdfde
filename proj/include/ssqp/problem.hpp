#ifndef SSQP_PROBLEM_HPP
#define SSQP_PROBLEM_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>

#include "ssqp/linalg.hpp"

namespace ssqp {

/// Explicit random stream. Every stochastic call takes one of these by
/// reference; nothing in the library holds hidden random state.
using Rng = std::mt19937_64;

/// min f(x) s.t. c(x) = 0, with f: R^n -> R and c: R^n -> R^m.
/// The Jacobian evaluator returns grad c(x)^T, i.e. an m x n matrix whose
/// row i is the gradient of c_i.
struct Problem {
  Index n = 0;
  Index m = 0;
  std::function<double(const Vec&)> objective;
  std::function<Vec(const Vec&)> gradient;
  std::function<Vec(const Vec&)> constraints;
  std::function<Mat(const Vec&)> jacobian;
  Vec initial_point;
  std::string name;

  void validate() const;
};

struct Evaluation {
  double f = 0.0;
  Vec grad;
  Vec c;
  Mat jac;
};

/// Evaluate f, grad f, c and its Jacobian at one point. Throws EvaluationError
/// naming the offending component on non-finite or mis-sized output.
Evaluation eval_all(const Problem& p, const Vec& x);

/// Stochastic gradient estimator with a mini-batch sampler.
struct StochasticGradientOracle {
  /// Returns the average of `batch` i.i.d. per-sample gradients at x.
  std::function<Vec(const Vec& x, Index batch, Rng& rng)> sampler;
  /// Declared bound on E||g - grad f(x)||^2 for batch size 1 (0 means exact).
  double variance = 0.0;
  std::string name;
};

Vec sample_gradient(const StochasticGradientOracle& o, const Vec& x, Index batch, Rng& rng);

/// Sample mean of ||g - grad f(x)||^2 over `trials` draws.
double estimate_variance(const Problem& p, const StochasticGradientOracle& o, const Vec& x,
                         Index batch, int trials, Rng& rng);

/// Oracle that always returns the true gradient.
StochasticGradientOracle exact_oracle(const Problem& p);

/// grad f(x) + N(0, (sigma^2 / (n b)) I): unbiased, E||g - grad f||^2 = sigma^2 / b.
StochasticGradientOracle gaussian_noise_oracle(const Problem& p, double sigma);

/// Constants of the standing assumptions. Used for step sizes and diagnostics only.
struct ProblemConstants {
  double kappa_x = 1.0;         // bound on the iterate set
  double f_inf = 0.0;           // lower bound on f (any real)
  double kappa_grad_f = 1.0;    // bound on ||grad f||
  double kappa_c = 1.0;         // bound on ||c||
  double kappa_grad_c = 1.0;    // bound on ||grad c||
  double r = 1.0;               // lower bound on sigma_min(grad c)
  double lipschitz_grad = 1.0;  // L_grad_f
  double lipschitz_c = 1.0;     // L_c
  double gamma = 1.0;           // Lipschitz constant of grad c
  double sigma = 0.0;           // gradient noise bound (may be zero)
  double zeta = 1.0;            // curvature of H on null(J)
  double kappa_h = 1.0;         // bound on ||H||

  void validate() const;
};

/// Largest finite-difference quotient ||F(x) - F(x')|| / ||x - x'|| over random
/// segments of length <= radius around center, inflated by 2. Matrix outputs
/// use the spectral norm. Not a certified global constant.
double estimate_lipschitz_vector(const std::function<Vec(const Vec&)>& fn, const Vec& center,
                                 double radius, int probes, Rng& rng);
double estimate_lipschitz_matrix(const std::function<Mat(const Vec&)>& fn, const Vec& center,
                                 double radius, int probes, Rng& rng);

struct DerivativeCheck {
  double max_constraint_error = 0.0;  // worst |central difference - Jacobian column|
  double max_gradient_error = 0.0;
  int probes = 0;
};

/// Central-difference check of the Jacobian and gradient at random (x, i) probes
/// drawn from a ball of the given radius around center.
DerivativeCheck check_derivatives(const Problem& p, const Vec& center, double radius, int probes,
                                  double h, Rng& rng);

/// Standard-normal vector drawn from rng.
Vec standard_normal(Index n, Rng& rng);

}  // namespace ssqp

#endif  // SSQP_PROBLEM_HPP

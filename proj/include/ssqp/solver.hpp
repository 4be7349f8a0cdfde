#ifndef SSQP_SOLVER_HPP
#define SSQP_SOLVER_HPP

// Stochastic SQP with fixed merit/ratio parameters and the step size
//
//   alpha_k = beta_k tau xi / (tau L + Gamma),
//
// where L and Gamma are Lipschitz constants of grad f and grad c.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ssqp/kkt.hpp"
#include "ssqp/merit.hpp"
#include "ssqp/problem.hpp"

namespace ssqp {

/// beta_k = beta1 * (1 + (k - 1) / offset)^(-exponent), k >= 1.
///
/// With offset = 1 this is beta1 * k^(-exponent). Larger offsets hold the step
/// near beta1 for roughly `offset` iterations before the k^(-exponent) tail;
/// the sequence stays unsummable and square-summable for exponent in (1/2, 1].
struct BetaSchedule {
  double beta1 = 1.0;
  double exponent = 1.0;
  double offset = 1.0;

  void validate() const;
  double operator()(long k) const;
};

double beta(const BetaSchedule& schedule, long k);

/// beta_k tau xi / (tau L + Gamma). Not clamped to (0, 1].
double step_size(double tau, double xi, double lipschitz_grad, double gamma, double beta_k);

/// How H_k is chosen. Maps must be deterministic functions of x alone.
class HessianStrategy {
 public:
  enum class Kind { identity, fixed, map };

  static HessianStrategy identity();
  static HessianStrategy fixed(Mat h);
  static HessianStrategy map(std::function<Mat(const Vec&)> fn, std::string label = "map");

  Kind kind() const { return kind_; }
  const std::string& label() const { return label_; }
  Mat at(const Vec& x) const;
  /// For identity and fixed H: (zeta, kappa_H) = (lambda_min(H), ||H||_2) when H
  /// is positive definite.
  std::optional<std::pair<double, double>> curvature_bounds(Index n) const;

 private:
  Kind kind_ = Kind::identity;
  Mat fixed_;
  std::function<Mat(const Vec&)> map_;
  std::string label_ = "identity";
};

struct CurvatureConstants {
  double zeta = 1.0;     // u^T H u >= zeta ||u||^2 on null(J)
  double kappa_h = 1.0;  // ||H||_2 <= kappa_h
};

struct SolverConfig {
  MeritParams merit;
  double lipschitz_grad = 1.0;
  double gamma = 1.0;
  BetaSchedule beta;
  HessianStrategy hessian = HessianStrategy::identity();
  Index batch = 16;
  long iterations = 1000;
  std::uint64_t seed = 0;
  /// Computes the true-gradient shadow step and all trial checks each iteration.
  bool validate_iterates = false;
  /// Used for the tangential-curvature check; derived from H when unset.
  std::optional<CurvatureConstants> curvature;

  void validate() const;
};

struct IterationRecord {
  long k = 0;
  Vec x;
  Vec g;
  HessianStrategy::Kind hessian = HessianStrategy::Kind::identity;
  Vec d, y, u, v;
  double alpha = 0.0;
  double beta = 0.0;
  double phi = 0.0;
  double delta_q = 0.0;  // with g_k and d_k
  Extended<double> xi_trial = Extended<double>::infinity();
  double norm_c = 0.0;

  // Validation-mode quantities (NaN / empty otherwise).
  bool validated = false;
  Vec d_true, y_true, u_true;
  double delta_q_true = std::numeric_limits<double>::quiet_NaN();
  Extended<double> tau_trial_true = Extended<double>::infinity();
  double lbnd_slack = std::numeric_limits<double>::quiet_NaN();
  double residual_true = std::numeric_limits<double>::quiet_NaN();

  bool xi_violation = false;
  bool tau_violation = false;
  bool lbnd_violation = false;
  bool curvature_violation = false;
};

struct ValidationSummary {
  long iterations = 0;
  long xi_violations = 0;
  long tau_violations = 0;
  long lbnd_violations = 0;
  long lbnd_checked = 0;
  long curvature_checked = 0;
  long curvature_violations = 0;
  long alpha_above_one = 0;
  double min_xi_trial = std::numeric_limits<double>::infinity();
  double min_tau_trial = std::numeric_limits<double>::infinity();
  double min_lbnd_slack = std::numeric_limits<double>::infinity();
  long first_xi_violation = 0;  // 0 when none
  long first_tau_violation = 0;

  long total_violations() const {
    return xi_violations + tau_violations + lbnd_violations + curvature_violations;
  }
};

struct RunResult {
  std::vector<IterationRecord> trace;
  Vec final_x;
  ValidationSummary summary;
};

using IterationObserver = std::function<void(const IterationRecord&)>;

/// One iteration at a time. Owns its iterate and random stream.
class StochasticSqp {
 public:
  StochasticSqp(Problem problem, StochasticGradientOracle oracle, SolverConfig config);

  /// Performs iteration k = iteration() + 1 and returns its record.
  IterationRecord step();

  const Vec& x() const { return x_; }
  long iteration() const { return k_; }
  const ValidationSummary& summary() const { return summary_; }
  const SolverConfig& config() const { return config_; }
  /// kappa_uv used by the curvature check (0 when the check is disabled).
  double kappa_uv() const { return kappa_uv_; }

 private:
  void check_curvature(IterationRecord& rec, const Mat& h, const Vec& d, const Vec& u,
                       const Vec& v);

  Problem problem_;
  StochasticGradientOracle oracle_;
  SolverConfig config_;
  Rng rng_;
  Vec x_;
  long k_ = 0;
  double alpha1_ = 0.0;
  std::optional<CurvatureConstants> curvature_;
  double kappa_uv_ = 0.0;
  ValidationSummary summary_;
};

/// Runs exactly config.iterations iterations and keeps the full trace.
RunResult run(const Problem& p, const StochasticGradientOracle& o, const SolverConfig& cfg);

/// Streams records to `observer` instead of storing them.
RunResult run(const Problem& p, const StochasticGradientOracle& o, const SolverConfig& cfg,
              const IterationObserver& observer);

struct ShadowStep {
  Vec d_true;
  Vec y_true;
};

/// KKT solve with the true gradient at x.
ShadowStep true_shadow(const Problem& p, const Vec& x, const Mat& h);

struct StationarityResidual {
  double residual = 0.0;         // ||grad f + grad c y|| + ||c||
  double squared_variant = 0.0;  // ||grad f + grad c y||^2 + ||c||
};

StationarityResidual stationarity_residual(const Problem& p, const Vec& x, const Vec& y);

/// Smallest kappa with 2 kappa_H / sqrt(kappa) + kappa_H / kappa <= zeta / 2,
/// found by bisection to 1e-10 relative. Requires 0 < zeta <= kappa_H.
double derive_kuv(double zeta, double kappa_h);

}  // namespace ssqp

#endif  // SSQP_SOLVER_HPP

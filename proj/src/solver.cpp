#include "ssqp/solver.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace ssqp {

void BetaSchedule::validate() const {
  if (!(beta1 > 0.0 && beta1 <= 1.0)) throw ConfigError("beta1 must lie in (0, 1]");
  if (!(exponent > 0.5 && exponent <= 1.0)) {
    throw ConfigError("beta exponent must lie in (1/2, 1] for an unsummable, square-summable schedule");
  }
  if (!(offset >= 1.0) || !std::isfinite(offset)) throw ConfigError("beta offset must be >= 1");
}

double BetaSchedule::operator()(long k) const {
  if (k < 1) throw std::invalid_argument("beta schedule is indexed from k = 1");
  const double t = 1.0 + static_cast<double>(k - 1) / offset;
  return beta1 * std::pow(t, -exponent);
}

double beta(const BetaSchedule& schedule, long k) { return schedule(k); }

double step_size(double tau, double xi, double lipschitz_grad, double gamma, double beta_k) {
  if (!(tau > 0.0) || !(xi > 0.0) || !(lipschitz_grad > 0.0) || !(gamma > 0.0)) {
    throw std::invalid_argument("step_size: tau, xi, L and Gamma must be positive");
  }
  if (!(beta_k > 0.0 && beta_k <= 1.0)) throw std::invalid_argument("step_size: beta_k must lie in (0, 1]");
  return beta_k * tau * xi / (tau * lipschitz_grad + gamma);
}

HessianStrategy HessianStrategy::identity() { return HessianStrategy(); }

HessianStrategy HessianStrategy::fixed(Mat h) {
  if (h.rows() != h.cols()) throw std::invalid_argument("fixed Hessian must be square");
  if ((h - h.transpose()).norm() > kkt_tol::symmetry_rel * std::max(1.0, h.norm())) {
    throw std::invalid_argument("fixed Hessian must be symmetric");
  }
  HessianStrategy s;
  s.kind_ = Kind::fixed;
  s.fixed_ = std::move(h);
  s.label_ = "fixed";
  return s;
}

HessianStrategy HessianStrategy::map(std::function<Mat(const Vec&)> fn, std::string label) {
  if (!fn) throw std::invalid_argument("Hessian map is empty");
  HessianStrategy s;
  s.kind_ = Kind::map;
  s.map_ = std::move(fn);
  s.label_ = std::move(label);
  return s;
}

Mat HessianStrategy::at(const Vec& x) const {
  switch (kind_) {
    case Kind::identity:
      return Mat::Identity(x.size(), x.size());
    case Kind::fixed:
      if (fixed_.rows() != x.size()) throw std::invalid_argument("fixed Hessian has wrong size");
      return fixed_;
    case Kind::map:
      break;
  }
  Mat h = map_(x);
  if (h.rows() != x.size() || h.cols() != x.size()) {
    throw EvaluationError("Hessian map returned wrong shape");
  }
  return h;
}

std::optional<std::pair<double, double>> HessianStrategy::curvature_bounds(Index) const {
  if (kind_ == Kind::identity) return std::make_pair(1.0, 1.0);
  if (kind_ == Kind::fixed) {
    Eigen::SelfAdjointEigenSolver<Mat> es(fixed_, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().cwiseAbs().maxCoeff();
    if (lo > 0.0) return std::make_pair(lo, hi);
  }
  return std::nullopt;
}

void SolverConfig::validate() const {
  merit.validate();
  beta.validate();
  if (!(lipschitz_grad > 0.0)) throw ConfigError("Lipschitz constant of grad f must be positive");
  if (!(gamma > 0.0)) throw ConfigError("Lipschitz constant of grad c must be positive");
  if (batch < 1) throw ConfigError("batch size must be at least 1");
  if (iterations < 0) throw ConfigError("iteration budget must be nonnegative");
  if (curvature && !(curvature->zeta > 0.0 && curvature->zeta <= curvature->kappa_h)) {
    throw ConfigError("curvature constants need 0 < zeta <= kappa_H");
  }
}

namespace {

template <typename E>
[[noreturn]] void rethrow_at(long k, const E& e) {
  throw E("iteration " + std::to_string(k) + ": " + e.what());
}

}  // namespace

StochasticSqp::StochasticSqp(Problem problem, StochasticGradientOracle oracle, SolverConfig config)
    : problem_(std::move(problem)),
      oracle_(std::move(oracle)),
      config_(std::move(config)),
      rng_(config_.seed) {
  problem_.validate();
  config_.validate();
  x_ = problem_.initial_point;
  alpha1_ = step_size(config_.merit.tau, config_.merit.xi, config_.lipschitz_grad, config_.gamma,
                      config_.beta(1));
  curvature_ = config_.curvature;
  if (!curvature_) {
    if (auto b = config_.hessian.curvature_bounds(problem_.n)) {
      curvature_ = CurvatureConstants{b->first, b->second};
    }
  }
  if (curvature_) kappa_uv_ = derive_kuv(curvature_->zeta, curvature_->kappa_h);
}

void StochasticSqp::check_curvature(IterationRecord& rec, const Mat& h, const Vec& d, const Vec& u,
                                    const Vec& v) {
  if (!curvature_) return;
  const double uu = u.squaredNorm();
  if (uu < kappa_uv_ * v.squaredNorm() || uu == 0.0) return;
  ++summary_.curvature_checked;
  const double lhs = d.dot(h * d);
  const double rhs = 0.5 * curvature_->zeta * uu;
  if (lhs < rhs - 1e-12 * (1.0 + std::abs(rhs))) {
    if (!rec.curvature_violation) ++summary_.curvature_violations;
    rec.curvature_violation = true;
  }
}

IterationRecord StochasticSqp::step() {
  const long k = ++k_;
  IterationRecord rec;
  rec.k = k;
  rec.x = x_;
  rec.hessian = config_.hessian.kind();

  Evaluation ev;
  Mat h;
  KktSolution<double> sol;
  std::optional<JacobianFactorization<double>> fact;
  try {
    ev = eval_all(problem_, x_);
    rec.g = sample_gradient(oracle_, x_, config_.batch, rng_);
    h = config_.hessian.at(x_);
    fact.emplace(ev.jac);
    sol = solve_kkt(KktInputs<double>{h, ev.jac, rec.g, ev.c}, *fact, fact->null_basis());
  } catch (const RankError& e) {
    rethrow_at(k, e);
  } catch (const CurvatureError& e) {
    rethrow_at(k, e);
  } catch (const EvaluationError& e) {
    rethrow_at(k, e);
  }

  const auto& mp = config_.merit;
  rec.beta = config_.beta(k);
  rec.alpha = step_size(mp.tau, mp.xi, config_.lipschitz_grad, config_.gamma, rec.beta);
  if (rec.alpha > 1.0) ++summary_.alpha_above_one;
  rec.phi = phi(mp.tau, ev.f, ev.c);
  rec.norm_c = ev.c.norm();
  rec.delta_q = reduction_delta_q(mp.tau, ev.c, rec.g, h, sol.d);
  rec.xi_trial = xi_trial(mp.tau, rec.delta_q, sol.d);
  rec.d = std::move(sol.d);
  rec.y = std::move(sol.y);
  rec.u = std::move(sol.u);
  rec.v = std::move(sol.v);

  if (config_.validate_iterates) {
    rec.validated = true;
    KktSolution<double> shadow;
    try {
      shadow = solve_kkt(KktInputs<double>{h, ev.jac, ev.grad, ev.c}, *fact, fact->null_basis());
    } catch (const CurvatureError& e) {
      rethrow_at(k, e);
    }
    rec.delta_q_true = reduction_delta_q(mp.tau, ev.c, ev.grad, h, shadow.d);
    rec.tau_trial_true = tau_trial_true(mp.nu, ev.c, ev.grad, h, shadow.d);
    rec.residual_true = (ev.grad + ev.jac.transpose() * shadow.y).norm() + ev.c.norm();

    rec.xi_violation = mp.xi > rec.xi_trial;
    rec.tau_violation = mp.tau > rec.tau_trial_true;
    if (!rec.xi_trial.is_infinite()) {
      summary_.min_xi_trial = std::min(summary_.min_xi_trial, rec.xi_trial.value());
    }
    if (!rec.tau_trial_true.is_infinite()) {
      summary_.min_tau_trial = std::min(summary_.min_tau_trial, rec.tau_trial_true.value());
    }
    if (rec.xi_violation) {
      ++summary_.xi_violations;
      if (summary_.first_xi_violation == 0) summary_.first_xi_violation = k;
    }
    if (rec.tau_violation) {
      ++summary_.tau_violations;
      if (summary_.first_tau_violation == 0) summary_.first_tau_violation = k;
    }

    const auto lb = check_reduction_lbnd(mp.tau, mp.nu, ev.c, ev.grad, h, shadow.d);
    rec.lbnd_slack = lb.slack;
    if (!rec.tau_violation) {
      ++summary_.lbnd_checked;
      summary_.min_lbnd_slack = std::min(summary_.min_lbnd_slack, lb.slack);
      if (!lb.holds) {
        rec.lbnd_violation = true;
        ++summary_.lbnd_violations;
      }
    }
    check_curvature(rec, h, shadow.d, shadow.u, shadow.v);
    rec.d_true = std::move(shadow.d);
    rec.y_true = std::move(shadow.y);
    rec.u_true = std::move(shadow.u);
  }
  check_curvature(rec, h, rec.d, rec.u, rec.v);

  Vec next = x_ + rec.alpha * rec.d;
  if (!next.allFinite()) throw IterationError(k, "iterate became non-finite");
  x_ = std::move(next);
  ++summary_.iterations;
  return rec;
}

RunResult run(const Problem& p, const StochasticGradientOracle& o, const SolverConfig& cfg) {
  RunResult out;
  out.trace.reserve(static_cast<std::size_t>(cfg.iterations));
  auto res = run(p, o, cfg, [&out](const IterationRecord& r) { out.trace.push_back(r); });
  out.final_x = std::move(res.final_x);
  out.summary = res.summary;
  return out;
}

RunResult run(const Problem& p, const StochasticGradientOracle& o, const SolverConfig& cfg,
              const IterationObserver& observer) {
  StochasticSqp solver(p, o, cfg);
  for (long k = 1; k <= cfg.iterations; ++k) {
    const IterationRecord rec = solver.step();
    if (observer) observer(rec);
  }
  RunResult out;
  out.final_x = solver.x();
  out.summary = solver.summary();
  return out;
}

ShadowStep true_shadow(const Problem& p, const Vec& x, const Mat& h) {
  const Evaluation ev = eval_all(p, x);
  const auto sol = solve_kkt(KktInputs<double>{h, ev.jac, ev.grad, ev.c});
  return ShadowStep{sol.d, sol.y};
}

StationarityResidual stationarity_residual(const Problem& p, const Vec& x, const Vec& y) {
  const Vec grad = p.gradient(x);
  const Vec c = p.constraints(x);
  const Mat jac = p.jacobian(x);
  if (y.size() != c.size()) throw std::invalid_argument("multiplier has wrong dimension");
  const double first = (grad + jac.transpose() * y).norm();
  const double second = c.norm();
  return StationarityResidual{first + second, first * first + second};
}

double derive_kuv(double zeta, double kappa_h) {
  if (!(zeta > 0.0 && zeta <= kappa_h)) {
    throw std::invalid_argument("derive_kuv requires 0 < zeta <= kappa_H");
  }
  const double target = 0.5 * zeta;
  auto lhs = [kappa_h](double kappa) { return 2.0 * kappa_h / std::sqrt(kappa) + kappa_h / kappa; };
  // lhs is decreasing in kappa.
  double lo = 1.0, hi = 1.0;
  while (lhs(hi) > target) hi *= 2.0;
  while (lo > 0.0 && lhs(lo) <= target) lo *= 0.5;
  while (hi - lo > 1e-10 * hi) {
    const double mid = 0.5 * (lo + hi);
    if (lhs(mid) <= target) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

}  // namespace ssqp

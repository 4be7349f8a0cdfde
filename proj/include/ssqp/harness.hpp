#ifndef SSQP_HARNESS_HPP
#define SSQP_HARNESS_HPP

// Experiment driver for constrained logistic regression: reference solve,
// stochastic replicates, CSV traces and run summaries.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ssqp/logreg.hpp"
#include "ssqp/solver.hpp"

namespace ssqp {

class ReferenceError : public Error {
 public:
  using Error::Error;
};

struct ExperimentConfig {
  std::string dataset;
  Index m_lin = 10;
  Index batch = 16;
  long iterations = 100000;
  double tau = 0.1;
  double xi = 1.0;
  double nu = 0.5;
  double beta1 = 1.0;
  double beta_p = 1.0;
  double beta_offset = 1.0;
  bool beta_grid = false;
  std::vector<std::uint64_t> seeds{1};
  std::uint64_t instance_seed = 0;
  std::vector<double> eps{0.01, 0.1, 1.0};
  std::string out = "out";
  long thin = 1;
  bool validate = false;
  bool reference_only = false;
  long kbar = 1;
  double reference_tol = 1e-8;
  long reference_iterations = 1000000;
  std::optional<double> lipschitz_grad;  // defaults to the instance bound
  std::optional<double> gamma;           // defaults to 2 (sphere row)

  void validate_config() const;
};

/// Apply "key=value" lines (same names as the CLI flags without dashes,
/// '-' or '_' accepted). Repeatable keys (seed, eps) accumulate and replace
/// the defaults. '#' starts a comment.
void apply_config_text(ExperimentConfig& cfg, const std::string& text);
ExperimentConfig parse_config_text(const std::string& text);
/// Resolved configuration in the same key=value format.
std::string config_echo(const ExperimentConfig& cfg);

struct ReferenceOptions {
  MeritParams merit;
  double lipschitz_grad = 1.0;
  double gamma = 1.0;
  HessianStrategy hessian = HessianStrategy::identity();
  /// Near-constant schedule: the deterministic run is only a means to a
  /// high-accuracy stationary point.
  BetaSchedule beta{1.0, 1.0, 1e12};
  double tol = 1e-8;
  long max_iterations = 1000000;
  int probes = 64;
  double probe_radius = 1e-3;
  std::uint64_t seed = 12345;
};

struct ReferenceSolution {
  Vec x;
  Vec y;
  double residual = 0.0;
  long iterations = 0;
  /// min over tangential probes of f(retract(x* + t z)) - f(x*).
  double min_probe_gap = 0.0;
  bool second_order_ok = false;
};

/// Deterministic (exact-gradient) run until the stationarity residual drops
/// below tol, then random tangential probes retracted onto c = 0.
/// Throws ReferenceError when the budget runs out first.
ReferenceSolution compute_reference(const Problem& p, const ReferenceOptions& opts);

struct TraceRow {
  long k = 0;
  double dist_x = 0.0;
  double dist_y = 0.0;
  double dist_y_true = 0.0;
  double dist_y_avg = 0.0;
  std::vector<double> dist_y_avg_eps;
  double resid_true = 0.0;
  double norm_c = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double xi_trial = 0.0;
  double tau_trial_true = 0.0;
  double lbnd_slack = 0.0;
};

std::string csv_header(const std::vector<double>& eps);
std::string csv_row(const TraceRow& row);

struct RunSummary {
  std::uint64_t seed = 0;
  double dist_x_initial = 0.0;
  double dist_x = 0.0;
  double dist_y = 0.0;
  double dist_y_true = 0.0;
  double dist_y_avg = 0.0;
  std::vector<double> dist_y_avg_eps;
  ValidationSummary violations;
  double wall_seconds = 0.0;
};

struct ReplicateResult {
  RunSummary summary;
  std::vector<TraceRow> rows;  // every `thin`-th iteration
};

struct ReplicateOptions {
  long thin = 1;
  std::vector<double> eps;
  long kbar = 1;
  bool keep_rows = true;
};

/// One stochastic run against a reference solution. Rows go to `csv` (when
/// non-null) and, if keep_rows, into the result.
ReplicateResult run_replicate(const Problem& p, const StochasticGradientOracle& o,
                              const SolverConfig& cfg, const ReferenceSolution& ref,
                              const ReplicateOptions& opts, std::ostream* csv = nullptr);

struct ExperimentResult {
  ReferenceSolution reference;
  SolverConfig solver;
  std::vector<RunSummary> runs;
  std::vector<std::filesystem::path> files;
};

/// Builds the instance, computes the reference and runs one replicate per
/// seed (concurrently). Writes into cfg.out:
///   trace_seed<S>.csv, summary.csv, reference.txt, config.txt, columns.txt
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Solver configuration implied by an experiment configuration and instance.
SolverConfig solver_config(const ExperimentConfig& cfg, const ConstrainedLogRegInstance& inst);

struct BetaGridResult {
  BetaSchedule best;
  double best_dist = 0.0;
  std::vector<std::pair<BetaSchedule, double>> tried;
};

/// Coarse grid over (exponent, offset) at fixed beta1; scores each schedule by
/// the final ||x - x*|| of a short stochastic run.
BetaGridResult tune_beta(const Problem& p, const StochasticGradientOracle& o,
                         const SolverConfig& base, const ReferenceSolution& ref, long iterations);

struct PlDiagnostic {
  double mu_hat = 0.0;  // largest sampled ratio
  long evaluated = 0;
  long excluded = 0;    // both sides zero
  std::vector<Vec> witnesses;  // positive merit gap with vanishing right-hand side
};

/// Samples x uniformly in the ball around x_star and evaluates
///   (phi(x) - phi(x*)) / (tau ||Z(x)^T grad f(x)||^2 + ||c(x)||).
/// With project_feasible, each sample is also retracted onto c(x) = 0 and
/// evaluated there.
PlDiagnostic pl_diagnostic(const Problem& p, const Vec& x_star, double tau, long samples,
                           double radius, Rng& rng, bool project_feasible = true);

/// Gauss-Newton projection x <- x - J^T (J J^T)^{-1} c(x) until ||c|| <= tol.
Vec retract_feasible(const Problem& p, Vec x, int max_steps = 50, double tol = 1e-14);

}  // namespace ssqp

#endif  // SSQP_HARNESS_HPP

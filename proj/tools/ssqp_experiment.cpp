// Experiment CLI: reference solve plus stochastic replicates on a
// constrained logistic regression instance. Flags override --config.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "ssqp/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Stochastic SQP experiments on constrained logistic regression"};

  std::string config_path, dataset, out;
  long mlin = 0, batch = 0, iters = 0, thin = 0, kbar = 0, ref_iters = 0;
  double tau = 0, xi = 0, nu = 0, beta1 = 0, beta_p = 0, beta_offset = 0, ref_tol = 0;
  double lipschitz = 0, gamma = 0;
  std::uint64_t instance_seed = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<double> eps;
  bool validate = false, reference_only = false, beta_grid = false;

  app.add_option("--config", config_path, "key=value file; flags take precedence")
      ->check(CLI::ExistingFile);
  auto* o_dataset = app.add_option("--dataset", dataset, "LIBSVM file");
  auto* o_mlin = app.add_option("--mlin", mlin, "random affine constraints (default 10)");
  auto* o_batch = app.add_option("--batch", batch, "mini-batch size (default 16)");
  auto* o_iters = app.add_option("--iters", iters, "iterations per replicate (default 100000)");
  auto* o_tau = app.add_option("--tau", tau, "merit parameter (default 0.1)");
  auto* o_xi = app.add_option("--xi", xi, "ratio parameter (default 1.0)");
  auto* o_nu = app.add_option("--nu", nu, "reduction fraction (default 0.5)");
  auto* o_beta1 = app.add_option("--beta1", beta1, "first schedule value (default 1.0)");
  auto* o_beta_p = app.add_option("--beta-p", beta_p, "schedule exponent in (1/2, 1] (default 1.0)");
  auto* o_beta_off = app.add_option("--beta-offset,--beta-k0", beta_offset,
                                    "beta_k = beta1 (1 + (k-1)/offset)^-p (default 1)");
  auto* o_grid = app.add_flag("--beta-grid", beta_grid, "tune (p, offset) on a coarse grid first");
  auto* o_seed = app.add_option("--seed", seeds, "replicate seed (repeatable)");
  auto* o_iseed = app.add_option("--instance-seed", instance_seed, "seed for A, b, x_1 (default 0)");
  auto* o_eps = app.add_option("--eps", eps, "window radius (repeatable)");
  auto* o_out = app.add_option("--out", out, "output directory (default out)");
  auto* o_thin = app.add_option("--thin", thin, "emit every thin-th iteration (default 1)");
  auto* o_validate = app.add_flag("--validate", validate, "shadow solves and trial checks");
  auto* o_ref_only = app.add_flag("--reference-only", reference_only, "stop after the reference");
  auto* o_kbar = app.add_option("--kbar", kbar, "running-average start index (default 1)");
  auto* o_ref_tol = app.add_option("--ref-tol", ref_tol, "reference residual tolerance (default 1e-8)");
  auto* o_ref_iters = app.add_option("--ref-iters", ref_iters, "reference iteration budget");
  auto* o_lip = app.add_option("--lipschitz-grad", lipschitz, "L for grad f (default: data bound)");
  auto* o_gamma = app.add_option("--gamma", gamma, "Lipschitz constant of grad c (default 2)");

  CLI11_PARSE(app, argc, argv);

  try {
    ssqp::ExperimentConfig cfg;
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      std::stringstream text;
      text << f.rdbuf();
      ssqp::apply_config_text(cfg, text.str());
    }
    if (o_dataset->count()) cfg.dataset = dataset;
    if (o_mlin->count()) cfg.m_lin = mlin;
    if (o_batch->count()) cfg.batch = batch;
    if (o_iters->count()) cfg.iterations = iters;
    if (o_tau->count()) cfg.tau = tau;
    if (o_xi->count()) cfg.xi = xi;
    if (o_nu->count()) cfg.nu = nu;
    if (o_beta1->count()) cfg.beta1 = beta1;
    if (o_beta_p->count()) cfg.beta_p = beta_p;
    if (o_beta_off->count()) cfg.beta_offset = beta_offset;
    if (o_grid->count()) cfg.beta_grid = beta_grid;
    if (o_seed->count()) cfg.seeds = seeds;
    if (o_iseed->count()) cfg.instance_seed = instance_seed;
    if (o_eps->count()) cfg.eps = eps;
    if (o_out->count()) cfg.out = out;
    if (o_thin->count()) cfg.thin = thin;
    if (o_validate->count()) cfg.validate = validate;
    if (o_ref_only->count()) cfg.reference_only = reference_only;
    if (o_kbar->count()) cfg.kbar = kbar;
    if (o_ref_tol->count()) cfg.reference_tol = ref_tol;
    if (o_ref_iters->count()) cfg.reference_iterations = ref_iters;
    if (o_lip->count()) cfg.lipschitz_grad = lipschitz;
    if (o_gamma->count()) cfg.gamma = gamma;
    cfg.validate_config();

    const auto res = ssqp::run_experiment(cfg);
    std::printf("reference: residual %.3e after %ld iterations, second-order probes %s\n",
                res.reference.residual, res.reference.iterations,
                res.reference.second_order_ok ? "ok" : "FAILED");
    for (const auto& r : res.runs) {
      std::printf("seed %llu: |x-x*| %.3e -> %.3e  |y-y*| %.3e  |yavg-y*| %.3e  violations %ld  (%.1fs)\n",
                  static_cast<unsigned long long>(r.seed), r.dist_x_initial, r.dist_x, r.dist_y,
                  r.dist_y_avg, r.violations.total_violations(), r.wall_seconds);
    }
    for (const auto& f : res.files) std::printf("wrote %s\n", f.string().c_str());
    return 0;
  } catch (const ssqp::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const ssqp::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

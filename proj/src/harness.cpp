#include "ssqp/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "ssqp/multipliers.hpp"

namespace ssqp {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
}

long long to_integer(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long i = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

std::string fmt17(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

void ExperimentConfig::validate_config() const {
  if (thin < 1) throw ConfigError("thin must be >= 1");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (m_lin < 0) throw ConfigError("mlin must be nonnegative");
  if (batch < 1) throw ConfigError("batch must be >= 1");
  if (iterations < 1) throw ConfigError("iters must be >= 1");
  if (kbar < 1) throw ConfigError("kbar must be >= 1");
  if (!(reference_tol > 0.0)) throw ConfigError("ref-tol must be positive");
  for (double e : eps) {
    if (!(e > 0.0)) throw ConfigError("eps values must be positive");
  }
  MeritParams{tau, xi, nu}.validate();
  BetaSchedule{beta1, beta_p, beta_offset}.validate();
  if (lipschitz_grad && !(*lipschitz_grad > 0.0)) throw ConfigError("lipschitz-grad must be positive");
  if (gamma && !(*gamma > 0.0)) throw ConfigError("gamma must be positive");
}

void apply_config_text(ExperimentConfig& cfg, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  bool seeds_seen = false, eps_seen = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(lineno, "expected key=value");
    std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    std::replace(key.begin(), key.end(), '_', '-');
    if (key == "dataset") {
      cfg.dataset = val;
    } else if (key == "mlin") {
      cfg.m_lin = static_cast<Index>(to_integer(key, val));
    } else if (key == "batch") {
      cfg.batch = static_cast<Index>(to_integer(key, val));
    } else if (key == "iters") {
      cfg.iterations = static_cast<long>(to_integer(key, val));
    } else if (key == "tau") {
      cfg.tau = to_double(key, val);
    } else if (key == "xi") {
      cfg.xi = to_double(key, val);
    } else if (key == "nu") {
      cfg.nu = to_double(key, val);
    } else if (key == "beta1") {
      cfg.beta1 = to_double(key, val);
    } else if (key == "beta-p") {
      cfg.beta_p = to_double(key, val);
    } else if (key == "beta-offset") {
      cfg.beta_offset = to_double(key, val);
    } else if (key == "beta-grid") {
      cfg.beta_grid = to_bool(key, val);
    } else if (key == "seed") {
      if (!seeds_seen) cfg.seeds.clear();
      seeds_seen = true;
      cfg.seeds.push_back(static_cast<std::uint64_t>(to_integer(key, val)));
    } else if (key == "instance-seed") {
      cfg.instance_seed = static_cast<std::uint64_t>(to_integer(key, val));
    } else if (key == "eps") {
      if (!eps_seen) cfg.eps.clear();
      eps_seen = true;
      cfg.eps.push_back(to_double(key, val));
    } else if (key == "out") {
      cfg.out = val;
    } else if (key == "thin") {
      cfg.thin = static_cast<long>(to_integer(key, val));
    } else if (key == "validate") {
      cfg.validate = to_bool(key, val);
    } else if (key == "reference-only") {
      cfg.reference_only = to_bool(key, val);
    } else if (key == "kbar") {
      cfg.kbar = static_cast<long>(to_integer(key, val));
    } else if (key == "ref-tol") {
      cfg.reference_tol = to_double(key, val);
    } else if (key == "ref-iters") {
      cfg.reference_iterations = static_cast<long>(to_integer(key, val));
    } else if (key == "lipschitz-grad") {
      cfg.lipschitz_grad = to_double(key, val);
    } else if (key == "gamma") {
      cfg.gamma = to_double(key, val);
    } else {
      throw ParseError(lineno, "unknown config key '" + key + "'");
    }
  }
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  apply_config_text(cfg, text);
  return cfg;
}

std::string config_echo(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "dataset=" << cfg.dataset << '\n'
     << "mlin=" << cfg.m_lin << '\n'
     << "batch=" << cfg.batch << '\n'
     << "iters=" << cfg.iterations << '\n'
     << "tau=" << fmt17(cfg.tau) << '\n'
     << "xi=" << fmt17(cfg.xi) << '\n'
     << "nu=" << fmt17(cfg.nu) << '\n'
     << "beta1=" << fmt17(cfg.beta1) << '\n'
     << "beta-p=" << fmt17(cfg.beta_p) << '\n'
     << "beta-offset=" << fmt17(cfg.beta_offset) << '\n'
     << "beta-grid=" << (cfg.beta_grid ? "true" : "false") << '\n';
  for (auto s : cfg.seeds) os << "seed=" << s << '\n';
  os << "instance-seed=" << cfg.instance_seed << '\n';
  for (double e : cfg.eps) os << "eps=" << fmt17(e) << '\n';
  os << "out=" << cfg.out << '\n'
     << "thin=" << cfg.thin << '\n'
     << "validate=" << (cfg.validate ? "true" : "false") << '\n'
     << "reference-only=" << (cfg.reference_only ? "true" : "false") << '\n'
     << "kbar=" << cfg.kbar << '\n'
     << "ref-tol=" << fmt17(cfg.reference_tol) << '\n'
     << "ref-iters=" << cfg.reference_iterations << '\n';
  if (cfg.lipschitz_grad) os << "lipschitz-grad=" << fmt17(*cfg.lipschitz_grad) << '\n';
  if (cfg.gamma) os << "gamma=" << fmt17(*cfg.gamma) << '\n';
  return os.str();
}

Vec retract_feasible(const Problem& p, Vec x, int max_steps, double tol) {
  for (int i = 0; i < max_steps; ++i) {
    const Vec c = p.constraints(x);
    if (c.norm() <= tol) break;
    const JacobianFactorization<double> fact(p.jacobian(x));
    x -= fact.pinv_transpose(c);
  }
  return x;
}

ReferenceSolution compute_reference(const Problem& p, const ReferenceOptions& opts) {
  SolverConfig cfg;
  cfg.merit = opts.merit;
  cfg.lipschitz_grad = opts.lipschitz_grad;
  cfg.gamma = opts.gamma;
  cfg.beta = opts.beta;
  cfg.hessian = opts.hessian;
  cfg.batch = 1;
  cfg.iterations = opts.max_iterations;
  cfg.seed = opts.seed;
  StochasticSqp solver(p, exact_oracle(p), cfg);

  ReferenceSolution ref;
  bool converged = false;
  double last = std::numeric_limits<double>::infinity();
  for (long k = 1; k <= opts.max_iterations; ++k) {
    const IterationRecord rec = solver.step();
    last = stationarity_residual(p, rec.x, rec.y).residual;
    if (last <= opts.tol) {
      ref.x = rec.x;
      ref.y = rec.y;
      ref.residual = last;
      ref.iterations = k;
      converged = true;
      break;
    }
  }
  if (!converged) {
    std::ostringstream os;
    os << "reference solve did not reach residual " << opts.tol << " in " << opts.max_iterations
       << " iterations (last residual " << last << ")";
    throw ReferenceError(os.str());
  }

  // Second-order probes along the feasible manifold.
  const double f_star = p.objective(ref.x);
  ref.min_probe_gap = std::numeric_limits<double>::infinity();
  if (p.n > p.m && opts.probes > 0) {
    const Mat z = null_space_basis(p.jacobian(ref.x));
    Rng rng(opts.seed);
    for (int t = 0; t < opts.probes; ++t) {
      Vec dir = z * standard_normal(z.cols(), rng);
      dir.normalize();
      const Vec probe = retract_feasible(p, ref.x + opts.probe_radius * dir);
      ref.min_probe_gap = std::min(ref.min_probe_gap, p.objective(probe) - f_star);
    }
    ref.second_order_ok = ref.min_probe_gap >= -1e-10 * (1.0 + std::abs(f_star));
  } else {
    ref.min_probe_gap = 0.0;
    ref.second_order_ok = true;
  }
  return ref;
}

std::string csv_header(const std::vector<double>& eps) {
  std::string h = "k,dist_x,dist_y,dist_y_true,dist_y_avg";
  for (double e : eps) h += ",dist_y_avg_eps_" + fmt_short(e);
  h += ",resid_true,norm_c,alpha,beta,xi_trial,tau_trial_true,lbnd_slack";
  return h;
}

std::string csv_row(const TraceRow& r) {
  std::string s = std::to_string(r.k);
  auto add = [&s](double v) {
    s += ',';
    s += fmt17(v);
  };
  add(r.dist_x);
  add(r.dist_y);
  add(r.dist_y_true);
  add(r.dist_y_avg);
  for (double v : r.dist_y_avg_eps) add(v);
  add(r.resid_true);
  add(r.norm_c);
  add(r.alpha);
  add(r.beta);
  add(r.xi_trial);
  add(r.tau_trial_true);
  add(r.lbnd_slack);
  return s;
}

ReplicateResult run_replicate(const Problem& p, const StochasticGradientOracle& o,
                              const SolverConfig& cfg, const ReferenceSolution& ref,
                              const ReplicateOptions& opts, std::ostream* csv) {
  if (opts.thin < 1) throw std::invalid_argument("thin must be >= 1");
  const auto start = std::chrono::steady_clock::now();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  StochasticSqp solver(p, o, cfg);
  MultiplierTrace<double> trace(opts.kbar);
  ReplicateResult out;
  out.summary.seed = cfg.seed;
  out.summary.dist_x_initial = (p.initial_point - ref.x).norm();
  if (csv) *csv << csv_header(opts.eps) << '\n';

  TraceRow row;
  for (long k = 1; k <= cfg.iterations; ++k) {
    const IterationRecord rec = solver.step();
    trace.push(rec.x, rec.y);
    const bool emit = (k % opts.thin == 0) || k == cfg.iterations;
    if (!emit) continue;
    row.k = k;
    row.dist_x = (rec.x - ref.x).norm();
    row.dist_y = (rec.y - ref.y).norm();
    row.dist_y_true = rec.validated ? (rec.y_true - ref.y).norm() : nan;
    row.dist_y_avg = k >= opts.kbar ? (trace.running_average() - ref.y).norm() : nan;
    row.dist_y_avg_eps.clear();
    for (double e : opts.eps) row.dist_y_avg_eps.push_back((trace.windowed(e).mean - ref.y).norm());
    row.resid_true = rec.residual_true;
    row.norm_c = rec.norm_c;
    row.alpha = rec.alpha;
    row.beta = rec.beta;
    row.xi_trial = rec.xi_trial.value();
    row.tau_trial_true = rec.validated ? rec.tau_trial_true.value() : nan;
    row.lbnd_slack = rec.lbnd_slack;
    // The final row is always emitted for the summary; only multiples of thin go to the CSV.
    if (k % opts.thin == 0) {
      if (csv) *csv << csv_row(row) << '\n';
      if (opts.keep_rows) out.rows.push_back(row);
    }
  }
  auto& s = out.summary;
  s.dist_x = cfg.iterations > 0 ? row.dist_x : out.summary.dist_x_initial;
  s.dist_y = row.dist_y;
  s.dist_y_true = row.dist_y_true;
  s.dist_y_avg = row.dist_y_avg;
  s.dist_y_avg_eps = row.dist_y_avg_eps;
  s.violations = solver.summary();
  s.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

SolverConfig solver_config(const ExperimentConfig& cfg, const ConstrainedLogRegInstance& inst) {
  SolverConfig s;
  s.merit = MeritParams{cfg.tau, cfg.xi, cfg.nu};
  s.lipschitz_grad = cfg.lipschitz_grad.value_or(inst.gradient_lipschitz_bound());
  s.gamma = cfg.gamma.value_or(inst.jacobian_lipschitz());
  s.beta = BetaSchedule{cfg.beta1, cfg.beta_p, cfg.beta_offset};
  s.hessian = HessianStrategy::identity();
  s.batch = cfg.batch;
  s.iterations = cfg.iterations;
  s.validate_iterates = cfg.validate;
  return s;
}

BetaGridResult tune_beta(const Problem& p, const StochasticGradientOracle& o,
                         const SolverConfig& base, const ReferenceSolution& ref, long iterations) {
  BetaGridResult out;
  out.best_dist = std::numeric_limits<double>::infinity();
  const double exponents[] = {0.6, 0.8, 1.0};
  const double offsets[] = {1.0, 10.0, 100.0, 1000.0, 10000.0};
  for (double e : exponents) {
    for (double off : offsets) {
      SolverConfig cfg = base;
      cfg.beta = BetaSchedule{base.beta.beta1, e, off};
      cfg.iterations = iterations;
      cfg.validate_iterates = false;
      double dist = std::numeric_limits<double>::infinity();
      try {
        const auto res = run(p, o, cfg, IterationObserver{});
        dist = (res.final_x - ref.x).norm();
      } catch (const Error&) {
      }
      out.tried.emplace_back(cfg.beta, dist);
      if (dist < out.best_dist) {
        out.best_dist = dist;
        out.best = cfg.beta;
      }
    }
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg_in) {
  ExperimentConfig cfg = cfg_in;
  cfg.validate_config();
  if (cfg.dataset.empty()) throw ConfigError("no dataset given");
  const Dataset ds = load_libsvm(cfg.dataset);
  const auto inst = build_instance(ds, cfg.m_lin, cfg.instance_seed);
  if (!inst.feasible()) {
    std::ostringstream os;
    os << "instance is infeasible: {A x = b} lies at distance " << inst.affine_min_norm()
       << " > 1 from the origin, so it misses the unit sphere (try another instance-seed or "
          "fewer affine rows)";
    throw ConfigError(os.str());
  }
  const Problem problem = inst.problem();
  const auto oracle = inst.oracle();

  ExperimentResult result;
  result.solver = solver_config(cfg, inst);

  ReferenceOptions ropts;
  ropts.merit = result.solver.merit;
  ropts.lipschitz_grad = result.solver.lipschitz_grad;
  ropts.gamma = result.solver.gamma;
  ropts.tol = cfg.reference_tol;
  ropts.max_iterations = cfg.reference_iterations;
  result.reference = compute_reference(problem, ropts);

  const std::filesystem::path out(cfg.out);
  std::filesystem::create_directories(out);
  auto open = [&](const std::string& name) {
    const auto path = out / name;
    std::ofstream f(path);
    if (!f) throw Error("cannot write '" + path.string() + "'");
    result.files.push_back(path);
    return f;
  };

  {
    auto f = open("reference.txt");
    f << "iterations=" << result.reference.iterations << '\n'
      << "residual=" << fmt17(result.reference.residual) << '\n'
      << "min_probe_gap=" << fmt17(result.reference.min_probe_gap) << '\n'
      << "second_order_ok=" << (result.reference.second_order_ok ? "true" : "false") << '\n';
    for (Index i = 0; i < result.reference.x.size(); ++i) f << "x=" << fmt17(result.reference.x(i)) << '\n';
    for (Index i = 0; i < result.reference.y.size(); ++i) f << "y=" << fmt17(result.reference.y(i)) << '\n';
  }

  if (cfg.beta_grid && !cfg.reference_only) {
    SolverConfig probe = result.solver;
    probe.seed = cfg.seeds.front();
    const auto grid = tune_beta(problem, oracle, probe, result.reference,
                                std::max(1L, cfg.iterations / 10));
    cfg.beta_p = grid.best.exponent;
    cfg.beta_offset = grid.best.offset;
    result.solver.beta = grid.best;
  }

  {
    auto f = open("config.txt");
    f << config_echo(cfg);
  }
  {
    auto f = open("columns.txt");
    f << "# columns of trace_seed<S>.csv (1-based, for gnuplot 'using')\n";
    std::istringstream hdr(csv_header(cfg.eps));
    std::string col;
    int idx = 1;
    while (std::getline(hdr, col, ',')) f << idx++ << ' ' << col << '\n';
  }
  if (cfg.reference_only) return result;

  const std::size_t nseeds = cfg.seeds.size();
  result.runs.resize(nseeds);
  std::vector<std::exception_ptr> errors(nseeds);
  std::vector<std::filesystem::path> traces(nseeds);
  std::vector<std::thread> workers;
  for (std::size_t i = 0; i < nseeds; ++i) {
    traces[i] = out / ("trace_seed" + std::to_string(cfg.seeds[i]) + ".csv");
    workers.emplace_back([&, i] {
      try {
        std::ofstream f(traces[i]);
        if (!f) throw Error("cannot write '" + traces[i].string() + "'");
        SolverConfig scfg = result.solver;
        scfg.seed = cfg.seeds[i];
        ReplicateOptions ro;
        ro.thin = cfg.thin;
        ro.eps = cfg.eps;
        ro.kbar = cfg.kbar;
        ro.keep_rows = false;
        result.runs[i] = run_replicate(problem, oracle, scfg, result.reference, ro, &f).summary;
      } catch (...) {
        errors[i] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  result.files.insert(result.files.end(), traces.begin(), traces.end());

  auto f = open("summary.csv");
  f << "seed,dist_x_initial,dist_x,dist_y,dist_y_true,dist_y_avg";
  for (double e : cfg.eps) f << ",dist_y_avg_eps_" << fmt_short(e);
  f << ",xi_violations,tau_violations,lbnd_violations,curvature_violations,alpha_above_one,"
       "wall_seconds\n";
  for (const auto& r : result.runs) {
    f << r.seed << ',' << fmt17(r.dist_x_initial) << ',' << fmt17(r.dist_x) << ','
      << fmt17(r.dist_y) << ',' << fmt17(r.dist_y_true) << ',' << fmt17(r.dist_y_avg);
    for (double v : r.dist_y_avg_eps) f << ',' << fmt17(v);
    const auto& v = r.violations;
    f << ',' << v.xi_violations << ',' << v.tau_violations << ',' << v.lbnd_violations << ','
      << v.curvature_violations << ',' << v.alpha_above_one << ',' << fmt17(r.wall_seconds)
      << '\n';
  }
  return result;
}

PlDiagnostic pl_diagnostic(const Problem& p, const Vec& x_star, double tau, long samples,
                           double radius, Rng& rng, bool project_feasible) {
  PlDiagnostic out;
  const double phi_star = tau * p.objective(x_star) + p.constraints(x_star).lpNorm<1>();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto evaluate = [&](const Vec& x) {
    if ((x - x_star).norm() == 0.0) {
      ++out.excluded;
      return;
    }
    const Vec c = p.constraints(x);
    const double gap = tau * p.objective(x) + c.lpNorm<1>() - phi_star;
    double reduced = 0.0;
    if (p.n > p.m) {
      const Mat z = null_space_basis(p.jacobian(x));
      reduced = (z.transpose() * p.gradient(x)).squaredNorm();
    }
    const double denom = tau * reduced + c.norm();
    ++out.evaluated;
    if (denom <= 1e-14) {
      if (gap > 1e-14) {
        out.witnesses.push_back(x);
      } else {
        ++out.excluded;
      }
      return;
    }
    out.mu_hat = std::max(out.mu_hat, gap / denom);
  };
  for (long s = 0; s < samples; ++s) {
    Vec dir = standard_normal(p.n, rng);
    dir.normalize();
    const double rad = radius * std::pow(unif(rng), 1.0 / static_cast<double>(p.n));
    const Vec x = x_star + rad * dir;
    evaluate(x);
    if (project_feasible && p.m > 0) evaluate(retract_feasible(p, x));
  }
  return out;
}

}  // namespace ssqp

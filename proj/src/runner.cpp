#include "twistk/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <fftw3.h>
#include <yaml-cpp/yaml.h>

#include "twistk/oracle.hpp"
#include "twistk/parallel.hpp"

namespace twistk {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Csv {
 public:
  Csv(const fs::path& path, const std::string& header) : out_(path) {
    if (!out_) throw StructuralError("cannot write " + path.string());
    out_ << header << '\n';
  }
  template <class... Ts>
  void row(const Ts&... cells) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
    out_ << '\n';
  }

 private:
  static std::string cell(double v) { return num(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(const std::string& v) { return v; }
  static std::string cell(const char* v) { return v; }
  static std::string cell(bool v) { return v ? "1" : "0"; }

  std::ofstream out_;
};

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

void write_solution(const fs::path& dir, const std::string& tag, const HMatrix& g0, const ScalarField& potential) {
  write_field(dir / ("potential_" + tag + ".bin"), potential);
  const auto k = metric_from_potential(g0, potential);
  for (int j = 0; j < k.dim(); ++j)
    for (int l = j; l < k.dim(); ++l) {
      const auto& c = k.metric().component(j, l);
      const std::string name = "g" + std::to_string(j) + std::to_string(l);
      write_field(dir / (name + "_re_" + tag + ".bin"), real_part(c));
      if (l != j) write_field(dir / (name + "_im_" + tag + ".bin"), imag_part(c));
    }
}

struct Setup {
  PeriodicGrid grid;
  HermitianFormField omega;
  HermitianFormField alpha;
  SolverConfig solver;
};

Setup make_setup(const RunConfig& cfg) {
  const auto grid = make_grid(cfg);
  auto omega = make_form(grid, cfg.omega);
  auto alpha = cfg.alpha ? make_form(grid, *cfg.alpha) : omega;
  return {grid, std::move(omega), std::move(alpha), solver_config(cfg)};
}

double lambda1_at(const HMatrix& g0, const ScalarField& potential, const HermitianFormField& alpha, double R,
                  const SolverConfig& cfg) {
  try {
    const auto k = std::make_shared<const KahlerStructure>(metric_from_potential(g0, potential));
    return extreme_eigenvalue(LinearOperatorHandle(OperatorKind::shifted, k, alpha, R), cfg.eigen).eigenvalue;
  } catch (const Error&) {
    return kNaN;
  }
}

/// Newton from the ladder when Lambda alpha is constant on the seed, else from the seed.
NewtonReport solve_one(const KahlerStructure& k0, const HermitianFormField& alpha, double R, int ladder_order,
                       const SolverConfig& cfg) {
  ScalarField init = k0.potential();
  if (R > 0.0 && ladder_order > 0) {
    try {
      init = build_approximate_solution(k0, alpha, R, ladder_order, cfg).potential;
    } catch (const Error&) {
    }
  }
  try {
    return newton_solve(k0.g0(), alpha, R, init, cfg);
  } catch (const StagnationError& e) {
    return e.report();
  } catch (const DegenerateMetricError&) {
    return NewtonReport(k0.grid());
  }
}

struct Summary {
  YAML::Emitter out;
  Summary() {
    out.SetDoublePrecision(17);
    out << YAML::BeginMap;
  }
  template <class T>
  void put(const std::string& key, const T& value) {
    out << YAML::Key << key << YAML::Value << value;
  }
  void put(const std::string& key, double value) {
    out << YAML::Key << key << YAML::Value;
    if (std::isfinite(value))
      out << value;
    else
      out << num(value);
  }
  void write(const fs::path& path) {
    out << YAML::EndMap;
    std::ofstream(path) << out.c_str() << '\n';
  }
};

void write_manifest(const fs::path& dir, const RunConfig& cfg) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "program" << YAML::Value << "twistk";
  out << YAML::Key << "version" << YAML::Value << kVersion;
  out << YAML::Key << "libraries" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "eigen" << YAML::Value
      << (std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
          std::to_string(EIGEN_MINOR_VERSION));
  out << YAML::Key << "fftw" << YAML::Value << fftw_version;
  out << YAML::EndMap;
  out << YAML::Key << "seed" << YAML::Value << cfg.seed;
  out << YAML::Key << "threads" << YAML::Value << thread_count();
  out << YAML::Key << "config" << YAML::Value << YAML::Load(emit_config(cfg));
  out << YAML::EndMap;
  std::ofstream(dir / "manifest.yaml") << out.c_str() << '\n';
}

int steps_from_solves(const fs::path& dir, const RunConfig& cfg, const Setup& s, Summary& sum) {
  const auto k0 = metric_from_potential(s.omega.constant_part(), s.omega.potential());
  Csv csv(dir / "steps.csv", kStepsHeader);
  int ok = 0;
  for (std::size_t i = 0; i < cfg.R.size(); ++i) {
    const double R = cfg.R[i];
    const auto start = std::chrono::steady_clock::now();
    const auto rep = solve_one(k0, s.alpha, R, cfg.ladder_order, s.solver);
    const double lam = rep.converged && cfg.solver.eigenvalues
                           ? lambda1_at(k0.g0(), rep.potential, s.alpha, R, s.solver)
                           : kNaN;
    const double last = rep.residual_history.empty() ? kNaN : rep.residual_history.back();
    csv.row(i, 1.0 / (1.0 + R), R, last, rep.converged ? rep.residual_l2 : kNaN, lam, rep.iterations,
            elapsed_ms(start));
    if (rep.converged) {
      ++ok;
      write_solution(dir / "fields", "s" + std::to_string(i), k0.g0(), rep.potential);
    }
  }
  sum.put("converged_steps", ok);
  sum.put("total_steps", static_cast<int>(cfg.R.size()));
  return ok == static_cast<int>(cfg.R.size()) ? 0 : 1;
}

void sweep_rows(Csv& csv, const std::vector<SweepStep>& steps, const fs::path& fields, const HMatrix& g0) {
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& s = steps[i];
    csv.row(i, s.t, s.R, s.residual_sup, s.converged ? s.residual_l2 : kNaN, s.lambda1, s.newton_iterations,
            s.wall_ms);
    if (s.potential) write_solution(fields, "s" + std::to_string(i), g0, *s.potential);
  }
}

int run_sweep(const fs::path& dir, const RunConfig& cfg, const Setup& s, Summary& sum) {
  if (!cfg.omega.potential.empty())
    throw PreconditionError("continuity_sweep seeds omega_0 from alpha; omega.potential must be empty");
  const auto rep = continuity_sweep(s.omega.constant_part(), s.alpha, cfg.t, s.solver,
                                    {cfg.ladder_order, cfg.solver.eigenvalues});
  Csv csv(dir / "steps.csv", kStepsHeader);
  sweep_rows(csv, rep.steps, dir / "fields", s.omega.constant_part());
  sum.put("all_converged", rep.all_converged);
  sum.put("smallest_R", rep.smallest_R);
  sum.put("failure_R", rep.failure_R ? *rep.failure_R : kNaN);
  return rep.all_converged ? 0 : 1;
}

int run_threshold(const fs::path& dir, const RunConfig& cfg, const Setup& s, Summary& sum) {
  if (!cfg.omega.potential.empty())
    throw PreconditionError("threshold seeds omega_0 from alpha; omega.potential must be empty");
  const ThresholdOptions opt{cfg.threshold.R_start, cfg.threshold.R_min, cfg.threshold.factor,
                             cfg.threshold.bisection_tolerance, cfg.ladder_order};
  const auto rep = estimate_R_threshold(s.omega.constant_part(), s.alpha, s.solver, opt);
  Csv csv(dir / "steps.csv", kStepsHeader);
  sweep_rows(csv, rep.steps, dir / "fields", s.omega.constant_part());
  sum.put("threshold", rep.threshold);
  sum.put("R_ok", rep.R_ok);
  sum.put("R_fail", rep.R_fail);
  sum.put("reached_zero", rep.reached_zero);
  return std::isfinite(rep.threshold) ? 0 : 1;
}

int run_ladder(const fs::path& dir, const RunConfig& cfg, const Setup& s, Summary& sum) {
  const auto k0 = metric_from_potential(s.omega.constant_part(), s.omega.potential());
  Csv csv(dir / "ladder.csv", "m,R,residual_sup,residual_l2,scaled_sup");
  bool all_ok = true;
  sum.out << YAML::Key << "slopes" << YAML::Value << YAML::BeginMap;
  for (int m : cfg.orders) {
    std::vector<double> Rs, res;
    for (double R : cfg.R) {
      try {
        const auto a = build_approximate_solution(k0, s.alpha, R, m, s.solver);
        csv.row(m, R, a.residual_sup, a.residual_l2, a.residual_sup * std::pow(R, m));
        Rs.push_back(R);
        res.push_back(a.residual_sup);
      } catch (const DegenerateMetricError&) {
        csv.row(m, R, kNaN, kNaN, kNaN);
        all_ok = false;
      }
    }
    double slope = kNaN;
    try {
      slope = order_fit(Rs, res).slope;
    } catch (const Error&) {
    }
    sum.put("m" + std::to_string(m), slope);
  }
  sum.out << YAML::EndMap;
  return all_ok ? 0 : 1;
}

int run_twist(const fs::path& dir, const RunConfig& cfg, const Setup& s, Summary& sum) {
  const double R = cfg.R.front();
  const auto k0 = metric_from_potential(s.omega.constant_part(), s.omega.potential());
  Csv steps(dir / "steps.csv", kStepsHeader);
  const auto start = std::chrono::steady_clock::now();
  const auto base = solve_one(k0, s.alpha, R, cfg.ladder_order, s.solver);
  const double last = base.residual_history.empty() ? kNaN : base.residual_history.back();
  steps.row(0, 1.0 / (1.0 + R), R, last, base.converged ? base.residual_l2 : kNaN, kNaN, base.iterations,
            elapsed_ms(start));
  sum.put("base_converged", base.converged);
  if (!base.converged) return 1;
  write_solution(dir / "fields", "base", k0.g0(), base.potential);

  const auto target = s.alpha.plus_ddbar(potential_field(s.grid, cfg.perturbation.potential));
  const auto rep = twist_continuation(k0.g0(), base.potential, s.alpha, target, R, cfg.perturbation.steps,
                                      s.solver);
  Csv csv(dir / "twist.csv", "step,fraction,converged,newton_iters,residual_sup");
  for (std::size_t i = 0; i < rep.steps.size(); ++i) {
    const auto& t = rep.steps[i];
    csv.row(i + 1, t.fraction, t.converged, t.iterations, t.residual_sup);
  }
  if (rep.completed) write_solution(dir / "fields", "final", k0.g0(), rep.potential);
  sum.put("completed", rep.completed);
  sum.put("last_success", rep.last_success);
  sum.put("first_failure", rep.first_failure);
  return rep.completed ? 0 : 1;
}

ScalarField bounded_potential(const PeriodicGrid& g, std::uint64_t seed, double size) {
  auto f = random_smooth_field(g, seed, 2);
  double top = 0.0;
  for (const auto& c : ddbar_components(f)) top = std::max(top, sup_norm(c));
  return f * (size / top);
}

ScalarField seed_like(const PeriodicGrid& g, double amp) {
  return ScalarField::from_function(g, [amp](auto x) { return amp * std::cos(x[0]) * std::cos(x[1]); });
}

int run_verify(const fs::path& dir, const RunConfig& cfg, Summary& sum) {
  const auto checks = verify_checks(cfg);
  Csv csv(dir / "verify.csv", "check,value,bound,pass");
  int passed = 0;
  for (const auto& c : checks) {
    csv.row(c.name, c.value, c.bound, c.pass);
    passed += c.pass ? 1 : 0;
  }
  sum.put("checks", static_cast<int>(checks.size()));
  sum.put("passed", passed);
  return passed == static_cast<int>(checks.size()) ? 0 : 1;
}

}  // namespace

std::vector<VerifyCheck> verify_checks(const RunConfig& cfg) {
  const int n = cfg.n;
  const auto seed = cfg.seed;
  const HMatrix id = HMatrix::Identity(n, n);
  std::vector<VerifyCheck> out;
  auto add = [&](std::string name, double value, double bound) {
    out.push_back({std::move(name), value, bound, value <= bound});
  };

  // Dense F on the small oracle grid.
  {
    const auto g = PeriodicGrid::uniform(n, 8);
    const auto k = std::make_shared<const KahlerStructure>(metric_from_potential(id, bounded_potential(g, seed, 0.15)));
    const auto alpha = HermitianFormField::closed(id * cplx(1.5), bounded_potential(g, seed + 1, 0.4));
    const LinearOperatorHandle op(OperatorKind::F, k, alpha);
    const auto cert = definiteness_certificate(op);
    add("dense_F_symmetry_defect", cert.symmetry_defect, 1e-9);
    add("dense_F_constant_residual", cert.constant_residual, 1e-10);
    add("dense_F_definiteness_failures", cert.negative_definite_on_mean_zero ? 0.0 : 1.0, 0.0);
  }
  // Linearization against finite differences on the configured grid.
  {
    const auto g = make_grid(cfg);
    const auto base = bounded_potential(g, seed + 2, 0.15);
    const auto alpha = HermitianFormField::closed(id * cplx(1.5), bounded_potential(g, seed + 3, 0.3));
    const auto dir = random_smooth_field(g, seed + 4, 3);
    const double R = 7.0;
    const auto fd = fd_directional_derivative(twisted_map(id, alpha, R), base, dir);
    const auto exact = apply_full_linearization(metric_from_potential(id, base), alpha, R, dir);
    add("linearization_vs_fd", l2_norm(fd.derivative - exact) / l2_norm(exact), 1e-5);
  }
  // Flat first eigenvalue of the shifted operator.
  {
    const auto g = PeriodicGrid::uniform(n, n == 1 ? 16 : 8);
    const auto k = std::make_shared<const KahlerStructure>(flat_structure(g, id));
    const double R = 10.0;
    EigenConfig ec;
    ec.seed = seed;
    const auto est = extreme_eigenvalue(LinearOperatorHandle(OperatorKind::shifted, k, k->metric(), R), ec);
    add("flat_lambda1_error", std::abs(est.eigenvalue - (-1.0 / 16.0 - R / 4.0)), 1e-8);
  }
  // Ladder order law for m = 1 and the trivial twist, on the shipped seed shape.
  {
    const auto g = PeriodicGrid::uniform(n, n == 1 ? 32 : 8);
    const auto k0 = metric_from_potential(id, seed_like(g, 0.3));
    const std::vector<double> Rs{50.0, 100.0, 200.0, 400.0};
    std::vector<double> res;
    for (double R : Rs) res.push_back(build_approximate_solution(k0, k0.metric(), R, 1).residual_sup);
    add("ladder_m1_slope_error", std::abs(order_fit(Rs, res).slope + 1.0), 0.2);
    add("trivial_twist_residual", trivial_twist(k0, k0.metric(), 100.0).residual_sup, 1e-8);
  }
  // Newton on the flat torus from a small perturbation.
  {
    const auto g = PeriodicGrid::uniform(n, n == 1 ? 32 : 8);
    const auto init = ScalarField::from_function(g, [](auto x) { return 1e-3 * std::cos(x[0]); });
    SolverConfig sc;
    sc.newton_tolerance = cfg.solver.newton_tolerance;
    double final_residual = kNaN;
    try {
      const auto rep = newton_solve(id, HermitianFormField::constant(g, id), 10.0, init, sc);
      final_residual = rep.residual_history.back();
    } catch (const StagnationError& e) {
      final_residual = e.report().residual_history.back();
    }
    add("flat_newton_residual", final_residual, cfg.solver.newton_tolerance);
  }
  // Order fit on exact synthetic data.
  {
    const std::vector<double> x{50.0, 100.0, 200.0, 400.0, 800.0};
    std::vector<double> y;
    for (double v : x) y.push_back(3.0 / (v * v));
    add("synthetic_fit_slope_error", std::abs(order_fit(x, y).slope + 2.0), 1e-12);
  }
  return out;
}

RunOutcome run_scenario(const RunConfig& cfg) {
  validate_config(cfg);
  set_thread_count(cfg.threads);
  const fs::path dir = cfg.output;
  fs::create_directories(dir / "fields");
  write_manifest(dir, cfg);

  Summary sum;
  sum.put("scenario", std::string(to_string(cfg.scenario)));
  sum.put("newton_tolerance", cfg.solver.newton_tolerance);
  int code = 2;
  std::string message;
  try {
    const Setup s = make_setup(cfg);
    switch (cfg.scenario) {
      case ScenarioKind::single_solve:
        code = steps_from_solves(dir, cfg, s, sum);
        break;
      case ScenarioKind::ladder_study:
        code = run_ladder(dir, cfg, s, sum);
        break;
      case ScenarioKind::continuity_sweep:
        code = run_sweep(dir, cfg, s, sum);
        break;
      case ScenarioKind::threshold:
        code = run_threshold(dir, cfg, s, sum);
        break;
      case ScenarioKind::twist_perturbation:
        code = run_twist(dir, cfg, s, sum);
        break;
      case ScenarioKind::verify_suite:
        code = run_verify(dir, cfg, sum);
        break;
    }
    message = code == 0 ? "ok" : "some solves or checks failed";
  } catch (const Error& e) {
    code = 2;
    message = e.what();
  }
  sum.put("exit_code", code);
  sum.put("message", message);
  sum.write(dir / "summary.yaml");
  return {code, dir, message};
}

}  // namespace twistk

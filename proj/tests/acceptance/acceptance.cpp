// Acceptance harness: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "twistk/oracle.hpp"
#include "twistk/perturbation.hpp"
#include "twistk/runner.hpp"

using namespace twistk;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

HMatrix unit(int n) { return HMatrix::Identity(n, n); }

HMatrix skew_metric() {
  HMatrix m(2, 2);
  m << cplx(1.2, 0.0), cplx(0.2, 0.1), cplx(0.2, -0.1), cplx(0.9, 0.0);
  return m;
}

ScalarField bounded_potential(const PeriodicGrid& g, std::uint64_t seed, double size) {
  auto f = random_smooth_field(g, seed, 2);
  double top = 0.0;
  for (const auto& c : ddbar_components(f)) top = std::max(top, sup_norm(c));
  return f * (size / top);
}

ScalarField cos_x(const PeriodicGrid& g, double amp) {
  return ScalarField::from_function(g, [amp](auto x) { return amp * std::cos(x[0]); });
}

ScalarField seed_potential(const PeriodicGrid& g, double amp = 0.3) {
  return ScalarField::from_function(g, [amp](auto x) { return amp * std::cos(x[0]) * std::cos(x[1]); });
}

/// Invariants every converged solution must satisfy: checked for criterion 9.
struct Invariants {
  double worst = 0.0;
  int solutions = 0;

  void record(const HMatrix& g0, const ScalarField& potential, const HermitianFormField& alpha, double R,
              double constant) {
    const auto k = metric_from_potential(g0, potential);
    const double c = cohomology(g0, alpha.constant_part()).trace_average();
    const double a = std::abs(volume_average(k, scalar_curvature(k)));
    const double b = std::abs(volume_average(k, trace_form(k, alpha)) - c);
    const double e = std::abs(constant - (0.0 - R * c));
    worst = std::max({worst, a, b, e});
    ++solutions;
  }
};

Invariants invariants;

Verdict dense_F_suite() {
  Verdict v;
  int pairs = 0;
  for (int n : {1, 2}) {
    const auto g = PeriodicGrid::uniform(n, 8);
    const HMatrix g0 = n == 1 ? unit(1) : skew_metric();
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto k = std::make_shared<const KahlerStructure>(
          metric_from_potential(g0, bounded_potential(g, seed, 0.2)));
      const auto alpha = HermitianFormField::closed(g0 * cplx(1.0 + 0.3 * seed), bounded_potential(g, seed + 50, 0.3));
      const LinearOperatorHandle op(OperatorKind::F, k, alpha);
      const auto cert = definiteness_certificate(op);
      v.require(cert.symmetry_defect <= 1e-9, "symmetry defect " + fmt("%.2e", cert.symmetry_defect));
      v.require(cert.negative_definite_on_mean_zero, "not negative definite off constants");
      v.require(cert.constant_residual <= 1e-10, "constants not in kernel");
      if (n == 1) {
        // Full spectrum: exactly one eigenvalue at zero.
        const auto spec = dense_spectrum(op);
        const double top = std::abs(spec.eigenvalues.front());
        int zeros = 0;
        for (double e : spec.eigenvalues) zeros += std::abs(e) <= 1e-10 * top ? 1 : 0;
        v.require(zeros == 1 && spec.eigenvalues.back() <= 1e-10 * top, "kernel is not one-dimensional");
      }
      ++pairs;
    }
  }
  v.detail = std::to_string(pairs) + " pairs on 8^2 and 8^4" + (v.detail.empty() ? "" : ": " + v.detail);
  return v;
}

Verdict linearization_suite() {
  Verdict v;
  double worst = 0.0;
  int triples = 0;
  auto run = [&](const PeriodicGrid& g, const HMatrix& g0, std::uint64_t seed, double R) {
    const auto base = bounded_potential(g, seed, 0.2);
    const auto alpha = HermitianFormField::closed(g0 * cplx(1.3), bounded_potential(g, seed + 7, 0.3));
    const auto dir = random_smooth_field(g, seed + 13, 3);
    const auto fd = fd_directional_derivative(twisted_map(g0, alpha, R), base, dir);
    const auto exact = apply_full_linearization(metric_from_potential(g0, base), alpha, R, dir);
    worst = std::max(worst, l2_norm(fd.derivative - exact) / l2_norm(exact));
    ++triples;
  };
  const auto g1 = PeriodicGrid::uniform(1, 64);
  for (std::uint64_t s = 0; s < 6; ++s) run(g1, unit(1), 100 + s, std::pow(3.0, static_cast<double>(s)) - 1.0);
  const auto g2 = PeriodicGrid::uniform(2, 16);
  for (std::uint64_t s = 0; s < 5; ++s) run(g2, skew_metric(), 200 + s, 2.0 * s);
  v.require(worst <= 1e-5, "relative error " + fmt("%.2e", worst));
  v.detail = std::to_string(triples) + " triples, worst relative error " + fmt("%.2e", worst) +
             (v.pass ? "" : ": " + v.detail);
  return v;
}

Verdict ladder_order_law() {
  Verdict v;
  const auto g = PeriodicGrid::uniform(1, 32);
  const auto k0 = metric_from_potential(unit(1), seed_potential(g));
  const std::vector<double> Rs{50.0, 100.0, 200.0, 400.0, 800.0};
  std::string slopes;
  for (int m = 1; m <= 3; ++m) {
    std::vector<double> res, scaled;
    for (double R : Rs) {
      const auto a = build_approximate_solution(k0, k0.metric(), R, m);
      res.push_back(a.residual_sup);
      scaled.push_back(a.residual_sup * std::pow(R, m));
    }
    const double slope = order_fit(Rs, res).slope;
    const auto [lo, hi] = std::minmax_element(scaled.begin(), scaled.end());
    v.require(std::abs(slope + m) <= 0.2, "m=" + std::to_string(m) + " slope " + fmt("%.3f", slope));
    v.require(*hi <= 2.0 * *lo, "m=" + std::to_string(m) + " R^m residual varies by " + fmt("%.2f", *hi / *lo));
    slopes += (m > 1 ? ", " : "") + fmt("%.3f", slope);
  }
  v.detail = "slopes " + slopes + (v.pass ? "" : ": " + v.detail);
  return v;
}

double metric_distance(const HMatrix& g0, const ScalarField& a, const ScalarField& b) {
  const auto ka = metric_from_potential(g0, a), kb = metric_from_potential(g0, b);
  double d = 0.0;
  for (int j = 0; j < ka.dim(); ++j)
    for (int l = 0; l < ka.dim(); ++l)
      d = std::max(d, sup_norm(ka.metric().component(j, l) - kb.metric().component(j, l)));
  return d;
}

Verdict end_to_end() {
  Verdict v;
  struct Seed {
    std::string name;
    HMatrix g0;
    HermitianFormField alpha;
  };
  const auto g1 = PeriodicGrid::uniform(1, 32);
  const auto g2 = PeriodicGrid::uniform(2, 16);
  std::vector<Seed> seeds;
  seeds.push_back({"n=1 seed form", unit(1), HermitianFormField::closed(unit(1), seed_potential(g1))});
  seeds.push_back({"n=1 scaled bump", unit(1), HermitianFormField::closed(unit(1) * cplx(2.0), cos_x(g1, 0.3))});
  seeds.push_back({"n=2 skew class", skew_metric(), HermitianFormField::closed(skew_metric(), bounded_potential(g2, 5, 0.2))});

  double worst_distance = 0.0;
  double r_star = 0.0;
  for (const auto& s : seeds) {
    const auto k0 = seed_structure(s.g0, s.alpha);
    double seed_r_star = std::numeric_limits<double>::infinity();
    for (double R : {400.0, 200.0, 100.0}) {
      const auto init = build_approximate_solution(k0, s.alpha, R, 2).potential;
      NewtonReport rep(k0.grid());
      try {
        rep = newton_solve(s.g0, s.alpha, R, init);
      } catch (const StagnationError& e) {
        rep = e.report();
      }
      const bool ok = rep.converged && rep.residual_history.back() <= 1e-9;
      v.require(ok, s.name + " failed at R=" + fmt("%g", R));
      if (!ok) break;
      seed_r_star = R;
      invariants.record(s.g0, rep.potential, s.alpha, R, rep.constant);
      if (R == 100.0) {
        const auto other = newton_solve(s.g0, s.alpha, R, k0.potential());
        v.require(other.converged, s.name + " second start failed");
        if (other.converged) worst_distance = std::max(worst_distance, metric_distance(s.g0, rep.potential, other.potential));
      }
    }
    r_star = std::max(r_star, seed_r_star);
  }
  v.require(std::isfinite(r_star), "R* not finite");
  v.require(worst_distance <= 1e-7, "start dependence " + fmt("%.2e", worst_distance));
  v.detail = "3 seeds, R* = " + fmt("%g", r_star) + ", metric agreement " + fmt("%.1e", worst_distance) +
             (v.pass ? "" : ": " + v.detail);
  return v;
}

Verdict eigenvalue_lemma() {
  Verdict v;
  const auto g = PeriodicGrid::uniform(1, 32);
  const auto flat = std::make_shared<const KahlerStructure>(flat_structure(g, unit(1)));
  double flat_err = 0.0;
  for (double R : {1.0, 10.0, 100.0}) {
    const auto est = extreme_eigenvalue(LinearOperatorHandle(OperatorKind::shifted, flat, flat->metric(), R));
    flat_err = std::max(flat_err, std::abs(est.eigenvalue - (-1.0 / 16.0 - R / 4.0)));
  }
  v.require(flat_err <= 1e-8, "flat error " + fmt("%.2e", flat_err));

  const auto k = std::make_shared<const KahlerStructure>(metric_from_potential(unit(1), seed_potential(g)));
  const std::vector<double> Rs{20.0, 40.0, 80.0, 160.0};
  std::vector<double> lams, norms;
  for (double R : Rs) {
    const LinearOperatorHandle op(OperatorKind::shifted, k, k->metric(), R);
    const auto est = extreme_eigenvalue(op);
    v.require(est.converged, "eigen solve at R=" + fmt("%g", R) + " did not converge");
    lams.push_back(est.eigenvalue);
    norms.push_back(inverse_norm_estimate(op).norm);
  }
  const double c2 = -(lams[1] - lams[0]) / (Rs[1] - Rs[0]);
  v.require(c2 > 0.0, "fitted C2 not positive");
  for (std::size_t i = 0; i < Rs.size(); ++i)
    v.require(lams[i] < -c2 * Rs[i], "lambda1 bound fails at R=" + fmt("%g", Rs[i]));
  const double growth = order_fit(Rs, norms).slope;
  v.require(growth <= 1.3, "inverse norm exponent " + fmt("%.3f", growth));
  v.detail = "flat error " + fmt("%.1e", flat_err) + ", C2 = " + fmt("%.4f", c2) + ", ||P|| exponent " +
             fmt("%.3f", growth) + (v.pass ? "" : ": " + v.detail);
  return v;
}

Verdict trivial_twist_check() {
  Verdict v;
  const auto g = PeriodicGrid::uniform(1, 32);
  const auto k = metric_from_potential(unit(1), seed_potential(g));
  const auto big = trivial_twist(k, k.metric(), 100.0);
  const auto tiny = trivial_twist(k, k.metric(), 1e-3);
  v.require(big.residual_sup <= 1e-8, "residual " + fmt("%.2e", big.residual_sup));
  v.require(big.positivity.positive, "alpha' not positive at R=100");
  v.require(!tiny.positivity.positive, "alpha' positive at R=1e-3");
  v.detail = "residual " + fmt("%.1e", big.residual_sup) + ", min eig " + fmt("%.3f", big.positivity.min_eigenvalue) +
             " at R=100, " + fmt("%.1f", tiny.positivity.min_eigenvalue) + " at R=1e-3" +
             (v.pass ? "" : ": " + v.detail);
  return v;
}

Verdict continuity_path() {
  Verdict v;
  const auto g = PeriodicGrid::uniform(1, 32);
  const auto alpha = HermitianFormField::closed(unit(1), cos_x(g, 0.2));
  std::vector<double> t;
  for (int i = 1; i <= 20; ++i) t.push_back(i / 20.0);
  const auto rep = continuity_sweep(unit(1), alpha, t);
  int converged = 0;
  for (const auto& s : rep.steps) {
    if (s.converged && s.residual_sup <= 1e-9) ++converged;
    if (s.potential) invariants.record(unit(1), *s.potential, alpha, s.R, s.constant);
  }
  v.require(converged == 20, std::to_string(converged) + "/20 steps converged");
  const double flatness = rep.steps.back().potential ? sup_norm(*rep.steps.back().potential) : INFINITY;
  v.require(flatness <= 1e-7, "t=1 potential sup " + fmt("%.2e", flatness));

  ThresholdOptions opt;
  const auto th = estimate_R_threshold(unit(1), alpha, {}, opt);
  v.require(th.threshold == 0.0 && th.R_ok - th.R_fail <= 1e-2, "threshold " + fmt("%g", th.threshold));
  v.detail = std::to_string(converged) + "/20 steps, t=1 sup " + fmt("%.1e", flatness) + ", threshold " +
             fmt("%g", th.threshold) + " bracket [" + fmt("%g", th.R_fail) + ", " + fmt("%g", th.R_ok) + "]" +
             (v.pass ? "" : ": " + v.detail);
  return v;
}

Verdict twist_perturbation() {
  Verdict v;
  const auto g = PeriodicGrid::uniform(1, 32);
  const auto k0 = metric_from_potential(unit(1), seed_potential(g));
  const auto alpha = k0.metric();
  const double R = 100.0;
  const auto base = newton_solve(unit(1), alpha, R, build_approximate_solution(k0, alpha, R, 2).potential);
  v.require(base.converged, "base solve failed");
  invariants.record(unit(1), base.potential, alpha, R, base.constant);

  const auto nudged = alpha.plus_ddbar(cos_x(g, 1e-3));
  const auto moved = perturb_twist(unit(1), base.potential, nudged, R);
  v.require(moved.converged && moved.iterations <= 4, "perturbation took " + std::to_string(moved.iterations));
  if (moved.converged) invariants.record(unit(1), moved.potential, nudged, R, moved.constant);

  const auto far = alpha.plus_ddbar(cos_x(g, 0.2));
  const auto path = twist_continuation(unit(1), base.potential, alpha, far, R, 10);
  int ok = 0;
  for (const auto& s : path.steps) ok += s.converged ? 1 : 0;
  v.require(path.completed && ok == 10, std::to_string(ok) + "/10 continuation steps");
  v.detail = "nudge in " + std::to_string(moved.iterations) + " steps, continuation " + std::to_string(ok) + "/10" +
             (v.pass ? "" : ": " + v.detail);
  return v;
}

Verdict cohomology_invariants() {
  Verdict v;
  v.require(invariants.solutions > 0, "no solutions recorded");
  v.require(invariants.worst <= 1e-7, "worst deviation " + fmt("%.2e", invariants.worst));
  v.detail = std::to_string(invariants.solutions) + " solutions, worst deviation " + fmt("%.1e", invariants.worst) +
             (v.pass ? "" : ": " + v.detail);
  return v;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Verdict determinism() {
  Verdict v;
  auto cfg = default_config(ScenarioKind::verify_suite);
  cfg.seed = 11;
  std::vector<std::string> csv;
  for (int run = 0; run < 2; ++run) {
    const auto dir = fs::temp_directory_path() / ("twistk_acceptance_verify_" + std::to_string(run));
    fs::remove_all(dir);
    cfg.output = dir.string();
    const auto outcome = run_scenario(cfg);
    v.require(outcome.exit_code == 0, "verify suite run " + std::to_string(run) + " exited " +
                                          std::to_string(outcome.exit_code));
    csv.push_back(slurp(dir / "verify.csv"));
  }
  v.require(!csv[0].empty() && csv[0] == csv[1], "verify.csv differs between runs");
  v.detail = "two verify_suite runs, " + std::to_string(csv[0].size()) + "-byte verify.csv identical" +
             (v.pass ? "" : ": " + v.detail);
  return v;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* title;
    double budget_s;
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "dense F self-adjoint, negative definite, constant kernel", 60, dense_F_suite},
      {2, "full linearization matches finite differences", 120, linearization_suite},
      {3, "ladder residual order law", 180, ladder_order_law},
      {4, "Newton from the ladder converges, start independent", 300, end_to_end},
      {5, "first eigenvalue and inverse norm growth", 120, eigenvalue_lemma},
      {6, "trivial twist residual and positivity", 30, trivial_twist_check},
      {7, "continuity sweep to t = 1 and threshold 0", 300, continuity_path},
      {8, "twist perturbation and continuation", 120, twist_perturbation},
      {9, "cohomological averages on converged solutions", 60, cohomology_invariants},
      {10, "verify suite output is deterministic", 120, determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > c.budget_s) {
      v.pass = false;
      v.detail += "; runtime " + fmt("%.1f", secs) + " s over budget";
    }
    failures += v.pass ? 0 : 1;
    std::printf("AC%-2d %s  %s (%s) [%.1f s]\n", c.id, v.pass ? "PASS" : "FAIL", c.title, v.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "fixtures.hpp"
#include "twistk/oracle.hpp"
#include "twistk/perturbation.hpp"

using namespace twistk;
using namespace fixtures;

namespace {

const HMatrix kOne = scalar_matrix(1, 1.0);

KahlerStructure curved(const PeriodicGrid& g) { return metric_from_potential(kOne, seed_potential(g)); }

HermitianFormField bumped_twist(const PeriodicGrid& g, double amp = 0.2) {
  return HermitianFormField::closed(kOne, cos_x(g, amp));
}

double metric_distance(const KahlerStructure& a, const KahlerStructure& b) {
  double d = 0.0;
  for (int j = 0; j < a.dim(); ++j)
    for (int l = 0; l < a.dim(); ++l)
      d = std::max(d, sup_norm(a.metric().component(j, l) - b.metric().component(j, l)));
  return d;
}

}  // namespace

TEST_CASE("solver config validation") {
  SolverConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.damping_floor = 0.0;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
  cfg = {};
  cfg.newton_tolerance = -1.0;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
}

TEST_CASE("twisted residual") {
  const auto g = PeriodicGrid::uniform(1, 16);
  const auto flat = flat_structure(g, kOne);
  const auto tr = twisted_residual(flat, flat.metric(), 7.0);
  CHECK(sup_norm(tr.residual) == doctest::Approx(0.0));
  CHECK(tr.constant == doctest::Approx(-7.0));

  const PeriodicGrid g2(2, {8, 8, 8, 8});
  const auto flat2 = flat_structure(g2, diag2(1.0, 1.0));
  CHECK(twisted_residual(flat2, flat2.metric(), 3.0).constant == doctest::Approx(-6.0));

  const auto k = curved(PeriodicGrid::uniform(1, 32));
  const auto r0 = twisted_residual(k, k.metric(), 0.0);
  CHECK(sup_norm(r0.residual - scalar_curvature(k)) < 1e-12);
  for (double R : {0.0, 1.0, 50.0}) {
    const auto tr2 = twisted_residual(k, bumped_twist(k.grid()), R);
    CHECK(std::abs(volume_average(k, tr2.residual)) <= 1e-9 * std::max(1.0, sup_norm(tr2.residual)));
  }
}

TEST_CASE("trivial twist") {
  const auto g = PeriodicGrid::uniform(1, 32);
  const auto flat = flat_structure(g, kOne);
  const auto t0 = trivial_twist(flat, flat.metric(), 5.0);
  CHECK(sup_norm(t0.green) == 0.0);
  CHECK(t0.positivity.positive);
  CHECK(t0.residual_sup < 1e-12);

  const auto k = metric_from_potential(kOne, cos_x(g, 0.3));
  const auto alpha = HermitianFormField::constant(g, kOne);
  // Lambda of a constant form against a curved metric is not constant.
  CHECK_THROWS_AS(trivial_twist(k, alpha, 100.0), PreconditionError);

  const auto big = trivial_twist(k, k.metric(), 100.0);
  CHECK(big.positivity.positive);
  CHECK(big.residual_sup <= 1e-8);
  CHECK(big.alpha_prime.is_closed());

  const auto tiny = trivial_twist(k, k.metric(), 1e-3);
  CHECK_FALSE(tiny.positivity.positive);
  CHECK(tiny.positivity.min_eigenvalue < 0.0);
  CHECK(tiny.residual_sup <= 1e-8);

  CHECK_THROWS_AS(trivial_twist(k, k.metric(), 0.0), DomainError);
}

TEST_CASE("ladder on a flat base is trivial") {
  const auto g = PeriodicGrid::uniform(1, 16);
  const auto flat = flat_structure(g, kOne);
  const auto a = build_approximate_solution(flat, flat.metric(), 10.0, 3);
  REQUIRE(a.corrections.size() == 3);
  for (const auto& c : a.corrections) CHECK(sup_norm(c) == 0.0);
  CHECK(a.residual_sup == 0.0);
}

TEST_CASE("ladder residual order law") {
  const auto g = PeriodicGrid::uniform(1, 32);
  const auto k0 = curved(g);
  const std::vector<double> Rs{50.0, 100.0, 200.0, 400.0, 800.0};
  for (int m = 1; m <= 3; ++m) {
    std::vector<double> res, scaled;
    for (double R : Rs) {
      const auto a = build_approximate_solution(k0, k0.metric(), R, m);
      // Recorded residual agrees with a fresh evaluation.
      const auto again = twisted_residual(metric_from_potential(kOne, a.potential), k0.metric(), R);
      CHECK(std::abs(sup_norm(again.residual) - a.residual_sup) <= 1e-10);
      CHECK(std::abs(volume_average(k0, a.offset)) < 1e-10);
      res.push_back(a.residual_sup);
      scaled.push_back(a.residual_sup * std::pow(R, m));
    }
    const auto fit = order_fit(Rs, res);
    CAPTURE(m);
    CAPTURE(fit.slope);
    CHECK(std::abs(fit.slope + m) <= 0.2);
    const auto [lo, hi] = std::minmax_element(scaled.begin(), scaled.end());
    CHECK(*hi <= 2.0 * *lo);
  }
  const auto m1 = build_approximate_solution(k0, k0.metric(), 100.0, 1);
  const auto m3 = build_approximate_solution(k0, k0.metric(), 100.0, 3);
  CHECK(m3.residual_sup * 500.0 <= m1.residual_sup);
  // Stage one solves F(phi_1) = -(S - S-bar).
  CHECK(l2_norm(apply_F(k0, k0.metric(), m1.corrections[0]) + scalar_curvature(k0)) <
        1e-8 * l2_norm(scalar_curvature(k0)));
}

TEST_CASE("ladder reports the failing stage") {
  const auto g = PeriodicGrid::uniform(1, 32);
  const auto k0 = metric_from_potential(kOne, seed_potential(g, 0.9));
  try {
    (void)build_approximate_solution(k0, k0.metric(), 0.01, 2);
    FAIL("expected a degenerate metric");
  } catch (const DegenerateMetricError& e) {
    CHECK(std::string(e.what()).find("ladder stage") != std::string::npos);
  }
}

TEST_CASE("Newton on a flat torus") {
  const auto g = PeriodicGrid::uniform(1, 32);
  for (double R : {1.0, 10.0, 100.0}) {
    const auto rep = newton_solve(kOne, HermitianFormField::constant(g, kOne), R, cos_x(g, 1e-3));
    CHECK(rep.converged);
    CHECK(rep.iterations <= 5);
    CHECK(sup_norm(rep.potential) < 1e-9);
    for (std::size_t i = 1; i < rep.residual_history.size(); ++i)
      CHECK(rep.residual_history[i] < rep.residual_history[i - 1]);
  }
}

TEST_CASE("Newton with a non-trivial twist") {
  const auto g = PeriodicGrid::uniform(1, 32);
  const auto alpha = bumped_twist(g);
  const double R = 100.0;
  // The ladder needs Lambda alpha constant, so it starts from omega_0 := alpha.
  const auto ladder = build_approximate_solution(seed_structure(kOne, alpha), alpha, R, 2);
  const auto rep = newton_solve(kOne, alpha, R, ladder.potential);
  REQUIRE(rep.converged);
  const auto k = metric_from_potential(kOne, rep.potential);
  const auto check = twisted_residual(k, alpha, R);
  CHECK(sup_norm(check.residual) <= 1e-9);
  CHECK(std::abs(volume_average(k, rep.potential)) < 1e-12);

  // Cohomological constants.
  CHECK(std::abs(volume_average(k, scalar_curvature(k))) < 1e-7);
  CHECK(std::abs(volume_average(k, trace_form(k, alpha)) - 1.0) < 1e-7);
  CHECK(std::abs(rep.constant - (0.0 - R * 1.0)) < 1e-7);

  // A different start reaches the same metric.
  const auto other = newton_solve(kOne, alpha, R, cos_x(g, 1e-3));
  REQUIRE(other.converged);
  CHECK(metric_distance(k, metric_from_potential(kOne, other.potential)) < 1e-7);

  // The full linearization reduces to the shifted operator at a solution
  // up to the residual times the metric variation.
  const auto psi = random_potential(g, 11);
  CHECK(l2_norm(apply_full_linearization(k, alpha, R, psi) - apply_shifted(k, alpha, R, psi)) <
        1e-6 * l2_norm(apply_shifted(k, alpha, R, psi)));

  // Adding a constant to the potential changes nothing beyond roundoff.
  CHECK(metric_distance(k, metric_from_potential(kOne, rep.potential + ScalarField(g, 3.0))) < 1e-13);
}

TEST_CASE("Newton relative overload and dealiasing") {
  const auto g = PeriodicGrid::uniform(1, 32);
  const auto k0 = curved(g);
  SolverConfig cfg;
  cfg.dealias = true;
  const auto rep = newton_solve(k0, k0.metric(), 50.0, ScalarField(g), cfg);
  CHECK(rep.converged);
  const auto plain = newton_solve(k0, k0.metric(), 50.0, ScalarField(g));
  CHECK(plain.converged);
  CHECK(sup_norm(rep.potential - plain.potential) < 1e-6);
}

TEST_CASE("Newton stagnation carries its report") {
  const auto g = PeriodicGrid::uniform(1, 32);
  SolverConfig cfg;
  cfg.damping_floor = 0.49;
  cfg.max_newton_iterations = 40;
  // A far start with almost no damping allowed.
  const auto alpha = bumped_twist(g, 0.6);
  try {
    const auto rep = newton_solve(kOne, alpha, 0.0, seed_potential(g, 1.5), cfg);
    CHECK(rep.converged);  // acceptable outcome if full steps happen to work
  } catch (const StagnationError& e) {
    CHECK_FALSE(e.report().converged);
    CHECK_FALSE(e.report().residual_history.empty());
  }
}

TEST_CASE("IFT certificate") {
  const auto g = PeriodicGrid::uniform(1, 32);
  const auto flat = flat_structure(g, kOne);
  const auto exact = ift_certificate(flat, flat.metric(), 10.0);
  CHECK(exact.defect == doctest::Approx(0.0));
  CHECK(exact.verdict == IFTVerdict::solvable);
  CHECK(exact.radius == doctest::Approx(exact.lipschitz_radius / (2.0 * exact.inverse_norm)));

  const auto k0 = curved(g);
  const double R = 200.0;
  const auto m1 = build_approximate_solution(k0, k0.metric(), R, 1);
  const auto m3 = build_approximate_solution(k0, k0.metric(), R, 3);
  const auto c1 = ift_certificate(metric_from_potential(kOne, m1.potential), k0.metric(), R);
  const auto c3 = ift_certificate(metric_from_potential(kOne, m3.potential), k0.metric(), R);
  CHECK(c3.verdict == IFTVerdict::solvable);
  CHECK(c3.defect < c1.defect);
  CHECK((c3.defect < c3.radius) == (c3.verdict == IFTVerdict::solvable));

  IFTSampling starved;
  starved.max_rounds = 1;
  starved.initial_radius = 1e6;
  CHECK(ift_certificate(metric_from_potential(kOne, m1.potential), k0.metric(), R, starved).verdict ==
        IFTVerdict::inconclusive);
  CHECK(std::string(to_string(IFTVerdict::inconclusive)) == "inconclusive");
}

TEST_CASE("inverse norm grows at most linearly") {
  const auto g = PeriodicGrid::uniform(1, 32);
  const auto k0 = share(curved(g));
  std::vector<double> Rs{25.0, 50.0, 100.0, 200.0}, norms;
  for (double R : Rs) {
    const LinearOperatorHandle op(OperatorKind::shifted, k0, k0->metric(), R);
    norms.push_back(inverse_norm_estimate(op, {}, 20).norm);
  }
  CHECK(order_fit(Rs, norms).slope <= 1.3);
}

TEST_CASE("twist perturbation") {
  const auto g = PeriodicGrid::uniform(1, 32);
  const auto k0 = curved(g);
  const double R = 100.0;
  const auto alpha = k0.metric();
  const auto base = newton_solve(kOne, alpha, R, build_approximate_solution(k0, alpha, R, 2).potential);
  REQUIRE(base.converged);

  const auto same = perturb_twist(kOne, base.potential, alpha, R);
  CHECK(same.converged);
  CHECK(same.iterations == 0);

  const auto nudged = alpha.plus_ddbar(cos_x(g, 1e-3));
  const auto moved = perturb_twist(kOne, base.potential, nudged, R);
  CHECK(moved.converged);
  CHECK(moved.iterations <= 4);

  const auto far = alpha.plus_ddbar(cos_x(g, 0.2));
  const auto path = twist_continuation(kOne, base.potential, alpha, far, R, 10);
  CHECK(path.completed);
  REQUIRE(path.steps.size() == 10);
  for (const auto& s : path.steps) CHECK(s.converged);
  CHECK(path.last_success == 1.0);
  const auto direct = newton_solve(kOne, far, R, path.potential);
  CHECK(direct.iterations == 0);
}

TEST_CASE("seed structure") {
  const auto g = PeriodicGrid::uniform(1, 16);
  const auto alpha = HermitianFormField::closed(scalar_matrix(1, 2.0), cos_x(g, 0.4));
  const auto k = seed_structure(kOne, alpha);
  const auto tr = trace_form(k, alpha);
  CHECK(sup_norm(tr - ScalarField(g, 2.0)) < 1e-12);

  const PeriodicGrid g2(2, {8, 8, 8, 8});
  const auto skew = HermitianFormField::closed(diag2(1.0, 2.0), ScalarField(g2));
  CHECK_NOTHROW(seed_structure(diag2(1.0, 1.0), skew));
  const auto bent = HermitianFormField::closed(diag2(1.0, 2.0), random_potential(g2, 2, 0.1));
  CHECK_THROWS_AS(seed_structure(diag2(1.0, 1.0), bent), PreconditionError);
}

TEST_CASE("continuity sweep, flat twist") {
  const auto g = PeriodicGrid::uniform(1, 16);
  const std::vector<double> t{0.1, 0.3, 0.5, 0.7, 0.9, 1.0};
  const auto rep = continuity_sweep(kOne, HermitianFormField::constant(g, kOne), t);
  CHECK(rep.all_converged);
  CHECK(rep.smallest_R == 0.0);
  REQUIRE(rep.steps.back().potential);
  CHECK(sup_norm(*rep.steps.back().potential) <= 1e-7);
  for (const auto& s : rep.steps) {
    CHECK(s.residual_sup <= 1e-9);
    // Flat: lambda_1 = -1/16 - R/4 at the first mode; R/4 + 1/16 for unit metric.
    CHECK(s.lambda1 == doctest::Approx(-1.0 / 16.0 - s.R / 4.0).epsilon(1e-8));
  }

  const std::vector<double> bad{0.5, 0.4};
  CHECK_THROWS_AS(continuity_sweep(kOne, HermitianFormField::constant(g, kOne), bad), DomainError);
  const std::vector<double> zero{0.0, 0.5};
  CHECK_THROWS_AS(continuity_sweep(kOne, HermitianFormField::constant(g, kOne), zero), DomainError);
}

TEST_CASE("continuity sweep, bumped twist") {
  const auto g = PeriodicGrid::uniform(1, 32);
  const auto alpha = bumped_twist(g);
  std::vector<double> t;
  for (int i = 1; i <= 20; ++i) t.push_back(i / 20.0);
  const auto rep = continuity_sweep(kOne, alpha, t);
  CHECK(rep.all_converged);
  CHECK_FALSE(rep.failure_R);
  REQUIRE(rep.steps.back().potential);
  CHECK(sup_norm(*rep.steps.back().potential) <= 1e-7);
  CHECK(rep.steps.front().warm_start.rfind("ladder", 0) == 0);
  for (std::size_t i = 0; i < rep.steps.size(); ++i) {
    const auto& s = rep.steps[i];
    CHECK(s.converged);
    CHECK(s.residual_sup <= 1e-9);
    if (i > 0) CHECK(s.R < rep.steps[i - 1].R);
    if (s.R > 0.0) CHECK(s.lambda1 / s.R < -0.05);
    CHECK(s.lambda1 < 0.0);
  }

  // Halving the step halves the gap between consecutive potentials.
  auto gap = [&](double dt) {
    const std::vector<double> pair{0.5, 0.5 + dt};
    const auto r = continuity_sweep(kOne, alpha, pair, {}, {2, false});
    return sup_norm(*r.steps[1].potential - *r.steps[0].potential);
  };
  const double coarse = gap(0.1), fine = gap(0.05);
  CHECK(fine < 0.7 * coarse);
}

TEST_CASE("threshold search") {
  const auto g = PeriodicGrid::uniform(1, 16);
  ThresholdOptions opt;
  opt.R_start = 8.0;
  const auto flat = estimate_R_threshold(kOne, HermitianFormField::constant(g, kOne), {}, opt);
  CHECK(flat.reached_zero);
  CHECK(flat.threshold == 0.0);

  const auto bumped = estimate_R_threshold(kOne, bumped_twist(PeriodicGrid::uniform(1, 32)), {}, opt);
  CHECK(bumped.reached_zero);
  CHECK(bumped.threshold == 0.0);
  CHECK(bumped.R_ok - bumped.R_fail <= 1e-2);
  for (const auto& s : bumped.steps) CHECK(s.converged);

  // A starved Newton budget fails before zero and must bisect to tolerance.
  SolverConfig tight;
  tight.max_newton_iterations = 1;
  opt.bisection_tolerance = 0.05;
  const auto frontier = estimate_R_threshold(kOne, bumped_twist(PeriodicGrid::uniform(1, 32), 0.4), tight, opt);
  if (!frontier.reached_zero && std::isfinite(frontier.threshold))
    CHECK(frontier.R_ok - frontier.R_fail <= opt.bisection_tolerance);

  ThresholdOptions broken;
  broken.factor = 1.5;
  CHECK_THROWS_AS(estimate_R_threshold(kOne, HermitianFormField::constant(g, kOne), {}, broken), DomainError);
}

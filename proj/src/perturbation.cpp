#include "twistk/perturbation.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>

namespace twistk {

namespace {

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

std::shared_ptr<const KahlerStructure> borrow(const KahlerStructure& k) {
  return std::shared_ptr<const KahlerStructure>(std::shared_ptr<const void>(), &k);
}

ScalarField galerkin(const ScalarField& f, bool dealias) {
  return dealias ? truncate_two_thirds(f) : f;
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

HermitianFormField blend(const HermitianFormField& a, const HermitianFormField& b, double f) {
  if (a.is_closed() && b.is_closed())
    return HermitianFormField::closed(a.constant_part() * cplx(1.0 - f) + b.constant_part() * cplx(f),
                                      a.potential() * (1.0 - f) + b.potential() * f);
  std::vector<ComplexField> comps;
  for (int j = 0; j < a.dim(); ++j)
    for (int l = 0; l < a.dim(); ++l)
      comps.push_back(a.component(j, l) * cplx(1.0 - f) + b.component(j, l) * cplx(f));
  return HermitianFormField(a.grid(), std::move(comps));
}

}  // namespace

void SolverConfig::validate() const {
  if (!(newton_tolerance > 0.0)) throw DomainError("Newton tolerance must be positive");
  if (max_newton_iterations < 0) throw DomainError("Newton iteration cap must be >= 0");
  if (!(damping_floor > 0.0 && damping_floor < 1.0)) throw DomainError("damping floor must lie in (0, 1)");
  krylov.validate();
  newton_linear.validate();
}

TwistedResidual twisted_residual(const KahlerStructure& k, const HermitianFormField& alpha, double R) {
  const auto s = scalar_curvature(k);
  const auto trace = trace_form(k, alpha);
  ScalarField raw = s - trace * R;
  double constant;
  if (alpha.is_closed()) {
    const auto coh = cohomology(k.g0(), alpha.constant_part());
    constant = coh.scalar_average() - R * coh.trace_average();
  } else {
    constant = volume_average(k, raw);
  }
  raw += -constant;
  return {std::move(raw), constant};
}

TrivialTwist trivial_twist(const KahlerStructure& k, const HermitianFormField& alpha, double R,
                           const KrylovConfig& cfg) {
  if (!(R > 0.0)) throw DomainError("trivial twist needs R > 0");
  const auto trace = trace_form(k, alpha);
  const double spread = sup_norm(trace - ScalarField(k.grid(), euclidean_mean(trace)));
  if (spread > 1e-8)
    throw PreconditionError("trivial twist needs Lambda_omega alpha constant; sup deviation is " + sci(spread));

  const auto s = scalar_curvature(k);
  const double s_bar = volume_average(k, s);
  auto green = green_solve(k, s - ScalarField(k.grid(), s_bar), cfg);
  const auto extra = green * (1.0 / R);
  HermitianFormField alpha_prime = [&] {
    if (alpha.is_closed()) return alpha.plus_ddbar(extra);
    const auto d = ddbar_components(extra);
    std::vector<ComplexField> comps;
    for (int j = 0; j < alpha.dim(); ++j)
      for (int l = 0; l < alpha.dim(); ++l) comps.push_back(alpha.component(j, l) + d[j * alpha.dim() + l]);
    return HermitianFormField(alpha.grid(), std::move(comps));
  }();

  std::size_t where = 0;
  const double lo = alpha_prime.min_eigenvalue(&where);
  const auto eq = s - trace_form(k, alpha_prime) * R;
  const double constant = volume_average(k, eq);
  const double residual = sup_norm(eq - ScalarField(k.grid(), constant));
  return {std::move(alpha_prime), std::move(green), {lo, where, lo > 0.0}, residual, constant};
}

ApproximateSolution build_approximate_solution(const KahlerStructure& k0, const HermitianFormField& alpha,
                                               double R, int order, const SolverConfig& cfg) {
  cfg.validate();
  if (!(R > 0.0)) throw DomainError("ladder needs R > 0");
  if (order < 0) throw DomainError("ladder order must be >= 0");
  const auto& grid = k0.grid();

  ApproximateSolution out{order, R, {}, ScalarField(grid), k0.potential(), ScalarField(grid),
                          0.0, 0.0, 0.0, {}};
  auto current = twisted_residual(k0, alpha, R);
  out.stage_residual_sup.push_back(sup_norm(current.residual));

  for (int i = 1; i <= order; ++i) {
    const auto rhs = -project_mean_zero(k0, current.residual);
    const auto delta = solve_F(k0, alpha, rhs, cfg.krylov);
    out.corrections.push_back(delta * std::pow(R, i - 1));
    out.offset += delta * (1.0 / R);
    out.potential = k0.potential() + out.offset;
    try {
      const auto k = metric_from_potential(k0.g0(), out.potential);
      current = twisted_residual(k, alpha, R);
    } catch (const DegenerateMetricError& e) {
      throw DegenerateMetricError(e.point(), e.eigenvalue(),
                                  "ladder stage " + std::to_string(i) + " at R = " + sci(R));
    }
    out.stage_residual_sup.push_back(sup_norm(current.residual));
  }
  out.constant = current.constant;
  out.residual_sup = sup_norm(current.residual);
  out.residual_l2 = l2_norm(current.residual);
  out.residual = std::move(current.residual);
  return out;
}

NewtonReport newton_solve(const HMatrix& g0, const HermitianFormField& alpha, double R,
                          const ScalarField& initial, const SolverConfig& cfg) {
  cfg.validate();
  if (R < 0.0) throw DomainError("R must be >= 0");
  NewtonReport report(initial.grid());
  ScalarField phi = galerkin(initial, cfg.dealias);
  auto k = metric_from_potential(g0, phi);
  auto tr = twisted_residual(k, alpha, R);
  ScalarField res = galerkin(tr.residual, cfg.dealias);
  double rs = sup_norm(res);
  report.residual_history.push_back(rs);

  auto finish = [&]() {
    report.converged = rs <= cfg.newton_tolerance;
    report.constant = tr.constant;
    report.residual_l2 = l2_norm(res);
    const double shift = volume_average(k, phi);
    report.potential = phi - ScalarField(phi.grid(), shift);
  };

  while (rs > cfg.newton_tolerance && report.iterations < cfg.max_newton_iterations) {
    KrylovConfig lin = cfg.newton_linear;
    lin.tolerance = std::clamp(std::min(lin.tolerance, rs), 1e-10, 1e-2);
    KrylovResult step{ScalarField(phi.grid()), 0, {}};
    try {
      step = solve_linearization(k, alpha, R, -res, lin);
    } catch (const IterationLimitError& e) {
      finish();
      throw StagnationError("Newton linear solve failed at iteration " +
                                std::to_string(report.iterations + 1) + ": " + e.what(),
                            report);
    }
    report.linear_iterations.push_back(step.iterations);
    const ScalarField delta = galerkin(step.solution, cfg.dealias);

    double s = 1.0;
    for (;;) {
      if (s < cfg.damping_floor) {
        finish();
        throw StagnationError("Newton line search fell below step " + sci(cfg.damping_floor) +
                                  " at residual " + sci(rs),
                              report);
      }
      try {
        const ScalarField trial = phi + delta * s;
        auto k_trial = metric_from_potential(g0, trial);
        auto tr_trial = twisted_residual(k_trial, alpha, R);
        ScalarField res_trial = galerkin(tr_trial.residual, cfg.dealias);
        const double rs_trial = sup_norm(res_trial);
        if (rs_trial < rs) {
          report.contraction = rs_trial / rs;
          phi = trial;
          k = std::move(k_trial);
          tr = std::move(tr_trial);
          res = std::move(res_trial);
          rs = rs_trial;
          break;
        }
      } catch (const DegenerateMetricError&) {
        // rejected step; shorten
      }
      s *= 0.5;
      ++report.damping_steps;
    }
    ++report.iterations;
    report.residual_history.push_back(rs);
  }
  finish();
  return report;
}

NewtonReport newton_solve(const KahlerStructure& k0, const HermitianFormField& alpha, double R,
                          const ScalarField& relative_initial, const SolverConfig& cfg) {
  return newton_solve(k0.g0(), alpha, R, k0.potential() + relative_initial, cfg);
}

const char* to_string(IFTVerdict v) {
  switch (v) {
    case IFTVerdict::solvable:
      return "solvable";
    case IFTVerdict::not_solvable:
      return "not_solvable";
    case IFTVerdict::inconclusive:
      return "inconclusive";
  }
  return "inconclusive";
}

IFTCertificate ift_certificate(const KahlerStructure& km, const HermitianFormField& alpha, double R,
                               const IFTSampling& sampling, const KrylovConfig& cfg) {
  if (!(R > 0.0)) throw DomainError("IFT certificate needs R > 0");
  if (!(sampling.shrink > 0.0 && sampling.shrink < 1.0) || sampling.max_rounds < 1 ||
      sampling.samples_per_round < 1 || !(sampling.initial_radius > 0.0))
    throw DomainError("invalid IFT sampling configuration");
  const auto& grid = km.grid();
  const auto base = twisted_residual(km, alpha, R);

  IFTCertificate cert{};
  cert.defect = sobolev_norm(base.residual, 0.0);
  const LinearOperatorHandle shifted(OperatorKind::shifted, borrow(km), alpha, R);
  cert.inverse_norm = inverse_norm_estimate(shifted, cfg, sampling.inverse_norm_iterations, sampling.seed).norm;
  const double target_quotient = 1.0 / (2.0 * cert.inverse_norm);

  // Nonlinear remainder T(phi) - T(0) - DT(phi).
  auto remainder = [&](const ScalarField& phi) {
    const auto k = metric_from_potential(km.g0(), km.potential() + phi);
    return twisted_residual(k, alpha, R).residual - base.residual -
           apply_full_linearization(km, alpha, R, phi);
  };
  auto sample = [&](std::uint64_t seed, double radius) {
    auto f = random_smooth_field(grid, seed, 3);
    const double scale = 0.25 + 0.75 * std::fmod(static_cast<double>(seed % 1009) * 0.618033988749895, 1.0);
    return f * (radius * scale / sobolev_norm(f, 4.0));
  };

  double radius = sampling.initial_radius;
  for (int round = 1; round <= sampling.max_rounds; ++round) {
    cert.rounds = round;
    double worst = 0.0;
    bool valid = true;
    for (int i = 0; i < sampling.samples_per_round && valid; ++i) {
      const std::uint64_t seed = sampling.seed * 1000003ULL + static_cast<std::uint64_t>(round) * 101ULL +
                                 static_cast<std::uint64_t>(i) * 2ULL;
      const auto a = sample(seed, radius);
      const auto b = sample(seed + 1, radius);
      try {
        const double q = sobolev_norm(remainder(a) - remainder(b), 0.0) / sobolev_norm(a - b, 4.0);
        worst = std::max(worst, q);
      } catch (const DegenerateMetricError&) {
        valid = false;
      }
    }
    cert.worst_quotient = valid ? worst : std::numeric_limits<double>::infinity();
    if (valid && worst <= target_quotient) {
      cert.lipschitz_radius = radius;
      cert.radius = radius / (2.0 * cert.inverse_norm);
      cert.verdict = cert.defect < cert.radius ? IFTVerdict::solvable : IFTVerdict::not_solvable;
      return cert;
    }
    radius *= sampling.shrink;
  }
  cert.verdict = IFTVerdict::inconclusive;
  return cert;
}

NewtonReport perturb_twist(const HMatrix& g0, const ScalarField& solved_potential,
                           const HermitianFormField& alpha_new, double R, const SolverConfig& cfg) {
  try {
    return newton_solve(g0, alpha_new, R, solved_potential, cfg);
  } catch (const StagnationError& e) {
    return e.report();
  }
}

TwistContinuationReport twist_continuation(const HMatrix& g0, const ScalarField& solved_potential,
                                           const HermitianFormField& alpha_old,
                                           const HermitianFormField& alpha_new, double R, int steps,
                                           const SolverConfig& cfg) {
  if (steps < 1) throw DomainError("twist continuation needs at least one step");
  TwistContinuationReport out{{}, solved_potential, true, 0.0, 1.0};
  for (int i = 1; i <= steps; ++i) {
    const double f = static_cast<double>(i) / steps;
    NewtonReport rep(solved_potential.grid());
    try {
      rep = perturb_twist(g0, out.potential, blend(alpha_old, alpha_new, f), R, cfg);
    } catch (const Error&) {
      rep.converged = false;
    }
    const double last = rep.residual_history.empty() ? std::numeric_limits<double>::infinity()
                                                      : rep.residual_history.back();
    out.steps.push_back({f, rep.converged, rep.iterations, last});
    if (!rep.converged) {
      out.completed = false;
      out.first_failure = f;
      break;
    }
    out.potential = rep.potential;
    out.last_success = f;
  }
  return out;
}

KahlerStructure seed_structure(const HMatrix& g0_omega, const HermitianFormField& alpha) {
  if (!alpha.is_closed()) throw PreconditionError("continuity seed needs a closed twist form");
  const HMatrix& a0 = alpha.constant_part();
  const auto& grid = alpha.grid();
  if (sup_norm(alpha.potential()) == 0.0) return flat_structure(grid, g0_omega);
  const double c = a0(0, 0).real() / g0_omega(0, 0).real();
  const double mismatch = (a0 - g0_omega * cplx(c)).cwiseAbs().maxCoeff();
  if (!(c > 0.0) || mismatch > 1e-12 * a0.cwiseAbs().maxCoeff())
    throw PreconditionError("continuity seed omega_0 := alpha needs [alpha] proportional to [omega]");
  return metric_from_potential(g0_omega, alpha.potential() * (1.0 / c));
}

namespace {

struct Attempt {
  NewtonReport report;
  bool converged;
};

Attempt attempt_newton(const HMatrix& g0, const HermitianFormField& alpha, double R,
                       const ScalarField& init, const SolverConfig& cfg) {
  Attempt a{NewtonReport(init.grid()), false};
  try {
    a.report = newton_solve(g0, alpha, R, init, cfg);
  } catch (const StagnationError& e) {
    a.report = e.report();
  } catch (const Error&) {
    a.report.converged = false;
  }
  a.converged = a.report.converged;
  return a;
}

SweepStep record(double t, double R, const Attempt& a, std::string source, double ms) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  SweepStep step{t, R, a.converged, a.report.iterations,
                 a.report.residual_history.empty() ? nan : a.report.residual_history.back(),
                 a.report.residual_l2, nan, std::move(source), ms, a.report.constant, std::nullopt};
  if (a.converged) step.potential = a.report.potential;
  return step;
}

// Ladder start for the first step, falling back to the seed itself.
std::pair<ScalarField, std::string> ladder_start(const KahlerStructure& k0, const HermitianFormField& alpha,
                                                 double R, int order, const SolverConfig& cfg) {
  if (R > 0.0 && order > 0) {
    try {
      return {build_approximate_solution(k0, alpha, R, order, cfg).potential,
              "ladder(m=" + std::to_string(order) + ")"};
    } catch (const Error&) {
    }
  }
  return {k0.potential(), "seed"};
}

}  // namespace

ContinuationReport continuity_sweep(const HMatrix& g0_omega, const HermitianFormField& alpha,
                                    std::span<const double> t, const SolverConfig& cfg,
                                    const SweepOptions& options) {
  if (t.empty()) throw DomainError("continuity sweep needs a non-empty t grid");
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t[i] > 0.0 && t[i] <= 1.0)) throw DomainError("t values must lie in (0, 1]");
    if (i > 0 && !(t[i] > t[i - 1])) throw DomainError("t grid must be strictly increasing");
  }
  const auto k0 = seed_structure(g0_omega, alpha);

  ContinuationReport out{{}, true, std::numeric_limits<double>::infinity(), std::nullopt};
  std::optional<ScalarField> warm;
  double warm_t = 0.0;
  for (double ti : t) {
    const double R = (1.0 - ti) / ti;
    const auto start = std::chrono::steady_clock::now();
    ScalarField init = k0.potential();
    std::string source;
    if (warm) {
      init = *warm;
      char buf[48];
      std::snprintf(buf, sizeof buf, "previous(t=%.6g)", warm_t);
      source = buf;
    } else {
      std::tie(init, source) = ladder_start(k0, alpha, R, options.ladder_order, cfg);
    }
    const auto a = attempt_newton(g0_omega, alpha, R, init, cfg);
    auto step = record(ti, R, a, source, 0.0);
    if (a.converged) {
      warm = a.report.potential;
      warm_t = ti;
      out.smallest_R = std::min(out.smallest_R, R);
      if (options.eigenvalues) {
        const auto k = std::make_shared<const KahlerStructure>(metric_from_potential(g0_omega, *warm));
        const LinearOperatorHandle op(OperatorKind::shifted, k, alpha, R);
        try {
          step.lambda1 = extreme_eigenvalue(op, cfg.eigen).eigenvalue;
        } catch (const Error&) {
        }
      }
    } else {
      out.all_converged = false;
      if (!out.failure_R) out.failure_R = R;
    }
    step.wall_ms = elapsed_ms(start);
    out.steps.push_back(std::move(step));
  }
  return out;
}

ThresholdReport estimate_R_threshold(const HMatrix& g0_omega, const HermitianFormField& alpha,
                                     const SolverConfig& cfg, const ThresholdOptions& options) {
  if (!(options.R_start > 0.0) || !(options.R_min > 0.0) || options.R_min > options.R_start ||
      !(options.factor > 0.0 && options.factor < 1.0) || !(options.bisection_tolerance > 0.0))
    throw DomainError("invalid threshold options");
  const auto k0 = seed_structure(g0_omega, alpha);
  const double inf = std::numeric_limits<double>::infinity();
  ThresholdReport out{inf, options.R_start, inf, false, {}};

  ScalarField good(k0.grid());
  auto run = [&](double R, const ScalarField& init, std::string source) {
    const auto start = std::chrono::steady_clock::now();
    const auto a = attempt_newton(g0_omega, alpha, R, init, cfg);
    out.steps.push_back(record(1.0 / (1.0 + R), R, a, std::move(source), elapsed_ms(start)));
    if (a.converged) good = a.report.potential;
    return a.converged;
  };

  auto [init, source] = ladder_start(k0, alpha, options.R_start, options.ladder_order, cfg);
  if (!run(options.R_start, init, source)) return out;
  double ok = options.R_start;
  double fail = -1.0;
  for (double R = options.R_start * options.factor; R >= options.R_min; R *= options.factor) {
    if (run(R, good, "previous")) {
      ok = R;
    } else {
      fail = R;
      break;
    }
  }
  if (fail < 0.0) {
    if (run(0.0, good, "previous")) {
      out.threshold = out.R_ok = out.R_fail = 0.0;
      out.reached_zero = true;
      return out;
    }
    fail = 0.0;
  }
  while (ok - fail > options.bisection_tolerance) {
    const double mid = 0.5 * (ok + fail);
    if (run(mid, good, "bisection"))
      ok = mid;
    else
      fail = mid;
  }
  out.threshold = out.R_ok = ok;
  out.R_fail = fail;
  return out;
}

}  // namespace twistk

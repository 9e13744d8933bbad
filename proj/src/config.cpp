#include "twistk/config.hpp"

#include <cmath>
#include <functional>
#include <set>

#include <yaml-cpp/yaml.h>

namespace twistk {

namespace {

constexpr const char* kScenarioNames[] = {"single_solve", "ladder_study",       "continuity_sweep",
                                          "threshold",    "twist_perturbation", "verify_suite"};

std::string describe(const std::vector<Diagnostic>& ds) {
  std::string out = "invalid configuration";
  for (const auto& d : ds) {
    out += "\n  ";
    if (d.line > 0) out += std::to_string(d.line) + ":" + std::to_string(d.column) + ": ";
    out += d.path + ": " + d.message;
  }
  return out;
}

bool power_of_two_size(int s) { return s >= 8 && (s & (s - 1)) == 0; }

/// Collects diagnostics while reading a YAML tree.
class Reader {
 public:
  std::vector<Diagnostic> diagnostics;

  void report(const YAML::Node& node, const std::string& path, const std::string& message) {
    const auto mark = node.Mark();
    const bool known = mark.line >= 0;
    diagnostics.push_back({known ? mark.line + 1 : 0, known ? mark.column + 1 : 0, path, message});
  }

  void check_keys(const YAML::Node& map, const std::string& path, const std::set<std::string>& allowed) {
    for (const auto& kv : map) {
      const auto key = kv.first.as<std::string>();
      if (!allowed.count(key)) report(kv.first, join(path, key), "unknown key");
    }
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

  template <class T>
  bool scalar(const YAML::Node& node, const std::string& path, T& out) {
    if (!node.IsScalar()) {
      report(node, path, "expected a scalar");
      return false;
    }
    try {
      out = node.as<T>();
    } catch (const YAML::Exception&) {
      report(node, path, std::string("cannot read '") + node.Scalar() + "' as " + type_name<T>());
      return false;
    }
    if constexpr (std::is_floating_point_v<T>) {
      if (!std::isfinite(out)) {
        report(node, path, "must be finite");
        return false;
      }
    }
    return true;
  }

  template <class T>
  bool sequence(const YAML::Node& node, const std::string& path, std::vector<T>& out) {
    if (!node.IsSequence()) {
      report(node, path, "expected a sequence");
      return false;
    }
    std::vector<T> values;
    bool ok = true;
    for (std::size_t i = 0; i < node.size(); ++i) {
      T v{};
      ok = scalar(node[i], path + "[" + std::to_string(i) + "]", v) && ok;
      values.push_back(v);
    }
    if (ok) out = std::move(values);
    return ok;
  }

  bool entry(const YAML::Node& node, const std::string& path, cplx& out) {
    if (node.IsSequence()) {
      std::vector<double> parts;
      if (!sequence(node, path, parts)) return false;
      if (parts.size() != 2) {
        report(node, path, "complex entries are [re, im]");
        return false;
      }
      out = {parts[0], parts[1]};
      return true;
    }
    double re = 0.0;
    if (!scalar(node, path, re)) return false;
    out = re;
    return true;
  }

  bool matrix(const YAML::Node& node, const std::string& path, int n, HMatrix& out) {
    if (!node.IsSequence() || static_cast<int>(node.size()) != n) {
      report(node, path, "expected " + std::to_string(n) + " rows");
      return false;
    }
    HMatrix m(n, n);
    bool ok = true;
    for (int j = 0; j < n; ++j) {
      const auto row = node[j];
      const auto rpath = path + "[" + std::to_string(j) + "]";
      if (!row.IsSequence() || static_cast<int>(row.size()) != n) {
        report(row, rpath, "expected " + std::to_string(n) + " entries");
        ok = false;
        continue;
      }
      for (int k = 0; k < n; ++k) ok = entry(row[k], rpath + "[" + std::to_string(k) + "]", m(j, k)) && ok;
    }
    if (!ok) return false;
    if ((m - m.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff())) {
      report(node, path, "matrix is not Hermitian");
      return false;
    }
    if (!(min_eigenvalue(m) > 0.0)) {
      report(node, path, "matrix is not positive definite");
      return false;
    }
    out = m;
    return true;
  }

  bool terms(const YAML::Node& node, const std::string& path, int n, std::vector<PotentialTerm>& out) {
    if (node.IsNull()) {
      out.clear();
      return true;
    }
    if (!node.IsSequence()) {
      report(node, path, "expected a list of {amplitude, wavenumber, phase} terms");
      return false;
    }
    std::vector<PotentialTerm> list;
    bool ok = true;
    for (std::size_t i = 0; i < node.size(); ++i) {
      const auto item = node[i];
      const auto ipath = path + "[" + std::to_string(i) + "]";
      if (!item.IsMap()) {
        report(item, ipath, "expected a mapping");
        ok = false;
        continue;
      }
      check_keys(item, ipath, {"amplitude", "wavenumber", "phase"});
      PotentialTerm term;
      if (item["amplitude"]) ok = scalar(item["amplitude"], ipath + ".amplitude", term.amplitude) && ok;
      if (item["phase"]) ok = scalar(item["phase"], ipath + ".phase", term.phase) && ok;
      if (!item["wavenumber"]) {
        report(item, ipath + ".wavenumber", "missing");
        ok = false;
      } else if (sequence(item["wavenumber"], ipath + ".wavenumber", term.wavenumber) &&
                 static_cast<int>(term.wavenumber.size()) != 2 * n) {
        report(item["wavenumber"], ipath + ".wavenumber", "needs " + std::to_string(2 * n) + " entries");
        ok = false;
      }
      list.push_back(term);
    }
    if (ok) out = std::move(list);
    return ok;
  }

  void form(const YAML::Node& node, const std::string& path, int n, FormSpec& out) {
    if (!node.IsMap()) {
      report(node, path, "expected a mapping with 'constant' and 'potential'");
      return;
    }
    check_keys(node, path, {"constant", "potential"});
    if (node["constant"]) matrix(node["constant"], path + ".constant", n, out.constant);
    if (node["potential"]) terms(node["potential"], path + ".potential", n, out.potential);
  }

 private:
  template <class T>
  static const char* type_name() {
    if constexpr (std::is_same_v<T, bool>) return "a boolean";
    if constexpr (std::is_integral_v<T>) return "an integer";
    if constexpr (std::is_floating_point_v<T>) return "a number";
    return "a string";
  }
};

template <class T>
bool strictly_monotone(const std::vector<T>& v) {
  bool up = true, down = true;
  for (std::size_t i = 1; i < v.size(); ++i) {
    up = up && v[i] > v[i - 1];
    down = down && v[i] < v[i - 1];
  }
  return up || down;
}

void check_invariants(const RunConfig& c, const YAML::Node& root, Reader& r) {
  auto at = [&](const char* key) { return root && root[key] ? root[key] : root; };
  if (static_cast<int>(c.grid.size()) != 2 * c.n)
    r.report(at("grid"), "grid", "needs " + std::to_string(2 * c.n) + " sizes");
  for (int s : c.grid)
    if (!power_of_two_size(s)) r.report(at("grid"), "grid", "sizes must be powers of two >= 8");

  for (double R : c.R)
    if (!(R >= 0.0)) r.report(at("R"), "R", "values must be >= 0");
  if (!strictly_monotone(c.R)) r.report(at("R"), "R", "schedule must be strictly monotone");
  for (double t : c.t)
    if (!(t > 0.0 && t <= 1.0)) r.report(at("t"), "t", "values must lie in (0, 1]");
  for (std::size_t i = 1; i < c.t.size(); ++i)
    if (!(c.t[i] > c.t[i - 1])) {
      r.report(at("t"), "t", "schedule must be strictly increasing");
      break;
    }
  for (int m : c.orders)
    if (m < 0) r.report(at("orders"), "orders", "orders must be >= 0");
  if (c.ladder_order < 0) r.report(at("ladder_order"), "ladder_order", "must be >= 0");

  const auto& s = c.solver;
  const auto solver = root && root["solver"] ? root["solver"] : root;
  if (!(s.newton_tolerance > 0.0)) r.report(solver, "solver.newton_tolerance", "must be > 0");
  if (s.max_newton_iterations < 0) r.report(solver, "solver.max_newton_iterations", "must be >= 0");
  if (!(s.krylov_tolerance > 0.0 && s.krylov_tolerance <= 1e-2))
    r.report(solver, "solver.krylov_tolerance", "must lie in (0, 1e-2]");
  if (!(s.linear_tolerance > 0.0 && s.linear_tolerance <= 1e-2))
    r.report(solver, "solver.linear_tolerance", "must lie in (0, 1e-2]");

  const auto& th = c.threshold;
  const auto tnode = root && root["threshold"] ? root["threshold"] : root;
  if (!(th.R_start > 0.0 && th.R_min > 0.0 && th.R_min <= th.R_start))
    r.report(tnode, "threshold", "needs 0 < R_min <= R_start");
  if (!(th.factor > 0.0 && th.factor < 1.0)) r.report(tnode, "threshold.factor", "must lie in (0, 1)");
  if (!(th.bisection_tolerance > 0.0)) r.report(tnode, "threshold.bisection_tolerance", "must be > 0");
  if (c.perturbation.steps < 1) r.report(at("perturbation"), "perturbation.steps", "must be >= 1");
  if (c.threads < 1) r.report(at("threads"), "threads", "must be >= 1");
  if (c.output.empty()) r.report(at("output"), "output", "must not be empty");

  switch (c.scenario) {
    case ScenarioKind::single_solve:
      if (c.R.empty()) r.report(at("R"), "R", "needs at least one value");
      break;
    case ScenarioKind::twist_perturbation:
      if (c.R.size() != 1) r.report(at("R"), "R", "twist_perturbation takes exactly one R");
      break;
    case ScenarioKind::ladder_study:
      if (c.R.empty()) r.report(at("R"), "R", "needs at least one value");
      for (double R : c.R)
        if (!(R > 0.0)) {
          r.report(at("R"), "R", "ladder needs R > 0");
          break;
        }
      if (c.orders.empty()) r.report(at("orders"), "orders", "needs at least one order");
      break;
    case ScenarioKind::continuity_sweep:
      if (c.t.empty()) r.report(at("t"), "t", "needs at least one value");
      break;
    case ScenarioKind::threshold:
    case ScenarioKind::verify_suite:
      break;
  }
}

void emit_terms(YAML::Emitter& out, const std::vector<PotentialTerm>& terms) {
  out << YAML::BeginSeq;
  for (const auto& t : terms) {
    out << YAML::Flow << YAML::BeginMap;
    out << YAML::Key << "amplitude" << YAML::Value << t.amplitude;
    out << YAML::Key << "wavenumber" << YAML::Value << YAML::Flow << t.wavenumber;
    out << YAML::Key << "phase" << YAML::Value << t.phase;
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;
}

void emit_form(YAML::Emitter& out, const FormSpec& f) {
  out << YAML::BeginMap << YAML::Key << "constant" << YAML::Value << YAML::BeginSeq;
  for (Eigen::Index j = 0; j < f.constant.rows(); ++j) {
    out << YAML::Flow << YAML::BeginSeq;
    for (Eigen::Index k = 0; k < f.constant.cols(); ++k) {
      const cplx v = f.constant(j, k);
      if (v.imag() == 0.0)
        out << v.real();
      else
        out << YAML::Flow << YAML::BeginSeq << v.real() << v.imag() << YAML::EndSeq;
    }
    out << YAML::EndSeq;
  }
  out << YAML::EndSeq << YAML::Key << "potential" << YAML::Value;
  emit_terms(out, f.potential);
  out << YAML::EndMap;
}

}  // namespace

const char* to_string(ScenarioKind kind) { return kScenarioNames[static_cast<int>(kind)]; }

std::optional<ScenarioKind> scenario_from_string(const std::string& name) {
  for (int i = 0; i < 6; ++i)
    if (name == kScenarioNames[i]) return static_cast<ScenarioKind>(i);
  return std::nullopt;
}

bool FormSpec::operator==(const FormSpec& other) const {
  return constant.rows() == other.constant.rows() && constant.cols() == other.constant.cols() &&
         constant == other.constant && potential == other.potential;
}

bool RunConfig::operator==(const RunConfig& o) const {
  return scenario == o.scenario && n == o.n && grid == o.grid && omega == o.omega && alpha == o.alpha &&
         R == o.R && t == o.t && orders == o.orders && ladder_order == o.ladder_order && solver == o.solver &&
         threshold == o.threshold && perturbation == o.perturbation && output == o.output && seed == o.seed &&
         threads == o.threads;
}

ConfigError::ConfigError(std::vector<Diagnostic> diagnostics)
    : Error(describe(diagnostics)), diagnostics_(std::move(diagnostics)) {}

RunConfig default_config(ScenarioKind kind, int n) {
  RunConfig c;
  c.scenario = kind;
  c.n = n;
  c.grid.assign(static_cast<std::size_t>(2 * n), n == 1 ? 32 : 8);
  c.omega.constant = HMatrix::Identity(n, n);
  switch (kind) {
    case ScenarioKind::single_solve:
      c.R = {100.0};
      break;
    case ScenarioKind::ladder_study:
      c.R = {50.0, 100.0, 200.0, 400.0, 800.0};
      c.orders = {1, 2, 3};
      break;
    case ScenarioKind::continuity_sweep:
      for (int i = 1; i <= 20; ++i) c.t.push_back(i / 20.0);
      break;
    case ScenarioKind::twist_perturbation:
      c.R = {100.0};
      c.perturbation.potential = {{1e-3, std::vector<int>(static_cast<std::size_t>(2 * n), 0), 0.0}};
      c.perturbation.potential[0].wavenumber[0] = 1;
      break;
    case ScenarioKind::threshold:
    case ScenarioKind::verify_suite:
      break;
  }
  return c;
}

RunConfig parse_config(const std::string& text, std::optional<ScenarioKind> expected) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError({{e.mark.line + 1, e.mark.column + 1, "", e.msg}});
  }
  Reader r;
  if (root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  if (!root.IsMap()) {
    r.report(root, "", "top level must be a mapping");
    throw ConfigError(r.diagnostics);
  }
  r.check_keys(root, "",
               {"scenario", "n", "grid", "omega", "alpha", "R", "t", "orders", "ladder_order", "solver",
                "threshold", "perturbation", "output", "seed", "threads"});

  ScenarioKind kind = expected.value_or(ScenarioKind::single_solve);
  if (root["scenario"]) {
    std::string name;
    if (r.scalar(root["scenario"], "scenario", name)) {
      if (auto k = scenario_from_string(name))
        kind = *k;
      else
        r.report(root["scenario"], "scenario", "unknown scenario '" + name + "'");
      if (expected && kind != *expected)
        r.report(root["scenario"], "scenario",
                 std::string("config is for '") + name + "' but '" + to_string(*expected) + "' was requested");
    }
  }
  int n = 1;
  if (root["n"] && r.scalar(root["n"], "n", n) && n != 1 && n != 2) {
    r.report(root["n"], "n", "complex dimension must be 1 or 2");
    n = 1;
  }
  RunConfig c = default_config(kind, n);

  if (root["grid"]) r.sequence(root["grid"], "grid", c.grid);
  if (root["omega"]) r.form(root["omega"], "omega", n, c.omega);
  if (root["alpha"] && !root["alpha"].IsNull()) {
    FormSpec a;
    a.constant = HMatrix::Identity(n, n);
    r.form(root["alpha"], "alpha", n, a);
    c.alpha = a;
  }
  if (root["R"]) r.sequence(root["R"], "R", c.R);
  if (root["t"]) r.sequence(root["t"], "t", c.t);
  if (root["orders"]) r.sequence(root["orders"], "orders", c.orders);
  if (root["ladder_order"]) r.scalar(root["ladder_order"], "ladder_order", c.ladder_order);

  if (const auto s = root["solver"]) {
    if (!s.IsMap()) {
      r.report(s, "solver", "expected a mapping");
    } else {
      r.check_keys(s, "solver",
                   {"newton_tolerance", "max_newton_iterations", "krylov_tolerance", "linear_tolerance",
                    "dealias", "eigenvalues"});
      auto& v = c.solver;
      if (s["newton_tolerance"]) r.scalar(s["newton_tolerance"], "solver.newton_tolerance", v.newton_tolerance);
      if (s["max_newton_iterations"])
        r.scalar(s["max_newton_iterations"], "solver.max_newton_iterations", v.max_newton_iterations);
      if (s["krylov_tolerance"]) r.scalar(s["krylov_tolerance"], "solver.krylov_tolerance", v.krylov_tolerance);
      if (s["linear_tolerance"]) r.scalar(s["linear_tolerance"], "solver.linear_tolerance", v.linear_tolerance);
      if (s["dealias"]) r.scalar(s["dealias"], "solver.dealias", v.dealias);
      if (s["eigenvalues"]) r.scalar(s["eigenvalues"], "solver.eigenvalues", v.eigenvalues);
    }
  }
  if (const auto th = root["threshold"]) {
    if (!th.IsMap()) {
      r.report(th, "threshold", "expected a mapping");
    } else {
      r.check_keys(th, "threshold", {"R_start", "R_min", "factor", "bisection_tolerance"});
      auto& v = c.threshold;
      if (th["R_start"]) r.scalar(th["R_start"], "threshold.R_start", v.R_start);
      if (th["R_min"]) r.scalar(th["R_min"], "threshold.R_min", v.R_min);
      if (th["factor"]) r.scalar(th["factor"], "threshold.factor", v.factor);
      if (th["bisection_tolerance"])
        r.scalar(th["bisection_tolerance"], "threshold.bisection_tolerance", v.bisection_tolerance);
    }
  }
  if (const auto p = root["perturbation"]) {
    if (!p.IsMap()) {
      r.report(p, "perturbation", "expected a mapping");
    } else {
      r.check_keys(p, "perturbation", {"potential", "steps"});
      if (p["potential"]) r.terms(p["potential"], "perturbation.potential", n, c.perturbation.potential);
      if (p["steps"]) r.scalar(p["steps"], "perturbation.steps", c.perturbation.steps);
    }
  }
  if (root["output"]) r.scalar(root["output"], "output", c.output);
  if (root["seed"]) r.scalar(root["seed"], "seed", c.seed);
  if (root["threads"]) r.scalar(root["threads"], "threads", c.threads);

  check_invariants(c, root, r);
  if (!r.diagnostics.empty()) throw ConfigError(r.diagnostics);
  return c;
}

void validate_config(const RunConfig& cfg) {
  Reader r;
  check_invariants(cfg, YAML::Node(), r);
  if (!r.diagnostics.empty()) throw ConfigError(r.diagnostics);
}

std::string emit_config(const RunConfig& c) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "scenario" << YAML::Value << to_string(c.scenario);
  out << YAML::Key << "n" << YAML::Value << c.n;
  out << YAML::Key << "grid" << YAML::Value << YAML::Flow << c.grid;
  out << YAML::Key << "omega" << YAML::Value;
  emit_form(out, c.omega);
  out << YAML::Key << "alpha" << YAML::Value;
  if (c.alpha)
    emit_form(out, *c.alpha);
  else
    out << YAML::Null;
  out << YAML::Key << "R" << YAML::Value << YAML::Flow << c.R;
  out << YAML::Key << "t" << YAML::Value << YAML::Flow << c.t;
  out << YAML::Key << "orders" << YAML::Value << YAML::Flow << c.orders;
  out << YAML::Key << "ladder_order" << YAML::Value << c.ladder_order;
  out << YAML::Key << "solver" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "newton_tolerance" << YAML::Value << c.solver.newton_tolerance;
  out << YAML::Key << "max_newton_iterations" << YAML::Value << c.solver.max_newton_iterations;
  out << YAML::Key << "krylov_tolerance" << YAML::Value << c.solver.krylov_tolerance;
  out << YAML::Key << "linear_tolerance" << YAML::Value << c.solver.linear_tolerance;
  out << YAML::Key << "dealias" << YAML::Value << c.solver.dealias;
  out << YAML::Key << "eigenvalues" << YAML::Value << c.solver.eigenvalues;
  out << YAML::EndMap;
  out << YAML::Key << "threshold" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "R_start" << YAML::Value << c.threshold.R_start;
  out << YAML::Key << "R_min" << YAML::Value << c.threshold.R_min;
  out << YAML::Key << "factor" << YAML::Value << c.threshold.factor;
  out << YAML::Key << "bisection_tolerance" << YAML::Value << c.threshold.bisection_tolerance;
  out << YAML::EndMap;
  out << YAML::Key << "perturbation" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "potential" << YAML::Value;
  emit_terms(out, c.perturbation.potential);
  out << YAML::Key << "steps" << YAML::Value << c.perturbation.steps;
  out << YAML::EndMap;
  out << YAML::Key << "output" << YAML::Value << c.output;
  out << YAML::Key << "seed" << YAML::Value << c.seed;
  out << YAML::Key << "threads" << YAML::Value << c.threads;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

PeriodicGrid make_grid(const RunConfig& cfg) { return PeriodicGrid(cfg.n, cfg.grid); }

ScalarField potential_field(const PeriodicGrid& grid, const std::vector<PotentialTerm>& terms) {
  for (const auto& t : terms)
    if (static_cast<int>(t.wavenumber.size()) != grid.axes())
      throw StructuralError("potential term wavenumber does not match the grid dimension");
  return ScalarField::from_function(grid, [&](auto x) {
    double v = 0.0;
    for (const auto& t : terms) {
      double phase = t.phase;
      for (int a = 0; a < grid.axes(); ++a) phase += t.wavenumber[a] * x[a];
      v += t.amplitude * std::cos(phase);
    }
    return v;
  });
}

HermitianFormField make_form(const PeriodicGrid& grid, const FormSpec& spec) {
  return HermitianFormField::closed(spec.constant, potential_field(grid, spec.potential));
}

SolverConfig solver_config(const RunConfig& cfg) {
  SolverConfig s;
  s.newton_tolerance = cfg.solver.newton_tolerance;
  s.max_newton_iterations = cfg.solver.max_newton_iterations;
  s.krylov.tolerance = cfg.solver.krylov_tolerance;
  s.newton_linear.tolerance = cfg.solver.linear_tolerance;
  s.dealias = cfg.solver.dealias;
  s.eigen.seed = cfg.seed;
  s.eigen.inner.tolerance = cfg.solver.krylov_tolerance;
  return s;
}

}  // namespace twistk

#pragma once

// Command-line front end: simulate | ode | bifurcate | converge | validate.
//
// Exit codes: 0 success, 1 runtime or check failure, 2 usage/config error.
// Every output file carries the full RunConfig, the seed and the library
// version, and re-parses into them via config_from_json().

#include "tdsim/analysis.hpp"
#include "tdsim/io.hpp"
#include "tdsim/jump.hpp"
#include "tdsim/micro.hpp"
#include "tdsim/model.hpp"
#include "tdsim/ode.hpp"
#include "tdsim/rng.hpp"
#include "tdsim/version.hpp"

#include "CLI11.hpp"

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace tdsim::cli {

using io::json;

class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct RunConfig {
  std::string command;
  // model
  double J = 1.0;
  double delta = 0.0;
  std::string kappa_mode = "half-J";  // or "explicit"
  std::vector<double> kappa;          // explicit values, length k
  std::vector<int> N{100};
  int k = 3;
  // command
  double t_end = 10.0;
  std::uint64_t seed = 0;
  bool seed_recorded = false;  // true once a seed (given or drawn) is fixed
  int replicas = 100;
  std::string grid = "-2:3:0.05";
  std::vector<double> x0;  // empty: 1/2 in every coordinate
  std::string level = "density";
  std::string method = "rk4";
  double step = 1e-3;
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  int thinning = 0;
  std::string out;
  std::string format = "csv";

  bool operator==(const RunConfig&) const = default;

  LoopSpec spec(int n) const {
    LoopSpec s;
    s.k = k;
    s.J = J;
    s.delta = delta;
    s.N = n;
    s.kappa = kappa_mode == "half-J" ? std::vector<double>(static_cast<std::size_t>(k), J / 2.0) : kappa;
    return s;
  }

  Vector initial_point() const {
    if (x0.empty()) return symmetric_point(k);
    return Eigen::Map<const Vector>(x0.data(), static_cast<Eigen::Index>(x0.size()));
  }

  ode::Settings integrator() const {
    ode::Settings s = method == "rk45" ? ode::Settings::rk45(rel_tol, abs_tol) : ode::Settings::rk4(step);
    if (method == "rk45") s.step = 1e-3;
    return s;
  }

  io::Format output_format() const { return format == "json" ? io::Format::json : io::Format::csv; }
};

inline json config_to_json(const RunConfig& c) {
  return {{"command", c.command},   {"J", c.J},
          {"delta", c.delta},       {"kappa_mode", c.kappa_mode},
          {"kappa", c.kappa},       {"N", c.N},
          {"k", c.k},               {"t_end", c.t_end},
          {"seed", c.seed},         {"seed_recorded", c.seed_recorded},
          {"replicas", c.replicas}, {"grid", c.grid},
          {"x0", c.x0},             {"level", c.level},
          {"method", c.method},     {"step", c.step},
          {"rel_tol", c.rel_tol},   {"abs_tol", c.abs_tol},
          {"thinning", c.thinning}, {"out", c.out},
          {"format", c.format}};
}

inline RunConfig config_from_json(const json& j) {
  RunConfig c;
  c.command = j.at("command").get<std::string>();
  c.J = j.at("J").get<double>();
  c.delta = j.at("delta").get<double>();
  c.kappa_mode = j.at("kappa_mode").get<std::string>();
  c.kappa = j.at("kappa").get<std::vector<double>>();
  c.N = j.at("N").get<std::vector<int>>();
  c.k = j.at("k").get<int>();
  c.t_end = j.at("t_end").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.seed_recorded = j.at("seed_recorded").get<bool>();
  c.replicas = j.at("replicas").get<int>();
  c.grid = j.at("grid").get<std::string>();
  c.x0 = j.at("x0").get<std::vector<double>>();
  c.level = j.at("level").get<std::string>();
  c.method = j.at("method").get<std::string>();
  c.step = j.at("step").get<double>();
  c.rel_tol = j.at("rel_tol").get<double>();
  c.abs_tol = j.at("abs_tol").get<double>();
  c.thinning = j.at("thinning").get<int>();
  c.out = j.at("out").get<std::string>();
  c.format = j.at("format").get<std::string>();
  return c;
}

/// "start:stop:step" or a single value.
inline std::vector<double> parse_grid(const std::string& text) {
  const auto parts = io::detail::split(text, ':');
  std::vector<double> v;
  for (const auto& p : parts) {
    double d;
    if (!io::parse_double(p, d) || !std::isfinite(d)) throw ConfigError("--grid", "not a number: '" + p + "'");
    v.push_back(d);
  }
  if (v.size() == 1) return v;
  if (v.size() != 3) throw ConfigError("--grid", "expected start:stop:step");
  try {
    return analysis::make_grid(v[0], v[1], v[2]);
  } catch (const ParameterError& e) {
    throw ConfigError("--grid", e.what());
  }
}

inline std::vector<double> parse_list(const std::string& field, const std::string& text) {
  std::vector<double> v;
  for (const auto& p : io::detail::split(text, ',')) {
    double d;
    if (!io::parse_double(p, d) || !std::isfinite(d)) throw ConfigError(field, "not a number: '" + p + "'");
    v.push_back(d);
  }
  return v;
}

inline void validate(const RunConfig& c) {
  auto finite = [](const char* f, double v) {
    if (!std::isfinite(v)) throw ConfigError(f, "must be finite");
  };
  finite("--J", c.J);
  finite("--delta", c.delta);
  finite("--t-end", c.t_end);
  finite("--step", c.step);
  finite("--rtol", c.rel_tol);
  finite("--atol", c.abs_tol);
  if (c.delta < 0.0 || c.delta > 1.0) throw ConfigError("--delta", "must lie in [0,1]");
  if (c.k < 2) throw ConfigError("--k", "must be >= 2");
  if (c.kappa_mode != "half-J" && c.kappa_mode != "explicit") throw ConfigError("--kappa", "unknown mode");
  if (c.kappa_mode == "explicit") {
    if (c.kappa.size() != static_cast<std::size_t>(c.k)) {
      throw ConfigError("--kappa", "expected " + std::to_string(c.k) + " values or 'half-J'");
    }
    for (double v : c.kappa) finite("--kappa", v);
  }
  if (c.N.empty()) throw ConfigError("--N", "at least one value required");
  for (int n : c.N) {
    if (n < 1) throw ConfigError("--N", "must be >= 1");
  }
  if (c.t_end < 0.0) throw ConfigError("--t-end", "must be >= 0");
  if (c.replicas < 0) throw ConfigError("--replicas", "must be >= 0");
  if (c.command == "converge" && c.replicas == 0) throw ConfigError("--replicas", "must be positive");
  if (c.thinning < 0) throw ConfigError("--thinning", "must be >= 0");
  if (!c.x0.empty()) {
    if (c.x0.size() != static_cast<std::size_t>(c.k)) throw ConfigError("--x0", "expected k values");
    for (double v : c.x0) {
      if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("--x0", "values must lie in [0,1]");
    }
  }
  if (c.level != "density" && c.level != "micro") throw ConfigError("--level", "expected density or micro");
  if (c.method != "rk4" && c.method != "rk45") throw ConfigError("--method", "expected rk4 or rk45");
  if (!(c.step > 0.0)) throw ConfigError("--step", "must be positive");
  if (!(c.rel_tol > 0.0)) throw ConfigError("--rtol", "must be positive");
  if (!(c.abs_tol > 0.0)) throw ConfigError("--atol", "must be positive");
  if (c.format != "csv" && c.format != "json") throw ConfigError("--format", "expected csv or json");
  if (c.command == "bifurcate") {
    if (c.k != 3) throw ConfigError("--k", "bifurcate requires k = 3");
    parse_grid(c.grid);
  }
  try {
    c.spec(c.N.front()).validate();
  } catch (const ParameterError& e) {
    throw ConfigError("model", e.what());
  }
}

namespace detail {

inline std::vector<std::string> state_columns(int k) {
  std::vector<std::string> cols{"t"};
  for (int i = 0; i < k; ++i) cols.push_back("x_" + type_name(i, k));
  return cols;
}

inline json header(const RunConfig& c, const std::string& kind) {
  return {{"run", config_to_json(c)}, {"seed", c.seed}, {"version", std::string(kVersion)}, {"kind", kind}};
}

inline io::Dataset trajectory_dataset(const RunConfig& c, const Trajectory& path, const std::string& kind) {
  io::Dataset d;
  d.config = header(c, kind);
  d.columns = state_columns(c.k);
  for (std::size_t j = 0; j < path.size(); ++j) {
    std::vector<io::Cell> row{path.times[j]};
    for (Eigen::Index i = 0; i < path.states[j].size(); ++i) row.emplace_back(path.states[j][i]);
    d.rows.push_back(std::move(row));
  }
  return d;
}

}  // namespace detail

inline io::Dataset cmd_simulate(const RunConfig& c) {
  const LoopSpec spec = c.spec(c.N.front());
  Trajectory path;
  if (c.level == "micro") {
    const auto sigma0 = micro::SpinConfiguration::from_density(spec, c.initial_point());
    path = micro::micro_simulate(spec, sigma0, c.t_end, c.seed);
  } else {
    path = jump::ssa_simulate(spec, DensityState::nearest(c.initial_point(), spec.N), c.t_end, c.seed, c.thinning);
  }
  return detail::trajectory_dataset(c, path, "stochastic");
}

inline io::Dataset cmd_ode(const RunConfig& c) {
  const LoopSpec spec = c.spec(c.N.front());
  const ode::Solution sol = ode::integrate(spec, c.initial_point(), c.t_end, c.integrator());
  return detail::trajectory_dataset(c, sol.path, "deterministic");
}

inline io::Dataset cmd_bifurcate(const RunConfig& c) {
  const auto records = analysis::scan(parse_grid(c.grid), c.delta);
  io::Dataset d;
  d.config = detail::header(c, "bifurcation");
  d.columns = {"J",         "delta",     "classification", "lambda1_re", "lambda1_im", "lambda2_re",
               "lambda2_im", "lambda3_re", "lambda3_im",   "stable_lo", "stable_hi",  "unstable",
               "orbit_min", "orbit_max"};
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& r : records) {
    std::vector<io::Cell> row{r.J, r.delta, std::string(analysis::to_string(r.classification))};
    for (const auto& ev : r.spectrum.eigenvalues) {
      row.emplace_back(ev.real());
      row.emplace_back(ev.imag());
    }
    double lo = nan, hi = nan;
    for (const auto& p : r.fixed_points) {
      lo = std::isnan(lo) ? p[0] : std::min(lo, p[0]);
      hi = std::isnan(hi) ? p[0] : std::max(hi, p[0]);
    }
    row.emplace_back(lo);
    row.emplace_back(hi);
    row.emplace_back(r.unstable_points.empty() ? nan : r.unstable_points.front()[0]);
    row.emplace_back(r.orbit_min.size() ? r.orbit_min[0] : nan);
    row.emplace_back(r.orbit_max.size() ? r.orbit_max[0] : nan);
    d.rows.push_back(std::move(row));
  }
  return d;
}

inline io::Dataset cmd_converge(const RunConfig& c) {
  const auto table =
      analysis::convergence_experiment(c.spec(c.N.front()), c.N, c.initial_point(), c.t_end, c.replicas, c.seed);
  io::Dataset d;
  d.config = detail::header(c, "convergence");
  d.columns = {"N", "median", "q25", "q75"};
  for (const auto& r : table.rows) d.rows.push_back({double(r.N), r.median, r.q25, r.q75});
  d.footer = {{"slope", std::isfinite(table.slope) ? json(table.slope) : json(nullptr)},
              {"medians_decreasing", table.medians_decreasing}};
  return d;
}

struct CheckResult {
  std::string name;
  std::string status;  // pass | fail | skipped | info
  double residual = std::numeric_limits<double>::quiet_NaN();
  double tolerance = std::numeric_limits<double>::quiet_NaN();
  std::string note;
};

/// Five-point central differences of vector_field (fourth order in h).
inline Matrix finite_difference_jacobian(const LoopSpec& spec, const Vector& x, double h = 1e-4) {
  Matrix m(spec.k, spec.k);
  auto shifted = [&](int j, double by) {
    Vector y = x;
    y[j] += by;
    return vector_field(spec, y);
  };
  for (int j = 0; j < spec.k; ++j) {
    m.col(j) = (8.0 * (shifted(j, h) - shifted(j, -h)) - (shifted(j, 2 * h) - shifted(j, -2 * h))) / (12.0 * h);
  }
  return m;
}

inline std::vector<CheckResult> run_checks(const RunConfig& c) {
  std::vector<CheckResult> out;
  const LoopSpec spec = c.spec(c.N.front());
  auto graded = [&](std::string name, double residual, double tol) {
    out.push_back({std::move(name), residual <= tol ? "pass" : "fail", residual, tol, ""});
  };
  auto skipped = [&](std::string name, std::string why) {
    out.push_back({std::move(name), "skipped", std::numeric_limits<double>::quiet_NaN(),
                   std::numeric_limits<double>::quiet_NaN(), std::move(why)});
  };

  {
    rng::Engine gen = rng::make_stream(c.seed, 0);
    double worst = 0.0;
    for (int p = 0; p < 50; ++p) {
      Vector x(spec.k);
      for (int i = 0; i < spec.k; ++i) x[i] = 0.05 + 0.9 * rng::uniform01(gen);
      worst = std::max(worst, (jacobian(spec, x) - finite_difference_jacobian(spec, x)).lpNorm<Eigen::Infinity>());
    }
    graded("jacobian_finite_difference", worst, 1e-6);
  }

  const bool enumerable = spec.k * spec.N <= micro::kMaxEnumeratedSites;
  if (!enumerable) {
    const std::string why = "k*N = " + std::to_string(spec.k * spec.N) + " exceeds " +
                            std::to_string(micro::kMaxEnumeratedSites);
    skipped("micro_macro_generator", why);
    skipped("reversibility_residual", why);
  } else {
    const auto lumped = micro::lumped_generator(spec);
    const Matrix macro = jump::density_generator(spec);
    graded("micro_macro_generator",
           std::max(lumped.lumpability_residual, (lumped.q - macro).lpNorm<Eigen::Infinity>()), 1e-12);
    if (spec.k != 3) {
      skipped("reversibility_residual", "requires k = 3");
    } else {
      const double r = micro::reversibility_residual(spec);
      bool zero_expected = spec.J == 0.0;
      for (double v : spec.kappa) zero_expected = zero_expected && v == 0.0;
      if (zero_expected) {
        graded("reversibility_residual", r, 1e-12);
      } else {
        out.push_back({"reversibility_residual", "info", r, std::numeric_limits<double>::quiet_NaN(),
                       "nonzero residual means non-reversible w.r.t. the Gibbs measure"});
      }
    }
  }

  const Matrix r = analysis::rotation_matrix();
  graded("rotation_orthonormal", (r.transpose() * r - Matrix::Identity(3, 3)).lpNorm<Eigen::Infinity>(), 1e-14);

  if (spec.k != 3) {
    skipped("spectrum_closed_form", "requires k = 3");
    skipped("z_system_closed_form", "requires k = 3");
  } else {
    graded("spectrum_closed_form",
           analysis::spectrum_distance(analysis::closed_form_spectrum(c.J, c.delta),
                                       analysis::numerical_spectrum(analysis::symmetric_jacobian(c.J, c.delta))),
           1e-8);
    const Matrix a = r.transpose() * analysis::symmetric_jacobian(c.J, c.delta) * r;
    graded("z_system_closed_form", (a - analysis::z_system_closed_form(c.J, c.delta)).lpNorm<Eigen::Infinity>(),
           1e-10);
  }

  {
    Vector z0(3);
    z0 << 0.1, -0.05, 0.02;
    const auto sol =
        ode::integrate_linear(analysis::z_system_closed_form(2.0, c.delta), z0, 10.0, ode::Settings::rk45(1e-12, 1e-14));
    const double r0 = z0.head<2>().squaredNorm();
    double worst = 0.0;
    for (const auto& z : sol.path.states) worst = std::max(worst, std::abs(z.head<2>().squaredNorm() - r0) / r0);
    graded("polar_conservation_J2", worst, 1e-6);
  }
  return out;
}

inline io::Dataset report_dataset(const RunConfig& c, const std::vector<CheckResult>& checks) {
  io::Dataset d;
  d.config = detail::header(c, "validation");
  d.columns = {"check", "status", "residual", "tolerance", "note"};
  for (const auto& ch : checks) {
    d.rows.push_back({ch.name, ch.status, ch.residual, ch.tolerance, ch.note.empty() ? std::string("-") : ch.note});
  }
  return d;
}

inline bool all_passed(const std::vector<CheckResult>& checks) {
  for (const auto& ch : checks) {
    if (ch.status == "fail") return false;
  }
  return true;
}

/// Parses argv-style arguments (without the program name) into a config.
/// CLI11 parse errors propagate as CLI::ParseError.
inline std::optional<RunConfig> parse(const std::vector<std::string>& args, std::ostream& err) {
  RunConfig c;
  CLI::App app{"Mean-field type-dependent stochastic Ising model of a three-gene feedback loop", "tdsim"};
  app.require_subcommand(1);
  std::vector<std::string> kappa_args;
  std::string x0_arg;
  std::optional<std::uint64_t> seed_arg;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--J", c.J, "coupling strength");
    sub->add_option("--delta", c.delta, "asymmetry weight in [0,1]");
    sub->add_option("--kappa", kappa_args, "external fields (k values) or 'half-J'");
    sub->add_option("--N", c.N, "reservoir size (repeatable for converge)");
    sub->add_option("--k", c.k, "number of types");
    sub->add_option("--t-end", c.t_end, "time horizon");
    sub->add_option("--seed", seed_arg, "random seed (default: drawn and recorded)");
    sub->add_option("--replicas", c.replicas, "replicas per N");
    sub->add_option("--out", c.out, "output file (default: stdout)");
    sub->add_option("--format", c.format, "csv or json");
    sub->add_option("--grid", c.grid, "J grid start:stop:step or single value");
    sub->add_option("--x0", x0_arg, "initial densities a,b,c");
    sub->add_option("--level", c.level, "density or micro (simulate)");
    sub->add_option("--method", c.method, "rk4 or rk45 (ode)");
    sub->add_option("--step", c.step, "rk4 step");
    sub->add_option("--rtol", c.rel_tol, "rk45 relative tolerance");
    sub->add_option("--atol", c.abs_tol, "rk45 absolute tolerance");
    sub->add_option("--thinning", c.thinning, "record every n-th SSA event (0 = default)");
  };
  const std::pair<const char*, const char*> commands[] = {
      {"simulate", "stochastic trajectory (density or micro level)"},
      {"ode", "mean-field ODE trajectory"},
      {"bifurcate", "spectrum and classification over a J grid"},
      {"converge", "sup distance between SSA and ODE paths versus N"},
      {"validate", "internal consistency checks"},
  };
  for (const auto& [name, about] : commands) {
    add_common(app.add_subcommand(name, about)->callback([&c, name] { c.command = name; }));
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, err, err);
    throw;
  }

  if (!kappa_args.empty()) {
    if (kappa_args.size() == 1 && kappa_args.front() == "half-J") {
      c.kappa_mode = "half-J";
    } else {
      c.kappa_mode = "explicit";
      for (const auto& a : kappa_args) {
        const auto vals = parse_list("--kappa", a);
        c.kappa.insert(c.kappa.end(), vals.begin(), vals.end());
      }
    }
  }
  if (!x0_arg.empty()) c.x0 = parse_list("--x0", x0_arg);
  if (seed_arg) {
    c.seed = *seed_arg;
  } else {
    c.seed = std::random_device{}();
    c.seed = (c.seed << 32) ^ std::random_device{}();
    err << "seed: " << c.seed << '\n';
  }
  c.seed_recorded = true;
  validate(c);
  return c;
}

inline io::Dataset execute(const RunConfig& c) {
  if (c.command == "simulate") return cmd_simulate(c);
  if (c.command == "ode") return cmd_ode(c);
  if (c.command == "bifurcate") return cmd_bifurcate(c);
  if (c.command == "converge") return cmd_converge(c);
  return report_dataset(c, run_checks(c));
}

/// Full CLI run; returns the process exit code.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  RunConfig c;
  try {
    c = *parse(args, err);
  } catch (const CLI::CallForHelp&) {
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    err << "error: invalid " << e.what() << '\n';
    return 2;
  }

  io::Dataset data;
  bool checks_failed = false;
  try {
    if (c.command == "validate") {
      const auto checks = run_checks(c);
      checks_failed = !all_passed(checks);
      data = report_dataset(c, checks);
    } else {
      data = execute(c);
    }
  } catch (const ParameterError& e) {
    err << "error: invalid model parameters: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  if (c.out.empty()) {
    io::write(out, data, c.output_format());
  } else {
    std::ofstream file(c.out, std::ios::binary);
    if (!file) {
      err << "error: cannot open " << c.out << '\n';
      return 1;
    }
    io::write(file, data, c.output_format());
    if (!file) {
      err << "error: failed writing " << c.out << '\n';
      return 1;
    }
  }
  if (checks_failed) {
    err << "validation failed\n";
    return 1;
  }
  return 0;
}

}  // namespace tdsim::cli

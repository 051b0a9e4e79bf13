#include "growthld/cli.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "growthld/config.hpp"

namespace growthld::cli {

namespace {

using duality::Side;
using io::Cell;
using io::Table;

constexpr double kEmpty = NAN;

Cell maybe(std::optional<double> x) {
  if (x) return *x;
  return std::monostate{};
}

std::string flat(const Eigen::MatrixXd& m) {
  std::ostringstream out;
  out << "[";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out << (r ? "," : "") << "[";
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << io::format_number(m(r, c));
    out << "]";
  }
  return out.str() + "]";
}

std::pair<Cell, Cell> policy_cells(const models::FeedbackPolicy& policy) {
  if (policy.assets() == 1 && policy.factors() <= 1) {
    return {policy.scalar_gain(), policy.scalar_intercept()};
  }
  return {flat(policy.gain), flat(policy.intercept.transpose())};
}

std::string regime_name(duality::Regime regime) { return std::string(duality::to_string(regime)); }

riccati::LinearFactorMD as_md(const ModelSpec& model) {
  if (const auto* m = std::get_if<models::LinearFactor1D>(&model)) return riccati::embed(*m);
  if (const auto* m = std::get_if<models::PlatenRebolledo>(&model)) {
    return riccati::embed(models::to_linear_factor(*m));
  }
  if (const auto* m = std::get_if<riccati::LinearFactorMD>(&model)) return *m;
  throw Error(ErrorCode::InvalidConfig, "the Riccati sweep needs a factor model");
}

std::optional<models::LinearFactor1D> as_1d(const ModelSpec& model) {
  if (const auto* m = std::get_if<models::LinearFactor1D>(&model)) return *m;
  if (const auto* m = std::get_if<models::PlatenRebolledo>(&model)) {
    return models::to_linear_factor(*m);
  }
  return std::nullopt;
}

void require_sorted(const std::vector<double>& grid) {
  if (!std::is_sorted(grid.begin(), grid.end())) {
    throw Error(ErrorCode::InvalidConfig, "grid must be sorted ascending");
  }
}

std::string flags_text(const mc::SimResult& r) {
  std::string out;
  for (auto f : r.flags) out += (out.empty() ? "" : ",") + mc::to_string(f);
  return out;
}

void sim_row(Table& table, const std::string& estimator, const mc::SimConfig& cfg,
             std::optional<double> theta, std::optional<double> target, const mc::SimResult& r) {
  const auto ess = r.extras.count("ess") ? r.extras.at("ess") : kEmpty;
  table.add_row({estimator, cfg.horizon, maybe(theta), maybe(target), r.estimate, r.std_error,
                 ess, static_cast<double>(r.n_paths), static_cast<double>(cfg.seed)});
  nlohmann::ordered_json info;
  info["estimator"] = estimator;
  info["flags"] = flags_text(r);
  if (!r.note.empty()) info["note"] = r.note;
  for (const auto& [key, value] : r.extras) info[key] = value;
  table.meta["row_" + std::to_string(table.size() - 1)] = info;
}

std::optional<double> resolve_tilt(const ModelSpec& model, const SimulateOptions& options) {
  if (options.tilt.empty()) return std::nullopt;
  if (options.tilt != "auto") return io::parse_number(options.tilt);
  if (!options.target) throw Error(ErrorCode::InvalidConfig, "--tilt auto needs --ell");
  const auto r = rate(model, *options.target, options.side);
  if (!r.tilt()) {
    throw Error(ErrorCode::InvalidConfig,
                "no optimal tilt at this target (regime " + regime_name(r.regime()) + ")");
  }
  return *r.tilt();
}

struct Check {
  std::string name;
  std::string status;
  double value;
  double reference;
  double tolerance;
  std::string detail;
};

void add_check(Table& table, const Check& c) {
  table.add_row({c.name, c.status, c.value, c.reference, c.tolerance, c.detail});
}

std::string pass(bool ok) { return ok ? "PASS" : "FAIL"; }

}  // namespace

Side parse_side(const std::string& text) {
  if (text == "up") return Side::Upside;
  if (text == "down") return Side::Downside;
  throw Error(ErrorCode::InvalidConfig, "side must be up or down, got '" + text + "'");
}

Table dual_table(const ModelSpec& model, Side side, const std::vector<double>& thetas) {
  require_sorted(thetas);
  const auto curve = dual_curve(model, side);
  Table table({"theta", "lambda", "lambda_prime", "error"});
  for (double theta : thetas) {
    if (!curve.in_domain(theta)) {
      const bool above = side == Side::Upside && theta >= curve.theta_bar();
      table.add_row({theta, above ? Cell{duality::kInf} : Cell{}, Cell{}, "outside domain"});
      continue;
    }
    try {
      table.add_row({theta, curve.value(theta), curve.derivative(theta), Cell{}});
    } catch (const Error& e) {
      table.add_row({theta, Cell{}, Cell{}, std::string(e.what())});
    }
  }
  const auto report = duality::check_convexity(curve, thetas);
  table.meta["model"] = model_name(model);
  table.meta["side"] = std::string(duality::to_string(side));
  if (side == Side::Upside) table.meta["theta_bar"] = curve.theta_bar();
  table.meta["lambda_prime_zero"] = curve.derivative_at_zero();
  table.meta["convex"] = report.convex;
  table.meta["derivative_monotone"] = report.derivative_monotone;
  table.meta["max_convexity_violation"] = report.max_convexity_violation;
  table.meta["max_monotonicity_violation"] = report.max_monotonicity_violation;
  if (const auto lg = as_1d(model)) {
    const auto g = models::lg1d_gamma_prime_zero(*lg);
    table.meta["gamma_prime_zero_numeric"] = g.numeric;
    table.meta["gamma_prime_zero_printed"] = g.printed;
    table.meta["gamma_prime_zero_disagrees"] = g.disagrees;
  }
  return table;
}

Table frontier_table(const ModelSpec& model, Side side, const std::vector<double>& targets) {
  require_sorted(targets);
  validate(model);
  Table table({"ell", "regime", "theta", "v", "gain", "intercept", "error"});
  for (double target : targets) {
    try {
      const auto r = rate(model, target, side);
      const auto policy = optimal_policy(model, target, side, r);
      Cell gain, intercept;
      if (policy) std::tie(gain, intercept) = policy_cells(*policy);
      table.add_row({target, regime_name(r.regime()), maybe(r.tilt()), r.as_double(), gain,
                     intercept, Cell{}});
    } catch (const Error& e) {
      table.add_row({target, Cell{}, Cell{}, Cell{}, Cell{}, Cell{}, std::string(e.what())});
    }
  }
  table.meta["model"] = model_name(model);
  table.meta["side"] = std::string(duality::to_string(side));
  return table;
}

Table riccati_table(const ModelSpec& model, const std::vector<double>& thetas) {
  require_sorted(thetas);
  const auto md = as_md(model);
  const auto lg = as_1d(model);
  const Eigen::Index m = md.factors();

  std::vector<std::string> columns{"theta", "gamma", "residual", "max_real_eig", "iterations"};
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      columns.push_back(m == 1 ? "C" : "C_" + std::to_string(i + 1) + std::to_string(j + 1));
    }
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    columns.push_back(m == 1 ? "D" : "D_" + std::to_string(i + 1));
  }
  if (lg) {
    for (const char* c : {"C_closed", "D_closed", "gamma_closed"}) columns.push_back(c);
  }
  columns.push_back("error");

  const auto sweep = riccati::theta_sweep(md, thetas);
  Table table(columns);
  for (const auto& point : sweep.points) {
    std::vector<Cell> row{point.theta};
    if (point.solution) {
      const auto& qv = *point.solution;
      row.insert(row.end(), {point.gamma, qv.residual, qv.max_real_eigenvalue,
                             static_cast<double>(qv.iterations)});
      for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j) row.emplace_back(qv.C(i, j));
      for (Eigen::Index i = 0; i < m; ++i) row.emplace_back(qv.D(i));
    } else {
      row.resize(row.size() + 4 + static_cast<std::size_t>(m * m + m));
    }
    if (lg) {
      try {
        row.insert(row.end(), {models::lg1d_riccati_roots(*lg, point.theta).minus,
                               models::lg1d_D(*lg, point.theta),
                               models::lg1d_gamma(*lg, point.theta)});
      } catch (const Error&) {
        row.resize(row.size() + 3);
      }
    }
    row.push_back(point.error ? Cell{point.message} : Cell{});
    table.add_row(std::move(row));
  }
  table.meta["model"] = model_name(model);
  table.meta["breakdown"] = sweep.breakdown ? nlohmann::ordered_json(*sweep.breakdown) : nullptr;
  table.meta["lipschitz"] = sweep.lipschitz;
  if (lg) table.meta["theta_bar_closed"] = models::lg1d_beta_thetabar(*lg).theta_bar;
  return table;
}

models::FeedbackPolicy choose_policy(const ModelSpec& model, const SimulateOptions& options) {
  if (options.pi) {
    const Dynamics dyn = dynamics(model);
    if (dyn.assets() != 1) throw Error(ErrorCode::InvalidConfig, "--pi needs a single asset");
    auto policy = models::FeedbackPolicy::constant(*options.pi);
    policy.gain = Eigen::MatrixXd::Zero(1, dyn.factors());
    return policy;
  }
  if (options.target) {
    const auto r = rate(model, *options.target, options.side);
    if (auto policy = optimal_policy(model, *options.target, options.side, r)) return *policy;
    throw Error(ErrorCode::InvalidConfig, "no optimal policy at an unreachable target");
  }
  return policy_at_theta(model, options.theta.value_or(0.0));
}

Table simulate_table(const ModelSpec& model, const SimulateOptions& options) {
  const auto policy = choose_policy(model, options);
  Table table({"estimator", "T", "theta", "ell", "estimate", "se", "ess", "n_paths", "seed"});
  mc::SimConfig direct = options.sim;
  direct.estimator = mc::Estimator::Direct;
  const auto samples = mc::simulate_paths(model, policy, direct);

  if (options.target) {
    sim_row(table, "direct", direct, std::nullopt, options.target,
            mc::estimate_prob(samples, *options.target, options.side, &model));
    if (const auto tilt = resolve_tilt(model, options)) {
      mc::SimConfig tilted = options.sim;
      tilted.estimator = mc::Estimator::TiltedSelfNormalized;
      tilted.theta_tilt = *tilt;
      if (*tilt != 0.0 && options.tilt == "auto") tilted.tilt_value = quadratic_value(model, *tilt);
      if (options.side == Side::Upside ? *tilt < 0.0 : *tilt > 0.0) {
        throw Error(ErrorCode::InvalidConfig, "tilt sign does not match the side");
      }
      const auto weighted = mc::simulate_paths(model, policy, tilted);
      for (auto kind : {mc::Estimator::TiltedSelfNormalized, mc::Estimator::TiltedExactDensity}) {
        sim_row(table, mc::to_string(kind), tilted, *tilt, options.target,
                mc::weighted_prob(weighted, *options.target, options.side, kind));
      }
    }
  }
  if (options.theta) {
    sim_row(table, "log_laplace", direct, options.theta, std::nullopt,
            mc::estimate_log_laplace(samples, *options.theta));
  }
  if (table.size() == 0) {
    double sum = 0.0;
    for (double L : samples.L) sum += L;
    table.meta["mean_growth"] = sum / static_cast<double>(samples.size()) / direct.horizon;
  }
  table.meta["model"] = model_name(model);
  table.meta["side"] = std::string(duality::to_string(options.side));
  table.meta["policy_gain"] = flat(policy.gain);
  table.meta["policy_intercept"] = flat(policy.intercept.transpose());
  table.meta["dt"] = direct.dt;
  return table;
}

Table verify_table(const ModelSpec& model, const VerifyOptions& options) {
  const auto& base = options.base;
  if (!base.target && !base.theta) {
    throw Error(ErrorCode::InvalidConfig, "verify needs --ell or --theta");
  }
  const auto* bs = std::get_if<models::BlackScholesModel>(&model);
  Table table({"check", "status", "value", "reference", "tolerance", "detail"});
  table.meta["model"] = model_name(model);
  table.meta["side"] = std::string(duality::to_string(base.side));

  if (base.theta) {
    SimulateOptions opts = base;
    opts.target.reset();
    const auto policy = choose_policy(model, opts);
    mc::SimConfig cfg = base.sim;
    cfg.estimator = mc::Estimator::Direct;
    const auto r = mc::estimate_log_laplace(mc::simulate_paths(model, policy, cfg), *base.theta);
    if (bs) {
      const double exact = models::bs_gamma(*bs, *base.theta, policy.scalar_intercept());
      const double tol = 3.0 * r.std_error;
      add_check(table, {"log_laplace", pass(std::abs(r.estimate - exact) <= tol), r.estimate,
                        exact, tol, "exact Gaussian moment at T = " + io::format_number(cfg.horizon)});
    } else {
      const double limit = dual_curve(model, *base.theta >= 0.0 ? Side::Upside : Side::Downside)
                               .value(*base.theta);
      add_check(table, {"log_laplace", "INFO", r.estimate, limit, 3.0 * r.std_error,
                        "finite-horizon estimate against the T -> infinity limit"});
    }
  }

  if (base.target) {
    const double target = *base.target;
    const auto v = rate(model, target, base.side);
    const auto policy = choose_policy(model, base);
    mc::SimConfig cfg = base.sim;
    const double band = bs ? 0.25 : 0.35;

    if (v.regime() == duality::Regime::Unreachable) {
      cfg.horizon = options.horizons.front();
      cfg.dt = std::min(cfg.dt, cfg.horizon);
      const auto p = mc::estimate_prob(mc::simulate_paths(model, policy, cfg), target, base.side);
      add_check(table, {"unreachable", pass(p.estimate == 0.0), p.estimate, 0.0, 0.0,
                        "v = -inf; the policy should never reach the target"});
      return table;
    }

    std::optional<double> tilt;
    if (!base.tilt.empty()) {
      tilt = resolve_tilt(model, base);
    } else if (bs) {
      const double centring = models::bs_centering_tilt(*bs, policy.scalar_intercept(), target);
      if (base.side == Side::Upside ? centring > 0.0 : centring < 0.0) tilt = centring;
    } else {
      tilt = v.tilt();
    }
    cfg.estimator = mc::Estimator::TiltedSelfNormalized;
    const auto fit = mc::rate_fit(model, policy, target, base.side, options.horizons, cfg,
                                  tilt.value_or(0.0));

    for (const auto& row : fit.rows) {
      const auto& r = row.result;
      std::ostringstream note;
      note << mc::to_string(row.estimator) << " theta=" << io::format_number(row.theta)
           << " ess=" << io::format_number(r.extras.count("ess") ? r.extras.at("ess") : kEmpty);
      if (bs) {
        const double exact =
            models::bs_prob_exact(*bs, policy.scalar_intercept(), target, row.horizon, base.side);
        const double tol = 3.0 * r.std_error;
        add_check(table, {"probability_T=" + io::format_number(row.horizon),
                          pass(std::abs(r.estimate - exact) <= tol), r.estimate, exact, tol,
                          note.str()});
      } else {
        add_check(table, {"probability_T=" + io::format_number(row.horizon), "INFO", r.estimate,
                          kEmpty, r.std_error, note.str()});
      }
    }

    if (v.regime() == duality::Regime::Free) {
      add_check(table, {"rate_slope", "INFO", fit.slope, 0.0, fit.slope_se,
                        "free regime: v = 0, decay is sub-exponential for the optimal sequence"});
    } else {
      const double ref = v.as_double();
      const double tol = band * std::abs(ref);
      const bool ok = std::abs(fit.slope - ref) <= tol;
      std::ostringstream detail;
      detail << "least-squares slope over T in {";
      for (std::size_t i = 0; i < options.horizons.size(); ++i) {
        detail << (i ? "," : "") << io::format_number(options.horizons[i]);
      }
      detail << "}";
      if (fit.log_adjusted_slope) {
        detail << "; ln T adjusted " << io::format_number(*fit.log_adjusted_slope);
      }
      if (!ok && fit.slope < ref) {
        detail << "; suboptimality gap " << io::format_number(fit.slope - ref);
      }
      add_check(table, {"rate_slope", pass(ok), fit.slope, ref, tol, detail.str()});
    }

    mc::SimConfig first = base.sim;
    first.horizon = options.horizons.front();
    first.dt = std::min(first.dt, first.horizon);
    first.estimator = mc::Estimator::Direct;
    const auto direct_samples = mc::simulate_paths(model, policy, first);
    const auto direct = mc::estimate_prob(direct_samples, target, base.side, &model);
    const double cheb_theta = base.side == Side::Upside ? tilt.value_or(0.0) : 0.0;
    add_check(table, {"chebyshev", pass(mc::empirical_chebyshev_check(direct_samples, cheb_theta,
                                                                       target)),
                      direct.estimate, kEmpty, 0.0,
                      "empirical Chebyshev bound at theta = " + io::format_number(cheb_theta)});

    const auto& tilted = fit.rows.front().result;
    const double oracle =
        bs ? models::bs_prob_exact(*bs, policy.scalar_intercept(), target, first.horizon, base.side)
           : direct.estimate;
    if (oracle >= 0.05 && mc::is_tilted(fit.rows.front().estimator)) {
      const double tol = 3.0 * std::hypot(direct.std_error, tilted.std_error);
      add_check(table, {"tilted_vs_direct", pass(std::abs(direct.estimate - tilted.estimate) <= tol),
                        tilted.estimate, direct.estimate, tol,
                        "T = " + io::format_number(first.horizon)});
    }
    table.meta["slope"] = fit.slope;
    table.meta["slope_se"] = fit.slope_se;
    table.meta["v"] = v.as_double();
  }
  return table;
}

bool verify_passed(const Table& report) {
  for (std::size_t i = 0; i < report.size(); ++i) {
    if (std::get<std::string>(report.at(i, "status")) == "FAIL") return false;
  }
  return true;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Long-horizon portfolio large deviations by duality", "growthld"};
  app.require_subcommand(1);

  std::string model_path, side_text = "up", grid, format = "csv", out_path, tilt, horizons;
  std::optional<double> ell, theta, pi;
  std::size_t paths = 10000;
  double horizon = 10.0, dt = 0.01;
  std::uint64_t seed = 1;
  unsigned threads = 0;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--model", model_path, "model JSON file")->required()->check(CLI::ExistingFile);
    sub->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--out", out_path, "output file (default stdout)");
  };
  auto sim_flags = [&](CLI::App* sub) {
    sub->add_option("--side", side_text, "up or down")->check(CLI::IsMember({"up", "down"}));
    sub->add_option("--ell", ell, "target growth rate");
    sub->add_option("--theta", theta, "log-Laplace parameter");
    sub->add_option("--pi", pi, "constant policy instead of the optimal one");
    sub->add_option("--paths", paths, "number of paths")->check(CLI::Range(std::size_t{2}, std::size_t{1} << 40));
    sub->add_option("--horizon", horizon, "time horizon T");
    sub->add_option("--dt", dt, "time step");
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--tilt", tilt, "auto or a tilt value");
    sub->add_option("--threads", threads, "worker threads (0 = all cores)");
  };

  auto* dual = app.add_subcommand("dual", "tabulate the dual curve");
  common(dual);
  dual->add_option("--side", side_text, "up or down")->check(CLI::IsMember({"up", "down"}));
  dual->add_option("--grid", grid, "theta grid a:b:n or list")->required();

  auto* frontier = app.add_subcommand("frontier", "rates and policies over a target grid");
  common(frontier);
  frontier->add_option("--side", side_text, "up or down")->check(CLI::IsMember({"up", "down"}));
  auto* fgrid = frontier->add_option("--grid", grid, "target grid a:b:n or list");
  frontier->add_option("--ell", ell, "single target")->excludes(fgrid);

  auto* ric = app.add_subcommand("riccati", "Riccati sweep with certificates");
  common(ric);
  ric->add_option("--grid", grid, "theta grid a:b:n or list")->required();

  auto* simulate = app.add_subcommand("simulate", "Monte-Carlo estimates");
  common(simulate);
  sim_flags(simulate);

  auto* verify = app.add_subcommand("verify", "check closed forms against simulation");
  common(verify);
  sim_flags(verify);
  verify->add_option("--horizons", horizons, "horizons for the rate fit (default 40,80,160)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kConfigError;
  }

  try {
    const ModelSpec model = io::load_model(model_path);
    const Side side = parse_side(side_text);
    SimulateOptions sim;
    sim.side = side;
    sim.target = ell;
    sim.theta = theta;
    sim.pi = pi;
    sim.tilt = tilt;
    sim.sim.horizon = horizon;
    sim.sim.dt = std::min(dt, horizon);
    sim.sim.n_paths = paths;
    sim.sim.seed = seed;
    sim.sim.threads = threads;

    Table table;
    int status = kOk;
    if (dual->parsed()) {
      table = dual_table(model, side, io::parse_grid(grid));
    } else if (frontier->parsed()) {
      if (grid.empty() && !ell) throw Error(ErrorCode::InvalidConfig, "frontier needs --grid or --ell");
      table = frontier_table(model, side, ell ? std::vector<double>{*ell} : io::parse_grid(grid));
    } else if (ric->parsed()) {
      table = riccati_table(model, io::parse_grid(grid));
    } else if (simulate->parsed()) {
      table = simulate_table(model, sim);
    } else {
      VerifyOptions options;
      options.base = sim;
      if (!horizons.empty()) options.horizons = io::parse_grid(horizons);
      if (options.horizons.size() < 3) {
        throw Error(ErrorCode::InvalidConfig, "verify needs at least 3 horizons");
      }
      table = verify_table(model, options);
      if (!verify_passed(table)) status = kVerifyFailed;
    }

    const std::string text = format == "json" ? table.to_json().dump(2) + "\n" : table.to_csv();
    if (out_path.empty()) {
      out << text;
    } else {
      std::ofstream file(out_path);
      if (!file) throw Error(ErrorCode::InvalidConfig, "cannot write " + out_path);
      file << text;
    }
    return status;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return is_config_error(e.code()) ? kConfigError : kNumericalError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kNumericalError;
  }
}

}  // namespace growthld::cli

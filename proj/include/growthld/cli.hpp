#pragma once

// Command-line front end. Each subcommand is a function from a model and
// options to a Table, so the same code serves the executable and the tests.
//
// Exit codes: 0 success, 1 verification failure, 2 configuration error,
// 3 numerical failure.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "growthld/mc.hpp"
#include "growthld/model_spec.hpp"
#include "growthld/table.hpp"

namespace growthld::cli {

enum ExitCode { kOk = 0, kVerifyFailed = 1, kConfigError = 2, kNumericalError = 3 };

duality::Side parse_side(const std::string& text);

/// theta, Lambda(theta), Lambda'(theta); convexity diagnostics in meta.
io::Table dual_table(const ModelSpec& model, duality::Side side, const std::vector<double>& thetas);

/// l, regime, theta(l), v(l), policy gain and intercept.
io::Table frontier_table(const ModelSpec& model, duality::Side side,
                         const std::vector<double>& targets);

/// Riccati sweep with residual and eigenvalue certificates; closed-form
/// columns for one-dimensional models.
io::Table riccati_table(const ModelSpec& model, const std::vector<double>& thetas);

struct SimulateOptions {
  duality::Side side = duality::Side::Upside;
  std::optional<double> target;
  /// Log-Laplace parameter.
  std::optional<double> theta;
  /// Constant policy overriding the optimal one.
  std::optional<double> pi;
  /// "auto" for theta(l), a number, or empty for no tilted run.
  std::string tilt;
  mc::SimConfig sim;
};

/// Policy used by simulate and verify: --pi if given, else the optimal policy
/// for the target, else the dual optimizer at theta, else theta = 0.
models::FeedbackPolicy choose_policy(const ModelSpec& model, const SimulateOptions& options);

/// Rows: estimator, T, theta, ell, estimate, se, ess, n_paths, seed.
io::Table simulate_table(const ModelSpec& model, const SimulateOptions& options);

struct VerifyOptions {
  SimulateOptions base;
  std::vector<double> horizons{40.0, 80.0, 160.0};
};

/// One row per check: check, status (PASS, FAIL or INFO), value, reference,
/// tolerance, detail.
io::Table verify_table(const ModelSpec& model, const VerifyOptions& options);
bool verify_passed(const io::Table& report);

/// Entry point of the executable.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace growthld::cli

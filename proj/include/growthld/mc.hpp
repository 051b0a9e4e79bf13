#pragma once

// Monte-Carlo verification: Euler-Maruyama paths of (L, Y) under an affine
// feedback policy, direct and exponentially tilted tail-probability
// estimators, log-Laplace estimates and decay-rate fits.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "growthld/model_spec.hpp"

namespace growthld::mc {

using duality::Side;
using models::FeedbackPolicy;

enum class Scheme { EulerLogWealth };

enum class Estimator {
  Direct,
  /// Ratio sum(w 1_A) / sum(w) over paths from the tilted dynamics.
  TiltedSelfNormalized,
  /// Plain mean of w 1_A over paths from the tilted dynamics.
  TiltedExactDensity,
};
std::string to_string(Estimator estimator);
bool is_tilted(Estimator estimator);

struct SimConfig {
  double horizon = 1.0;
  double dt = 0.01;
  std::size_t n_paths = 1000;
  std::uint64_t seed = 0;
  Scheme scheme = Scheme::EulerLogWealth;
  Estimator estimator = Estimator::Direct;
  /// Paths are drawn under the measure whose Brownian motion is shifted by
  /// theta sigma' pi(Y), plus gamma'(C Y + D) when tilt_value is set.
  double theta_tilt = 0.0;
  std::optional<riccati::QuadraticValue> tilt_value;
  /// Worker threads; 0 picks the hardware concurrency. Results do not depend
  /// on it.
  unsigned threads = 0;
  /// Each increment is built from 2^r finer normals, so a run at dt with
  /// r + 1 shares its Brownian path with a run at dt / 2 with r.
  unsigned brownian_refinement = 0;
  bool record_integrand = false;
  /// Initial factor value; empty means 0.
  Eigen::VectorXd y0;

  void validate() const;
  /// ceil(T / dt) up to rounding; the last step is shortened.
  std::size_t steps() const;
};

struct PathSamples {
  double horizon = 0.0;
  Estimator estimator = Estimator::Direct;
  double theta_tilt = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> L;           ///< terminal log-wealth per path
  Eigen::MatrixXd Y;               ///< m x n_paths terminal factors
  std::vector<double> integral_f;  ///< int_0^T f(theta, Y, pi) dt, when recorded
  std::vector<double> log_weight;  ///< ln dP/dQ per path; empty when untilted

  std::size_t size() const { return L.size(); }
  bool weighted() const { return !log_weight.empty(); }
};

/// Throws NumericalBlowup naming the first path (in path order) whose state
/// became non-finite.
PathSamples simulate_paths(const ModelSpec& model, const FeedbackPolicy& policy,
                           const SimConfig& cfg);

enum class Flag { ZeroHits, WeightDegeneracy };
std::string to_string(Flag flag);

struct SimResult {
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t n_paths = 0;
  std::optional<double> log_estimate;
  std::map<std::string, double> extras;
  std::vector<Flag> flags;
  std::string note;

  bool has(Flag flag) const;
};

/// Empirical frequency of L_T / T >= l (upside) or <= l (downside) with
/// binomial standard error. With no hits the ZeroHits flag is set, and when
/// `model` is given the optimal tilt theta(l) is recommended in extras.
SimResult estimate_prob(const PathSamples& samples, double target, Side side,
                        const ModelSpec* model = nullptr);

/// Importance-weighted probability from tilted samples, self-normalized
/// (delta-method error) or exact-density (sample error of w 1_A).
SimResult weighted_prob(const PathSamples& samples, double target, Side side,
                        Estimator estimator);

/// (1/T) ln E[exp(theta L_T)] with delta-method standard error. Tilted samples
/// are reweighted. extras: "ess".
SimResult estimate_log_laplace(const PathSamples& samples, double theta);

/// Simulates under the tilt and applies cfg.estimator (self-normalized unless
/// exact-density is requested). theta must be >= 0 upside, <= 0 downside.
SimResult tilted_estimate_prob(const ModelSpec& model, const FeedbackPolicy& policy,
                               double theta_tilt, double target, Side side, SimConfig cfg);

struct RateRow {
  double horizon = 0.0;
  Estimator estimator = Estimator::Direct;
  double theta = 0.0;
  SimResult result;
};

struct RateFit {
  /// Least-squares slope of ln P(T) against T.
  double slope = 0.0;
  double intercept = 0.0;
  /// Standard error of the slope from the per-T log-scale errors.
  double slope_se = 0.0;
  /// Slope with ln T as an extra regressor, absorbing a power-law prefactor.
  std::optional<double> log_adjusted_slope;
  std::vector<RateRow> rows;
};

/// Estimates P(T) at each horizon. With cfg.estimator = Direct the direct
/// estimator is tried first and replaced by the tilted one when it has fewer
/// than 100 hits; a tilted cfg.estimator is used throughout. A degenerate
/// self-normalized estimate falls back to exact density on the same paths.
/// The tilt is `tilt` if given, else theta(l) from the model; factor models
/// are tilted with the matching quadratic value.
RateFit rate_fit(const ModelSpec& model, const FeedbackPolicy& policy, double target, Side side,
                 std::span<const double> horizons, const SimConfig& cfg,
                 std::optional<double> tilt = std::nullopt);

/// P[L_T/T >= l] <= exp(-theta l T) E[exp(theta L_T)] under the (weighted)
/// empirical measure of the samples.
bool empirical_chebyshev_check(const PathSamples& samples, double theta, double target);
/// Same inequality with explicit per-path weights.
bool empirical_chebyshev_check(std::span<const double> L, std::span<const double> weights,
                               double horizon, double theta, double target);

}  // namespace growthld::mc

#pragma once

// Closed-form backends: the Black-Scholes market with constant proportions,
// the one-dimensional linear Gaussian factor model, and its Platen-Rebolledo
// special case. Each produces DualCurves for the duality engine and the
// feedback policies attached to a tilt.

#include <optional>

#include <Eigen/Dense>

#include "growthld/duality.hpp"

namespace growthld::models {

using duality::DualCurve;
using duality::RateValue;
using duality::Side;

/// Affine feedback pi(y) = gain * y + intercept, in fractions of wealth.
/// gain is d x m (m = 0 for models without factors).
struct FeedbackPolicy {
  Eigen::MatrixXd gain;
  Eigen::VectorXd intercept;

  /// Constant single-asset policy, no factor dependence.
  static FeedbackPolicy constant(double pi);
  /// One asset, one factor.
  static FeedbackPolicy scalar(double gain, double intercept);

  Eigen::Index assets() const { return intercept.size(); }
  Eigen::Index factors() const { return gain.cols(); }
  Eigen::VectorXd operator()(const Eigen::VectorXd& y) const;

  /// Scalar views for single-asset policies. A factor-free policy has gain 0.
  double scalar_gain() const;
  double scalar_intercept() const;
};

// ---------------------------------------------------------------------------
// Black-Scholes

struct BlackScholesModel {
  double b = 0.0;
  double sigma = 0.0;

  void validate() const;
};

/// Limiting log-Laplace function of the growth rate for a constant fraction pi:
/// theta * (b pi - (1 - theta) sigma^2 pi^2 / 2).
double bs_gamma(const BlackScholesModel& model, double theta, double pi);
/// Drift of the average growth rate, b pi - sigma^2 pi^2 / 2.
double bs_mean_rate(const BlackScholesModel& model, double pi);
/// Lambda'(0) = b^2 / (2 sigma^2).
double bs_merton_rate(const BlackScholesModel& model);
/// Optimized dual value (b^2 / 2 sigma^2) theta / (1 - theta); +inf for theta >= 1.
double bs_lambda(const BlackScholesModel& model, double theta);
DualCurve bs_dual(const BlackScholesModel& model, Side side);
/// Optimizer of the dual problem, b / (sigma^2 (1 - theta)).
double bs_dual_policy(const BlackScholesModel& model, double theta);

/// Optimal (upside: nearly optimal Merton fraction below Lambda'(0)) policy.
FeedbackPolicy bs_policy(const BlackScholesModel& model, double target, Side side);
/// Closed-form rates v+(l), v-(l).
RateValue bs_rates(const BlackScholesModel& model, double target, Side side);

/// Exact finite-horizon P[L_T / T >= l] (upside) or P[L_T / T <= l]
/// (downside) for a constant fraction pi. With pi = 0 the law is degenerate
/// and the 0/1 indicator is returned.
double bs_prob_exact(const BlackScholesModel& model, double pi, double target, double horizon,
                     Side side);
double bs_log_prob_exact(const BlackScholesModel& model, double pi, double target,
                         double horizon, Side side);
/// Tilt that centres the growth rate of a constant policy on `target`.
double bs_centering_tilt(const BlackScholesModel& model, double pi, double target);

// ---------------------------------------------------------------------------
// One-dimensional linear Gaussian factor model
//
//   dS/S = (B1 Y + B0) dt + sigma dW,   dY = K Y dt + gamma dW,
//
// with |sigma|, |gamma| the norms of the loading rows and rho their correlation.

struct LinearFactor1D {
  double K = 0.0;
  double B1 = 0.0;
  double B0 = 0.0;
  double sigma_norm = 0.0;
  double gamma_norm = 0.0;
  double rho = 0.0;

  void validate() const;
};

struct BetaThetaBar {
  double beta = 0.0;
  double theta_bar = 1.0;
};
BetaThetaBar lg1d_beta_thetabar(const LinearFactor1D& model);

struct RiccatiRoots {
  double minus = 0.0;  ///< ergodic root, the one used everywhere
  double plus = 0.0;
};
RiccatiRoots lg1d_riccati_roots(const LinearFactor1D& model, double theta);
/// Scalar Riccati left-hand side at C.
double lg1d_riccati_residual(const LinearFactor1D& model, double theta, double C);
/// Closed-loop factor drift at C; negative at the ergodic root.
double lg1d_closed_loop_drift(const LinearFactor1D& model, double theta, double C);
double lg1d_D(const LinearFactor1D& model, double theta);
/// Gamma(theta); requires theta < theta_bar.
double lg1d_gamma(const LinearFactor1D& model, double theta);
DualCurve lg1d_gamma_curve(const LinearFactor1D& model, Side side);

struct GammaPrimeZero {
  double numeric = 0.0;   ///< binding value, central difference of Gamma at 0
  double printed = 0.0;   ///< B0^2/(2|s|^2) - B1^2 |g| / (4 |s|^2 K)
  bool disagrees = false; ///< |numeric - printed| > 1e-4
};
GammaPrimeZero lg1d_gamma_prime_zero(const LinearFactor1D& model);

FeedbackPolicy lg1d_policy(const LinearFactor1D& model, double theta);

// ---------------------------------------------------------------------------
// Platen-Rebolledo: log-price driven by an Ornstein-Uhlenbeck factor.

struct PlatenRebolledo {
  double K = 0.0;
  double sigma_norm = 0.0;

  void validate() const;
};

/// B1 = K, B0 = |sigma|^2 / 2, gamma = sigma, rho = 1.
LinearFactor1D to_linear_factor(const PlatenRebolledo& model);

struct PrLevels {
  double ell_bar = 0.0;    ///< Gamma'(0) = |K|/4 + |sigma|^2/8
  double ell_under = 0.0;  ///< Gamma'(-inf) = |sigma|^2/8
};
PrLevels pr_levels(const PlatenRebolledo& model);
double pr_gamma(const PlatenRebolledo& model, double theta);
/// theta(l) = 1 - ((l_bar - l_under) / (l - l_under))^2 for l > l_under.
double pr_tilt(const PlatenRebolledo& model, double target);
RateValue pr_rates(const PlatenRebolledo& model, double target, Side side);
/// Closed-form optimal policy; nullopt in the unreachable downside regime.
std::optional<FeedbackPolicy> pr_policy(const PlatenRebolledo& model, double target, Side side);

}  // namespace growthld::models

#pragma once

// Quadratic-ansatz solution of the ergodic risk-sensitive equation for the
// multi-dimensional linear Gaussian factor model
//
//   dS = diag(S) ((B1 Y + B0) dt + sigma dW),   dY = K Y dt + gamma dW,
//
// with W of dimension d + m. The relative value function is
// phi(y) = y'C y / 2 + D'y, where C is the stabilizing solution of a
// symmetric algebraic Riccati equation and D solves a linear system.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "growthld/duality.hpp"
#include "growthld/models.hpp"

namespace growthld::riccati {

struct LinearFactorMD {
  Eigen::MatrixXd K;      ///< m x m, Hurwitz
  Eigen::MatrixXd B1;     ///< d x m
  Eigen::VectorXd B0;     ///< d, nonzero
  Eigen::MatrixXd sigma;  ///< d x (d + m), full row rank
  Eigen::MatrixXd gamma;  ///< m x (d + m), nonzero

  Eigen::Index assets() const { return B0.size(); }
  Eigen::Index factors() const { return K.rows(); }
  Eigen::Index noise_dimension() const { return sigma.cols(); }

  void validate() const;
};

/// d = m = 1 embedding with sigma = |sigma| (1, 0) and
/// gamma = |gamma| (rho, sqrt(1 - rho^2)).
LinearFactorMD embed(const models::LinearFactor1D& model);

struct QuadraticValue {
  double theta = 0.0;
  Eigen::MatrixXd C;  ///< symmetric m x m
  Eigen::VectorXd D;  ///< m
  double residual = 0.0;
  /// Largest real part among closed-loop eigenvalues; negative for a
  /// stabilizing solution.
  double max_real_eigenvalue = 0.0;
  int iterations = 0;

  double phi(const Eigen::VectorXd& y) const { return 0.5 * y.dot(C * y) + D.dot(y); }
  Eigen::VectorXd gradient(const Eigen::VectorXd& y) const { return C * y + D; }
};

/// theta-dependent coefficients of the Riccati equation
///   C Q C / 2 + (A'C + C A) / 2 + R = 0.
struct RiccatiCoefficients {
  double theta = 0.0;
  Eigen::MatrixXd Q;              ///< gamma (I + k sigma'(sigma sigma')^-1 sigma) gamma'
  Eigen::MatrixXd A;              ///< K + k gamma sigma'(sigma sigma')^-1 B1
  Eigen::MatrixXd R;              ///< k B1'(sigma sigma')^-1 B1 / 2
  Eigen::MatrixXd cov_inverse;    ///< (sigma sigma')^-1
  double k = 0.0;                 ///< theta / (1 - theta)
};
RiccatiCoefficients coefficients(const LinearFactorMD& model, double theta);

/// A + Q C, the factor drift under the optimally tilted measure.
Eigen::MatrixXd closed_loop(const RiccatiCoefficients& coeffs, const Eigen::MatrixXd& C);

/// Newton iteration on the symmetrized Riccati equation, started at
/// `warm_start` (default 0) with continuation in theta from 0 as fallback.
QuadraticValue solve_care(const LinearFactorMD& model, double theta,
                          const std::optional<Eigen::MatrixXd>& warm_start = std::nullopt);

/// Frobenius norm of the symmetrized Riccati left-hand side.
double riccati_residual(const LinearFactorMD& model, double theta, const Eigen::MatrixXd& C);

double gamma_md(const LinearFactorMD& model, double theta, const QuadraticValue& qv);
models::FeedbackPolicy policy_md(const LinearFactorMD& model, double theta,
                                 const QuadraticValue& qv);

struct SweepPoint {
  double theta = 0.0;
  std::optional<QuadraticValue> solution;
  double gamma = 0.0;
  std::optional<ErrorCode> error;
  std::string message;
};

struct SweepReport {
  std::vector<SweepPoint> points;  ///< in grid order
  /// First theta > 0, walking up from 0, at which no stabilizing solution was
  /// found. Not claimed to equal the true dual-domain boundary.
  std::optional<double> breakdown;
  /// max ||C(theta_{k+1}) - C(theta_k)||_F / |theta_{k+1} - theta_k| over
  /// consecutive solved points.
  double lipschitz = 0.0;
};

/// Solves along a sorted grid, continuing outward from theta = 0 and warm
/// starting each Newton solve from the neighbouring solution.
SweepReport theta_sweep(const LinearFactorMD& model, std::span<const double> thetas);

/// Largest theta in (0, 1) with a stabilizing solution, by bisection on
/// solvability, to absolute tolerance `tol`.
double breakdown_point(const LinearFactorMD& model, double tol = 1e-6);

/// Gamma(theta) as a DualCurve. The upside domain ends at the empirical
/// breakdown point.
duality::DualCurve gamma_curve(const LinearFactorMD& model, duality::Side side);

}  // namespace growthld::riccati

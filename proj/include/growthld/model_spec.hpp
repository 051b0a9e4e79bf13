#pragma once

// A model as one of the four backends, and the per-backend dispatch used by
// the simulator and the command line.

#include <optional>
#include <string>
#include <variant>

#include <Eigen/Dense>

#include "growthld/duality.hpp"
#include "growthld/models.hpp"
#include "growthld/riccati.hpp"

namespace growthld {

using ModelSpec = std::variant<models::BlackScholesModel, models::LinearFactor1D,
                               models::PlatenRebolledo, riccati::LinearFactorMD>;

std::string model_name(const ModelSpec& model);
void validate(const ModelSpec& model);

/// Coefficients of the simulated system
///   dL = (pi'(B1 Y + B0) - pi' sigma sigma' pi / 2) dt + pi' sigma dW,
///   dY = K Y dt + gamma dW,
/// with d assets, m factors and W of dimension d + m. Black-Scholes has m = 0
/// and a one-dimensional W.
struct Dynamics {
  Eigen::MatrixXd K;      ///< m x m
  Eigen::MatrixXd B1;     ///< d x m
  Eigen::VectorXd B0;     ///< d
  Eigen::MatrixXd sigma;  ///< d x n
  Eigen::MatrixXd gamma;  ///< m x n

  Eigen::Index assets() const { return B0.size(); }
  Eigen::Index factors() const { return K.rows(); }
  Eigen::Index noise_dimension() const { return sigma.cols(); }
};
Dynamics dynamics(const ModelSpec& model);

duality::DualCurve dual_curve(const ModelSpec& model, duality::Side side);

/// v(l): closed form for Black-Scholes and Platen-Rebolledo, the conjugation
/// engine otherwise.
duality::RateValue rate(const ModelSpec& model, double target, duality::Side side);

/// The dual optimizer pi-hat(.; theta).
models::FeedbackPolicy policy_at_theta(const ModelSpec& model, double theta);

/// Optimal policy attached to a rate: closed forms where published, the
/// theta = 0 policy in the free regime, nothing when unreachable (except the
/// Black-Scholes "do nothing" policy).
std::optional<models::FeedbackPolicy> optimal_policy(const ModelSpec& model, double target,
                                                     duality::Side side,
                                                     const duality::RateValue& rate);

/// (C, D) at theta for factor models; nullopt for Black-Scholes.
std::optional<riccati::QuadraticValue> quadratic_value(const ModelSpec& model, double theta);

}  // namespace growthld

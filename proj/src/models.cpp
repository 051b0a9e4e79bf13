#include "growthld/models.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace growthld::models {

namespace {

void require(bool condition, const char* message) {
  if (!condition) throw Error(ErrorCode::InvalidModel, message);
}

double sign(double x) { return x < 0.0 ? -1.0 : 1.0; }

// ln P[Z >= z] for standard normal Z, accurate far into the tail.
double log_normal_sf(double z) {
  if (z < 20.0) return std::log(0.5 * std::erfc(z / std::numbers::sqrt2));
  const double z2 = z * z;
  return -0.5 * z2 - std::log(z * std::sqrt(2.0 * std::numbers::pi)) +
         std::log1p(-1.0 / z2 + 3.0 / (z2 * z2));
}

}  // namespace

FeedbackPolicy FeedbackPolicy::constant(double pi) {
  FeedbackPolicy policy;
  policy.gain = Eigen::MatrixXd::Zero(1, 0);
  policy.intercept = Eigen::VectorXd::Constant(1, pi);
  return policy;
}

FeedbackPolicy FeedbackPolicy::scalar(double gain, double intercept) {
  FeedbackPolicy policy;
  policy.gain = Eigen::MatrixXd::Constant(1, 1, gain);
  policy.intercept = Eigen::VectorXd::Constant(1, intercept);
  return policy;
}

Eigen::VectorXd FeedbackPolicy::operator()(const Eigen::VectorXd& y) const {
  if (gain.cols() == 0) return intercept;
  return gain * y + intercept;
}

double FeedbackPolicy::scalar_gain() const {
  if (intercept.size() != 1 || gain.cols() > 1) {
    throw Error(ErrorCode::InvalidConfig, "policy is not single-asset, single-factor");
  }
  return gain.cols() == 0 ? 0.0 : gain(0, 0);
}

double FeedbackPolicy::scalar_intercept() const {
  if (intercept.size() != 1) throw Error(ErrorCode::InvalidConfig, "policy is not single-asset");
  return intercept(0);
}

// ---------------------------------------------------------------------------
// Black-Scholes

void BlackScholesModel::validate() const {
  require(std::isfinite(b), "b must be finite");
  require(std::isfinite(sigma) && sigma > 0.0, "sigma must be positive");
}

double bs_gamma(const BlackScholesModel& model, double theta, double pi) {
  return theta * (model.b * pi - (1.0 - theta) * model.sigma * model.sigma * pi * pi / 2.0);
}

double bs_mean_rate(const BlackScholesModel& model, double pi) {
  return model.b * pi - model.sigma * model.sigma * pi * pi / 2.0;
}

double bs_merton_rate(const BlackScholesModel& model) {
  return model.b * model.b / (2.0 * model.sigma * model.sigma);
}

double bs_lambda(const BlackScholesModel& model, double theta) {
  if (theta >= 1.0) return duality::kInf;
  return bs_merton_rate(model) * theta / (1.0 - theta);
}

double bs_dual_policy(const BlackScholesModel& model, double theta) {
  if (theta >= 1.0) throw Error(ErrorCode::DomainError, "dual policy needs theta < 1");
  return model.b / (model.sigma * model.sigma * (1.0 - theta));
}

DualCurve bs_dual(const BlackScholesModel& model, Side side) {
  model.validate();
  const double rate = bs_merton_rate(model);
  auto value = [model](double theta) { return bs_lambda(model, theta); };
  auto slope = [rate](double theta) { return rate / ((1.0 - theta) * (1.0 - theta)); };
  if (side == Side::Upside) return DualCurve::upside(value, 1.0, slope, rate > 0.0);
  return DualCurve::downside(value, slope, 0.0);
}

RateValue bs_rates(const BlackScholesModel& model, double target, Side side) {
  model.validate();
  const double rate = bs_merton_rate(model);
  if (side == Side::Upside) {
    if (target <= rate) return RateValue::free();
    if (rate == 0.0) {
      throw Error(ErrorCode::BeyondSteepLimit, "zero drift: no positive target is reachable");
    }
    const double gap = std::sqrt(rate) - std::sqrt(target);
    return RateValue::interior(-gap * gap, 1.0 - std::sqrt(rate / target));
  }
  if (target > rate) {
    throw Error(ErrorCode::TargetOutOfRange, "downside target above Lambda'(0)");
  }
  if (target < 0.0) return RateValue::unreachable();
  if (target == rate) return RateValue::free();
  if (target == 0.0) {
    throw Error(ErrorCode::TargetOutOfRange,
                "downside target equals Lambda'(-inf); no finite optimal tilt");
  }
  const double gap = std::sqrt(rate) - std::sqrt(target);
  return RateValue::interior(-gap * gap, 1.0 - std::sqrt(rate / target));
}

FeedbackPolicy bs_policy(const BlackScholesModel& model, double target, Side side) {
  model.validate();
  const double rate = bs_merton_rate(model);
  const double s2 = model.sigma * model.sigma;
  if (side == Side::Upside) {
    if (target <= rate) return FeedbackPolicy::constant(model.b / s2);
    if (rate == 0.0) {
      throw Error(ErrorCode::BeyondSteepLimit, "zero drift: no positive target is reachable");
    }
    return FeedbackPolicy::constant(sign(model.b) * std::sqrt(2.0 * target / s2));
  }
  if (target > rate) {
    throw Error(ErrorCode::TargetOutOfRange, "downside target above Lambda'(0)");
  }
  if (target < 0.0) return FeedbackPolicy::constant(0.0);
  return FeedbackPolicy::constant(sign(model.b) * std::sqrt(2.0 * target / s2));
}

double bs_prob_exact(const BlackScholesModel& model, double pi, double target, double horizon,
                     Side side) {
  return std::exp(bs_log_prob_exact(model, pi, target, horizon, side));
}

double bs_log_prob_exact(const BlackScholesModel& model, double pi, double target,
                         double horizon, Side side) {
  model.validate();
  if (!(horizon > 0.0)) throw Error(ErrorCode::InvalidConfig, "horizon must be positive");
  if (pi == 0.0) {
    const bool hit = side == Side::Upside ? 0.0 >= target : 0.0 <= target;
    return hit ? 0.0 : -duality::kInf;
  }
  const double sd = std::abs(model.sigma * pi) / std::sqrt(horizon);
  const double z = (target - bs_mean_rate(model, pi)) / sd;
  return side == Side::Upside ? log_normal_sf(z) : log_normal_sf(-z);
}

double bs_centering_tilt(const BlackScholesModel& model, double pi, double target) {
  if (pi == 0.0) throw Error(ErrorCode::DomainError, "no tilt moves a zero position");
  const double var = model.sigma * model.sigma * pi * pi;
  return (target - bs_mean_rate(model, pi)) / var;
}

// ---------------------------------------------------------------------------
// One-dimensional linear factor model

void LinearFactor1D::validate() const {
  require(std::isfinite(K) && K < 0.0, "K must be negative");
  require(std::isfinite(B1), "B1 must be finite");
  require(std::isfinite(B0) && B0 != 0.0, "B0 must be nonzero");
  require(std::isfinite(sigma_norm) && sigma_norm > 0.0, "sigma_norm must be positive");
  require(std::isfinite(gamma_norm) && gamma_norm > 0.0, "gamma_norm must be positive");
  require(std::isfinite(rho) && std::abs(rho) <= 1.0, "rho must lie in [-1, 1]");
}

namespace {

// a = |gamma| B1 / (K |sigma|), the normalized factor loading.
double loading(const LinearFactor1D& m) { return m.gamma_norm * m.B1 / (m.K * m.sigma_norm); }

void require_below_one(double theta) {
  if (!(theta < 1.0)) throw Error(ErrorCode::DomainError, "theta must be below 1");
}

double discriminant(double theta, double beta, double theta_bar) {
  if (theta > theta_bar) {
    throw Error(ErrorCode::DomainError,
                "theta = " + std::to_string(theta) + " beyond theta_bar = " +
                    std::to_string(theta_bar));
  }
  return std::max(0.0, (1.0 - theta) * (1.0 - theta * beta));
}

}  // namespace

BetaThetaBar lg1d_beta_thetabar(const LinearFactor1D& model) {
  model.validate();
  const double a = loading(model);
  const double beta = 1.0 - model.rho * model.rho + (model.rho - a) * (model.rho - a);
  return {beta, beta > 1.0 ? 1.0 / beta : 1.0};
}

RiccatiRoots lg1d_riccati_roots(const LinearFactor1D& model, double theta) {
  require_below_one(theta);
  const auto [beta, theta_bar] = lg1d_beta_thetabar(model);
  const double s = std::sqrt(discriminant(theta, beta, theta_bar));
  const double a = loading(model);
  const double g2 = model.gamma_norm * model.gamma_norm;
  const double scale = -model.K / g2;
  const double n = 1.0 - theta * (1.0 - model.rho * a);
  const double den = 1.0 - theta * (1.0 - model.rho * model.rho);
  // (n - s)(n + s) = theta a^2 den; pick the form without cancellation.
  RiccatiRoots roots;
  if (n >= 0.0 && n + s > 0.0) {
    roots.plus = scale * (n + s) / den;
    roots.minus = scale * theta * a * a / (n + s);
  } else {
    roots.minus = scale * (n - s) / den;
    roots.plus = (n - s) != 0.0 ? scale * theta * a * a / (n - s) : roots.minus;
  }
  if (theta < theta_bar) {
    const double drift = lg1d_closed_loop_drift(model, theta, roots.minus);
    if (!(drift < 0.0)) {
      throw Error(ErrorCode::ErgodicityViolated,
                  "closed-loop factor drift " + std::to_string(drift) + " is not negative");
    }
  }
  return roots;
}

double lg1d_riccati_residual(const LinearFactor1D& model, double theta, double C) {
  require_below_one(theta);
  const double k = theta / (1.0 - theta);
  const double g = model.gamma_norm;
  const double s = model.sigma_norm;
  const double quad = 0.5 * g * g * (1.0 - theta * (1.0 - model.rho * model.rho)) / (1.0 - theta);
  const double lin = model.K + k * model.rho * g * model.B1 / s;
  const double cst = 0.5 * k * model.B1 * model.B1 / (s * s);
  return quad * C * C + lin * C + cst;
}

double lg1d_closed_loop_drift(const LinearFactor1D& model, double theta, double C) {
  require_below_one(theta);
  const double k = theta / (1.0 - theta);
  const double g = model.gamma_norm;
  const double s = model.sigma_norm;
  return model.K + k * model.rho * g * model.B1 / s +
         g * g * (1.0 - theta * (1.0 - model.rho * model.rho)) / (1.0 - theta) * C;
}

double lg1d_D(const LinearFactor1D& model, double theta) {
  require_below_one(theta);
  const auto [beta, theta_bar] = lg1d_beta_thetabar(model);
  if (!(theta < theta_bar)) throw Error(ErrorCode::DomainError, "D needs theta < theta_bar");
  const double C = lg1d_riccati_roots(model, theta).minus;
  const double s = model.sigma_norm;
  const double root = std::sqrt(discriminant(theta, beta, theta_bar));
  return -(model.B0 / (model.K * s)) * theta * (model.rho * model.gamma_norm * C + model.B1 / s) /
         root;
}

double lg1d_gamma(const LinearFactor1D& model, double theta) {
  require_below_one(theta);
  const double theta_bar = lg1d_beta_thetabar(model).theta_bar;
  if (!(theta < theta_bar)) throw Error(ErrorCode::DomainError, "Gamma needs theta < theta_bar");
  const double C = lg1d_riccati_roots(model, theta).minus;
  const double D = lg1d_D(model, theta);
  const double k = theta / (1.0 - theta);
  const double g2 = model.gamma_norm * model.gamma_norm;
  const double s = model.sigma_norm;
  // 1 + k rho^2 written as den / (1 - theta) to stay accurate for theta -> -inf.
  const double weight = (1.0 - theta * (1.0 - model.rho * model.rho)) / (1.0 - theta);
  return 0.5 * g2 * C + 0.5 * g2 * D * D * weight +
         k * (model.B0 / s) * model.rho * model.gamma_norm * D +
         0.5 * k * model.B0 * model.B0 / (s * s);
}

DualCurve lg1d_gamma_curve(const LinearFactor1D& model, Side side) {
  const double theta_bar = lg1d_beta_thetabar(model).theta_bar;
  auto value = [model](double theta) { return lg1d_gamma(model, theta); };
  if (side == Side::Upside) return DualCurve::upside(value, theta_bar, {}, true);
  return DualCurve::downside(value);
}

GammaPrimeZero lg1d_gamma_prime_zero(const LinearFactor1D& model) {
  model.validate();
  constexpr double h = 1e-6;
  GammaPrimeZero out;
  out.numeric = (lg1d_gamma(model, h) - lg1d_gamma(model, -h)) / (2.0 * h);
  const double s2 = model.sigma_norm * model.sigma_norm;
  out.printed = model.B0 * model.B0 / (2.0 * s2) -
                model.B1 * model.B1 * model.gamma_norm / (4.0 * s2 * model.K);
  out.disagrees = std::abs(out.numeric - out.printed) > 1e-4;
  return out;
}

FeedbackPolicy lg1d_policy(const LinearFactor1D& model, double theta) {
  require_below_one(theta);
  const double theta_bar = lg1d_beta_thetabar(model).theta_bar;
  if (!(theta < theta_bar)) throw Error(ErrorCode::DomainError, "policy needs theta < theta_bar");
  const double C = lg1d_riccati_roots(model, theta).minus;
  const double D = lg1d_D(model, theta);
  const double s = model.sigma_norm;
  const double rg = model.rho * model.gamma_norm;
  const double scale = 1.0 / ((1.0 - theta) * s);
  return FeedbackPolicy::scalar(scale * (model.B1 / s + rg * C), scale * (model.B0 / s + rg * D));
}

// ---------------------------------------------------------------------------
// Platen-Rebolledo

void PlatenRebolledo::validate() const {
  require(std::isfinite(K) && K < 0.0, "K must be negative");
  require(std::isfinite(sigma_norm) && sigma_norm > 0.0, "sigma_norm must be positive");
}

LinearFactor1D to_linear_factor(const PlatenRebolledo& model) {
  model.validate();
  const double s = model.sigma_norm;
  return LinearFactor1D{model.K, model.K, s * s / 2.0, s, s, 1.0};
}

PrLevels pr_levels(const PlatenRebolledo& model) {
  model.validate();
  const double s2 = model.sigma_norm * model.sigma_norm;
  return {std::abs(model.K) / 4.0 + s2 / 8.0, s2 / 8.0};
}

double pr_gamma(const PlatenRebolledo& model, double theta) {
  require_below_one(theta);
  return std::abs(model.K) / 2.0 * (1.0 - std::sqrt(1.0 - theta)) +
         theta * model.sigma_norm * model.sigma_norm / 8.0;
}

double pr_tilt(const PlatenRebolledo& model, double target) {
  const auto [bar, under] = pr_levels(model);
  if (!(target > under)) throw Error(ErrorCode::TargetOutOfRange, "tilt needs l > l_under");
  const double r = (bar - under) / (target - under);
  return 1.0 - r * r;
}

RateValue pr_rates(const PlatenRebolledo& model, double target, Side side) {
  const auto [bar, under] = pr_levels(model);
  const double gap = target - bar;
  if (side == Side::Upside) {
    if (target <= bar) return RateValue::free();
    return RateValue::interior(-gap * gap / (gap + std::abs(model.K) / 4.0),
                               pr_tilt(model, target));
  }
  if (target > bar) throw Error(ErrorCode::TargetOutOfRange, "downside target above l_bar");
  if (target <= under) return RateValue::unreachable();
  if (target == bar) return RateValue::free();
  return RateValue::interior(-gap * gap / (target - under), pr_tilt(model, target));
}

std::optional<FeedbackPolicy> pr_policy(const PlatenRebolledo& model, double target, Side side) {
  const auto [bar, under] = pr_levels(model);
  const double s2 = model.sigma_norm * model.sigma_norm;
  if (side == Side::Upside) {
    const double excess = std::max(0.0, target - bar);
    return FeedbackPolicy::scalar((model.K - 4.0 * excess) / s2, 0.5);
  }
  if (target > bar) throw Error(ErrorCode::TargetOutOfRange, "downside target above l_bar");
  if (target <= under) return std::nullopt;
  return FeedbackPolicy::scalar(-4.0 * (target - under) / s2, 0.5);
}

}  // namespace growthld::models

#include "growthld/duality.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace growthld::duality {

namespace {

constexpr double kClampFraction = 1e-9;
constexpr double kSteepThreshold = 1e12;
constexpr double kBracketEpsilon = 1e-12;
constexpr double kFarLeft = -1152921504606846976.0;  // -2^60
constexpr int kMaxExpansions = 60;
constexpr int kMaxBisections = 2000;

std::string describe(double x) {
  std::ostringstream out;
  out.precision(17);
  out << x;
  return out.str();
}

}  // namespace

DualCurve DualCurve::upside(Function value, double theta_bar, Function derivative,
                            std::optional<bool> steep) {
  if (!value) throw Error(ErrorCode::InvalidConfig, "dual curve needs a value function");
  if (!(theta_bar > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "upside theta_bar must be positive");
  }
  DualCurve curve;
  curve.side_ = Side::Upside;
  curve.theta_bar_ = theta_bar;
  curve.value_ = std::move(value);
  curve.derivative_ = std::move(derivative);
  curve.cache_limits(steep, std::nullopt);
  return curve;
}

DualCurve DualCurve::downside(Function value, Function derivative,
                              std::optional<double> lower_limit_derivative) {
  if (!value) throw Error(ErrorCode::InvalidConfig, "dual curve needs a value function");
  DualCurve curve;
  curve.side_ = Side::Downside;
  curve.theta_bar_ = 0.0;
  curve.value_ = std::move(value);
  curve.derivative_ = std::move(derivative);
  curve.cache_limits(std::nullopt, lower_limit_derivative);
  return curve;
}

void DualCurve::cache_limits(std::optional<bool> steep, std::optional<double> lower_limit) {
  deriv_at_zero_ = derivative(0.0);
  if (side_ == Side::Upside) {
    deriv_lower_limit_ = deriv_at_zero_;
    if (steep.has_value()) {
      steep_ = *steep;
      deriv_upper_limit_ = steep_ ? kInf : derivative(std::isfinite(theta_bar_) ? upper_bound()
                                                                                : -kFarLeft);
    } else {
      const double probe = std::isfinite(theta_bar_) ? upper_bound() : -kFarLeft;
      const double d = derivative(probe);
      steep_ = !(d <= kSteepThreshold);
      deriv_upper_limit_ = steep_ ? kInf : d;
    }
  } else {
    steep_ = false;
    deriv_upper_limit_ = deriv_at_zero_;
    deriv_lower_limit_ = lower_limit.has_value() ? *lower_limit : derivative(kFarLeft);
  }
}

double DualCurve::lower_bound() const { return side_ == Side::Upside ? 0.0 : -kInf; }

double DualCurve::upper_bound() const {
  if (side_ == Side::Downside) return 0.0;
  return std::isfinite(theta_bar_) ? theta_bar_ * (1.0 - kClampFraction) : kInf;
}

bool DualCurve::in_domain(double theta) const {
  if (side_ == Side::Upside) return theta >= 0.0 && theta < theta_bar_;
  return theta <= 0.0;
}

double DualCurve::value(double theta) const {
  if (side_ == Side::Upside) {
    if (theta < 0.0) throw Error(ErrorCode::DomainError, "upside curve at theta < 0");
    if (theta >= theta_bar_) return kInf;
    return value_(std::min(theta, upper_bound()));
  }
  if (theta > 0.0) throw Error(ErrorCode::DomainError, "downside curve at theta > 0");
  return value_(theta);
}

double DualCurve::derivative(double theta) const {
  if (!in_domain(theta)) {
    throw Error(ErrorCode::DomainError, "derivative outside curve domain at theta = " +
                                            describe(theta));
  }
  if (side_ == Side::Upside) theta = std::min(theta, upper_bound());
  if (derivative_) return derivative_(theta);
  return finite_difference(theta);
}

// Central difference with h = max(1e-6, 1e-6 |theta|); second-order one-sided
// stencils where the central stencil would leave the domain.
double DualCurve::finite_difference(double theta) const {
  const double h = std::max(1e-6, 1e-6 * std::abs(theta));
  const double lo = lower_bound();
  const double hi = upper_bound();
  const bool room_left = theta - h >= lo;
  const bool room_right = theta + h <= hi;
  if (room_left && room_right) {
    return (value_(theta + h) - value_(theta - h)) / (2.0 * h);
  }
  if (!room_left && theta + 2.0 * h <= hi) {
    return (-3.0 * value_(theta) + 4.0 * value_(theta + h) - value_(theta + 2.0 * h)) / (2.0 * h);
  }
  if (!room_right && theta - 2.0 * h >= lo) {
    return (3.0 * value_(theta) - 4.0 * value_(theta - h) + value_(theta - 2.0 * h)) / (2.0 * h);
  }
  // Domain narrower than the stencil.
  const double a = std::max(lo, theta - h);
  const double b = std::min(hi, theta + h);
  return (value_(b) - value_(a)) / (b - a);
}

double solve_tilt(const DualCurve& curve, double target) {
  auto gap = [&](double theta) { return curve.derivative(theta) - target; };

  double a = 0.0;
  double b = 0.0;
  if (curve.side() == Side::Upside) {
    const double lower = curve.derivative_at_zero();
    const double upper = curve.derivative_upper_limit();
    if (!(target > lower && target < upper)) {
      throw Error(ErrorCode::TargetOutOfRange,
                  "target " + describe(target) + " outside (" + describe(lower) + ", " +
                      describe(upper) + ")");
    }
    const double scale = std::isfinite(curve.theta_bar()) ? curve.theta_bar() : 1.0;
    a = kBracketEpsilon * scale;
    if (gap(a) > 0.0) a = 0.0;
    if (std::isfinite(curve.theta_bar())) {
      b = curve.upper_bound();
      if (gap(b) < 0.0) {
        throw Error(ErrorCode::BracketFailure,
                    "derivative stays below target " + describe(target) + " up to theta = " +
                        describe(b));
      }
    } else {
      b = 1.0;
      int k = 0;
      while (gap(b) < 0.0) {
        if (++k > kMaxExpansions) {
          throw Error(ErrorCode::BracketFailure,
                      "derivative never reaches target " + describe(target));
        }
        a = b;
        b *= 2.0;
      }
    }
  } else {
    const double lower = curve.derivative_lower_limit();
    const double upper = curve.derivative_at_zero();
    if (!(target > lower && target < upper)) {
      throw Error(ErrorCode::TargetOutOfRange,
                  "target " + describe(target) + " outside (" + describe(lower) + ", " +
                      describe(upper) + ")");
    }
    b = -kBracketEpsilon;
    if (gap(b) < 0.0) b = 0.0;
    a = -1.0;
    int k = 0;
    while (gap(a) > 0.0) {
      if (++k > kMaxExpansions) {
        throw Error(ErrorCode::BracketFailure,
                    "derivative never falls to target " + describe(target));
      }
      b = a;
      a *= 2.0;
    }
  }

  double best = a;
  double best_gap = std::abs(gap(a));
  for (int i = 0; i < kMaxBisections && best_gap > 0.0; ++i) {
    const double mid = a + 0.5 * (b - a);
    if (mid <= a || mid >= b) break;
    const double g = gap(mid);
    if (std::abs(g) < best_gap) {
      best = mid;
      best_gap = std::abs(g);
    }
    if (g < 0.0) {
      a = mid;
    } else {
      b = mid;
    }
  }
  const double gb = std::abs(gap(b));
  if (gb < best_gap) best = b;
  return best;
}

RateValue conjugate_upside(const DualCurve& curve, double target) {
  if (curve.side() != Side::Upside) {
    throw Error(ErrorCode::InvalidConfig, "conjugate_upside needs an upside curve");
  }
  if (target <= curve.derivative_at_zero()) return RateValue::free();
  if (!curve.steep() && target >= curve.derivative_upper_limit()) {
    throw Error(ErrorCode::BeyondSteepLimit,
                "target " + describe(target) + " at or beyond Lambda'(theta_bar) = " +
                    describe(curve.derivative_upper_limit()));
  }
  const double theta = solve_tilt(curve, target);
  const double value = curve.value(theta) - theta * target;
  if (!(value < 0.0)) return RateValue::free();
  return RateValue::interior(value, theta);
}

RateValue conjugate_downside(const DualCurve& curve, double target) {
  if (curve.side() != Side::Downside) {
    throw Error(ErrorCode::InvalidConfig, "conjugate_downside needs a downside curve");
  }
  if (target >= curve.derivative_at_zero()) {
    throw Error(ErrorCode::TargetOutOfRange,
                "downside target " + describe(target) + " not below Lambda'(0) = " +
                    describe(curve.derivative_at_zero()));
  }
  if (target < curve.derivative_lower_limit()) return RateValue::unreachable();
  if (target == curve.derivative_lower_limit()) {
    // The infimum is only approached as theta -> -inf; there is no tilt.
    throw Error(ErrorCode::TargetOutOfRange,
                "downside target equals Lambda'(-inf); no finite optimal tilt");
  }
  const double theta = solve_tilt(curve, target);
  const double value = curve.value(theta) - theta * target;
  return RateValue::interior(std::min(value, 0.0), theta);
}

RateValue conjugate(const DualCurve& curve, double target) {
  return curve.side() == Side::Upside ? conjugate_upside(curve, target)
                                      : conjugate_downside(curve, target);
}

double near_optimal_tilt(const DualCurve& curve, unsigned long n) {
  if (curve.side() != Side::Upside) {
    throw Error(ErrorCode::InvalidConfig, "nearly optimal tilts exist for upside curves only");
  }
  if (n == 0) throw Error(ErrorCode::InvalidConfig, "n must be positive");
  return solve_tilt(curve, curve.derivative_at_zero() + 1.0 / static_cast<double>(n));
}

ConvexityReport check_convexity(const DualCurve& curve, std::span<const double> grid,
                                double tolerance) {
  std::vector<double> thetas;
  for (double t : grid) {
    if (curve.in_domain(t)) thetas.push_back(t);
  }
  std::sort(thetas.begin(), thetas.end());
  thetas.erase(std::unique(thetas.begin(), thetas.end()), thetas.end());

  ConvexityReport report;
  std::vector<double> values(thetas.size());
  std::vector<double> slopes(thetas.size());
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    values[i] = curve.value(thetas[i]);
    slopes[i] = curve.derivative(thetas[i]);
  }
  for (std::size_t i = 0; i + 2 < thetas.size(); ++i) {
    const double w = (thetas[i + 1] - thetas[i]) / (thetas[i + 2] - thetas[i]);
    const double chord = values[i] + w * (values[i + 2] - values[i]);
    const double excess = values[i + 1] - chord;
    const double allowed = tolerance * std::max(1.0, std::abs(chord));
    report.max_convexity_violation = std::max(report.max_convexity_violation, excess);
    if (excess > allowed) report.convex = false;
  }
  for (std::size_t i = 0; i + 1 < thetas.size(); ++i) {
    const double drop = slopes[i] - slopes[i + 1];
    const double allowed = tolerance * std::max(1.0, std::abs(slopes[i]));
    report.max_monotonicity_violation = std::max(report.max_monotonicity_violation, drop);
    if (drop > allowed) report.derivative_monotone = false;
  }
  return report;
}

}  // namespace growthld::duality

#pragma once

// Fenchel-Legendre conjugation of risk-sensitive dual value curves.
//
// A DualCurve is a convex function Lambda(theta) with Lambda(0) = 0, defined on
// [0, theta_bar) for the upside problem or on (-inf, 0] for the downside
// problem. Conjugation turns it into the large-deviations rate
//
//   v(l) = inf_theta [ Lambda(theta) - theta * l ]
//
// together with the optimal tilt theta(l) solving Lambda'(theta(l)) = l.
// Nothing in this header knows which model produced the curve.

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "growthld/errors.hpp"

namespace growthld::duality {

enum class Side { Upside, Downside };

constexpr std::string_view to_string(Side side) {
  return side == Side::Upside ? "up" : "down";
}

inline constexpr double kInf = std::numeric_limits<double>::infinity();

class DualCurve {
 public:
  using Function = std::function<double(double)>;

  /// Upside curve on [0, theta_bar). `theta_bar` may be +inf. When
  /// `derivative` is empty a central finite difference is used. `steep`
  /// states whether Lambda'(theta) -> inf at theta_bar; when unknown it is
  /// detected numerically.
  static DualCurve upside(Function value, double theta_bar, Function derivative = {},
                          std::optional<bool> steep = std::nullopt);

  /// Downside curve on (-inf, 0]. `lower_limit_derivative` is Lambda'(-inf)
  /// when known in closed form; otherwise it is estimated far out on the axis.
  static DualCurve downside(Function value, Function derivative = {},
                            std::optional<double> lower_limit_derivative = std::nullopt);

  Side side() const { return side_; }
  /// Right endpoint of the upside domain (+inf when unbounded); 0 for downside.
  double theta_bar() const { return theta_bar_; }
  bool has_analytic_derivative() const { return static_cast<bool>(derivative_); }
  bool steep() const { return steep_; }

  /// Smallest and largest theta at which the curve is evaluated. Upside
  /// evaluation is clamped to theta_bar * (1 - 1e-9).
  double lower_bound() const;
  double upper_bound() const;
  bool in_domain(double theta) const;

  double value(double theta) const;
  double derivative(double theta) const;

  double derivative_at_zero() const { return deriv_at_zero_; }
  /// Upside: Lambda'(theta_bar-), +inf for steep curves.
  double derivative_upper_limit() const { return deriv_upper_limit_; }
  /// Downside: Lambda'(-inf).
  double derivative_lower_limit() const { return deriv_lower_limit_; }

 private:
  DualCurve() = default;
  double finite_difference(double theta) const;
  void cache_limits(std::optional<bool> steep, std::optional<double> lower_limit);

  Side side_ = Side::Upside;
  double theta_bar_ = kInf;
  Function value_;
  Function derivative_;
  bool steep_ = true;
  double deriv_at_zero_ = 0.0;
  double deriv_upper_limit_ = kInf;
  double deriv_lower_limit_ = -kInf;
};

enum class Regime { Free, Interior, Unreachable };

constexpr std::string_view to_string(Regime regime) {
  switch (regime) {
    case Regime::Free: return "free";
    case Regime::Interior: return "interior";
    case Regime::Unreachable: return "unreachable";
  }
  return "unknown";
}

/// Value of a rate function. Minus infinity is its own regime and carries no
/// floating-point value.
class RateValue {
 public:
  static RateValue free() { return RateValue(Regime::Free, 0.0, std::nullopt); }
  static RateValue interior(double value, double tilt) {
    return RateValue(Regime::Interior, value, tilt);
  }
  static RateValue unreachable() { return RateValue(Regime::Unreachable, 0.0, std::nullopt); }

  Regime regime() const { return regime_; }
  bool is_minus_infinity() const { return regime_ == Regime::Unreachable; }
  /// Finite value, or nullopt for minus infinity.
  std::optional<double> finite_value() const {
    if (is_minus_infinity()) return std::nullopt;
    return value_;
  }
  /// Value as a double, with -inf for the unreachable regime. For numerics
  /// and serialization only.
  double as_double() const { return is_minus_infinity() ? -kInf : value_; }
  std::optional<double> tilt() const { return tilt_; }

 private:
  RateValue(Regime regime, double value, std::optional<double> tilt)
      : regime_(regime), value_(value), tilt_(tilt) {}

  Regime regime_;
  double value_;
  std::optional<double> tilt_;
};

/// theta with Lambda'(theta) = target, by bisection on the monotone derivative.
double solve_tilt(const DualCurve& curve, double target);

RateValue conjugate_upside(const DualCurve& curve, double target);
RateValue conjugate_downside(const DualCurve& curve, double target);
/// Dispatches on curve.side().
RateValue conjugate(const DualCurve& curve, double target);

/// theta_n = theta(Lambda'(0) + 1/n), the nearly optimal tilt sequence for
/// targets at or below Lambda'(0).
double near_optimal_tilt(const DualCurve& curve, unsigned long n);

template <class Policy>
struct FrontierPoint {
  double target = 0.0;
  std::optional<RateValue> rate;
  std::optional<Policy> policy;
  /// Set when this row failed; the sweep continues with the next target.
  std::optional<ErrorCode> error;
  std::string message;
};

/// Tabulates the conjugate over an ascending grid of targets. `policy_at`
/// maps (target, rate) to the model's policy for that row, returning nullopt
/// when the model has none.
template <class Policy>
std::vector<FrontierPoint<Policy>> frontier(
    const DualCurve& curve, std::span<const double> targets,
    const std::function<std::optional<Policy>(double, const RateValue&)>& policy_at = {}) {
  for (std::size_t i = 1; i < targets.size(); ++i) {
    if (targets[i] < targets[i - 1]) {
      throw Error(ErrorCode::InvalidConfig, "frontier grid must be sorted ascending");
    }
  }
  std::vector<FrontierPoint<Policy>> rows;
  rows.reserve(targets.size());
  for (double target : targets) {
    FrontierPoint<Policy> row;
    row.target = target;
    try {
      row.rate = conjugate(curve, target);
      if (policy_at) row.policy = policy_at(target, *row.rate);
    } catch (const Error& e) {
      row.error = e.code();
      row.message = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

struct ConvexityReport {
  bool convex = true;
  bool derivative_monotone = true;
  double max_convexity_violation = 0.0;
  double max_monotonicity_violation = 0.0;
};

/// Checks the three-point convexity inequality and monotonicity of Lambda'
/// on the in-domain points of an ascending grid.
ConvexityReport check_convexity(const DualCurve& curve, std::span<const double> grid,
                                double tolerance = 1e-9);

}  // namespace growthld::duality

#pragma once

// Reference computations written independently of the library.

#include <cmath>
#include <functional>

namespace oracle {

inline double normal_sf(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

/// Maximum of a unimodal function on [a, b].
inline double golden_max(const std::function<double(double)>& f, double a, double b,
                         int iterations = 200) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iterations; ++i) {
    if (fc < fd) {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    } else {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    }
  }
  return f(0.5 * (a + b));
}

/// Black-Scholes dual value b^2 theta / (2 sigma^2 (1 - theta)).
inline double bs_lambda(double b, double sigma, double theta) {
  return b * b * theta / (2.0 * sigma * sigma * (1.0 - theta));
}

/// P[L_T / T >= l] for L_T ~ N((b pi - sigma^2 pi^2 / 2) T, sigma^2 pi^2 T).
inline double bs_upper_tail(double b, double sigma, double pi, double l, double T) {
  const double mean = b * pi - 0.5 * sigma * sigma * pi * pi;
  return normal_sf((l - mean) * std::sqrt(T) / (sigma * pi));
}

/// Scalar linear-factor model written out by hand: coefficients of
/// Q C^2 / 2 + A C + R = 0 and the rest of the ergodic HJB.
struct Scalar1D {
  double K, B1, B0, s, g, rho;

  double k(double th) const { return th / (1.0 - th); }
  double Q(double th) const { return g * g * (1.0 + k(th) * rho * rho); }
  double A(double th) const { return K + k(th) * rho * g * B1 / s; }
  double R(double th) const { return 0.5 * k(th) * B1 * B1 / (s * s); }
  /// Root with negative closed-loop drift A + Q C.
  double C(double th) const {
    const double q = Q(th), a = A(th), disc = a * a - 2.0 * q * R(th);
    return (-a - std::sqrt(disc)) / q;
  }
  /// Hamiltonian of the ergodic HJB at y with phi = C y^2 / 2 + D y, stationary
  /// in pi; theta (pi mu - (1 - theta) s^2 pi^2 / 2) + theta pi s g rho phi'
  /// + K y phi' + g^2 (phi'' + phi'^2) / 2.
  double hamiltonian(double th, double C, double D, double y) const {
    const double p = C * y + D;
    const double mu = B1 * y + B0;
    const double pi = (mu + rho * s * g * p) / ((1.0 - th) * s * s);
    return th * (pi * mu - 0.5 * (1.0 - th) * s * s * pi * pi) + th * pi * s * g * rho * p +
           K * y * p + 0.5 * g * g * (C + p * p);
  }
  double policy(double th, double C, double D, double y) const {
    const double p = C * y + D;
    return (B1 * y + B0 + rho * s * g * p) / ((1.0 - th) * s * s);
  }
};

}  // namespace oracle

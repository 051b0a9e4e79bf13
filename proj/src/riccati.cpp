#include "growthld/riccati.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace growthld::riccati {

namespace {

constexpr int kMaxNewtonIterations = 60;
constexpr double kNewtonTolerance = 1e-11;
constexpr double kAcceptTolerance = 1e-9;
constexpr double kHurwitzMargin = -1e-10;
constexpr double kDivergenceNorm = 1e10;

void require(bool condition, const std::string& message) {
  if (!condition) throw Error(ErrorCode::InvalidModel, message);
}

std::string shape(const Eigen::MatrixXd& m) {
  std::ostringstream out;
  out << m.rows() << "x" << m.cols();
  return out.str();
}

double max_real_part(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return -std::numeric_limits<double>::infinity();
  Eigen::EigenSolver<Eigen::MatrixXd> solver(m, false);
  return solver.eigenvalues().real().maxCoeff();
}

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

Eigen::MatrixXd residual_matrix(const RiccatiCoefficients& c, const Eigen::MatrixXd& C) {
  return 0.5 * C.transpose() * c.Q * C + 0.5 * (c.A.transpose() * C + C.transpose() * c.A) + c.R;
}

// Size of the individual terms, so that tolerances are relative to them.
double term_scale(const RiccatiCoefficients& c, const Eigen::MatrixXd& C) {
  return std::max(1.0, 0.5 * (C.transpose() * c.Q * C).norm() + (c.A.transpose() * C).norm() +
                           c.R.norm());
}

// Solves Acl' H + H Acl = rhs for H through the Kronecker form over the m^2
// unknowns (column-major vec).
std::optional<Eigen::MatrixXd> solve_lyapunov(const Eigen::MatrixXd& Acl,
                                              const Eigen::MatrixXd& rhs) {
  const Eigen::Index m = Acl.rows();
  Eigen::MatrixXd op = Eigen::MatrixXd::Zero(m * m, m * m);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = 0; i < m; ++i) {
      const Eigen::Index row = i + j * m;
      for (Eigen::Index k = 0; k < m; ++k) {
        op(row, k + j * m) += Acl(k, i);
        op(row, i + k * m) += Acl(k, j);
      }
    }
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(op);
  if (!lu.isInvertible()) return std::nullopt;
  const Eigen::VectorXd h = lu.solve(rhs.reshaped());
  return symmetrized(h.reshaped(m, m));
}

struct NewtonResult {
  Eigen::MatrixXd C;
  double residual = 0.0;
  int iterations = 0;
};

std::optional<NewtonResult> newton(const RiccatiCoefficients& c, Eigen::MatrixXd C) {
  C = symmetrized(C);
  NewtonResult out;
  for (int it = 0; it <= kMaxNewtonIterations; ++it) {
    const Eigen::MatrixXd res = symmetrized(residual_matrix(c, C));
    const double r = res.norm();
    const double scale = term_scale(c, C);
    if (!std::isfinite(r)) return std::nullopt;
    out.iterations = it;
    if (r <= kNewtonTolerance * scale || it == kMaxNewtonIterations) {
      if (r > kAcceptTolerance * scale) return std::nullopt;
      out.C = C;
      out.residual = r;
      return out;
    }
    const Eigen::MatrixXd Acl = c.A + c.Q * C;
    auto step = solve_lyapunov(Acl, -2.0 * res);
    if (!step) return std::nullopt;
    C = symmetrized(C + *step);
    if (!(C.norm() < kDivergenceNorm)) return std::nullopt;
  }
  return std::nullopt;
}

bool stabilizing(const RiccatiCoefficients& c, const Eigen::MatrixXd& C) {
  return max_real_part(closed_loop(c, C)) <= kHurwitzMargin;
}

std::optional<NewtonResult> stabilizing_newton(const RiccatiCoefficients& c,
                                               const Eigen::MatrixXd& start) {
  auto result = newton(c, start);
  if (result && stabilizing(c, result->C)) return result;
  return std::nullopt;
}

}  // namespace

void LinearFactorMD::validate() const {
  const Eigen::Index m = K.rows();
  const Eigen::Index d = B0.size();
  require(m >= 1 && K.cols() == m, "K must be square and nonempty, got " + shape(K));
  require(d >= 1, "B0 must be nonempty");
  require(B1.rows() == d && B1.cols() == m, "B1 must be d x m, got " + shape(B1));
  require(sigma.rows() == d && sigma.cols() == d + m,
          "sigma must be d x (d+m), got " + shape(sigma));
  require(gamma.rows() == m && gamma.cols() == d + m,
          "gamma must be m x (d+m), got " + shape(gamma));
  require(K.allFinite() && B1.allFinite() && B0.allFinite() && sigma.allFinite() &&
              gamma.allFinite(),
          "model coefficients must be finite");
  require(max_real_part(K) < 0.0, "K must be Hurwitz");
  require(B0.norm() > 0.0, "B0 must be nonzero");
  require(gamma.norm() > 0.0, "gamma must be nonzero");
  Eigen::FullPivLU<Eigen::MatrixXd> lu(sigma * sigma.transpose());
  require(lu.isInvertible(), "sigma must have full row rank");
}

LinearFactorMD embed(const models::LinearFactor1D& model) {
  model.validate();
  LinearFactorMD md;
  md.K = Eigen::MatrixXd::Constant(1, 1, model.K);
  md.B1 = Eigen::MatrixXd::Constant(1, 1, model.B1);
  md.B0 = Eigen::VectorXd::Constant(1, model.B0);
  md.sigma.resize(1, 2);
  md.sigma << model.sigma_norm, 0.0;
  md.gamma.resize(1, 2);
  md.gamma << model.gamma_norm * model.rho,
      model.gamma_norm * std::sqrt(std::max(0.0, 1.0 - model.rho * model.rho));
  return md;
}

RiccatiCoefficients coefficients(const LinearFactorMD& model, double theta) {
  if (!(theta < 1.0)) throw Error(ErrorCode::DomainError, "Riccati system needs theta < 1");
  RiccatiCoefficients c;
  c.theta = theta;
  c.k = theta / (1.0 - theta);
  const Eigen::Index d = model.assets();
  const Eigen::Index n = model.noise_dimension();
  const Eigen::MatrixXd cov = model.sigma * model.sigma.transpose();
  c.cov_inverse = cov.ldlt().solve(Eigen::MatrixXd::Identity(d, d));
  const Eigen::MatrixXd projection = model.sigma.transpose() * c.cov_inverse * model.sigma;
  c.Q = symmetrized(model.gamma * (Eigen::MatrixXd::Identity(n, n) + c.k * projection) *
                    model.gamma.transpose());
  c.A = model.K + c.k * model.gamma * model.sigma.transpose() * c.cov_inverse * model.B1;
  c.R = symmetrized(0.5 * c.k * model.B1.transpose() * c.cov_inverse * model.B1);
  return c;
}

Eigen::MatrixXd closed_loop(const RiccatiCoefficients& coeffs, const Eigen::MatrixXd& C) {
  return coeffs.A + coeffs.Q * C;
}

QuadraticValue solve_care(const LinearFactorMD& model, double theta,
                          const std::optional<Eigen::MatrixXd>& warm_start) {
  model.validate();
  const Eigen::Index m = model.factors();
  const RiccatiCoefficients c = coefficients(model, theta);

  Eigen::MatrixXd start = Eigen::MatrixXd::Zero(m, m);
  if (warm_start && warm_start->rows() == m && warm_start->cols() == m) start = *warm_start;

  auto result = stabilizing_newton(c, start);
  if (!result && warm_start) result = stabilizing_newton(c, Eigen::MatrixXd::Zero(m, m));
  // Continuation from theta = 0, where C = 0 is the stabilizing root.
  for (int pieces : {4, 16, 64, 256}) {
    if (result) break;
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(m, m);
    bool ok = true;
    for (int i = 1; i <= pieces && ok; ++i) {
      const auto step = stabilizing_newton(coefficients(model, theta * i / pieces), C);
      if (step) {
        C = step->C;
        if (i == pieces) result = step;
      } else {
        ok = false;
      }
    }
  }
  if (!result) {
    std::ostringstream msg;
    msg << "no stabilizing Riccati solution at theta = " << theta;
    throw Error(ErrorCode::NoStabilizingSolution, msg.str());
  }

  QuadraticValue qv;
  qv.theta = theta;
  qv.C = result->C;
  qv.residual = result->residual;
  qv.iterations = result->iterations;
  const Eigen::MatrixXd Acl = closed_loop(c, qv.C);
  qv.max_real_eigenvalue = max_real_part(Acl);

  const Eigen::VectorXd rhs =
      -c.k * (model.sigma * model.gamma.transpose() * qv.C + model.B1).transpose() *
      c.cov_inverse * model.B0;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(Acl.transpose());
  if (!lu.isInvertible()) {
    throw Error(ErrorCode::SingularClosedLoop, "closed-loop matrix is singular");
  }
  qv.D = lu.solve(rhs);
  return qv;
}

double riccati_residual(const LinearFactorMD& model, double theta, const Eigen::MatrixXd& C) {
  const RiccatiCoefficients c = coefficients(model, theta);
  if (C.rows() != c.A.rows() || C.cols() != c.A.cols()) {
    throw Error(ErrorCode::InvalidConfig, "C has the wrong shape");
  }
  return symmetrized(residual_matrix(c, C)).norm();
}

double gamma_md(const LinearFactorMD& model, double theta, const QuadraticValue& qv) {
  const RiccatiCoefficients c = coefficients(model, theta);
  const Eigen::MatrixXd& g = model.gamma;
  return 0.5 * (g * g.transpose() * qv.C).trace() + 0.5 * qv.D.dot(c.Q * qv.D) +
         c.k * model.B0.dot(c.cov_inverse * model.sigma * g.transpose() * qv.D) +
         0.5 * c.k * model.B0.dot(c.cov_inverse * model.B0);
}

models::FeedbackPolicy policy_md(const LinearFactorMD& model, double theta,
                                 const QuadraticValue& qv) {
  const RiccatiCoefficients c = coefficients(model, theta);
  const Eigen::MatrixXd cross = model.sigma * model.gamma.transpose();
  const double scale = 1.0 / (1.0 - theta);
  models::FeedbackPolicy policy;
  policy.gain = scale * c.cov_inverse * (model.B1 + cross * qv.C);
  policy.intercept = scale * c.cov_inverse * (model.B0 + cross * qv.D);
  return policy;
}

SweepReport theta_sweep(const LinearFactorMD& model, std::span<const double> thetas) {
  model.validate();
  for (std::size_t i = 1; i < thetas.size(); ++i) {
    if (thetas[i] < thetas[i - 1]) {
      throw Error(ErrorCode::InvalidConfig, "theta grid must be sorted ascending");
    }
  }
  SweepReport report;
  report.points.resize(thetas.size());
  const Eigen::Index m = model.factors();

  auto solve_at = [&](std::size_t i, Eigen::MatrixXd& previous) {
    SweepPoint& point = report.points[i];
    point.theta = thetas[i];
    try {
      point.solution = solve_care(model, point.theta, previous);
      point.gamma = gamma_md(model, point.theta, *point.solution);
      previous = point.solution->C;
    } catch (const Error& e) {
      point.error = e.code();
      point.message = e.what();
      if (point.theta > 0.0 && !report.breakdown) report.breakdown = point.theta;
    }
  };

  const auto first_nonnegative = static_cast<std::size_t>(
      std::lower_bound(thetas.begin(), thetas.end(), 0.0) - thetas.begin());
  Eigen::MatrixXd previous = Eigen::MatrixXd::Zero(m, m);
  for (std::size_t i = first_nonnegative; i < thetas.size(); ++i) solve_at(i, previous);
  previous = Eigen::MatrixXd::Zero(m, m);
  for (std::size_t i = first_nonnegative; i-- > 0;) solve_at(i, previous);

  for (std::size_t i = 1; i < report.points.size(); ++i) {
    const auto& a = report.points[i - 1];
    const auto& b = report.points[i];
    if (!a.solution || !b.solution || b.theta == a.theta) continue;
    const double ratio = (b.solution->C - a.solution->C).norm() / (b.theta - a.theta);
    report.lipschitz = std::max(report.lipschitz, ratio);
  }
  return report;
}

double breakdown_point(const LinearFactorMD& model, double tol) {
  model.validate();
  auto solvable = [&](double theta) {
    try {
      solve_care(model, theta);
      return true;
    } catch (const Error&) {
      return false;
    }
  };
  double lo = 0.0;
  double hi = 1.0;
  bool failed = false;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (solvable(mid)) {
      lo = mid;
    } else {
      hi = mid;
      failed = true;
    }
  }
  return failed ? lo : 1.0;
}

duality::DualCurve gamma_curve(const LinearFactorMD& model, duality::Side side) {
  model.validate();
  // Warm start each solve from the previous one; the duality engine walks the
  // curve in small steps.
  auto last = std::make_shared<std::optional<Eigen::MatrixXd>>();
  auto value = [model, last](double theta) {
    const QuadraticValue qv = solve_care(model, theta, *last);
    *last = qv.C;
    return gamma_md(model, theta, qv);
  };
  if (side == duality::Side::Downside) return duality::DualCurve::downside(value);

  // Solvability is erratic within a few ulps-worth of conditioning of the
  // boundary, where the two Riccati roots merge. Points there without a
  // stabilizing solution are treated as outside the effective domain.
  auto guarded = [value](double theta) {
    try {
      return value(theta);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoStabilizingSolution) throw;
      return duality::kInf;
    }
  };
  return duality::DualCurve::upside(guarded, breakdown_point(model, 1e-10));
}

}  // namespace growthld::riccati

#include "growthld/model_spec.hpp"

namespace growthld {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Dynamics from_md(const riccati::LinearFactorMD& md) {
  return Dynamics{md.K, md.B1, md.B0, md.sigma, md.gamma};
}

}  // namespace

std::string model_name(const ModelSpec& model) {
  return std::visit(Overloaded{
                        [](const models::BlackScholesModel&) { return "black_scholes"; },
                        [](const models::LinearFactor1D&) { return "linear_factor_1d"; },
                        [](const models::PlatenRebolledo&) { return "platen_rebolledo"; },
                        [](const riccati::LinearFactorMD&) { return "linear_factor_md"; },
                    },
                    model);
}

void validate(const ModelSpec& model) {
  std::visit([](const auto& m) { m.validate(); }, model);
}

Dynamics dynamics(const ModelSpec& model) {
  return std::visit(
      Overloaded{
          [](const models::BlackScholesModel& m) {
            m.validate();
            Dynamics dyn;
            dyn.K = Eigen::MatrixXd::Zero(0, 0);
            dyn.B1 = Eigen::MatrixXd::Zero(1, 0);
            dyn.B0 = Eigen::VectorXd::Constant(1, m.b);
            dyn.sigma = Eigen::MatrixXd::Constant(1, 1, m.sigma);
            dyn.gamma = Eigen::MatrixXd::Zero(0, 1);
            return dyn;
          },
          [](const models::LinearFactor1D& m) { return from_md(riccati::embed(m)); },
          [](const models::PlatenRebolledo& m) {
            return from_md(riccati::embed(models::to_linear_factor(m)));
          },
          [](const riccati::LinearFactorMD& m) {
            m.validate();
            return from_md(m);
          },
      },
      model);
}

duality::DualCurve dual_curve(const ModelSpec& model, duality::Side side) {
  return std::visit(
      Overloaded{
          [side](const models::BlackScholesModel& m) { return models::bs_dual(m, side); },
          [side](const models::LinearFactor1D& m) {
            m.validate();
            return models::lg1d_gamma_curve(m, side);
          },
          [side](const models::PlatenRebolledo& m) {
            return models::lg1d_gamma_curve(models::to_linear_factor(m), side);
          },
          [side](const riccati::LinearFactorMD& m) { return riccati::gamma_curve(m, side); },
      },
      model);
}

duality::RateValue rate(const ModelSpec& model, double target, duality::Side side) {
  if (const auto* bs = std::get_if<models::BlackScholesModel>(&model)) {
    return models::bs_rates(*bs, target, side);
  }
  if (const auto* pr = std::get_if<models::PlatenRebolledo>(&model)) {
    return models::pr_rates(*pr, target, side);
  }
  return duality::conjugate(dual_curve(model, side), target);
}

models::FeedbackPolicy policy_at_theta(const ModelSpec& model, double theta) {
  return std::visit(
      Overloaded{
          [theta](const models::BlackScholesModel& m) {
            m.validate();
            return models::FeedbackPolicy::constant(models::bs_dual_policy(m, theta));
          },
          [theta](const models::LinearFactor1D& m) {
            m.validate();
            return models::lg1d_policy(m, theta);
          },
          [theta](const models::PlatenRebolledo& m) {
            return models::lg1d_policy(models::to_linear_factor(m), theta);
          },
          [theta](const riccati::LinearFactorMD& m) {
            return riccati::policy_md(m, theta, riccati::solve_care(m, theta));
          },
      },
      model);
}

std::optional<models::FeedbackPolicy> optimal_policy(const ModelSpec& model, double target,
                                                     duality::Side side,
                                                     const duality::RateValue& rate) {
  if (const auto* bs = std::get_if<models::BlackScholesModel>(&model)) {
    return models::bs_policy(*bs, target, side);
  }
  if (const auto* pr = std::get_if<models::PlatenRebolledo>(&model)) {
    return models::pr_policy(*pr, target, side);
  }
  switch (rate.regime()) {
    case duality::Regime::Free:
      return policy_at_theta(model, 0.0);
    case duality::Regime::Interior:
      return policy_at_theta(model, *rate.tilt());
    case duality::Regime::Unreachable:
      break;
  }
  return std::nullopt;
}

std::optional<riccati::QuadraticValue> quadratic_value(const ModelSpec& model, double theta) {
  return std::visit(
      Overloaded{
          [](const models::BlackScholesModel&) -> std::optional<riccati::QuadraticValue> {
            return std::nullopt;
          },
          [theta](const models::LinearFactor1D& m) -> std::optional<riccati::QuadraticValue> {
            return riccati::solve_care(riccati::embed(m), theta);
          },
          [theta](const models::PlatenRebolledo& m) -> std::optional<riccati::QuadraticValue> {
            return riccati::solve_care(riccati::embed(models::to_linear_factor(m)), theta);
          },
          [theta](const riccati::LinearFactorMD& m) -> std::optional<riccati::QuadraticValue> {
            return riccati::solve_care(m, theta);
          },
      },
      model);
}

}  // namespace growthld

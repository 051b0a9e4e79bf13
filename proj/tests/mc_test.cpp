#include <cmath>
#include <limits>
#include <numeric>

#include "doctest.h"
#include "growthld/mc.hpp"
#include "oracles.hpp"

using namespace growthld;
using namespace growthld::mc;
using duality::Side;
using models::FeedbackPolicy;

namespace {

const ModelSpec bs = models::BlackScholesModel{0.1, 0.2};
const models::LinearFactor1D rho0{-1.0, 1.0, 0.5, 1.0, 1.0, 0.0};

SimConfig config(double T, double dt, std::size_t n, std::uint64_t seed = 1) {
  SimConfig cfg;
  cfg.horizon = T;
  cfg.dt = dt;
  cfg.n_paths = n;
  cfg.seed = seed;
  return cfg;
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

TEST_SUITE("mc") {
  TEST_CASE("configuration checks") {
    auto cfg = config(1.0, 0.1, 10);
    CHECK(cfg.steps() == 10);
    cfg.dt = 0.3;
    CHECK(cfg.steps() == 4);
    cfg.n_paths = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = config(1.0, -0.1, 10);
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = config(0.0, 0.1, 10);
    CHECK_THROWS_AS(cfg.validate(), Error);
    CHECK_THROWS_AS(simulate_paths(bs, FeedbackPolicy::scalar(1.0, 1.0), config(1, 0.1, 10)),
                    Error);
  }

  TEST_CASE("zero policy gives zero log-wealth") {
    const auto s = simulate_paths(bs, FeedbackPolicy::constant(0.0), config(5.0, 0.1, 200));
    for (double L : s.L) CHECK(L == 0.0);
    const auto p = estimate_prob(s, 0.0, Side::Upside);
    CHECK(p.estimate == 1.0);
    CHECK(estimate_log_laplace(s, 0.7).estimate == 0.0);
  }

  TEST_CASE("Black-Scholes growth rate mean and tail probability") {
    const auto s = simulate_paths(bs, FeedbackPolicy::constant(2.5), config(10.0, 0.01, 20000));
    std::vector<double> g(s.L.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = s.L[i] / 10.0;
    const double sd = 0.2 * 2.5 / std::sqrt(10.0);
    CHECK(std::abs(mean(g) - 0.125) < 3.0 * sd / std::sqrt(20000.0));

    const auto t = simulate_paths(bs, FeedbackPolicy::constant(3.5), config(10.0, 0.05, 40000));
    const auto p = estimate_prob(t, 0.245, Side::Upside);
    const double exact = oracle::bs_upper_tail(0.1, 0.2, 3.5, 0.245, 10.0);
    CHECK(std::abs(p.estimate - exact) < 3.0 * p.std_error);
    CHECK(p.std_error == doctest::Approx(std::sqrt(p.estimate * (1 - p.estimate) / 40000.0)));
  }

  TEST_CASE("zero hits is a flag with a recommended tilt") {
    const auto s = simulate_paths(bs, FeedbackPolicy::constant(3.5), config(40.0, 40.0, 10000));
    const double lowest = *std::min_element(s.L.begin(), s.L.end()) / 40.0;
    const auto below = estimate_prob(s, lowest - 0.01, Side::Downside);
    CHECK(below.estimate == 0.0);
    CHECK(below.has(Flag::ZeroHits));
    CHECK_FALSE(below.log_estimate.has_value());

    // About 1.8 expected hits at l = 0.5: either none or a useless relative error.
    const auto far = estimate_prob(s, 0.5, Side::Upside, &bs);
    if (far.estimate == 0.0) {
      CHECK(far.has(Flag::ZeroHits));
      CHECK(far.extras.at("recommended_tilt") == doctest::Approx(0.5));
    } else {
      CHECK(far.std_error / far.estimate > 0.3);
    }
    const auto beyond = estimate_prob(s, 1.0, Side::Upside, &bs);
    CHECK(beyond.has(Flag::ZeroHits));
    CHECK(beyond.extras.at("recommended_tilt") == doctest::Approx(1.0 - std::sqrt(0.125)));
    CHECK(beyond.note.find("theta") != std::string::npos);

    auto cfg = config(40.0, 40.0, 10000);
    const auto tilted =
        tilted_estimate_prob(bs, FeedbackPolicy::constant(3.5), 0.5, 0.5, Side::Upside, cfg);
    const double exact = oracle::bs_upper_tail(0.1, 0.2, 3.5, 0.5, 40.0);
    CHECK(tilted.estimate > 0.0);
    CHECK(std::abs(tilted.estimate - exact) < 3.0 * tilted.std_error);
  }

  TEST_CASE("log-Laplace estimates") {
    const auto s = simulate_paths(bs, FeedbackPolicy::constant(5.0), config(10.0, 10.0, 100000));
    const auto r = estimate_log_laplace(s, 0.5);
    CHECK(std::abs(r.estimate - 0.125) < 3.0 * r.std_error);
    CHECK(estimate_log_laplace(s, 0.0).estimate == 0.0);
    CHECK(estimate_log_laplace(s, 0.0).std_error == 0.0);

    // Root-mean-square error over independent seeds falls like 1/sqrt(n).
    std::vector<double> rms;
    for (std::size_t n : {1000u, 10000u, 100000u}) {
      double sq = 0.0;
      for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto e = estimate_log_laplace(
            simulate_paths(bs, FeedbackPolicy::constant(2.0), config(4.0, 4.0, n, 100 + seed)), 0.3);
        const double exact = models::bs_gamma(std::get<models::BlackScholesModel>(bs), 0.3, 2.0);
        sq += (e.estimate - exact) * (e.estimate - exact);
      }
      rms.push_back(std::sqrt(sq / 20.0));
    }
    for (int i = 0; i < 2; ++i) {
      const double ratio = rms[i] / rms[i + 1];
      CHECK(ratio > std::sqrt(10.0) / 2.0);
      CHECK(ratio < std::sqrt(10.0) * 2.0);
    }
  }

  TEST_CASE("log-Laplace under the factor model approaches Gamma") {
    const ModelSpec lg = rho0;
    const auto pol = policy_at_theta(lg, -1.0);
    auto cfg = config(50.0, 0.02, 20000);
    cfg.y0 = Eigen::VectorXd::Zero(1);
    const auto r = estimate_log_laplace(simulate_paths(lg, pol, cfg), -1.0);
    const double gamma = models::lg1d_gamma(rho0, -1.0);
    // O(1/T) from the initial condition plus O(dt) from the Euler factor.
    CHECK(std::abs(r.estimate - gamma) < 3.0 * r.std_error + 1.0 / 50.0);
  }

  TEST_CASE("zero tilt reproduces the direct estimator") {
    auto cfg = config(10.0, 0.5, 5000, 9);
    const auto direct = estimate_prob(simulate_paths(bs, FeedbackPolicy::constant(3.5), cfg), 0.2,
                                      Side::Upside);
    const auto tilted = tilted_estimate_prob(bs, FeedbackPolicy::constant(3.5), 0.0, 0.2,
                                             Side::Upside, cfg);
    CHECK(tilted.estimate == direct.estimate);
    CHECK_THROWS_AS(tilted_estimate_prob(bs, FeedbackPolicy::constant(3.5), -0.1, 0.2,
                                         Side::Upside, cfg),
                    Error);
    CHECK_THROWS_AS(tilted_estimate_prob(bs, FeedbackPolicy::constant(3.5), 0.1, 0.2,
                                         Side::Downside, cfg),
                    Error);
    cfg.estimator = Estimator::TiltedSelfNormalized;
    cfg.theta_tilt = 0.2;
    CHECK_THROWS_AS(estimate_prob(simulate_paths(bs, FeedbackPolicy::constant(3.5), cfg), 0.2,
                                  Side::Upside),
                    Error);
  }

  TEST_CASE("tilted estimators at T = 40") {
    const auto pol = FeedbackPolicy::constant(3.5);
    const double exact = oracle::bs_upper_tail(0.1, 0.2, 3.5, 0.245, 40.0);
    auto cfg = config(40.0, 1.0, 50000, 3);
    const auto direct = estimate_prob(simulate_paths(bs, pol, cfg), 0.245, Side::Upside);
    cfg.estimator = Estimator::TiltedSelfNormalized;
    cfg.theta_tilt = 2.0 / 7.0;
    const auto samples = simulate_paths(bs, pol, cfg);
    const auto sn = weighted_prob(samples, 0.245, Side::Upside, Estimator::TiltedSelfNormalized);
    const auto ed = weighted_prob(samples, 0.245, Side::Upside, Estimator::TiltedExactDensity);
    CHECK(std::abs(sn.estimate - exact) < 3.0 * sn.std_error);
    CHECK(std::abs(ed.estimate - exact) < 3.0 * ed.std_error);
    CHECK(sn.std_error < direct.std_error);
    CHECK(ed.std_error < direct.std_error);
    CHECK(std::abs(sn.estimate - direct.estimate) <
          3.0 * std::hypot(sn.std_error, direct.std_error));
    CHECK(sn.extras.at("ess") < 50000.0);
    CHECK(empirical_chebyshev_check(samples, 2.0 / 7.0, 0.245));
  }

  TEST_CASE("degenerate weights are flagged") {
    auto cfg = config(160.0, 160.0, 5000, 5);
    cfg.estimator = Estimator::TiltedSelfNormalized;
    cfg.theta_tilt = 0.9;
    const auto r = weighted_prob(simulate_paths(bs, FeedbackPolicy::constant(3.5), cfg), 0.245,
                                 Side::Upside, Estimator::TiltedSelfNormalized);
    CHECK(r.has(Flag::WeightDegeneracy));
  }

  TEST_CASE("samples do not depend on the thread count") {
    const ModelSpec md = riccati::embed(rho0);
    const auto pol = policy_at_theta(md, 0.2);
    auto cfg = config(3.0, 0.05, 1001, 77);
    cfg.estimator = Estimator::TiltedSelfNormalized;
    cfg.theta_tilt = 0.2;
    cfg.tilt_value = quadratic_value(md, 0.2);
    cfg.record_integrand = true;
    cfg.threads = 1;
    const auto a = simulate_paths(md, pol, cfg);
    for (unsigned threads : {2u, 3u, 8u}) {
      cfg.threads = threads;
      const auto b = simulate_paths(md, pol, cfg);
      CHECK(a.L == b.L);
      CHECK(a.log_weight == b.log_weight);
      CHECK(a.integral_f == b.integral_f);
      CHECK(a.Y == b.Y);
    }
  }

  TEST_CASE("halving dt on a shared Brownian path") {
    const auto pol = FeedbackPolicy::constant(3.5);
    auto coarse = config(10.0, 0.1, 20000, 21);
    coarse.brownian_refinement = 1;
    auto fine = config(10.0, 0.05, 20000, 21);
    const auto pc = estimate_prob(simulate_paths(bs, pol, coarse), 0.2, Side::Upside);
    const auto pf = estimate_prob(simulate_paths(bs, pol, fine), 0.2, Side::Upside);
    CHECK(std::abs(pc.estimate - pf.estimate) < pf.std_error);

    const ModelSpec lg = rho0;
    const auto lp = policy_at_theta(lg, 0.0);
    coarse.horizon = fine.horizon = 5.0;
    const auto lc = estimate_prob(simulate_paths(lg, lp, coarse), 0.4, Side::Upside);
    const auto lf = estimate_prob(simulate_paths(lg, lp, fine), 0.4, Side::Upside);
    CHECK(std::abs(lc.estimate - lf.estimate) < 2.0 * lf.std_error);
  }

  TEST_CASE("non-finite states stop the run") {
    auto cfg = config(1.0, 0.1, 50);
    try {
      simulate_paths(bs, FeedbackPolicy::constant(1e200), cfg);
      FAIL("expected NumericalBlowup");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NumericalBlowup);
      CHECK(std::string(e.what()).find("path 0") != std::string::npos);
    }
  }

  TEST_CASE("empirical Chebyshev inequality") {
    const auto s = simulate_paths(bs, FeedbackPolicy::constant(3.5), config(10.0, 10.0, 5000));
    CHECK(empirical_chebyshev_check(s, 0.0, 0.245));
    for (double th : {0.0, 0.1, 2.0 / 7.0, 1.0, 5.0, 50.0}) {
      for (double l : {-0.5, 0.1, 0.245, 1.0}) CHECK(empirical_chebyshev_check(s, th, l));
    }
    // Negative control: signed weights break the inequality.
    const std::vector<double> L{1.0, 0.0};
    CHECK(empirical_chebyshev_check(L, std::vector<double>{1.0, 1.0}, 1.0, 1.0, 1.0));
    CHECK_FALSE(empirical_chebyshev_check(L, std::vector<double>{1.0, -0.9}, 1.0, 1.0, 1.0));
    const double nan = std::numeric_limits<double>::quiet_NaN();
    CHECK_FALSE(empirical_chebyshev_check(L, std::vector<double>{nan, 1.0}, 1.0, 1.0, 1.0));
    CHECK_THROWS_AS(empirical_chebyshev_check(s, -1.0, 0.2), Error);
  }

  TEST_CASE("rate fit") {
    const auto zero = rate_fit(bs, FeedbackPolicy::constant(0.0), 0.0, Side::Upside,
                               std::vector<double>{5, 10, 20}, config(1.0, 1.0, 100));
    CHECK(zero.slope == 0.0);
    for (const auto& row : zero.rows) CHECK(row.result.estimate == 1.0);

    // Per-horizon probabilities against the Gaussian oracle.
    auto cfg = config(1.0, 2.0, 20000, 40);
    const std::vector<double> T{20.0, 40.0, 80.0};
    const auto fit = rate_fit(bs, FeedbackPolicy::constant(3.5), 0.245, Side::Upside, T, cfg);
    REQUIRE(fit.rows.size() == 3);
    std::vector<double> log_exact;
    for (const auto& row : fit.rows) {
      const double exact = oracle::bs_upper_tail(0.1, 0.2, 3.5, 0.245, row.horizon);
      CHECK(std::abs(row.result.estimate - exact) < 3.0 * row.result.std_error);
      log_exact.push_back(std::log(exact));
    }
    // Least-squares slope of the exact log-probabilities against T.
    const double tm = (T[0] + T[1] + T[2]) / 3.0, lm = (log_exact[0] + log_exact[1] + log_exact[2]) / 3.0;
    double sxy = 0.0, sxx = 0.0;
    for (int i = 0; i < 3; ++i) {
      sxy += (T[i] - tm) * (log_exact[i] - lm);
      sxx += (T[i] - tm) * (T[i] - tm);
    }
    CHECK(std::abs(fit.slope - sxy / sxx) < 4.0 * fit.slope_se);
    CHECK(fit.log_adjusted_slope.has_value());

    CHECK_THROWS_AS(rate_fit(bs, FeedbackPolicy::constant(3.5), 0.245, Side::Upside,
                             std::vector<double>{10, 20}, cfg),
                    Error);
  }

  TEST_CASE("estimator names") {
    CHECK(to_string(Estimator::Direct) == "direct");
    CHECK(to_string(Estimator::TiltedSelfNormalized) == "tilted_self_normalized");
    CHECK(to_string(Estimator::TiltedExactDensity) == "tilted_exact_density");
    CHECK(to_string(Flag::ZeroHits) == "ZeroHits");
    CHECK_FALSE(is_tilted(Estimator::Direct));
  }
}

#include "growthld/mc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include "growthld/rng.hpp"

namespace growthld::mc {

namespace {

constexpr double kDegenerateEss = 0.01;
constexpr std::size_t kMinDirectHits = 100;

void config_error(const std::string& message) { throw Error(ErrorCode::InvalidConfig, message); }

// Row-major copy of a matrix for the inner loop.
struct Dense {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  std::vector<double> data;

  Dense() = default;
  explicit Dense(const Eigen::MatrixXd& m) : rows(m.rows()), cols(m.cols()), data(m.size()) {
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) data[i * cols + j] = m(i, j);
  }
  double operator()(Eigen::Index i, Eigen::Index j) const { return data[i * cols + j]; }
};

struct Kernel {
  Eigen::Index d = 0;
  Eigen::Index m = 0;
  Eigen::Index n = 0;
  Dense K, B1, sigma, gamma, gain, C;
  std::vector<double> B0, intercept, D, y0;
  bool tilted = false;
  bool h_transform = false;
  double theta = 0.0;
};

struct PathOutput {
  double L = 0.0;
  double integral_f = 0.0;
  double log_weight = 0.0;
};

struct Blowup {
  std::size_t path = 0;
  double time = 0.0;
};

Kernel make_kernel(const ModelSpec& model, const FeedbackPolicy& policy, const SimConfig& cfg) {
  const Dynamics dyn = dynamics(model);
  Kernel k;
  k.d = dyn.assets();
  k.m = dyn.factors();
  k.n = dyn.noise_dimension();
  if (policy.assets() != k.d) {
    config_error("policy has " + std::to_string(policy.assets()) + " assets, model has " +
                 std::to_string(k.d));
  }
  Eigen::MatrixXd gain = policy.gain;
  if (gain.cols() == 0 && k.m > 0) gain = Eigen::MatrixXd::Zero(k.d, k.m);
  if (gain.rows() != k.d || gain.cols() != k.m) {
    config_error("policy gain must be " + std::to_string(k.d) + " x " + std::to_string(k.m));
  }
  if (!gain.allFinite() || !policy.intercept.allFinite()) config_error("policy must be finite");
  k.K = Dense(dyn.K);
  k.B1 = Dense(dyn.B1);
  k.sigma = Dense(dyn.sigma);
  k.gamma = Dense(dyn.gamma);
  k.gain = Dense(gain);
  k.B0.assign(dyn.B0.data(), dyn.B0.data() + k.d);
  k.intercept.assign(policy.intercept.data(), policy.intercept.data() + k.d);
  k.y0.assign(k.m, 0.0);
  if (cfg.y0.size() > 0) {
    if (cfg.y0.size() != k.m) config_error("y0 must have one entry per factor");
    k.y0.assign(cfg.y0.data(), cfg.y0.data() + k.m);
  }
  k.tilted = is_tilted(cfg.estimator);
  k.theta = k.tilted ? cfg.theta_tilt : 0.0;
  if (k.tilted && cfg.tilt_value) {
    const auto& qv = *cfg.tilt_value;
    if (qv.C.rows() != k.m || qv.C.cols() != k.m || qv.D.size() != k.m) {
      config_error("tilt quadratic value does not match the factor dimension");
    }
    k.h_transform = k.m > 0;
    k.C = Dense(qv.C);
    k.D.assign(qv.D.data(), qv.D.data() + k.m);
  }
  return k;
}

// One Euler-Maruyama path. Returns false on a non-finite state, with the time
// reached in `blowup_time`.
bool run_path(const Kernel& k, const SimConfig& cfg, std::size_t steps, std::size_t path,
              PathOutput& out, double* y_out, double& blowup_time) {
  rng::PathNormals normals(cfg.seed, path);
  const std::size_t fine = std::size_t{1} << cfg.brownian_refinement;
  const double fine_scale = 1.0 / std::sqrt(static_cast<double>(fine));
  const auto n = static_cast<std::size_t>(k.n);

  std::vector<double> y(k.y0), y_next(k.m), pi(k.d), by(k.d), q(n), u(n), dw(n), grad(k.m);
  double L = 0.0;
  double integral_f = 0.0;
  double log_weight = 0.0;

  for (std::size_t step = 0; step < steps; ++step) {
    const double t = static_cast<double>(step) * cfg.dt;
    const double h = step + 1 == steps ? cfg.horizon - t : cfg.dt;
    const double root_h = std::sqrt(h);

    for (Eigen::Index a = 0; a < k.d; ++a) {
      double p = k.intercept[a];
      double b = k.B0[a];
      for (Eigen::Index j = 0; j < k.m; ++j) {
        p += k.gain(a, j) * y[j];
        b += k.B1(a, j) * y[j];
      }
      pi[a] = p;
      by[a] = b;
    }
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (Eigen::Index a = 0; a < k.d; ++a) s += k.sigma(a, i) * pi[a];
      q[i] = s;
    }
    if (k.tilted) {
      for (std::size_t i = 0; i < n; ++i) u[i] = k.theta * q[i];
      if (k.h_transform) {
        for (Eigen::Index j = 0; j < k.m; ++j) {
          double g = k.D[j];
          for (Eigen::Index l = 0; l < k.m; ++l) g += k.C(j, l) * y[l];
          grad[j] = g;
        }
        for (std::size_t i = 0; i < n; ++i) {
          for (Eigen::Index j = 0; j < k.m; ++j) u[i] += k.gamma(j, i) * grad[j];
        }
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      double z = 0.0;
      for (std::size_t s = 0; s < fine; ++s) z += normals((step * fine + s) * n + i);
      dw[i] = root_h * (fine == 1 ? z : z * fine_scale);
    }

    double mean = 0.0;
    for (Eigen::Index a = 0; a < k.d; ++a) mean += pi[a] * by[a];
    double qq = 0.0, qdw = 0.0, qu = 0.0, udw = 0.0, uu = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      qq += q[i] * q[i];
      qdw += q[i] * dw[i];
      if (k.tilted) {
        qu += q[i] * u[i];
        udw += u[i] * dw[i];
        uu += u[i] * u[i];
      }
    }
    L += (mean - 0.5 * qq + qu) * h + qdw;
    integral_f += (mean - 0.5 * (1.0 - k.theta) * qq) * h;
    log_weight += -udw - 0.5 * uu * h;

    bool finite = std::isfinite(L) && std::isfinite(log_weight);
    for (Eigen::Index j = 0; j < k.m; ++j) {
      double drift = 0.0;
      double noise = 0.0;
      for (Eigen::Index l = 0; l < k.m; ++l) drift += k.K(j, l) * y[l];
      for (std::size_t i = 0; i < n; ++i) {
        if (k.tilted) drift += k.gamma(j, i) * u[i];
        noise += k.gamma(j, i) * dw[i];
      }
      y_next[j] = y[j] + drift * h + noise;
      finite = finite && std::isfinite(y_next[j]);
    }
    if (!finite) {
      blowup_time = t + h;
      return false;
    }
    y.swap(y_next);
  }
  out = {L, integral_f, log_weight};
  std::copy(y.begin(), y.end(), y_out);
  return true;
}

double log_sum_exp_shift(std::span<const double> t) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : t) m = std::max(m, v);
  return m;
}

bool hit(double growth, double target, Side side) {
  return side == Side::Upside ? growth >= target : growth <= target;
}

// Least squares of y on the columns of X.
Eigen::VectorXd least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  return X.colPivHouseholderQr().solve(y);
}

}  // namespace

std::string to_string(Estimator estimator) {
  switch (estimator) {
    case Estimator::Direct:
      return "direct";
    case Estimator::TiltedSelfNormalized:
      return "tilted_self_normalized";
    case Estimator::TiltedExactDensity:
      return "tilted_exact_density";
  }
  return "unknown";
}

bool is_tilted(Estimator estimator) { return estimator != Estimator::Direct; }

std::string to_string(Flag flag) {
  return flag == Flag::ZeroHits ? "ZeroHits" : "WeightDegeneracy";
}

bool SimResult::has(Flag flag) const {
  return std::find(flags.begin(), flags.end(), flag) != flags.end();
}

void SimConfig::validate() const {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) config_error("horizon must be positive");
  if (!(dt > 0.0) || !std::isfinite(dt)) config_error("dt must be positive");
  if (dt > horizon * (1.0 + 1e-12)) config_error("dt must not exceed the horizon");
  if (n_paths < 2) config_error("at least 2 paths are required");
  if (!std::isfinite(theta_tilt) || !(theta_tilt < 1.0)) {
    config_error("tilt must be finite and below 1");
  }
  if (brownian_refinement > 20) config_error("brownian refinement above 20");
}

std::size_t SimConfig::steps() const {
  const double ratio = horizon / dt;
  const double nearest = std::round(ratio);
  if (std::abs(ratio - nearest) <= 1e-9 * std::max(1.0, nearest)) {
    return static_cast<std::size_t>(std::max(1.0, nearest));
  }
  return static_cast<std::size_t>(std::ceil(ratio));
}

PathSamples simulate_paths(const ModelSpec& model, const FeedbackPolicy& policy,
                           const SimConfig& cfg) {
  cfg.validate();
  const Kernel kernel = make_kernel(model, policy, cfg);
  const std::size_t steps = cfg.steps();
  const std::size_t n = cfg.n_paths;

  PathSamples samples;
  samples.horizon = cfg.horizon;
  samples.estimator = cfg.estimator;
  samples.theta_tilt = kernel.theta;
  samples.seed = cfg.seed;
  samples.L.resize(n);
  samples.Y.resize(kernel.m, static_cast<Eigen::Index>(n));
  std::vector<double> integral_f(n);
  std::vector<double> log_weight(n);

  unsigned workers = cfg.threads == 0 ? std::thread::hardware_concurrency() : cfg.threads;
  workers = static_cast<unsigned>(std::clamp<std::size_t>(workers, 1, n));
  std::vector<std::optional<Blowup>> failures(workers);

  auto work = [&](unsigned w) {
    const std::size_t begin = n * w / workers;
    const std::size_t end = n * (w + 1) / workers;
    std::vector<double> y(kernel.m);
    for (std::size_t p = begin; p < end; ++p) {
      PathOutput out;
      double when = 0.0;
      if (!run_path(kernel, cfg, steps, p, out, y.data(), when)) {
        failures[w] = Blowup{p, when};
        return;
      }
      samples.L[p] = out.L;
      integral_f[p] = out.integral_f;
      log_weight[p] = out.log_weight;
      for (Eigen::Index j = 0; j < kernel.m; ++j) samples.Y(j, static_cast<Eigen::Index>(p)) = y[j];
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (const auto& failure : failures) {
    if (failure) {
      std::ostringstream msg;
      msg << "non-finite state on path " << failure->path << " at t = " << failure->time;
      throw Error(ErrorCode::NumericalBlowup, msg.str());
    }
  }
  if (cfg.record_integrand) samples.integral_f = std::move(integral_f);
  if (kernel.tilted) samples.log_weight = std::move(log_weight);
  return samples;
}

SimResult estimate_prob(const PathSamples& samples, double target, Side side,
                        const ModelSpec* model) {
  if (samples.size() == 0) config_error("no samples");
  if (samples.weighted()) config_error("tilted samples need an importance-weighted estimator");
  std::size_t hits = 0;
  for (double L : samples.L) hits += hit(L / samples.horizon, target, side) ? 1 : 0;
  const double n = static_cast<double>(samples.size());
  SimResult result;
  result.n_paths = samples.size();
  result.estimate = static_cast<double>(hits) / n;
  result.std_error = std::sqrt(result.estimate * (1.0 - result.estimate) / n);
  result.extras["hits"] = static_cast<double>(hits);
  result.extras["ess"] = n;
  if (hits > 0) {
    result.log_estimate = std::log(result.estimate);
    return result;
  }
  result.flags.push_back(Flag::ZeroHits);
  result.note = "no path reached the target; use the tilted estimator";
  if (model) {
    try {
      const auto r = rate(*model, target, side);
      if (r.tilt()) {
        result.extras["recommended_tilt"] = *r.tilt();
        std::ostringstream msg;
        msg.precision(10);
        msg << result.note << " with theta = " << *r.tilt();
        result.note = msg.str();
      }
    } catch (const Error&) {
    }
  }
  return result;
}

SimResult weighted_prob(const PathSamples& samples, double target, Side side,
                        Estimator estimator) {
  if (samples.size() == 0) config_error("no samples");
  if (!samples.weighted() || !is_tilted(estimator)) {
    config_error("weighted estimator needs tilted samples and a tilted estimator");
  }
  const std::size_t count = samples.size();
  const double n = static_cast<double>(count);
  const double shift = log_sum_exp_shift(samples.log_weight);

  double sum_w = 0.0, sum_w2 = 0.0, sum_hit = 0.0, sum_hit2 = 0.0;
  std::size_t hits = 0;
  std::vector<double> a(count);
  std::vector<char> in(count);
  for (std::size_t i = 0; i < count; ++i) {
    a[i] = std::exp(samples.log_weight[i] - shift);
    in[i] = hit(samples.L[i] / samples.horizon, target, side);
    sum_w += a[i];
    sum_w2 += a[i] * a[i];
    if (in[i]) {
      ++hits;
      sum_hit += a[i];
      sum_hit2 += a[i] * a[i];
    }
  }

  SimResult result;
  result.n_paths = count;
  result.extras["hits"] = static_cast<double>(hits);
  result.extras["theta"] = samples.theta_tilt;
  double ess = 0.0;
  if (estimator == Estimator::TiltedSelfNormalized) {
    const double p = sum_hit / sum_w;
    double var = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      const double r = (in[i] ? 1.0 : 0.0) - p;
      var += a[i] * a[i] * r * r;
    }
    result.estimate = p;
    result.std_error = std::sqrt(var) / sum_w;
    ess = sum_w * sum_w / sum_w2;
  } else {
    const double scale = std::exp(shift);
    const double mean = sum_hit / n;
    const double var = std::max(0.0, (sum_hit2 / n - mean * mean) * n / (n - 1.0));
    result.estimate = std::min(1.0, scale * mean);
    result.std_error = scale * std::sqrt(var / n);
    ess = hits > 0 ? sum_hit * sum_hit / sum_hit2 : 0.0;
  }
  result.extras["ess"] = ess;
  if (hits == 0) {
    result.flags.push_back(Flag::ZeroHits);
    result.note = "no tilted path reached the target";
  } else {
    result.log_estimate = std::log(result.estimate);
  }
  if (ess < kDegenerateEss * n) result.flags.push_back(Flag::WeightDegeneracy);
  return result;
}

SimResult estimate_log_laplace(const PathSamples& samples, double theta) {
  if (samples.size() == 0) config_error("no samples");
  const std::size_t count = samples.size();
  const double n = static_cast<double>(count);
  std::vector<double> t(count);
  for (std::size_t i = 0; i < count; ++i) {
    t[i] = theta * samples.L[i] + (samples.weighted() ? samples.log_weight[i] : 0.0);
  }
  const double shift = log_sum_exp_shift(t);
  double sum = 0.0, sum2 = 0.0;
  for (double v : t) {
    const double a = std::exp(v - shift);
    sum += a;
    sum2 += a * a;
  }
  const double mean = sum / n;
  const double var = std::max(0.0, (sum2 / n - mean * mean) * n / (n - 1.0));
  SimResult result;
  result.n_paths = count;
  result.estimate = (shift + std::log(mean)) / samples.horizon;
  result.std_error = std::sqrt(var / n) / mean / samples.horizon;
  if (result.estimate > 0.0) result.log_estimate = std::log(result.estimate);
  const double ess = sum * sum / sum2;
  result.extras["ess"] = ess;
  result.extras["theta"] = theta;
  if (ess < kDegenerateEss * n) result.flags.push_back(Flag::WeightDegeneracy);
  return result;
}

SimResult tilted_estimate_prob(const ModelSpec& model, const FeedbackPolicy& policy,
                               double theta_tilt, double target, Side side, SimConfig cfg) {
  if (side == Side::Upside && theta_tilt < 0.0) config_error("upside tilt must be >= 0");
  if (side == Side::Downside && theta_tilt > 0.0) config_error("downside tilt must be <= 0");
  if (!is_tilted(cfg.estimator)) cfg.estimator = Estimator::TiltedSelfNormalized;
  cfg.theta_tilt = theta_tilt;
  return weighted_prob(simulate_paths(model, policy, cfg), target, side, cfg.estimator);
}

RateFit rate_fit(const ModelSpec& model, const FeedbackPolicy& policy, double target, Side side,
                 std::span<const double> horizons, const SimConfig& cfg,
                 std::optional<double> tilt) {
  if (horizons.size() < 3) config_error("rate fit needs at least 3 horizons");

  const std::optional<double> theta = tilt;
  auto resolve_theta = [&]() -> std::optional<double> {
    if (theta) return theta;
    try {
      return rate(model, target, side).tilt();
    } catch (const Error&) {
      return std::nullopt;
    }
  };

  RateFit fit;
  for (std::size_t i = 0; i < horizons.size(); ++i) {
    SimConfig run = cfg;
    run.horizon = horizons[i];
    run.dt = std::min(cfg.dt, horizons[i]);
    run.seed = cfg.seed + i;
    RateRow row;
    row.horizon = horizons[i];
    if (!is_tilted(cfg.estimator)) {
      run.estimator = Estimator::Direct;
      row.result = estimate_prob(simulate_paths(model, policy, run), target, side, &model);
      row.estimator = Estimator::Direct;
      const bool small = row.result.extras["hits"] < static_cast<double>(kMinDirectHits);
      const auto auto_theta = small ? resolve_theta() : std::nullopt;
      if (auto_theta && *auto_theta != 0.0) {
        run.estimator = Estimator::TiltedSelfNormalized;
        run.theta_tilt = *auto_theta;
      }
    } else {
      run.theta_tilt = resolve_theta().value_or(0.0);
    }
    if (is_tilted(run.estimator)) {
      if (!run.tilt_value && run.theta_tilt != 0.0) {
        run.tilt_value = quadratic_value(model, run.theta_tilt);
      }
      const PathSamples samples = simulate_paths(model, policy, run);
      row.result = weighted_prob(samples, target, side, run.estimator);
      row.estimator = run.estimator;
      if (run.estimator == Estimator::TiltedSelfNormalized &&
          row.result.has(Flag::WeightDegeneracy)) {
        // The ratio estimator is unusable; the unnormalized one only needs the
        // weights on the event, which stay balanced under a centring tilt.
        row.result = weighted_prob(samples, target, side, Estimator::TiltedExactDensity);
        row.estimator = Estimator::TiltedExactDensity;
      }
      row.theta = run.theta_tilt;
    }
    fit.rows.push_back(row);
  }

  const auto k = static_cast<Eigen::Index>(fit.rows.size());
  Eigen::MatrixXd X(k, 2);
  Eigen::VectorXd y(k);
  Eigen::VectorXd log_se(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto& r = fit.rows[i].result;
    if (!(r.estimate > 0.0)) {
      std::ostringstream msg;
      msg << "zero probability estimate at T = " << fit.rows[i].horizon
          << "; the decay slope is undefined";
      throw Error(ErrorCode::DomainError, msg.str());
    }
    X(i, 0) = 1.0;
    X(i, 1) = fit.rows[i].horizon;
    y(i) = std::log(r.estimate);
    log_se(i) = r.std_error / r.estimate;
  }
  const Eigen::VectorXd beta = least_squares(X, y);
  fit.intercept = beta(0);
  fit.slope = beta(1);
  const double mean_t = X.col(1).mean();
  const double sxx = (X.col(1).array() - mean_t).square().sum();
  double var = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    const double c = (X(i, 1) - mean_t) / sxx;
    var += c * c * log_se(i) * log_se(i);
  }
  fit.slope_se = std::sqrt(var);

  Eigen::MatrixXd Z(k, 3);
  Z << X, X.col(1).array().log().matrix();
  Eigen::FullPivLU<Eigen::MatrixXd> rank(Z);
  if (rank.rank() == 3) fit.log_adjusted_slope = least_squares(Z, y)(1);
  return fit;
}

bool empirical_chebyshev_check(std::span<const double> L, std::span<const double> weights,
                               double horizon, double theta, double target) {
  if (theta < 0.0) config_error("Chebyshev check needs theta >= 0");
  if (L.size() != weights.size() || L.empty()) config_error("samples and weights must match");
  if (!(horizon > 0.0)) config_error("horizon must be positive");
  std::vector<double> t(L.size());
  for (std::size_t i = 0; i < L.size(); ++i) t[i] = theta * (L[i] - target * horizon);
  const double shift = log_sum_exp_shift(t);
  double total = 0.0, hits = 0.0, moment = 0.0;
  for (std::size_t i = 0; i < L.size(); ++i) {
    total += weights[i];
    if (L[i] / horizon >= target) hits += weights[i];
    moment += weights[i] * std::exp(t[i] - shift);
  }
  const double p = hits / total;
  const double bound = std::exp(shift) * moment / total;
  if (std::isnan(p) || std::isnan(bound)) return false;
  return p <= bound * (1.0 + 1e-12) + 1e-300;
}

bool empirical_chebyshev_check(const PathSamples& samples, double theta, double target) {
  std::vector<double> w(samples.size(), 1.0);
  if (samples.weighted()) {
    const double shift = log_sum_exp_shift(samples.log_weight);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(samples.log_weight[i] - shift);
  }
  return empirical_chebyshev_check(samples.L, w, samples.horizon, theta, target);
}

}  // namespace growthld::mc

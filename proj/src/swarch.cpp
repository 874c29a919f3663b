#include "newsvec/swarch.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <thread>

#include <json.hpp>

namespace newsvec {

void SwarchParams::validate(bool strict) const {
  auto finite = std::isfinite(mean) && std::isfinite(ar) && std::isfinite(alpha0) &&
                std::isfinite(alpha1) && std::isfinite(gamma_ratio);
  require(finite, "SWARCH parameters must be finite");
  require(alpha0 > 0.0, "alpha0 must be positive");
  require(alpha1 >= 0.0, "alpha1 must be non-negative");
  require(gamma_ratio > 0.0, "gamma ratio must be positive");
  if (strict) require(gamma_ratio >= 1.0, "gamma ratio must be >= 1 (regime 2 is high volatility)");
  require(p11 > 0.0 && p11 < 1.0 && p22 > 0.0 && p22 < 1.0,
          "transition probabilities must lie in (0, 1)");
  require(std::abs(ar) < 1.0, "AR coefficient must satisfy |ar| < 1");
}

double SwarchParams::ergodic_high() const { return (1.0 - p11) / (2.0 - p11 - p22); }

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;

double log_normal_pdf(double e, double var) { return -0.5 * (kLogTwoPi + std::log(var) + e * e / var); }

double log_sum_exp(const std::array<double, 4>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

FilterResult hamilton_filter(const std::vector<double>& y, const SwarchParams& params) {
  params.validate(false);
  const std::size_t n = y.size();
  if (n < 3) fail(ErrorKind::InvalidArgument, "hamilton_filter needs at least 3 observations");

  const std::array<double, 2> gamma{1.0, params.gamma_ratio};
  // trans[j][i] = P(s_t = i | s_{t-1} = j), regimes indexed 0 (low) and 1 (high).
  const double trans[2][2] = {{params.p11, 1.0 - params.p11}, {1.0 - params.p22, params.p22}};
  const double pi_high = params.ergodic_high();

  FilterResult out;
  out.prob_high.assign(n, pi_high);
  out.prob_low.assign(n, 1.0 - pi_high);

  // Joint predicted probabilities P(s_t = i, s_{t-1} = j | Y_{t-1}), index 2*i + j.
  std::array<double, 4> predicted{};
  const std::array<double, 2> prior{1.0 - pi_high, pi_high};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) predicted[2 * i + j] = trans[j][i] * prior[j];

  double e_prev = y[1] - params.mean - params.ar * y[0];
  for (std::size_t t = 2; t < n; ++t) {
    const double e = y[t] - params.mean - params.ar * y[t - 1];
    std::array<double, 4> log_joint{};
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        const double var = gamma[i] * (params.alpha0 + params.alpha1 * e_prev * e_prev / gamma[j]);
        const double p = predicted[2 * i + j];
        log_joint[2 * i + j] = (p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity()) +
                               log_normal_pdf(e, var);
      }
    const double log_lik = log_sum_exp(log_joint);
    if (!std::isfinite(log_lik))
      fail(ErrorKind::Numerical, "non-finite likelihood at t = " + std::to_string(t));
    out.log_likelihood += log_lik;

    std::array<double, 4> filtered{};
    for (int k = 0; k < 4; ++k) filtered[k] = std::exp(log_joint[k] - log_lik);
    out.prob_low[t] = filtered[0] + filtered[1];
    out.prob_high[t] = filtered[2] + filtered[3];

    const std::array<double, 2> marginal{out.prob_low[t], out.prob_high[t]};
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) predicted[2 * i + j] = trans[j][i] * marginal[j];
    e_prev = e;
  }
  return out;
}

std::vector<int> label_crises(const std::vector<double>& prob_high, double threshold) {
  std::vector<int> out(prob_high.size());
  for (std::size_t t = 0; t < prob_high.size(); ++t) out[t] = prob_high[t] >= threshold ? 1 : 0;
  return out;
}

// Nelder-Mead -------------------------------------------------------------------

SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                          std::vector<double> x0, double step, double tolerance,
                          std::size_t max_iterations) {
  const std::size_t n = x0.size();
  std::vector<std::vector<double>> pts(n + 1, x0);
  for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += step;
  std::vector<double> vals(n + 1);
  for (std::size_t i = 0; i <= n; ++i) vals[i] = f(pts[i]);

  std::vector<std::size_t> order(n + 1);
  SimplexResult res;
  auto point = [&](const std::vector<double>& c, const std::vector<double>& w, double coef) {
    std::vector<double> p(n);
    for (std::size_t k = 0; k < n; ++k) p[k] = c[k] + coef * (w[k] - c[k]);
    return p;
  };
  for (res.iterations = 0; res.iterations < max_iterations; ++res.iterations) {
    for (std::size_t i = 0; i <= n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];
    if (std::abs(vals[worst] - vals[best]) <= tolerance) {
      res.converged = true;
      break;
    }
    std::vector<double> centroid(n, 0.0);
    for (std::size_t i = 0; i <= n; ++i)
      if (i != worst)
        for (std::size_t k = 0; k < n; ++k) centroid[k] += pts[i][k] / static_cast<double>(n);

    auto xr = point(centroid, pts[worst], -1.0);
    const double fr = f(xr);
    if (fr < vals[best]) {
      auto xe = point(centroid, pts[worst], -2.0);
      const double fe = f(xe);
      if (fe < fr) {
        pts[worst] = std::move(xe);
        vals[worst] = fe;
      } else {
        pts[worst] = std::move(xr);
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[second]) {
      pts[worst] = std::move(xr);
      vals[worst] = fr;
      continue;
    }
    // Contraction: outside when the reflection improved on the worst point.
    const bool outside = fr < vals[worst];
    auto xc = outside ? point(centroid, xr, 0.5) : point(centroid, pts[worst], 0.5);
    const double fc = f(xc);
    if (fc < (outside ? fr : vals[worst])) {
      pts[worst] = std::move(xc);
      vals[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == best) continue;
      pts[i] = point(pts[best], pts[i], 0.5);
      vals[i] = f(pts[i]);
    }
  }
  const auto best = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
  res.x = pts[best];
  res.value = vals[best];
  return res;
}

// Fitting -------------------------------------------------------------------------

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

/// Unconstrained coordinates, scaled by the sample standard deviation so the
/// simplex step is meaningful for returns of any magnitude.
struct Transform {
  double scale;

  SwarchParams to_params(const std::vector<double>& x) const {
    SwarchParams p;
    p.mean = x[0] * scale;
    p.ar = std::tanh(x[1]);
    p.alpha0 = std::exp(x[2]) * scale * scale;
    p.alpha1 = logistic(x[3]);
    p.gamma_ratio = 1.0 + std::exp(x[4]);
    p.p11 = logistic(x[5]);
    p.p22 = logistic(x[6]);
    return p;
  }

  std::vector<double> to_x(const SwarchParams& p) const {
    auto clamp_prob = [](double v) { return std::clamp(v, 1e-9, 1.0 - 1e-9); };
    return {p.mean / scale,
            std::atanh(std::clamp(p.ar, -0.999999, 0.999999)),
            std::log(p.alpha0 / (scale * scale)),
            logit(clamp_prob(p.alpha1)),
            std::log(std::max(p.gamma_ratio - 1.0, 1e-9)),
            logit(clamp_prob(p.p11)),
            logit(clamp_prob(p.p22))};
  }
};

struct StartOutcome {
  SimplexResult simplex;
  bool ok = false;
};

}  // namespace

FitResult fit_swarch(const std::vector<double>& y, const FitConfig& config,
                     const std::optional<SwarchParams>& init) {
  require(config.starts >= 1, "fit_swarch needs at least one start");
  if (y.size() < 3) fail(ErrorKind::InvalidArgument, "fit_swarch needs at least 3 observations");
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double var = 0.0;
  for (double v : y) var += (v - mean) * (v - mean);
  var /= static_cast<double>(y.size() - 1);
  if (!(var > 0.0) || !std::isfinite(var))
    fail(ErrorKind::InvalidData, "degenerate likelihood: the return series has zero variance");

  const Transform tf{std::sqrt(var)};
  auto objective = [&](const std::vector<double>& x) {
    for (double v : x)
      if (!std::isfinite(v) || std::abs(v) > 50.0) return std::numeric_limits<double>::max();
    try {
      const double ll = hamilton_filter(y, tf.to_params(x)).log_likelihood;
      return std::isfinite(ll) ? -ll : std::numeric_limits<double>::max();
    } catch (const Error&) {
      return std::numeric_limits<double>::max();
    }
  };

  SwarchParams base;
  base.mean = mean;
  base.ar = 0.0;
  base.alpha1 = 0.1;
  base.gamma_ratio = 3.0;
  base.p11 = 0.95;
  base.p22 = 0.9;
  base.alpha0 = 0.5 * var;

  std::vector<std::vector<double>> starts;
  if (init) {
    init->validate(true);
    starts.push_back(tf.to_x(*init));
  }
  starts.push_back(tf.to_x(base));
  for (std::size_t s = starts.size(); s < config.starts; ++s) {
    Rng rng(derive_seed(config.seed, 0x5A4C, s));
    auto x = tf.to_x(base);
    for (double& v : x) v += 0.75 * rng.normal();
    starts.push_back(std::move(x));
  }
  starts.resize(config.starts);

  auto run_start = [&](const std::vector<double>& x0) {
    StartOutcome out;
    // A restart from the reported optimum guards against a collapsed simplex.
    auto first = nelder_mead(objective, x0, 0.5, config.tolerance, config.max_iterations);
    auto second = nelder_mead(objective, first.x, 0.1, config.tolerance, config.max_iterations);
    second.iterations += first.iterations;
    out.ok = second.converged && second.value < std::numeric_limits<double>::max();
    out.simplex = second.value <= first.value ? std::move(second) : std::move(first);
    return out;
  };

  std::vector<StartOutcome> outcomes(starts.size());
  const std::size_t threads = std::max<std::size_t>(1, std::min(config.threads, starts.size()));
  if (threads == 1) {
    for (std::size_t s = 0; s < starts.size(); ++s) outcomes[s] = run_start(starts[s]);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t s = t; s < starts.size(); s += threads) outcomes[s] = run_start(starts[s]);
      });
    for (auto& th : pool) th.join();
  }

  FitResult result;
  double best = std::numeric_limits<double>::max();
  std::size_t best_any = 0;
  double best_any_value = std::numeric_limits<double>::max();
  for (std::size_t s = 0; s < outcomes.size(); ++s) {
    const auto& o = outcomes[s];
    result.iterations += o.simplex.iterations;
    if (o.simplex.value < best_any_value) {
      best_any_value = o.simplex.value;
      best_any = s;
    }
    if (!o.ok) continue;
    ++result.converged_starts;
    if (o.simplex.value < best) {
      best = o.simplex.value;
      result.best_start = s;
    }
  }
  if (result.converged_starts == 0) {
    std::string diag = "no SWARCH start converged; best -loglik " + format_double(best_any_value);
    if (best_any_value < std::numeric_limits<double>::max()) {
      const auto p = tf.to_params(outcomes[best_any].simplex.x);
      diag += " at gamma_ratio " + format_double(p.gamma_ratio) + ", p11 " + format_double(p.p11) +
              ", p22 " + format_double(p.p22);
    }
    fail(ErrorKind::Numerical, diag);
  }
  result.params = tf.to_params(outcomes[result.best_start].simplex.x);
  result.log_likelihood = -best;
  return result;
}

SwarchPath simulate_swarch(const SwarchParams& params, std::size_t length, std::uint64_t seed,
                           const std::vector<double>& drift) {
  params.validate(false);
  require(drift.empty() || drift.size() == length, "drift must match the simulated length");
  Rng rng(seed);
  SwarchPath path;
  path.returns.resize(length);
  path.regimes.resize(length);
  const double gamma[2] = {1.0, params.gamma_ratio};
  int s = rng.uniform() < params.ergodic_high() ? 1 : 0;
  int s_prev = s;
  double e_prev = 0.0;
  double y_prev = params.mean / (1.0 - params.ar);
  for (std::size_t t = 0; t < length; ++t) {
    if (t > 0) {
      const double stay = s == 0 ? params.p11 : params.p22;
      s_prev = s;
      if (rng.uniform() >= stay) s = 1 - s;
    }
    // Unconditional ARCH variance seeds the first innovation.
    const double e_sq = t == 0 ? gamma[s] * params.alpha0 / std::max(1e-12, 1.0 - params.alpha1) : e_prev * e_prev;
    const double var = gamma[s] * (params.alpha0 + params.alpha1 * e_sq / gamma[s_prev]);
    const double e = std::sqrt(var) * rng.normal();
    const double y = params.mean + params.ar * y_prev + e + (drift.empty() ? 0.0 : drift[t]);
    path.returns[t] = y;
    path.regimes[t] = s + 1;
    e_prev = e;
    y_prev = y;
  }
  return path;
}

// I/O -------------------------------------------------------------------------------

ReturnSeries read_returns_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::MissingArtifact, "cannot open returns " + path.string());
  ReturnSeries s;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto cols = split(trim(line), ',');
    if (first) {
      first = false;
      if (cols.size() >= 1 && trim(cols[0]) == "date") continue;
    }
    if (cols.size() < 2) fail(ErrorKind::InvalidData, "malformed returns line: " + line);
    const auto d = parse_date(trim(cols[0]));
    if (!s.dates.empty() && !(s.dates.back() < d))
      fail(ErrorKind::InvalidData, "returns dates must be strictly increasing at " + format_date(d));
    s.dates.push_back(d);
    s.returns.push_back(parse_double(cols[1]));
  }
  return s;
}

void write_returns_csv(const std::filesystem::path& path, const ReturnSeries& series) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << "date,return\n";
  for (std::size_t t = 0; t < series.returns.size(); ++t)
    out << format_date(series.dates[t]) << ',' << format_double(series.returns[t]) << '\n';
}

void write_regimes_csv(const std::filesystem::path& path, const std::vector<Date>& dates,
                       const RegimeSeries& regimes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << "date,prob_high,crisis_label\n";
  for (std::size_t t = 0; t < regimes.prob_high.size(); ++t)
    out << format_date(dates[t]) << ',' << format_double(regimes.prob_high[t]) << ','
        << regimes.crisis[t] << '\n';
}

RegimeSeries read_regimes_csv(const std::filesystem::path& path, std::vector<Date>* dates) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::MissingArtifact, "cannot open regimes " + path.string());
  RegimeSeries r;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto cols = split(trim(line), ',');
    if (cols.size() != 3) fail(ErrorKind::InvalidData, "malformed regimes line: " + line);
    if (dates) dates->push_back(parse_date(cols[0]));
    r.prob_high.push_back(parse_double(cols[1]));
    r.crisis.push_back(static_cast<int>(parse_double(cols[2])));
  }
  return r;
}

std::string params_to_json(const SwarchParams& p, double log_likelihood) {
  nlohmann::ordered_json j;
  j["mean"] = p.mean;
  j["ar"] = p.ar;
  j["alpha0"] = p.alpha0;
  j["alpha1"] = p.alpha1;
  j["gamma_ratio"] = p.gamma_ratio;
  j["p11"] = p.p11;
  j["p22"] = p.p22;
  j["log_likelihood"] = log_likelihood;
  return j.dump(2);
}

SwarchParams params_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    SwarchParams p;
    p.mean = j.at("mean").get<double>();
    p.ar = j.at("ar").get<double>();
    p.alpha0 = j.at("alpha0").get<double>();
    p.alpha1 = j.at("alpha1").get<double>();
    p.gamma_ratio = j.at("gamma_ratio").get<double>();
    p.p11 = j.at("p11").get<double>();
    p.p22 = j.at("p22").get<double>();
    return p;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidData, std::string("malformed SWARCH parameters: ") + e.what());
  }
}

}  // namespace newsvec

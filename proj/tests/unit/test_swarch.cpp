#include <doctest.h>

#include <chrono>
#include <cmath>
#include <filesystem>

#include "newsvec/swarch.hpp"
#include "oracles.hpp"

using namespace newsvec;

namespace {

std::vector<double> random_series(std::uint64_t seed, std::size_t n, double scale = 0.01) {
  Rng rng(seed);
  std::vector<double> y(n);
  for (auto& v : y) v = scale * rng.normal();
  return y;
}

}  // namespace

TEST_CASE("filter matches exhaustive path enumeration") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    for (std::size_t n : {3, 5, 10, 12}) {
      Rng rng(seed * 31 + n);
      SwarchParams p;
      p.mean = rng.uniform(-0.002, 0.002);
      p.ar = rng.uniform(-0.3, 0.3);
      p.alpha0 = rng.uniform(0.5e-4, 2e-4);
      p.alpha1 = rng.uniform(0.0, 0.5);
      p.gamma_ratio = rng.uniform(1.0, 5.0);
      p.p11 = rng.uniform(0.6, 0.99);
      p.p22 = rng.uniform(0.6, 0.99);
      const auto y = simulate_swarch(p, n, seed).returns;
      const auto got = hamilton_filter(y, p);
      const auto truth = oracle::swarch_enumerate(y, p.mean, p.ar, p.alpha0, p.alpha1, p.gamma_ratio, p.p11, p.p22);
      CAPTURE(seed);
      CAPTURE(n);
      for (std::size_t t = 0; t < n; ++t) {
        CHECK(std::abs(got.prob_high[t] - truth.prob_high[t]) <= 1e-10);
        CHECK(std::abs(got.prob_high[t] + got.prob_low[t] - 1.0) <= 1e-12);
      }
      CHECK(std::abs(got.log_likelihood - truth.log_likelihood) <= 1e-8);
    }
  }
}

TEST_CASE("indistinguishable regimes give one half") {
  SwarchParams p;
  p.gamma_ratio = 1.0;
  p.p11 = p.p22 = 0.5;
  const auto r = hamilton_filter(random_series(3, 60), p);
  for (double v : r.prob_high) CHECK(v == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("relabeling regimes leaves the likelihood unchanged") {
  SwarchParams p;
  p.gamma_ratio = 3.0;
  p.alpha0 = 2e-4;
  p.alpha1 = 0.2;
  p.p11 = 0.97;
  p.p22 = 0.9;
  const auto y = simulate_swarch(p, 300, 9).returns;
  SwarchParams swapped = p;
  swapped.gamma_ratio = 1.0 / p.gamma_ratio;
  swapped.alpha0 = p.alpha0 * p.gamma_ratio;
  swapped.p11 = p.p22;
  swapped.p22 = p.p11;
  const auto a = hamilton_filter(y, p);
  const auto b = hamilton_filter(y, swapped);
  CHECK(a.log_likelihood == doctest::Approx(b.log_likelihood).epsilon(1e-12));
  for (std::size_t t = 0; t < y.size(); ++t) CHECK(a.prob_high[t] == doctest::Approx(b.prob_low[t]).epsilon(1e-9));
  CHECK_THROWS_AS(swapped.validate(), Error);
  swapped.validate(false);
}

TEST_CASE("filter input errors") {
  SwarchParams p;
  CHECK_THROWS_AS(hamilton_filter({0.01, 0.02}, p), Error);
  p.p11 = 1.0;
  CHECK_THROWS_AS(hamilton_filter(random_series(1, 10), p), Error);
  p = {};
  auto y = random_series(1, 10);
  y[4] = std::nan("");
  CHECK_THROWS_AS(hamilton_filter(y, p), Error);
}

TEST_CASE("crisis labels") {
  CHECK(label_crises({0.5, 0.49999, 0.9, 0.0}) == std::vector<int>{1, 0, 1, 0});
  CHECK(label_crises({0.0, 0.0}) == std::vector<int>{0, 0});
  CHECK(label_crises({0.2, 1.0}, 1.01) == std::vector<int>{0, 0});
  // Monotone in the threshold.
  const auto probs = std::vector<double>{0.1, 0.4, 0.55, 0.7, 0.95};
  for (double lo = 0.0; lo < 1.0; lo += 0.1) {
    const auto a = label_crises(probs, lo);
    const auto b = label_crises(probs, lo + 0.1);
    for (std::size_t i = 0; i < probs.size(); ++i) CHECK(b[i] <= a[i]);
  }
}

TEST_CASE("nelder-mead minimizes the Rosenbrock function") {
  const auto r = nelder_mead(
      [](const std::vector<double>& x) {
        return 100 * (x[1] - x[0] * x[0]) * (x[1] - x[0] * x[0]) + (1 - x[0]) * (1 - x[0]);
      },
      {-1.2, 1.0}, 0.5, 1e-14, 5000);
  CHECK(r.converged);
  CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(r.x[1] == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("fit recovers simulated parameters") {
  SwarchParams truth{0.0, 0.0, 1e-4, 0.1, 3.0, 0.98, 0.95};
  const auto path = simulate_swarch(truth, 2000, 42);
  const auto t0 = std::chrono::steady_clock::now();
  FitConfig cfg;
  cfg.seed = 7;
  const auto fit = fit_swarch(path.returns, cfg);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  MESSAGE("fit took " << seconds << " s, gamma " << fit.params.gamma_ratio);
  CHECK(seconds < 60.0);
  CHECK(fit.params.gamma_ratio >= 1.0);
  CHECK(std::abs(fit.params.gamma_ratio - truth.gamma_ratio) / truth.gamma_ratio <= 0.25);

  // Filtered high-regime probability is larger on true high-volatility days.
  const auto filtered = hamilton_filter(path.returns, fit.params);
  double hi = 0, lo = 0, nhi = 0, nlo = 0;
  for (std::size_t t = 2; t < path.regimes.size(); ++t) {
    if (path.regimes[t] == 2) {
      hi += filtered.prob_high[t];
      ++nhi;
    } else {
      lo += filtered.prob_high[t];
      ++nlo;
    }
  }
  CHECK(hi / nhi > lo / nlo);

  // Refitting from the optimum barely moves it.
  FitConfig one = cfg;
  one.starts = 1;
  const auto again = fit_swarch(path.returns, one, fit.params);
  CHECK(again.log_likelihood - fit.log_likelihood < 1e-6);
  CHECK(again.log_likelihood >= fit.log_likelihood - 1e-6);
}

TEST_CASE("constant series cannot be fit") {
  CHECK_THROWS_AS(fit_swarch(std::vector<double>(100, 0.001)), Error);
}

TEST_CASE("simulation is deterministic and honours drift") {
  SwarchParams p;
  const auto a = simulate_swarch(p, 50, 3);
  const auto b = simulate_swarch(p, 50, 3);
  CHECK(a.returns == b.returns);
  CHECK(a.regimes == b.regimes);
  std::vector<double> drift(50, 0.0);
  drift[10] = 0.5;
  const auto c = simulate_swarch(p, 50, 3, drift);
  CHECK(c.returns[9] == a.returns[9]);
  CHECK(c.returns[10] == doctest::Approx(a.returns[10] + 0.5));
}

TEST_CASE("csv and json round trips") {
  const auto dir = std::filesystem::temp_directory_path() / "newsvec_swarch_test";
  std::filesystem::create_directories(dir);
  ReturnSeries s;
  s.dates = {parse_date("2020-01-06"), parse_date("2020-01-07"), parse_date("2020-01-08")};
  s.returns = {0.001, -1.0 / 3.0, 0.0};
  write_returns_csv(dir / "r.csv", s);
  const auto back = read_returns_csv(dir / "r.csv");
  CHECK(back.returns == s.returns);
  CHECK(back.dates == s.dates);

  RegimeSeries reg{{0.25, 0.5, 0.75}, {0, 1, 1}};
  write_regimes_csv(dir / "g.csv", s.dates, reg);
  std::vector<Date> dates;
  const auto rb = read_regimes_csv(dir / "g.csv", &dates);
  CHECK(rb.prob_high == reg.prob_high);
  CHECK(rb.crisis == reg.crisis);
  CHECK(dates == s.dates);

  SwarchParams p{0.001, -0.1, 2e-4, 0.3, 2.5, 0.9, 0.8};
  const auto q = params_from_json(params_to_json(p, -12.5));
  CHECK(q.alpha0 == p.alpha0);
  CHECK(q.gamma_ratio == p.gamma_ratio);
  CHECK(q.p22 == p.p22);
  std::filesystem::remove_all(dir);
}

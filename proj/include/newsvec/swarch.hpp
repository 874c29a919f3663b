#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "newsvec/common.hpp"

namespace newsvec {

/// Two-regime switching ARCH(1) with AR(1) mean:
///
///   y_t = mean + ar * y_{t-1} + e_t
///   Var(e_t | s_t, s_{t-1}) = g(s_t) * (alpha0 + alpha1 * e_{t-1}^2 / g(s_{t-1}))
///
/// with g(1) = 1, g(2) = gamma_ratio and a first-order Markov chain over s_t.
struct SwarchParams {
  double mean = 0.0;
  double ar = 0.0;
  double alpha0 = 1e-4;
  double alpha1 = 0.1;
  double gamma_ratio = 2.0;
  double p11 = 0.95;
  double p22 = 0.9;

  /// Strict validation also demands gamma_ratio >= 1 (regime 2 is the
  /// high-volatility state). The filter itself accepts any positive ratio.
  void validate(bool strict = true) const;
  /// Stationary probability of regime 2.
  double ergodic_high() const;
};

struct FilterResult {
  /// P(s_t = 2 | y_0..y_t). The first two days carry no likelihood term and
  /// report the ergodic probability.
  std::vector<double> prob_high;
  /// P(s_t = 1 | ...) computed independently from the joint state.
  std::vector<double> prob_low;
  double log_likelihood = 0.0;
};

FilterResult hamilton_filter(const std::vector<double>& returns, const SwarchParams& params);

struct RegimeSeries {
  std::vector<double> prob_high;
  std::vector<int> crisis;
};

/// crisis[t] = prob_high[t] >= threshold.
std::vector<int> label_crises(const std::vector<double>& prob_high, double threshold = 0.5);

struct FitConfig {
  std::size_t starts = 8;
  std::uint64_t seed = 1;
  double tolerance = 1e-8;  ///< spread of the simplex in negative log-likelihood
  std::size_t max_iterations = 5000;
  std::size_t threads = 1;
};

struct FitResult {
  SwarchParams params;
  double log_likelihood = 0.0;
  std::size_t converged_starts = 0;
  std::size_t best_start = 0;
  std::size_t iterations = 0;
};

FitResult fit_swarch(const std::vector<double>& returns, const FitConfig& config = {},
                     const std::optional<SwarchParams>& init = std::nullopt);

struct SwarchPath {
  std::vector<double> returns;
  std::vector<int> regimes;  ///< 1 or 2
};

/// Simulates the process; `drift[t]`, when given, is added to the mean of y_t.
SwarchPath simulate_swarch(const SwarchParams& params, std::size_t length, std::uint64_t seed,
                           const std::vector<double>& drift = {});

// Derivative-free minimization ------------------------------------------------

struct SimplexResult {
  std::vector<double> x;
  double value = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Nelder-Mead downhill simplex. Stops when the spread of function values over
/// the simplex falls to `tolerance` or after `max_iterations`.
SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                          std::vector<double> x0, double step, double tolerance,
                          std::size_t max_iterations);

// I/O ---------------------------------------------------------------------------

struct ReturnSeries {
  std::vector<Date> dates;
  std::vector<double> returns;
};

ReturnSeries read_returns_csv(const std::filesystem::path& path);
void write_returns_csv(const std::filesystem::path& path, const ReturnSeries& series);
void write_regimes_csv(const std::filesystem::path& path, const std::vector<Date>& dates,
                       const RegimeSeries& regimes);
RegimeSeries read_regimes_csv(const std::filesystem::path& path, std::vector<Date>* dates = nullptr);
std::string params_to_json(const SwarchParams& params, double log_likelihood);
SwarchParams params_from_json(const std::string& text);

}  // namespace newsvec

// Independent reference implementations used by the unit and acceptance
// tests. Each one is written the slow, obvious way and shares no code with
// the library beyond plain data types.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

using Tokens = std::vector<std::string>;

/// score(e, k) = count(e, k) / |k| * ln(N / df(e)), by direct double loops.
inline std::vector<std::map<std::string, double>> tfidf(const std::vector<Tokens>& docs) {
  const double n = static_cast<double>(docs.size());
  std::vector<std::map<std::string, double>> out(docs.size());
  for (std::size_t k = 0; k < docs.size(); ++k) {
    for (const auto& term : docs[k]) {
      if (out[k].count(term)) continue;
      double count = 0;
      for (const auto& t : docs[k]) count += t == term;
      double df = 0;
      for (const auto& other : docs) df += std::find(other.begin(), other.end(), term) != other.end();
      out[k][term] = count / static_cast<double>(docs[k].size()) * std::log(n / df);
    }
  }
  return out;
}

struct Edge {
  std::string a, b;
  double w;
};

/// Repeatedly deletes every node of degree <= 1 until nothing changes.
inline std::set<std::string> peel(const std::vector<Edge>& edges, std::set<std::string> nodes) {
  bool changed = true;
  while (changed) {
    changed = false;
    std::map<std::string, int> degree;
    for (const auto& n : nodes) degree[n] = 0;
    for (const auto& e : edges)
      if (nodes.count(e.a) && nodes.count(e.b)) {
        ++degree[e.a];
        ++degree[e.b];
      }
    for (const auto& [n, d] : degree)
      if (d <= 1) {
        nodes.erase(n);
        changed = true;
      }
  }
  return nodes;
}

/// Dense second-order transition probabilities from `cur` having arrived
/// from `prev`: mass w(cur, x) * bias, bias 1/p for x = prev, 1 when x is
/// adjacent to prev, 1/q otherwise.
inline std::vector<double> transition(const std::vector<std::vector<double>>& w, std::size_t prev, std::size_t cur,
                                      double p, double q) {
  std::vector<double> mass(w.size(), 0.0);
  double z = 0.0;
  for (std::size_t x = 0; x < w.size(); ++x) {
    if (w[cur][x] <= 0.0) continue;
    double bias = 1.0 / q;
    if (x == prev) bias = 1.0 / p;
    else if (w[prev][x] > 0.0) bias = 1.0;
    mass[x] = w[cur][x] * bias;
    z += mass[x];
  }
  for (auto& m : mass) m /= z;
  return mass;
}

struct SwarchTruth {
  std::vector<double> prob_high;
  double log_likelihood = 0.0;
};

/// Sums over all 2^T regime paths. Likelihood terms start at t = 2 (the
/// first two observations only seed the residual and the ARCH term).
inline SwarchTruth swarch_enumerate(const std::vector<double>& y, double mean, double ar, double alpha0,
                                    double alpha1, double gamma2, double p11, double p22) {
  const std::size_t n = y.size();
  const double pi2 = (1.0 - p11) / (2.0 - p11 - p22);
  const double gamma[2] = {1.0, gamma2};
  const double stay[2] = {p11, p22};
  std::vector<double> e(n, 0.0);
  for (std::size_t t = 1; t < n; ++t) e[t] = y[t] - mean - ar * y[t - 1];

  SwarchTruth truth;
  truth.prob_high.assign(n, pi2);
  // For every horizon t, sum path weights over s_0..s_t.
  for (std::size_t horizon = 2; horizon < n; ++horizon) {
    double total = 0.0, high = 0.0;
    const std::size_t paths = std::size_t{1} << (horizon + 1);
    for (std::size_t mask = 0; mask < paths; ++mask) {
      auto s = [&](std::size_t t) { return static_cast<int>((mask >> t) & 1U); };
      double weight = s(0) ? pi2 : 1.0 - pi2;
      for (std::size_t t = 1; t <= horizon; ++t) weight *= s(t) == s(t - 1) ? stay[s(t - 1)] : 1.0 - stay[s(t - 1)];
      for (std::size_t t = 2; t <= horizon; ++t) {
        const double var = gamma[s(t)] * (alpha0 + alpha1 * e[t - 1] * e[t - 1] / gamma[s(t - 1)]);
        weight *= std::exp(-0.5 * e[t] * e[t] / var) / std::sqrt(2.0 * std::numbers::pi * var);
      }
      total += weight;
      if (s(horizon)) high += weight;
    }
    truth.prob_high[horizon] = high / total;
    if (horizon == n - 1) truth.log_likelihood = std::log(total);
  }
  return truth;
}

/// Matthews correlation straight from the label pairs (class 1 positive).
inline double binary_mcc(const std::vector<int>& pred, const std::vector<int>& actual) {
  double tp = 0, tn = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == 1 && actual[i] == 1) ++tp;
    if (pred[i] == 0 && actual[i] == 0) ++tn;
    if (pred[i] == 1 && actual[i] == 0) ++fp;
    if (pred[i] == 0 && actual[i] == 1) ++fn;
  }
  const double den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  return den == 0 ? 0.0 : (tp * tn - fp * fn) / std::sqrt(den);
}

/// Multiclass correlation from the covariance definition: the Pearson
/// correlation of one-hot prediction and truth indicator matrices.
inline double multiclass_mcc(const std::vector<int>& pred, const std::vector<int>& actual, int classes) {
  const double n = static_cast<double>(pred.size());
  double cov_xy = 0, cov_xx = 0, cov_yy = 0;
  for (int k = 0; k < classes; ++k) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      mx += pred[i] == k;
      my += actual[i] == k;
    }
    mx /= n;
    my /= n;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double x = (pred[i] == k) - mx, y = (actual[i] == k) - my;
      cov_xy += x * y;
      cov_xx += x * x;
      cov_yy += y * y;
    }
  }
  return cov_xx * cov_yy == 0 ? 0.0 : cov_xy / std::sqrt(cov_xx * cov_yy);
}

}  // namespace oracle

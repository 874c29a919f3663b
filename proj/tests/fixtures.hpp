// Shared test fixtures built on the library types.
#pragma once

#include <map>
#include <tuple>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "newsvec/walk.hpp"
#include "oracles.hpp"

namespace fixture {

using namespace newsvec;

/// Five news, five elements, uneven weights. `dense` receives the symmetric
/// weight matrix for the oracles.
inline AttributedGraph ten_node_graph(std::vector<std::vector<double>>* dense = nullptr) {
  AttributedGraph g;
  for (int i = 0; i < 5; ++i) g.add_node("k" + std::to_string(i), NodeKind::News, {"month:1"});
  for (int i = 0; i < 5; ++i) g.add_node("elem:e" + std::to_string(i), NodeKind::Element);
  const std::vector<std::tuple<int, int, double>> edges = {
      {0, 5, 1.0}, {0, 6, 2.0}, {0, 7, 0.5}, {1, 5, 1.5}, {1, 8, 1.0}, {2, 6, 0.7}, {2, 7, 1.2},
      {2, 9, 2.5}, {3, 8, 0.9}, {3, 9, 1.1}, {3, 5, 0.3}, {4, 6, 1.0}, {4, 9, 0.6}, {4, 8, 2.0}};
  if (dense) dense->assign(10, std::vector<double>(10, 0.0));
  for (auto [a, b, w] : edges) {
    g.add_edge(static_cast<NodeId>(a), static_cast<NodeId>(b), w);
    if (dense) (*dense)[a][b] = (*dense)[b][a] = w;
  }
  g.finalize();
  return g;
}

struct ChiSquare {
  double statistic = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
  std::size_t steps = 0;
  /// Transitions observed where the oracle assigns zero probability.
  std::size_t impossible = 0;
};

/// Pooled goodness of fit of observed second-order transitions against the
/// dense oracle, one multinomial per (previous, current) pair.
inline ChiSquare transition_chi_square(const std::vector<std::vector<double>>& w,
                                       const std::vector<WalkSequence>& walks, double p, double q) {
  std::map<std::pair<NodeId, NodeId>, std::map<NodeId, double>> counts;
  ChiSquare out;
  for (const auto& walk : walks)
    for (std::size_t i = 2; i < walk.size(); ++i) {
      ++counts[{walk[i - 2], walk[i - 1]}][walk[i]];
      ++out.steps;
    }
  for (const auto& [key, obs] : counts) {
    double n = 0;
    for (const auto& [x, c] : obs) n += c;
    const auto probs = oracle::transition(w, key.first, key.second, p, q);
    std::size_t cats = 0;
    for (std::size_t x = 0; x < probs.size(); ++x) {
      const auto it = obs.find(static_cast<NodeId>(x));
      const double o = it == obs.end() ? 0.0 : it->second;
      if (probs[x] == 0.0) {
        out.impossible += o > 0.0;
        continue;
      }
      const double expected = n * probs[x];
      out.statistic += (o - expected) * (o - expected) / expected;
      ++cats;
    }
    out.dof += static_cast<double>(cats - 1);
  }
  out.p_value = boost::math::cdf(boost::math::complement(boost::math::chi_squared(out.dof), out.statistic));
  return out;
}

}  // namespace fixture

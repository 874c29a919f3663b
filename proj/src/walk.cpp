#include "newsvec/walk.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <thread>

namespace newsvec {

void WalkConfig::validate() const {
  require(length >= 2, "walk length must be at least 2");
  require(walks_per_node >= 1, "walks per node must be at least 1");
  require(p > 0.0 && q > 0.0, "walk parameters p and q must be positive");
}

namespace {

/// Search bias for stepping v -> x after arriving from t.
double search_bias(NodeId prev, NodeId x, const AttributedGraph& graph, double p, double q) {
  if (x == prev) return 1.0 / p;
  if (graph.adjacent(prev, x)) return 1.0;
  return 1.0 / q;
}

void require_edges(NodeId v, const AttributedGraph& graph) {
  if (graph.degree(v) == 0)
    fail(ErrorKind::InvalidData, "node '" + graph.name(v) + "' is isolated");
}

std::vector<double> biased_masses(NodeId prev, NodeId cur, const AttributedGraph& graph,
                                  const WalkConfig& config) {
  const auto& nbrs = graph.neighbors(cur);
  std::vector<double> mass(nbrs.size());
  for (std::size_t i = 0; i < nbrs.size(); ++i)
    mass[i] = search_bias(prev, nbrs[i].node, graph, config.p, config.q) * nbrs[i].weight;
  return mass;
}

std::size_t sample_inverse_cdf(const std::vector<double>& mass, Rng& rng) {
  double total = 0.0;
  for (double m : mass) total += m;
  const double u = rng.uniform() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < mass.size(); ++i) {
    acc += mass[i];
    if (u < acc) return i;
  }
  // Rounding can leave u == total; fall back to the last positive entry.
  for (std::size_t i = mass.size(); i-- > 0;)
    if (mass[i] > 0.0) return i;
  return mass.size() - 1;
}

std::size_t position_of(const std::vector<Neighbor>& nbrs, NodeId id) {
  const auto it = std::lower_bound(nbrs.begin(), nbrs.end(), id,
                                   [](const Neighbor& n, NodeId x) { return n.node < x; });
  return static_cast<std::size_t>(it - nbrs.begin());
}

struct AliasCache {
  std::vector<AliasTable> first;
  /// second[v][i]: table for arriving at v from its i-th neighbor.
  std::vector<std::vector<AliasTable>> second;
};

AliasCache build_alias_cache(const AttributedGraph& graph, const WalkConfig& config) {
  AliasCache cache;
  cache.first.resize(graph.size());
  cache.second.resize(graph.size());
  for (NodeId v = 0; v < graph.size(); ++v) {
    if (graph.degree(v) == 0) continue;
    cache.first[v] = AliasTable(first_step_distribution(v, graph));
    for (const auto& t : graph.neighbors(v))
      cache.second[v].emplace_back(biased_masses(t.node, v, graph, config));
  }
  return cache;
}

WalkSequence walk_from(NodeId start, std::size_t round, const AttributedGraph& graph,
                       const WalkConfig& config, const AliasCache* alias) {
  Rng rng(derive_seed(config.seed, start, round));
  WalkSequence walk;
  walk.reserve(config.length);
  walk.push_back(start);
  require_edges(start, graph);
  while (walk.size() < config.length) {
    const NodeId cur = walk.back();
    const auto& nbrs = graph.neighbors(cur);
    std::size_t pick;
    if (walk.size() == 1) {
      if (alias) {
        pick = alias->first[cur].sample(rng);
      } else {
        std::vector<double> mass(nbrs.size());
        for (std::size_t i = 0; i < nbrs.size(); ++i) mass[i] = nbrs[i].weight;
        pick = sample_inverse_cdf(mass, rng);
      }
    } else {
      const NodeId prev = walk[walk.size() - 2];
      if (alias)
        pick = alias->second[cur][position_of(nbrs, prev)].sample(rng);
      else
        pick = sample_inverse_cdf(biased_masses(prev, cur, graph, config), rng);
    }
    walk.push_back(nbrs[pick].node);
  }
  return walk;
}

}  // namespace

std::vector<double> transition_distribution(NodeId prev, NodeId cur, const AttributedGraph& graph,
                                            const WalkConfig& config) {
  require_edges(cur, graph);
  if (!graph.adjacent(prev, cur))
    fail(ErrorKind::InvalidArgument,
         "transition from '" + graph.name(prev) + "' to non-adjacent '" + graph.name(cur) + "'");
  auto mass = biased_masses(prev, cur, graph, config);
  double z = 0.0;
  for (double m : mass) z += m;
  for (double& m : mass) m /= z;
  return mass;
}

std::vector<double> first_step_distribution(NodeId cur, const AttributedGraph& graph) {
  require_edges(cur, graph);
  const auto& nbrs = graph.neighbors(cur);
  std::vector<double> prob(nbrs.size());
  double z = 0.0;
  for (const auto& nb : nbrs) z += nb.weight;
  for (std::size_t i = 0; i < nbrs.size(); ++i) prob[i] = nbrs[i].weight / z;
  return prob;
}

AliasTable::AliasTable(const std::vector<double>& weights) {
  const std::size_t n = weights.size();
  require(n > 0, "alias table needs at least one outcome");
  double total = 0.0;
  for (double w : weights) total += w;
  prob_.assign(n, 0.0);
  alias_.assign(n, 0);
  std::vector<double> scaled(n);
  std::vector<std::uint32_t> small, large;
  for (std::size_t i = 0; i < n; ++i) {
    scaled[i] = weights[i] * static_cast<double>(n) / total;
    (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
  }
  while (!small.empty() && !large.empty()) {
    const auto s = small.back();
    small.pop_back();
    const auto l = large.back();
    large.pop_back();
    prob_[s] = scaled[s];
    alias_[s] = l;
    scaled[l] = (scaled[l] + scaled[s]) - 1.0;
    (scaled[l] < 1.0 ? small : large).push_back(l);
  }
  for (auto i : large) prob_[i] = 1.0;
  for (auto i : small) prob_[i] = 1.0;
}

std::size_t AliasTable::sample(Rng& rng) const {
  const auto i = static_cast<std::size_t>(rng.below(prob_.size()));
  return rng.uniform() < prob_[i] ? i : alias_[i];
}

std::vector<WalkSequence> sample_walks(const AttributedGraph& graph, const WalkConfig& config) {
  config.validate();
  const std::size_t n = graph.size();
  AliasCache cache;
  if (config.use_alias) cache = build_alias_cache(graph, config);
  const AliasCache* alias = config.use_alias ? &cache : nullptr;

  std::vector<WalkSequence> walks(n * config.walks_per_node);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = 0; r < config.walks_per_node; ++r)
      for (std::size_t v = begin; v < end; ++v)
        walks[r * n + v] = walk_from(static_cast<NodeId>(v), r, graph, config, alias);
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(config.threads, n));
  if (threads == 1) {
    work(0, n);
    return walks;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        work(t * chunk, std::min(n, (t + 1) * chunk));
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return walks;
}

void write_walks(const std::filesystem::path& path, const std::vector<WalkSequence>& walks,
                 const AttributedGraph& graph) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  for (const auto& w : walks) {
    for (std::size_t i = 0; i < w.size(); ++i) out << (i ? " " : "") << graph.name(w[i]);
    out << '\n';
  }
}

std::vector<WalkSequence> read_walks(const std::filesystem::path& path,
                                     const AttributedGraph& graph) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::MissingArtifact, "cannot open " + path.string());
  std::vector<WalkSequence> walks;
  std::string line, name;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    WalkSequence w;
    while (ss >> name) {
      const auto id = graph.find(name);
      if (!id) fail(ErrorKind::InvalidData, "walk references unknown node '" + name + "'");
      w.push_back(*id);
    }
    if (!w.empty()) walks.push_back(std::move(w));
  }
  return walks;
}

}  // namespace newsvec

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "newsvec/graph.hpp"

namespace newsvec {

struct WalkConfig {
  std::size_t length = 100;       ///< nodes per walk
  std::size_t walks_per_node = 10;
  double p = 1.0;                 ///< return parameter
  double q = 1.0;                 ///< in-out parameter
  std::uint64_t seed = 1;
  /// Precompute alias tables instead of cumulative-sum inversion.
  bool use_alias = false;
  std::size_t threads = 1;

  void validate() const;
};

using WalkSequence = std::vector<NodeId>;

/// Next-hop probabilities from `cur` given the walk arrived from `prev`,
/// aligned with graph.neighbors(cur).
std::vector<double> transition_distribution(NodeId prev, NodeId cur, const AttributedGraph& graph,
                                            const WalkConfig& config);

/// First-step (no predecessor) probabilities, proportional to edge weight.
std::vector<double> first_step_distribution(NodeId cur, const AttributedGraph& graph);

/// Walker's alias method over a fixed discrete distribution.
class AliasTable {
 public:
  AliasTable() = default;
  explicit AliasTable(const std::vector<double>& weights);
  std::size_t sample(Rng& rng) const;
  std::size_t size() const { return prob_.size(); }

 private:
  std::vector<double> prob_;
  std::vector<std::uint32_t> alias_;
};

/// Samples `walks_per_node` walks from every node. Output order is
/// (round, start node); each walk draws from its own RNG seeded from
/// (seed, start node, round), so the thread count never changes the result.
std::vector<WalkSequence> sample_walks(const AttributedGraph& graph, const WalkConfig& config);

/// One walk per line, space separated node names.
void write_walks(const std::filesystem::path& path, const std::vector<WalkSequence>& walks,
                 const AttributedGraph& graph);
std::vector<WalkSequence> read_walks(const std::filesystem::path& path,
                                     const AttributedGraph& graph);

}  // namespace newsvec

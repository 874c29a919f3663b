#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "newsvec/corpus.hpp"

namespace newsvec {

using NodeId = std::uint32_t;

enum class NodeKind : std::uint8_t { News, Element };

struct Neighbor {
  NodeId node;
  double weight;
};

/// Bipartite weighted news/element network.
///
/// News nodes are named by document id, element nodes by their feature
/// identifier (`elem:<token>`). Node ids are dense indices; neighbor lists are
/// kept sorted by id.
class AttributedGraph {
 public:
  NodeId add_node(const std::string& name, NodeKind kind, FeatureBag features = {});
  /// Adds an undirected edge. Weights must be positive; the endpoints must be
  /// of different kinds.
  void add_edge(NodeId a, NodeId b, double weight);
  /// Sorts adjacency lists. Call after the last add_edge.
  void finalize();

  std::size_t size() const { return names_.size(); }
  std::size_t num_edges() const;
  const std::string& name(NodeId v) const { return names_[v]; }
  NodeKind kind(NodeId v) const { return kinds_[v]; }
  const FeatureBag& features(NodeId v) const { return features_[v]; }
  const std::vector<Neighbor>& neighbors(NodeId v) const { return adj_[v]; }
  std::size_t degree(NodeId v) const { return adj_[v].size(); }
  std::optional<NodeId> find(const std::string& name) const;
  /// Weight of edge (a, b) or 0 when absent.
  double weight(NodeId a, NodeId b) const;
  bool adjacent(NodeId a, NodeId b) const { return weight(a, b) > 0.0; }

  /// Feature bags of news nodes removed by pruning, keyed by document id.
  std::map<std::string, FeatureBag> detached_news;

 private:
  std::vector<std::string> names_;
  std::vector<NodeKind> kinds_;
  std::vector<FeatureBag> features_;
  std::vector<std::vector<Neighbor>> adj_;
  std::unordered_map<std::string, NodeId> index_;
};

/// Per-document inputs for network construction.
struct NewsRecord {
  std::string id;
  std::set<std::string> elements;
  FeatureBag features;
  ScoreMap title_scores;
  ScoreMap body_scores;
};

/// Edge weight of element `e` for one document: title and body tf-idf each
/// L1-normalized over the document's elements, then summed.
std::map<std::string, double> edge_weights(const NewsRecord& record);

AttributedGraph build_network(const std::vector<NewsRecord>& records);

/// Removes nodes of degree <= 1 until none remain. Throws when the graph
/// empties.
AttributedGraph prune(const AttributedGraph& graph);

void write_graph(const std::filesystem::path& edges_tsv,
                 const std::filesystem::path& nodes_jsonl, const AttributedGraph& graph);
AttributedGraph read_graph(const std::filesystem::path& edges_tsv,
                           const std::filesystem::path& nodes_jsonl);

}  // namespace newsvec

#include "newsvec/graph.hpp"

#include <algorithm>
#include <deque>
#include <fstream>

#include <json.hpp>

namespace newsvec {

NodeId AttributedGraph::add_node(const std::string& name, NodeKind kind, FeatureBag features) {
  if (index_.count(name)) fail(ErrorKind::InvalidData, "duplicate graph node '" + name + "'");
  // Walk dumps and edge lists are whitespace delimited.
  if (name.empty() || name.find_first_of(" \t\r\n") != std::string::npos)
    fail(ErrorKind::InvalidData, "graph node name '" + name + "' is empty or contains whitespace");
  const auto id = static_cast<NodeId>(names_.size());
  names_.push_back(name);
  kinds_.push_back(kind);
  features_.push_back(std::move(features));
  adj_.emplace_back();
  index_.emplace(name, id);
  return id;
}

void AttributedGraph::add_edge(NodeId a, NodeId b, double weight) {
  if (a >= size() || b >= size()) fail(ErrorKind::InvalidArgument, "edge endpoint out of range");
  if (kinds_[a] == kinds_[b])
    fail(ErrorKind::InvalidData,
         "edge " + names_[a] + " - " + names_[b] + " would break bipartiteness");
  if (!(weight > 0.0))
    fail(ErrorKind::InvalidData, "edge " + names_[a] + " - " + names_[b] + " has non-positive weight");
  adj_[a].push_back({b, weight});
  adj_[b].push_back({a, weight});
}

void AttributedGraph::finalize() {
  for (auto& nbrs : adj_) {
    std::sort(nbrs.begin(), nbrs.end(),
              [](const Neighbor& x, const Neighbor& y) { return x.node < y.node; });
    for (std::size_t i = 1; i < nbrs.size(); ++i)
      if (nbrs[i].node == nbrs[i - 1].node)
        fail(ErrorKind::InvalidData, "duplicate edge in graph");
  }
}

std::size_t AttributedGraph::num_edges() const {
  std::size_t total = 0;
  for (const auto& nbrs : adj_) total += nbrs.size();
  return total / 2;
}

std::optional<NodeId> AttributedGraph::find(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

double AttributedGraph::weight(NodeId a, NodeId b) const {
  const auto& nbrs = adj_[a];
  const auto it = std::lower_bound(nbrs.begin(), nbrs.end(), b,
                                   [](const Neighbor& n, NodeId id) { return n.node < id; });
  return (it != nbrs.end() && it->node == b) ? it->weight : 0.0;
}

std::map<std::string, double> edge_weights(const NewsRecord& record) {
  auto field_mass = [&](const ScoreMap& scores) {
    double z = 0.0;
    for (const auto& e : record.elements) {
      const auto it = scores.find(e);
      if (it != scores.end()) z += it->second;
    }
    return z;
  };
  const double z_title = field_mass(record.title_scores);
  const double z_body = field_mass(record.body_scores);
  std::map<std::string, double> out;
  for (const auto& e : record.elements) {
    double w = 0.0;
    if (z_title > 0.0) {
      const auto it = record.title_scores.find(e);
      if (it != record.title_scores.end()) w += it->second / z_title;
    }
    if (z_body > 0.0) {
      const auto it = record.body_scores.find(e);
      if (it != record.body_scores.end()) w += it->second / z_body;
    }
    if (w > 0.0) out.emplace(e, w);
  }
  return out;
}

AttributedGraph build_network(const std::vector<NewsRecord>& records) {
  std::vector<std::map<std::string, double>> weights;
  weights.reserve(records.size());
  std::set<std::string> element_names;
  for (const auto& r : records) {
    weights.push_back(edge_weights(r));
    for (const auto& [e, w] : weights.back()) element_names.insert(element_feature(e));
  }
  AttributedGraph g;
  std::vector<NodeId> news_ids;
  for (const auto& r : records) news_ids.push_back(g.add_node(r.id, NodeKind::News, r.features));
  for (const auto& name : element_names) g.add_node(name, NodeKind::Element, FeatureBag{name});
  for (std::size_t k = 0; k < records.size(); ++k)
    for (const auto& [e, w] : weights[k]) g.add_edge(news_ids[k], *g.find(element_feature(e)), w);
  g.finalize();
  return g;
}

AttributedGraph prune(const AttributedGraph& graph) {
  const std::size_t n = graph.size();
  std::vector<std::size_t> degree(n);
  std::vector<bool> removed(n, false);
  std::deque<NodeId> queue;
  for (NodeId v = 0; v < n; ++v) {
    degree[v] = graph.degree(v);
    if (degree[v] <= 1) {
      removed[v] = true;
      queue.push_back(v);
    }
  }
  while (!queue.empty()) {
    const NodeId v = queue.front();
    queue.pop_front();
    for (const auto& nb : graph.neighbors(v)) {
      if (removed[nb.node]) continue;
      if (--degree[nb.node] <= 1) {
        removed[nb.node] = true;
        queue.push_back(nb.node);
      }
    }
  }
  if (std::all_of(removed.begin(), removed.end(), [](bool r) { return r; }))
    fail(ErrorKind::InvalidData,
         "pruning removed every node (" + std::to_string(n) + " nodes, " +
             std::to_string(graph.num_edges()) + " edges): the network is too sparse");

  AttributedGraph out;
  out.detached_news = graph.detached_news;
  std::vector<NodeId> remap(n, 0);
  for (NodeId v = 0; v < n; ++v) {
    if (removed[v]) {
      if (graph.kind(v) == NodeKind::News) out.detached_news[graph.name(v)] = graph.features(v);
      continue;
    }
    remap[v] = out.add_node(graph.name(v), graph.kind(v), graph.features(v));
  }
  for (NodeId v = 0; v < n; ++v) {
    if (removed[v]) continue;
    for (const auto& nb : graph.neighbors(v))
      if (!removed[nb.node] && v < nb.node) out.add_edge(remap[v], remap[nb.node], nb.weight);
  }
  out.finalize();
  return out;
}

void write_graph(const std::filesystem::path& edges_tsv, const std::filesystem::path& nodes_jsonl,
                 const AttributedGraph& graph) {
  std::ofstream edges(edges_tsv, std::ios::binary);
  std::ofstream nodes(nodes_jsonl, std::ios::binary);
  if (!edges || !nodes) fail(ErrorKind::Io, "cannot write graph files");
  for (NodeId v = 0; v < graph.size(); ++v)
    for (const auto& nb : graph.neighbors(v))
      if (v < nb.node)
        edges << graph.name(v) << '\t' << graph.name(nb.node) << '\t' << format_double(nb.weight)
              << '\n';
  auto emit = [&](const std::string& id, NodeKind kind, const FeatureBag& f, bool detached) {
    nlohmann::ordered_json j;
    j["id"] = id;
    j["kind"] = kind == NodeKind::News ? "news" : "element";
    j["features"] = std::vector<std::string>(f.begin(), f.end());
    if (detached) j["detached"] = true;
    nodes << j.dump() << '\n';
  };
  for (NodeId v = 0; v < graph.size(); ++v) emit(graph.name(v), graph.kind(v), graph.features(v), false);
  for (const auto& [id, bag] : graph.detached_news) emit(id, NodeKind::News, bag, true);
}

AttributedGraph read_graph(const std::filesystem::path& edges_tsv,
                           const std::filesystem::path& nodes_jsonl) {
  std::ifstream nodes(nodes_jsonl);
  if (!nodes) fail(ErrorKind::MissingArtifact, "cannot open " + nodes_jsonl.string());
  std::ifstream edges(edges_tsv);
  if (!edges) fail(ErrorKind::MissingArtifact, "cannot open " + edges_tsv.string());
  AttributedGraph g;
  std::string line;
  while (std::getline(nodes, line)) {
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto kind_text = j.at("kind").get<std::string>();
      if (kind_text != "news" && kind_text != "element")
        fail(ErrorKind::InvalidData, "unknown node kind '" + kind_text + "'");
      const auto kind = kind_text == "news" ? NodeKind::News : NodeKind::Element;
      const auto f = j.at("features").get<std::vector<std::string>>();
      FeatureBag bag(f.begin(), f.end());
      const auto id = j.at("id").get<std::string>();
      if (j.value("detached", false))
        g.detached_news[id] = std::move(bag);
      else
        g.add_node(id, kind, std::move(bag));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::InvalidData, std::string("malformed node record: ") + e.what());
    }
  }
  while (std::getline(edges, line)) {
    if (trim(line).empty()) continue;
    const auto cols = split(line, '\t');
    if (cols.size() != 3) fail(ErrorKind::InvalidData, "malformed edge line: " + line);
    const auto a = g.find(cols[0]);
    const auto b = g.find(cols[1]);
    if (!a || !b) fail(ErrorKind::InvalidData, "edge references unknown node: " + line);
    g.add_edge(*a, *b, parse_double(cols[2]));
  }
  g.finalize();
  return g;
}

}  // namespace newsvec

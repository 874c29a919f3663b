#include "newsvec/subnode.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

namespace newsvec {

void TrainConfig::validate() const {
  require(dim >= 1, "embedding dimension must be at least 1");
  require(window >= 1, "context window must be at least 1");
  require(epochs >= 1, "epochs must be at least 1");
  require(learning_rate > 0.0, "learning rate must be positive");
  require(min_learning_rate >= 0.0 && min_learning_rate <= learning_rate,
          "minimum learning rate must lie in [0, learning_rate]");
  require(noise_exponent >= 0.0, "noise exponent must be non-negative");
}

FeatureBag DecomposedWalks::bag_at(std::size_t walk, std::size_t pos) const {
  FeatureBag bag;
  for (auto f : node_features[walks.at(walk).at(pos)]) bag.insert(features[f]);
  return bag;
}

DecomposedWalks decompose(const std::vector<WalkSequence>& walks, const AttributedGraph& graph) {
  DecomposedWalks out;
  std::set<std::string> all;
  for (NodeId v = 0; v < graph.size(); ++v) {
    const auto& bag = graph.features(v);
    if (graph.kind(v) == NodeKind::News) {
      if (bag.empty())
        fail(ErrorKind::InvalidData, "news node '" + graph.name(v) + "' has an empty feature bag");
      all.insert(bag.begin(), bag.end());
    } else {
      all.insert(graph.name(v));
    }
  }
  out.features.assign(all.begin(), all.end());
  std::unordered_map<std::string, std::uint32_t> index;
  for (std::uint32_t i = 0; i < out.features.size(); ++i) index.emplace(out.features[i], i);

  out.node_features.resize(graph.size());
  for (NodeId v = 0; v < graph.size(); ++v) {
    out.node_kinds.push_back(graph.kind(v));
    out.node_names.push_back(graph.name(v));
    if (graph.kind(v) == NodeKind::News) {
      for (const auto& f : graph.features(v)) out.node_features[v].push_back(index.at(f));
    } else {
      out.node_features[v].push_back(index.at(graph.name(v)));
    }
  }
  for (const auto& w : walks)
    for (NodeId v : w)
      if (v >= graph.size()) fail(ErrorKind::InvalidData, "walk references a node outside the graph");
  out.walks = walks;
  return out;
}

EmbeddingTable::EmbeddingTable(std::vector<std::string> features, std::size_t dim)
    : dim_(dim), features_(std::move(features)), input_(features_.size() * dim, 0.0) {
  for (std::size_t i = 0; i < features_.size(); ++i)
    if (!index_.emplace(features_[i], i).second)
      fail(ErrorKind::InvalidData, "duplicate feature '" + features_[i] + "' in embedding table");
}

std::int64_t EmbeddingTable::index_of(const std::string& feature) const {
  const auto it = index_.find(feature);
  return it == index_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

std::span<const double> EmbeddingTable::vector(const std::string& feature) const {
  const auto i = index_of(feature);
  if (i < 0) fail(ErrorKind::InvalidArgument, "feature '" + feature + "' is out of vocabulary");
  return input(static_cast<std::size_t>(i));
}

void EmbeddingTable::save_text(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << features_.size() << ' ' << dim_ << '\n';
  for (std::size_t i = 0; i < features_.size(); ++i) {
    out << features_[i];
    for (double v : input(i)) out << ' ' << format_double(v);
    out << '\n';
  }
}

void EmbeddingTable::save_binary(const std::filesystem::path& path) const {
  static_assert(std::endian::native == std::endian::little, "binary format assumes little endian");
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << features_.size() << ' ' << dim_ << '\n';
  std::vector<float> row(dim_);
  for (std::size_t i = 0; i < features_.size(); ++i) {
    out << features_[i] << ' ';
    const auto src = input(i);
    for (std::size_t k = 0; k < dim_; ++k) row[k] = static_cast<float>(src[k]);
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(dim_ * sizeof(float)));
    out << '\n';
  }
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::MissingArtifact, "cannot open embeddings " + path.string());
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::size_t vocab = 0, dim = 0;
  if (!(hs >> vocab >> dim) || dim == 0)
    fail(ErrorKind::InvalidData, "bad embedding header in " + path.string());

  // Text rows are all printable; a binary row carries raw float bytes. Peek at
  // the first row to decide.
  const auto body_start = in.tellg();
  std::string first;
  in >> first;
  in.get();
  std::vector<char> probe(dim * sizeof(float));
  in.read(probe.data(), static_cast<std::streamsize>(probe.size()));
  bool binary = false;
  if (in.gcount() == static_cast<std::streamsize>(probe.size()) && in.peek() == '\n') {
    binary = std::any_of(probe.begin(), probe.end(), [](char c) {
      const auto u = static_cast<unsigned char>(c);
      return u < 0x20 || u >= 0x7f;
    });
  }
  in.clear();
  in.seekg(body_start);

  std::vector<std::string> names;
  std::vector<double> values;
  values.reserve(vocab * dim);
  for (std::size_t i = 0; i < vocab; ++i) {
    std::string name;
    if (!(in >> name)) fail(ErrorKind::InvalidData, "truncated embedding file " + path.string());
    if (binary) {
      in.get();
      std::vector<float> row(dim);
      in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(dim * sizeof(float)));
      if (in.gcount() != static_cast<std::streamsize>(dim * sizeof(float)) || in.get() != '\n')
        fail(ErrorKind::InvalidData, "truncated binary embedding row for '" + name + "'");
      values.insert(values.end(), row.begin(), row.end());
    } else {
      std::string tok;
      for (std::size_t k = 0; k < dim; ++k) {
        if (!(in >> tok)) fail(ErrorKind::InvalidData, "truncated embedding row for '" + name + "'");
        values.push_back(parse_double(tok));
      }
    }
    names.push_back(std::move(name));
  }
  EmbeddingTable table(std::move(names), dim);
  table.input_ = std::move(values);
  return table;
}

// Kernel ----------------------------------------------------------------------

namespace {

/// log(1 + exp(x)) without overflow.
double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

double sgns_update(std::span<const double> h, std::span<double> out, double label, double lr,
                   std::span<double> grad_h) {
  const double f = dot(h, out);
  const double g = (label - sigmoid(f)) * lr;
  for (std::size_t i = 0; i < h.size(); ++i) grad_h[i] += g * out[i];
  for (std::size_t i = 0; i < h.size(); ++i) out[i] += g * h[i];
  return label > 0.5 ? softplus(-f) : softplus(f);
}

double sgns_loss(std::span<const double> h, std::span<const double> positive,
                 const std::vector<std::span<const double>>& noise) {
  double loss = softplus(-dot(h, positive));
  for (const auto& n : noise) loss += softplus(dot(h, n));
  return loss;
}

SgnsGradient sgns_gradients(std::span<const double> h, std::span<const double> positive,
                            const std::vector<std::span<const double>>& noise) {
  const std::size_t d = h.size();
  std::vector<double> ascent(d, 0.0);
  SgnsGradient g;
  std::vector<double> pos(positive.begin(), positive.end());
  sgns_update(h, pos, 1.0, 1.0, ascent);
  g.d_positive.resize(d);
  for (std::size_t i = 0; i < d; ++i) g.d_positive[i] = positive[i] - pos[i];
  for (const auto& n : noise) {
    std::vector<double> copy(n.begin(), n.end());
    sgns_update(h, copy, 0.0, 1.0, ascent);
    std::vector<double> d_n(d);
    for (std::size_t i = 0; i < d; ++i) d_n[i] = n[i] - copy[i];
    g.d_noise.push_back(std::move(d_n));
  }
  g.d_h.resize(d);
  for (std::size_t i = 0; i < d; ++i) g.d_h[i] = -ascent[i];
  return g;
}

// Training --------------------------------------------------------------------

namespace {

struct TrainState {
  const DecomposedWalks& data;
  const TrainConfig& config;
  EmbeddingTable& table;
  const AliasTable* noise;
  std::size_t total_steps;
  std::atomic<std::size_t> done{0};
};

bool is_center(const TrainState& st, NodeId v) {
  return st.config.symmetric || st.data.node_kinds[v] == NodeKind::News;
}

/// Trains over walks [begin, end); returns (loss sum, pair count).
std::pair<double, std::size_t> train_walks(TrainState& st, std::size_t begin, std::size_t end,
                                           Rng& rng, std::size_t epoch) {
  const auto& cfg = st.config;
  const std::size_t d = cfg.dim;
  std::vector<double> h(d), grad(d);
  double loss_sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t w = begin; w < end; ++w) {
    const auto& walk = st.data.walks[w];
    for (std::size_t s = 0; s < walk.size(); ++s) {
      const NodeId center = walk[s];
      if (!is_center(st, center)) continue;
      const std::size_t step = st.done.fetch_add(1, std::memory_order_relaxed);
      const double progress =
          static_cast<double>(step) / static_cast<double>(std::max<std::size_t>(1, st.total_steps));
      const double lr = std::max(cfg.min_learning_rate,
                                 cfg.learning_rate - (cfg.learning_rate - cfg.min_learning_rate) * progress);
      const auto& bag = st.data.node_features[center];
      const double coef = cfg.normalize_gradient ? 1.0 / static_cast<double>(bag.size()) : 1.0;
      const std::size_t lo = s >= cfg.window ? s - cfg.window : 0;
      const std::size_t hi = std::min(walk.size() - 1, s + cfg.window);
      for (std::size_t j = lo; j <= hi; ++j) {
        if (j == s) continue;
        const NodeId context = walk[j];
        std::fill(h.begin(), h.end(), 0.0);
        for (auto f : bag) {
          const auto v = st.table.input(f);
          for (std::size_t i = 0; i < d; ++i) h[i] += v[i];
        }
        std::fill(grad.begin(), grad.end(), 0.0);
        double loss = sgns_update(h, st.table.output_row(context), 1.0, lr, grad);
        for (std::size_t k = 0; k < cfg.negatives; ++k) {
          const auto neg = static_cast<NodeId>(st.noise->sample(rng));
          if (neg == context || neg == center) continue;
          loss += sgns_update(h, st.table.output_row(neg), 0.0, lr, grad);
        }
        for (double gv : grad)
          if (!std::isfinite(gv))
            fail(ErrorKind::Numerical,
                 "non-finite gradient at epoch " + std::to_string(epoch) + ", step " +
                     std::to_string(step) + ", center '" + st.data.node_names[center] +
                     "', context '" + st.data.node_names[context] + "', lr " + format_double(lr));
        if (!std::isfinite(loss))
          fail(ErrorKind::Numerical, "non-finite loss at epoch " + std::to_string(epoch) +
                                         ", step " + std::to_string(step));
        for (auto f : bag) {
          auto v = st.table.input(f);
          for (std::size_t i = 0; i < d; ++i) v[i] += coef * grad[i];
        }
        loss_sum += loss;
        ++pairs;
      }
    }
  }
  return {loss_sum, pairs};
}

}  // namespace

TrainResult train(const DecomposedWalks& data, const TrainConfig& config) {
  config.validate();
  const std::size_t num_nodes = data.node_features.size();
  if (data.walks.empty() || num_nodes == 0) fail(ErrorKind::InvalidArgument, "no walks to train on");

  TrainResult result;
  auto& table = result.table;
  table = EmbeddingTable(data.features, config.dim);
  Rng init(derive_seed(config.seed, 0x1417));
  const double half = 0.5 / static_cast<double>(config.dim);
  for (std::size_t i = 0; i < table.vocab_size(); ++i)
    for (double& v : table.input(i)) v = init.uniform(-half, half);
  table.output_nodes = data.node_names;
  table.output.assign(num_nodes * config.dim, 0.0);

  std::vector<double> freq(num_nodes, 0.0);
  std::size_t centers = 0;
  for (const auto& w : data.walks)
    for (NodeId v : w) {
      freq[v] += 1.0;
      if (config.symmetric || data.node_kinds[v] == NodeKind::News) ++centers;
    }
  for (double& f : freq) f = f > 0.0 ? std::pow(f, config.noise_exponent) : 0.0;
  const AliasTable noise(freq);

  TrainState st{data, config, table, &noise, centers * config.epochs};
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double loss = 0.0;
    std::size_t pairs = 0;
    const std::size_t threads = std::max<std::size_t>(1, std::min(config.threads, data.walks.size()));
    if (threads == 1) {
      Rng rng(derive_seed(config.seed, 0xE90C, epoch));
      std::tie(loss, pairs) = train_walks(st, 0, data.walks.size(), rng, epoch);
    } else {
      std::vector<std::pair<double, std::size_t>> partial(threads);
      std::vector<std::exception_ptr> errors(threads);
      std::vector<std::thread> pool;
      const std::size_t chunk = (data.walks.size() + threads - 1) / threads;
      for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
          try {
            Rng rng(derive_seed(config.seed, 0xE90C + t, epoch));
            partial[t] = train_walks(st, t * chunk, std::min(data.walks.size(), (t + 1) * chunk),
                                     rng, epoch);
          } catch (...) {
            errors[t] = std::current_exception();
          }
        });
      }
      for (auto& th : pool) th.join();
      for (auto& e : errors)
        if (e) std::rethrow_exception(e);
      for (const auto& [l, p] : partial) {
        loss += l;
        pairs += p;
      }
    }
    result.history.epoch_loss.push_back(pairs ? loss / static_cast<double>(pairs) : 0.0);
  }
  result.history.steps = st.done.load();
  return result;
}

// Composition -----------------------------------------------------------------

NewsVector embed_news(const FeatureBag& bag, const EmbeddingTable& table) {
  NewsVector out;
  out.values.assign(table.dim(), 0.0);
  std::size_t used = 0;
  for (const auto& f : bag) {
    const auto i = table.index_of(f);
    if (i < 0) {
      ++out.skipped;
      continue;
    }
    const auto v = table.input(static_cast<std::size_t>(i));
    for (std::size_t k = 0; k < v.size(); ++k) out.values[k] += v[k];
    ++used;
  }
  if (used == 0)
    fail(ErrorKind::InvalidData,
         "every feature of the bag is out of vocabulary (" + std::to_string(bag.size()) + " features)");
  return out;
}

FeatureBag FeatureExtractor::bag(const Document& doc) const {
  const auto tokens = tokenize_document(doc, tokenizer);
  std::set<std::string> elements;
  for (const auto& c : tokens.candidates)
    if (vocabulary.count(c)) elements.insert(c);
  return extract_features(doc, tokens, elements, features, lexicon ? &*lexicon : nullptr);
}

NewsVector infer_unseen(const Document& doc, const EmbeddingTable& table,
                        const FeatureExtractor& extractor) {
  return embed_news(extractor.bag(doc), table);
}

void write_news_vectors(const std::filesystem::path& path,
                        const std::vector<std::pair<std::string, std::vector<double>>>& vectors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  for (const auto& [id, v] : vectors) {
    out << id;
    for (double x : v) out << ' ' << format_double(x);
    out << '\n';
  }
}

std::vector<std::pair<std::string, std::vector<double>>> read_news_vectors(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::MissingArtifact, "cannot open news vectors " + path.string());
  std::vector<std::pair<std::string, std::vector<double>>> out;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string id, tok;
    if (!(ss >> id)) continue;
    std::vector<double> v;
    while (ss >> tok) v.push_back(parse_double(tok));
    if (!out.empty() && v.size() != out.front().second.size())
      fail(ErrorKind::InvalidData, "news vector for '" + id + "' has inconsistent dimension");
    out.emplace_back(std::move(id), std::move(v));
  }
  return out;
}

}  // namespace newsvec

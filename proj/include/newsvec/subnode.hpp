#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "newsvec/corpus.hpp"
#include "newsvec/graph.hpp"
#include "newsvec/walk.hpp"

namespace newsvec {

struct TrainConfig {
  std::size_t dim = 128;
  std::size_t window = 10;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  double learning_rate = 0.025;
  double min_learning_rate = 1e-4;
  /// Exponent applied to node frequencies in the noise distribution.
  double noise_exponent = 1.0;
  std::uint64_t seed = 1;
  /// Also train element-node centers (the default uses news centers only).
  bool symmetric = false;
  /// Scale the feature gradient by 1/|bag| instead of 1.
  bool normalize_gradient = false;
  /// >1 enables unsynchronized parallel updates (not bit-reproducible).
  std::size_t threads = 1;

  void validate() const;
};

/// Walks rewritten as feature bags. Every graph node maps to a sorted list of
/// feature indices: a news node to its attributes, an element node to its
/// own `elem:` feature.
struct DecomposedWalks {
  std::vector<std::string> features;  ///< sorted feature identifiers
  std::vector<std::vector<std::uint32_t>> node_features;
  std::vector<NodeKind> node_kinds;
  std::vector<std::string> node_names;
  std::vector<WalkSequence> walks;

  FeatureBag bag_at(std::size_t walk, std::size_t pos) const;
};

DecomposedWalks decompose(const std::vector<WalkSequence>& walks, const AttributedGraph& graph);

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::vector<std::string> features, std::size_t dim);

  std::size_t dim() const { return dim_; }
  std::size_t vocab_size() const { return features_.size(); }
  const std::vector<std::string>& features() const { return features_; }
  /// Index of a feature, or -1 when out of vocabulary.
  std::int64_t index_of(const std::string& feature) const;
  bool contains(const std::string& feature) const { return index_of(feature) >= 0; }

  std::span<double> input(std::size_t i) { return {input_.data() + i * dim_, dim_}; }
  std::span<const double> input(std::size_t i) const { return {input_.data() + i * dim_, dim_}; }
  std::span<const double> vector(const std::string& feature) const;

  /// Output (context) vectors, one per graph node.
  std::vector<std::string> output_nodes;
  std::vector<double> output;
  std::span<double> output_row(std::size_t node) { return {output.data() + node * dim_, dim_}; }

  void save_text(const std::filesystem::path& path) const;
  /// Same header line, then `feature ` + dim little-endian float32 + '\n'.
  void save_binary(const std::filesystem::path& path) const;
  static EmbeddingTable load(const std::filesystem::path& path);

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> features_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> input_;
};

struct TrainHistory {
  std::vector<double> epoch_loss;  ///< mean loss per (center, context) pair
  std::size_t steps = 0;
};

struct TrainResult {
  EmbeddingTable table;
  TrainHistory history;
};

TrainResult train(const DecomposedWalks& data, const TrainConfig& config);

// Skip-gram negative-sampling kernel ----------------------------------------

/// One logistic sub-problem against output vector `out` with target `label`
/// (1 observed context, 0 noise). Adds lr * (-dJ/dh) into `grad_h`, moves
/// `out` by lr * (-dJ/dout), and returns this term's loss.
double sgns_update(std::span<const double> h, std::span<double> out, double label, double lr,
                   std::span<double> grad_h);

double sgns_loss(std::span<const double> h, std::span<const double> positive,
                 const std::vector<std::span<const double>>& noise);

struct SgnsGradient {
  std::vector<double> d_h;
  std::vector<double> d_positive;
  std::vector<std::vector<double>> d_noise;
};

/// Analytic gradient of sgns_loss, produced by running sgns_update on copies
/// with unit learning rate. Noise vectors must be distinct objects.
SgnsGradient sgns_gradients(std::span<const double> h, std::span<const double> positive,
                            const std::vector<std::span<const double>>& noise);

// Composition -----------------------------------------------------------------

struct NewsVector {
  std::vector<double> values;
  std::size_t skipped = 0;  ///< out-of-vocabulary features
};

/// Unweighted sum of feature vectors in sorted feature order.
NewsVector embed_news(const FeatureBag& bag, const EmbeddingTable& table);

/// Everything needed to turn a raw document into a feature bag.
struct FeatureExtractor {
  TokenizerConfig tokenizer;
  std::set<std::string> vocabulary;
  FeatureConfig features;
  std::optional<SentimentLexicon> lexicon;

  FeatureBag bag(const Document& doc) const;
};

NewsVector infer_unseen(const Document& doc, const EmbeddingTable& table,
                        const FeatureExtractor& extractor);

void write_news_vectors(const std::filesystem::path& path,
                        const std::vector<std::pair<std::string, std::vector<double>>>& vectors);
std::vector<std::pair<std::string, std::vector<double>>> read_news_vectors(
    const std::filesystem::path& path);

}  // namespace newsvec

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "newsvec/corpus.hpp"
#include "newsvec/swarch.hpp"

namespace newsvec {

/// Synthetic news and market generator with known structure.
///
/// Documents are spread over consecutive weekdays, `docs_per_day` at a time.
/// Each day has a dominant topic (balanced across topics, shuffled); a
/// document belongs to it with probability `day_purity`, otherwise to a
/// uniformly drawn topic. Tokens come from the document's topic vocabulary
/// with probability `topic_share` and from the shared vocabulary otherwise,
/// both Zipf distributed.
struct SynthConfig {
  std::size_t topics = 2;
  std::size_t docs_per_topic = 80;
  std::size_t docs_per_day = 1;
  double day_purity = 1.0;
  std::size_t topic_vocab = 60;
  std::size_t shared_vocab = 200;
  std::size_t title_length = 6;
  std::size_t body_length = 40;
  double topic_share = 0.6;
  double zipf_exponent = 1.0;
  std::string start_date = "2020-01-06";

  /// Next-day drift = rho * drift_scale * sign(previous day's dominant topic),
  /// with even topics positive and odd topics negative.
  double rho = 0.0;
  double drift_scale = 0.01;
  SwarchParams market{0.0, 0.0, 1e-4, 0.1, 3.0, 0.98, 0.95};

  std::uint64_t seed = 1;

  void validate() const;
  std::size_t num_docs() const { return topics * docs_per_topic; }
  std::size_t num_days() const { return (num_docs() + docs_per_day - 1) / docs_per_day; }
};

struct SynthCorpus {
  std::vector<Document> docs;
  std::vector<int> topic;           ///< per document
  std::vector<Date> days;           ///< consecutive trading days
  std::vector<int> dominant_topic;  ///< per day, -1 when the day has no news
};

struct SynthMarket {
  ReturnSeries series;
  std::vector<int> regimes;  ///< true regime path, 1 = low, 2 = high
  std::vector<double> drift;
};

/// Deterministic given `config.seed`. Each document carries the label
/// `topic:<k>`.
SynthCorpus gen_corpus(const SynthConfig& config);
/// Simulates the regime process on the corpus' trading days. With rho = 0 the
/// returns do not depend on the news at all.
SynthMarket gen_market(const SynthConfig& config, const SynthCorpus& corpus);

/// Topic and shared word spellings, also used by tests.
std::string topic_word(std::size_t topic, std::size_t rank);
std::string shared_word(std::size_t rank);

/// Sentiment lexicon drawn from the shared vocabulary.
SentimentLexicon synth_lexicon(const SynthConfig& config);

/// Writes corpus.jsonl, topics.csv, returns.csv, true_regimes.csv,
/// positive.txt and negative.txt into `dir`.
void write_synth(const std::filesystem::path& dir, const SynthConfig& config,
                 const SynthCorpus& corpus, const SynthMarket& market);

}  // namespace newsvec

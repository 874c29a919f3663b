#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "newsvec/common.hpp"

namespace newsvec {

using TokenList = std::vector<std::string>;

/// One news article. `tokens_*` carry externally segmented text (for example
/// Chinese word segmentation); when present they are used verbatim.
struct Document {
  std::string id;
  std::string title;
  std::string body;
  Date date{};
  std::optional<TokenList> tokens_title;
  std::optional<TokenList> tokens_body;
  /// Part-of-speech tags aligned with the corresponding token lists.
  std::optional<TokenList> pos_title;
  std::optional<TokenList> pos_body;
  /// Free-form labels (for example a known topic); usable as features.
  std::vector<std::string> labels;
};

struct TokenizerConfig {
  bool lowercase = true;
  /// Strip ASCII punctuation from token edges; tokens that become empty are
  /// dropped.
  bool strip_punctuation = true;
  /// Tag prefixes accepted as element candidates when POS tags are present
  /// (nouns, verbs, named entities in both PTB and ICTCLAS style tag sets).
  std::vector<std::string> element_pos_prefixes{"n", "v", "N", "V"};
};

struct TokenizedDoc {
  std::string id;
  TokenList title;
  TokenList body;
  /// Tokens eligible to become elements. All tokens when no POS tags exist.
  std::set<std::string> candidates;
};

struct FieldTokens {
  TokenList title;
  TokenList body;
};

FieldTokens tokenize(const Document& doc, const TokenizerConfig& config = {});
TokenList tokenize_text(std::string_view text, const TokenizerConfig& config = {});
TokenizedDoc tokenize_document(const Document& doc, const TokenizerConfig& config = {});

using ScoreMap = std::map<std::string, double>;

/// Tf-idf scores per document, for the whole document and for each field.
///
/// Term frequencies use the token count of the scored text as denominator;
/// the document frequency is always counted over whole documents, so a field
/// score is the share of that field taken by the element times its corpus
/// idf.
struct TfidfTable {
  std::size_t num_docs = 0;
  std::unordered_map<std::string, std::size_t> doc_freq;
  std::vector<std::string> doc_ids;
  std::unordered_map<std::string, std::size_t> doc_index;
  std::vector<ScoreMap> full;
  std::vector<ScoreMap> title;
  std::vector<ScoreMap> body;
  /// Element candidates per document (copied from tokenization).
  std::vector<std::set<std::string>> candidates;

  std::size_t index_of(const std::string& doc_id) const;
  double idf(const std::string& element) const;
};

TfidfTable compute_tfidf(const std::vector<TokenizedDoc>& docs);
/// Single-field convenience: each token list is one document body.
TfidfTable compute_tfidf(const std::vector<TokenList>& bodies);

enum class RankMode { Corpus, Document };

/// Elements surviving the corpus-level cut: candidates whose maximum tf-idf
/// over documents ranks in the top `quantile` fraction, ties included.
std::set<std::string> select_element_vocabulary(const TfidfTable& table,
                                                double quantile);

std::set<std::string> extract_elements(const std::string& doc_id,
                                       const TfidfTable& table, double quantile,
                                       RankMode mode = RankMode::Corpus);
/// Corpus-mode extraction against a precomputed vocabulary.
std::set<std::string> extract_elements(const std::string& doc_id,
                                       const TfidfTable& table,
                                       const std::set<std::string>& vocabulary);

struct SentimentLexicon {
  std::unordered_set<std::string> positive;
  std::unordered_set<std::string> negative;

  static SentimentLexicon load(const std::filesystem::path& positive_path,
                               const std::filesystem::path& negative_path);
};

struct FeatureConfig {
  /// month / day / weekday
  bool time_features = true;
  bool sentiment = true;
  bool words_count = true;
  /// Emit `label:<x>` for each document label.
  bool label_features = false;
  /// Ascending bucket boundaries; bucket = number of boundaries <= count.
  std::vector<std::size_t> words_boundaries;

  /// Semantic features only (elements).
  static FeatureConfig semantic_only() {
    FeatureConfig c;
    c.time_features = c.sentiment = c.words_count = false;
    return c;
  }
};

/// Sorted, namespaced feature identifiers (`elem:…`, `month:…`, …).
using FeatureBag = std::set<std::string>;

inline std::string element_feature(const std::string& element) {
  return "elem:" + element;
}

FeatureBag extract_features(const Document& doc, const TokenizedDoc& tokens,
                            const std::set<std::string>& elements,
                            const FeatureConfig& config,
                            const SentimentLexicon* lexicon);

/// Quartile boundaries of per-document token counts.
std::vector<std::size_t> words_count_quartiles(const std::vector<TokenizedDoc>& docs);

/// Signed lexicon difference, bucketed into negative / neutral / positive.
std::string sentiment_bucket(const TokenizedDoc& tokens, const SentimentLexicon& lexicon);

// I/O -----------------------------------------------------------------------

Document document_from_json(const std::string& line);
std::string document_to_json(const Document& doc);
std::vector<Document> read_corpus(const std::filesystem::path& path);
void write_corpus(const std::filesystem::path& path, const std::vector<Document>& docs);
/// Rejects duplicate ids, empty titles and reserved `elem:` id prefixes.
void validate_corpus(const std::vector<Document>& docs);

/// `doc_id \t element \t score`, documents in table order, elements sorted.
void write_tfidf_tsv(const std::filesystem::path& path, const TfidfTable& table,
                     const std::vector<ScoreMap>& scores);

}  // namespace newsvec

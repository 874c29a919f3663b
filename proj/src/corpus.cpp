#include "newsvec/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

namespace newsvec {

namespace {

bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_ascii_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u < 128 && std::ispunct(u);
}

bool has_prefix(const std::string& s, const std::vector<std::string>& prefixes) {
  return std::any_of(prefixes.begin(), prefixes.end(),
                     [&](const std::string& p) { return s.rfind(p, 0) == 0; });
}

void add_candidates(const TokenList& tokens, const std::optional<TokenList>& tags,
                    const TokenizerConfig& config, const std::string& doc_id,
                    std::set<std::string>& out) {
  if (!tags) {
    out.insert(tokens.begin(), tokens.end());
    return;
  }
  if (tags->size() != tokens.size())
    fail(ErrorKind::InvalidData, "document '" + doc_id +
                                     "': pos tag count does not match token count");
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (has_prefix((*tags)[i], config.element_pos_prefixes)) out.insert(tokens[i]);
}

ScoreMap score_tokens(const TokenList& tokens,
                      const std::unordered_map<std::string, std::size_t>& doc_freq,
                      std::size_t num_docs) {
  ScoreMap scores;
  if (tokens.empty()) return scores;
  std::map<std::string, std::size_t> counts;
  for (const auto& t : tokens) ++counts[t];
  const double total = static_cast<double>(tokens.size());
  for (const auto& [term, n] : counts) {
    const double idf = std::log(static_cast<double>(num_docs) /
                                static_cast<double>(doc_freq.at(term)));
    scores.emplace(term, (static_cast<double>(n) / total) * idf);
  }
  return scores;
}

std::size_t cutoff_rank(double quantile, std::size_t n) {
  require(quantile > 0.0 && quantile <= 1.0, "quantile must lie in (0, 1]");
  const auto k = static_cast<std::size_t>(std::ceil(quantile * static_cast<double>(n) - 1e-9));
  return std::clamp<std::size_t>(k, 1, n);
}

/// Keys sorted descending; returns every item whose key reaches the key at
/// the cutoff rank.
std::set<std::string> top_fraction(std::vector<std::pair<double, std::string>> keyed,
                                   double quantile) {
  std::set<std::string> out;
  if (keyed.empty()) {
    cutoff_rank(quantile, 1);
    return out;
  }
  std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  const double threshold = keyed[cutoff_rank(quantile, keyed.size()) - 1].first;
  for (const auto& [key, name] : keyed) {
    if (key < threshold) break;
    out.insert(name);
  }
  return out;
}

}  // namespace

TokenList tokenize_text(std::string_view text, const TokenizerConfig& config) {
  TokenList out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_ascii_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_ascii_space(text[j])) ++j;
    if (j > i) {
      std::string tok(text.substr(i, j - i));
      if (config.strip_punctuation) {
        std::size_t b = 0, e = tok.size();
        while (b < e && is_ascii_punct(tok[b])) ++b;
        while (e > b && is_ascii_punct(tok[e - 1])) --e;
        tok = tok.substr(b, e - b);
      }
      if (config.lowercase)
        for (auto& c : tok)
          if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
      if (!tok.empty()) out.push_back(std::move(tok));
    }
    i = j;
  }
  return out;
}

FieldTokens tokenize(const Document& doc, const TokenizerConfig& config) {
  FieldTokens out;
  out.title = doc.tokens_title ? *doc.tokens_title : tokenize_text(doc.title, config);
  out.body = doc.tokens_body ? *doc.tokens_body : tokenize_text(doc.body, config);
  return out;
}

TokenizedDoc tokenize_document(const Document& doc, const TokenizerConfig& config) {
  auto fields = tokenize(doc, config);
  TokenizedDoc out{doc.id, std::move(fields.title), std::move(fields.body), {}};
  // Tags only make sense against supplied tokens; whitespace tokens never
  // carry them.
  add_candidates(out.title, doc.tokens_title ? doc.pos_title : std::nullopt, config,
                 doc.id, out.candidates);
  add_candidates(out.body, doc.tokens_body ? doc.pos_body : std::nullopt, config,
                 doc.id, out.candidates);
  return out;
}

std::size_t TfidfTable::index_of(const std::string& doc_id) const {
  const auto it = doc_index.find(doc_id);
  if (it == doc_index.end())
    fail(ErrorKind::InvalidArgument, "document '" + doc_id + "' is not in the tf-idf table");
  return it->second;
}

double TfidfTable::idf(const std::string& element) const {
  const auto it = doc_freq.find(element);
  if (it == doc_freq.end()) return 0.0;
  return std::log(static_cast<double>(num_docs) / static_cast<double>(it->second));
}

TfidfTable compute_tfidf(const std::vector<TokenizedDoc>& docs) {
  if (docs.empty()) fail(ErrorKind::InvalidArgument, "compute_tfidf: corpus is empty");
  TfidfTable table;
  table.num_docs = docs.size();
  std::vector<TokenList> full(docs.size());
  for (std::size_t k = 0; k < docs.size(); ++k) {
    const auto& d = docs[k];
    if (!table.doc_index.emplace(d.id, k).second)
      fail(ErrorKind::InvalidData, "duplicate document id '" + d.id + "'");
    table.doc_ids.push_back(d.id);
    full[k] = d.title;
    full[k].insert(full[k].end(), d.body.begin(), d.body.end());
    std::unordered_set<std::string> seen(full[k].begin(), full[k].end());
    for (const auto& t : seen) ++table.doc_freq[t];
  }
  table.full.reserve(docs.size());
  for (std::size_t k = 0; k < docs.size(); ++k) {
    table.full.push_back(score_tokens(full[k], table.doc_freq, table.num_docs));
    table.title.push_back(score_tokens(docs[k].title, table.doc_freq, table.num_docs));
    table.body.push_back(score_tokens(docs[k].body, table.doc_freq, table.num_docs));
    table.candidates.push_back(docs[k].candidates);
  }
  return table;
}

TfidfTable compute_tfidf(const std::vector<TokenList>& bodies) {
  std::vector<TokenizedDoc> docs;
  docs.reserve(bodies.size());
  for (std::size_t k = 0; k < bodies.size(); ++k) {
    TokenizedDoc d{"d" + std::to_string(k + 1), {}, bodies[k], {}};
    d.candidates.insert(bodies[k].begin(), bodies[k].end());
    docs.push_back(std::move(d));
  }
  return compute_tfidf(docs);
}

std::set<std::string> select_element_vocabulary(const TfidfTable& table, double quantile) {
  std::unordered_map<std::string, double> best;
  for (std::size_t k = 0; k < table.full.size(); ++k) {
    for (const auto& e : table.candidates[k]) {
      const auto it = table.full[k].find(e);
      if (it == table.full[k].end()) continue;
      auto [slot, inserted] = best.emplace(e, it->second);
      if (!inserted) slot->second = std::max(slot->second, it->second);
    }
  }
  std::vector<std::pair<double, std::string>> keyed;
  keyed.reserve(best.size());
  for (const auto& [e, s] : best) keyed.emplace_back(s, e);
  return top_fraction(std::move(keyed), quantile);
}

std::set<std::string> extract_elements(const std::string& doc_id, const TfidfTable& table,
                                       double quantile, RankMode mode) {
  const std::size_t k = table.index_of(doc_id);
  if (mode == RankMode::Corpus)
    return extract_elements(doc_id, table, select_element_vocabulary(table, quantile));
  std::vector<std::pair<double, std::string>> keyed;
  for (const auto& e : table.candidates[k]) {
    const auto it = table.full[k].find(e);
    if (it != table.full[k].end()) keyed.emplace_back(it->second, e);
  }
  return top_fraction(std::move(keyed), quantile);
}

std::set<std::string> extract_elements(const std::string& doc_id, const TfidfTable& table,
                                       const std::set<std::string>& vocabulary) {
  const std::size_t k = table.index_of(doc_id);
  std::set<std::string> out;
  for (const auto& e : table.candidates[k])
    if (vocabulary.count(e)) out.insert(e);
  return out;
}

SentimentLexicon SentimentLexicon::load(const std::filesystem::path& positive_path,
                                        const std::filesystem::path& negative_path) {
  auto read = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) fail(ErrorKind::MissingArtifact, "cannot open lexicon " + p.string());
    std::unordered_set<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
      auto w = trim(line);
      if (!w.empty()) words.insert(std::move(w));
    }
    return words;
  };
  return {read(positive_path), read(negative_path)};
}

std::string sentiment_bucket(const TokenizedDoc& tokens, const SentimentLexicon& lexicon) {
  long score = 0;
  for (const auto* field : {&tokens.title, &tokens.body})
    for (const auto& t : *field) {
      if (lexicon.positive.count(t)) ++score;
      if (lexicon.negative.count(t)) --score;
    }
  return score > 0 ? "positive" : score < 0 ? "negative" : "neutral";
}

FeatureBag extract_features(const Document& doc, const TokenizedDoc& tokens,
                            const std::set<std::string>& elements,
                            const FeatureConfig& config, const SentimentLexicon* lexicon) {
  if (!doc.date.ok()) fail(ErrorKind::InvalidData, "document '" + doc.id + "' has no valid date");
  FeatureBag bag;
  for (const auto& e : elements) bag.insert(element_feature(e));
  if (config.time_features) {
    bag.insert("month:" + std::to_string(static_cast<unsigned>(doc.date.month())));
    bag.insert("day:" + std::to_string(static_cast<unsigned>(doc.date.day())));
    bag.insert("weekday:" + std::to_string(iso_weekday(doc.date)));
  }
  if (config.sentiment) {
    if (!lexicon)
      fail(ErrorKind::InvalidArgument, "sentiment features enabled but no lexicon supplied");
    bag.insert("sentiment:" + sentiment_bucket(tokens, *lexicon));
  }
  if (config.words_count) {
    const std::size_t n = tokens.title.size() + tokens.body.size();
    const auto& b = config.words_boundaries;
    const auto bucket = std::upper_bound(b.begin(), b.end(), n) - b.begin();
    bag.insert("words:" + std::to_string(bucket));
  }
  if (config.label_features)
    for (const auto& l : doc.labels) bag.insert("label:" + l);
  if (bag.empty())
    fail(ErrorKind::InvalidData, "document '" + doc.id + "' has an empty feature bag");
  return bag;
}

std::vector<std::size_t> words_count_quartiles(const std::vector<TokenizedDoc>& docs) {
  if (docs.empty()) return {};
  std::vector<std::size_t> counts;
  counts.reserve(docs.size());
  for (const auto& d : docs) counts.push_back(d.title.size() + d.body.size());
  std::sort(counts.begin(), counts.end());
  std::vector<std::size_t> out;
  for (int q = 1; q <= 3; ++q) {
    const std::size_t v = counts[(counts.size() - 1) * q / 4];
    if (out.empty() || out.back() < v) out.push_back(v);
  }
  return out;
}

// I/O -----------------------------------------------------------------------

namespace {

std::optional<TokenList> optional_list(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<TokenList>();
}

}  // namespace

Document document_from_json(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidData, std::string("corpus line is not valid JSON: ") + e.what());
  }
  Document d;
  try {
    d.id = j.at("id").get<std::string>();
    d.title = j.at("title").get<std::string>();
    d.body = j.value("body", std::string{});
    d.date = parse_date(j.at("date").get<std::string>());
    d.tokens_title = optional_list(j, "tokens_title");
    d.tokens_body = optional_list(j, "tokens_body");
    if (j.contains("pos_tags") && j["pos_tags"].is_object()) {
      d.pos_title = optional_list(j["pos_tags"], "title");
      d.pos_body = optional_list(j["pos_tags"], "body");
    }
    if (j.contains("labels")) d.labels = j["labels"].get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidData, std::string("malformed corpus record: ") + e.what());
  }
  return d;
}

std::string document_to_json(const Document& d) {
  nlohmann::ordered_json j;
  j["id"] = d.id;
  j["title"] = d.title;
  j["body"] = d.body;
  j["date"] = format_date(d.date);
  if (d.tokens_title) j["tokens_title"] = *d.tokens_title;
  if (d.tokens_body) j["tokens_body"] = *d.tokens_body;
  if (d.pos_title || d.pos_body) {
    nlohmann::ordered_json tags = nlohmann::ordered_json::object();
    if (d.pos_title) tags["title"] = *d.pos_title;
    if (d.pos_body) tags["body"] = *d.pos_body;
    j["pos_tags"] = tags;
  }
  if (!d.labels.empty()) j["labels"] = d.labels;
  return j.dump();
}

std::vector<Document> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::MissingArtifact, "cannot open corpus " + path.string());
  std::vector<Document> docs;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    docs.push_back(document_from_json(line));
  }
  validate_corpus(docs);
  return docs;
}

void write_corpus(const std::filesystem::path& path, const std::vector<Document>& docs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  for (const auto& d : docs) out << document_to_json(d) << '\n';
}

void validate_corpus(const std::vector<Document>& docs) {
  std::unordered_set<std::string> ids;
  for (const auto& d : docs) {
    if (d.id.empty()) fail(ErrorKind::InvalidData, "document with empty id");
    if (d.id.rfind("elem:", 0) == 0)
      fail(ErrorKind::InvalidData, "document id '" + d.id + "' uses the reserved elem: prefix");
    if (!ids.insert(d.id).second)
      fail(ErrorKind::InvalidData, "duplicate document id '" + d.id + "'");
    if (d.title.empty() && !(d.tokens_title && !d.tokens_title->empty()))
      fail(ErrorKind::InvalidData, "document '" + d.id + "' has an empty title");
    if (!d.date.ok()) fail(ErrorKind::InvalidData, "document '" + d.id + "' has an invalid date");
  }
}

void write_tfidf_tsv(const std::filesystem::path& path, const TfidfTable& table,
                     const std::vector<ScoreMap>& scores) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  for (std::size_t k = 0; k < scores.size(); ++k)
    for (const auto& [e, s] : scores[k])
      out << table.doc_ids[k] << '\t' << e << '\t' << format_double(s) << '\n';
}

}  // namespace newsvec

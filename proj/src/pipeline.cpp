#include "newsvec/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <boost/math/special_functions/beta.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include "newsvec/eval.hpp"
#include "newsvec/graph.hpp"

namespace newsvec {

using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

const std::vector<std::pair<std::string, std::string>>& default_settings() {
  static const std::vector<std::pair<std::string, std::string>> d = {
      {"global.seed", "1"},
      {"global.threads", "1"},
      {"paths.corpus", "data/corpus.jsonl"},
      {"paths.returns", "data/returns.csv"},
      {"paths.lexicon_positive", "data/positive.txt"},
      {"paths.lexicon_negative", "data/negative.txt"},
      {"paths.artifacts", "artifacts"},
      {"paths.synth_dir", "data"},
      {"tfidf.quantile", "0.2"},
      {"tfidf.rank_mode", "corpus"},
      {"tfidf.graph_fraction", "0.5"},
      {"tfidf.lowercase", "true"},
      {"tfidf.strip_punctuation", "true"},
      {"features.time", "true"},
      {"features.sentiment", "true"},
      {"features.words_count", "true"},
      {"features.labels", "false"},
      {"walk.length", "100"},
      {"walk.walks_per_node", "10"},
      {"walk.p", "1"},
      {"walk.q", "1"},
      {"walk.alias", "false"},
      {"embed.dim", "128"},
      {"embed.window", "10"},
      {"embed.negatives", "5"},
      {"embed.epochs", "5"},
      {"embed.lr", "0.025"},
      {"embed.min_lr", "0.0001"},
      {"embed.noise_exponent", "1"},
      {"embed.symmetric", "false"},
      {"embed.normalize_gradient", "false"},
      {"embed.format", "text"},
      {"swarch.starts", "8"},
      {"swarch.tolerance", "1e-8"},
      {"swarch.max_iterations", "5000"},
      {"swarch.threshold", "0.5"},
      {"samples.task", "movement"},
      {"samples.window", "20"},
      {"samples.stride", "1"},
      {"samples.market_lags", "1"},
      {"samples.up", "0.0033"},
      {"samples.down", "-0.0029"},
      {"samples.train_fraction", "0.5"},
      {"samples.val_fraction", "0.25"},
      {"predictor.attention_size", "64"},
      {"predictor.news_hidden", "64"},
      {"predictor.market_hidden", "64"},
      {"predictor.use_news", "true"},
      {"predictor.use_market", "true"},
      {"predictor.mask_empty_days", "false"},
      {"predictor.l2", "0.0001"},
      {"predictor.lr", "0.001"},
      {"predictor.beta1", "0.9"},
      {"predictor.beta2", "0.999"},
      {"predictor.epsilon", "1e-8"},
      {"predictor.batch_size", "32"},
      {"predictor.epochs", "50"},
      {"predictor.patience", "10"},
      {"predictor.class_weights", "false"},
      {"eval.lookahead", "5"},
      {"eval.attention_range", "test"},
      {"synth.topics", "2"},
      {"synth.docs_per_topic", "200"},
      {"synth.docs_per_day", "1"},
      {"synth.day_purity", "1"},
      {"synth.topic_vocab", "60"},
      {"synth.shared_vocab", "200"},
      {"synth.title_length", "6"},
      {"synth.body_length", "40"},
      {"synth.topic_share", "0.6"},
      {"synth.zipf_exponent", "1"},
      {"synth.start_date", "2020-01-06"},
      {"synth.rho", "0"},
      {"synth.drift_scale", "0.01"},
      {"synth.mean", "0"},
      {"synth.ar", "0"},
      {"synth.alpha0", "0.0001"},
      {"synth.alpha1", "0.1"},
      {"synth.gamma_ratio", "3"},
      {"synth.p11", "0.98"},
      {"synth.p22", "0.95"},
  };
  return d;
}

bool hashed_key(const std::string& key) {
  for (const char* prefix : {"paths.", "eval.", "synth."})
    if (key.rfind(prefix, 0) == 0) return false;
  return key != "global.threads";
}

void need(const fs::path& p) {
  if (!fs::exists(p)) fail(ErrorKind::MissingArtifact, "missing input " + p.string());
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + p.string());
  return out;
}

std::string read_text(const fs::path& p) {
  need(p);
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ojson parse_json_file(const fs::path& p) {
  try {
    return ojson::parse(read_text(p));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidData, "cannot parse " + p.string() + ": " + e.what());
  }
}

void write_json(const fs::path& p, const ojson& j) { open_out(p) << j.dump(2) << '\n'; }

std::map<std::string, ScoreMap> read_scores_tsv(const fs::path& p) {
  need(p);
  std::ifstream in(p);
  std::map<std::string, ScoreMap> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const auto f = split(line, '\t');
    if (f.size() != 3) fail(ErrorKind::InvalidData, p.string() + ":" + std::to_string(n) + ": expected 3 fields");
    out[f[0]][f[1]] = parse_double(f[2]);
  }
  return out;
}

std::vector<std::string> read_lines(const fs::path& p) {
  need(p);
  std::ifstream in(p);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(line);
  return out;
}

/// Documents whose date is within the first `fraction` of distinct dates.
std::set<std::string> graph_documents(const std::vector<Document>& docs, double fraction) {
  std::set<Date> dates;
  for (const auto& d : docs) dates.insert(d.date);
  require(!dates.empty(), "corpus is empty");
  const auto n = static_cast<double>(dates.size());
  const auto keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * n - 1e-9)));
  const Date cutoff = *std::next(dates.begin(), static_cast<std::ptrdiff_t>(std::min(keep, dates.size()) - 1));
  std::set<std::string> ids;
  for (const auto& d : docs)
    if (d.date <= cutoff) ids.insert(d.id);
  return ids;
}

struct SplitInfo {
  std::set<std::string> graph_docs;
  std::vector<std::size_t> words_boundaries;
};

SplitInfo read_split(const fs::path& p) {
  const auto j = parse_json_file(p);
  SplitInfo s;
  try {
    for (const auto& id : j.at("graph_docs")) s.graph_docs.insert(id.get<std::string>());
    s.words_boundaries = j.at("words_boundaries").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidData, p.string() + ": " + e.what());
  }
  return s;
}

std::optional<SentimentLexicon> maybe_lexicon(const PipelineConfig& cfg, StageReport& r) {
  if (!cfg.features().sentiment) return std::nullopt;
  const auto pos = cfg.path("paths.lexicon_positive");
  const auto neg = cfg.path("paths.lexicon_negative");
  need(pos);
  need(neg);
  r.inputs.push_back(pos);
  r.inputs.push_back(neg);
  return SentimentLexicon::load(pos, neg);
}

fs::path embedding_path(const PipelineConfig& cfg) {
  return cfg.artifact(cfg.get("embed.format") == "binary" ? "embedding.bin" : "embedding.txt");
}

std::vector<int> read_labels_csv(const fs::path& p, std::vector<Date>& dates) {
  need(p);
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  if (trim(line) != "date,return,label") fail(ErrorKind::InvalidData, p.string() + ": unexpected header");
  std::vector<int> labels;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto f = split(trim(line), ',');
    if (f.size() != 3) fail(ErrorKind::InvalidData, p.string() + ": expected 3 fields");
    dates.push_back(parse_date(f[0]));
    labels.push_back(std::stoi(f[2]));
  }
  return labels;
}

void check_hash(const std::string& recorded, const PipelineConfig& cfg, const std::string& what,
                const StageOptions& opt) {
  if (recorded == cfg.hash() || opt.force) return;
  fail(ErrorKind::ConfigMismatch, what + " was produced with config hash " + recorded +
                                      ", current config hash is " + cfg.hash() + " (use --force to override)");
}

std::string meta_hash(const std::string& meta_json) {
  try {
    return ojson::parse(meta_json).value("config_hash", std::string());
  } catch (const nlohmann::json::exception&) {
    return {};
  }
}

// Stages --------------------------------------------------------------------------

void stage_tfidf(const PipelineConfig& cfg, StageReport& r) {
  const auto corpus_path = cfg.path("paths.corpus");
  need(corpus_path);
  r.inputs.push_back(corpus_path);
  const auto docs = read_corpus(corpus_path);
  validate_corpus(docs);
  const auto ids = graph_documents(docs, cfg.get_double("tfidf.graph_fraction"));

  std::vector<TokenizedDoc> tokenized;
  for (const auto& d : docs)
    if (ids.count(d.id)) tokenized.push_back(tokenize_document(d, cfg.tokenizer()));
  const auto table = compute_tfidf(tokenized);

  const double q = cfg.get_double("tfidf.quantile");
  std::set<std::string> vocabulary;
  std::vector<std::set<std::string>> elements(table.num_docs);
  if (cfg.get("tfidf.rank_mode") == "document") {
    for (std::size_t k = 0; k < table.num_docs; ++k) {
      elements[k] = extract_elements(table.doc_ids[k], table, q, RankMode::Document);
      vocabulary.insert(elements[k].begin(), elements[k].end());
    }
  } else {
    vocabulary = select_element_vocabulary(table, q);
    for (std::size_t k = 0; k < table.num_docs; ++k)
      elements[k] = extract_elements(table.doc_ids[k], table, vocabulary);
  }

  write_tfidf_tsv(cfg.artifact("tfidf.tsv"), table, table.full);
  write_tfidf_tsv(cfg.artifact("tfidf_title.tsv"), table, table.title);
  write_tfidf_tsv(cfg.artifact("tfidf_body.tsv"), table, table.body);
  {
    auto out = open_out(cfg.artifact("vocabulary.txt"));
    for (const auto& e : vocabulary) out << e << '\n';
  }
  {
    auto out = open_out(cfg.artifact("elements.tsv"));
    for (std::size_t k = 0; k < table.num_docs; ++k)
      for (const auto& e : elements[k]) out << table.doc_ids[k] << '\t' << e << '\n';
  }
  ojson split;
  split["graph_docs"] = table.doc_ids;
  std::vector<std::string> unseen;
  for (const auto& d : docs)
    if (!ids.count(d.id)) unseen.push_back(d.id);
  split["unseen_docs"] = unseen;
  split["words_boundaries"] = words_count_quartiles(tokenized);
  write_json(cfg.artifact("corpus_split.json"), split);

  r.outputs = {cfg.artifact("tfidf.tsv"), cfg.artifact("tfidf_title.tsv"), cfg.artifact("tfidf_body.tsv"),
               cfg.artifact("vocabulary.txt"), cfg.artifact("elements.tsv"), cfg.artifact("corpus_split.json")};
  ojson info;
  info["documents"] = docs.size();
  info["graph_documents"] = table.num_docs;
  info["unseen_documents"] = unseen.size();
  info["vocabulary"] = vocabulary.size();
  r.info_json = info.dump();
}

void stage_graph(const PipelineConfig& cfg, StageReport& r) {
  const auto corpus_path = cfg.path("paths.corpus");
  r.inputs = {corpus_path, cfg.artifact("corpus_split.json"), cfg.artifact("elements.tsv"),
              cfg.artifact("tfidf_title.tsv"), cfg.artifact("tfidf_body.tsv")};
  for (const auto& p : r.inputs) need(p);
  const auto split_info = read_split(cfg.artifact("corpus_split.json"));
  const auto lexicon = maybe_lexicon(cfg, r);
  auto fc = cfg.features();
  fc.words_boundaries = split_info.words_boundaries;

  std::map<std::string, std::set<std::string>> elements;
  for (const auto& line : read_lines(cfg.artifact("elements.tsv"))) {
    const auto f = split(line, '\t');
    if (f.size() != 2) fail(ErrorKind::InvalidData, "elements.tsv: expected 2 fields");
    elements[f[0]].insert(f[1]);
  }
  auto title = read_scores_tsv(cfg.artifact("tfidf_title.tsv"));
  auto body = read_scores_tsv(cfg.artifact("tfidf_body.tsv"));

  std::vector<NewsRecord> records;
  for (const auto& d : read_corpus(corpus_path)) {
    if (!split_info.graph_docs.count(d.id)) continue;
    NewsRecord rec;
    rec.id = d.id;
    rec.elements = elements[d.id];
    rec.features = extract_features(d, tokenize_document(d, cfg.tokenizer()), rec.elements, fc,
                                    lexicon ? &*lexicon : nullptr);
    rec.title_scores = std::move(title[d.id]);
    rec.body_scores = std::move(body[d.id]);
    records.push_back(std::move(rec));
  }
  const auto full = build_network(records);
  const auto graph = prune(full);
  write_graph(cfg.artifact("graph_edges.tsv"), cfg.artifact("graph_nodes.jsonl"), graph);
  r.outputs = {cfg.artifact("graph_edges.tsv"), cfg.artifact("graph_nodes.jsonl")};

  std::size_t news = 0;
  for (NodeId v = 0; v < graph.size(); ++v) news += graph.kind(v) == NodeKind::News;
  ojson info;
  info["nodes_before_pruning"] = full.size();
  info["nodes"] = graph.size();
  info["news_nodes"] = news;
  info["element_nodes"] = graph.size() - news;
  info["edges"] = graph.num_edges();
  info["detached_news"] = graph.detached_news.size();
  r.info_json = info.dump();
}

AttributedGraph load_graph(const PipelineConfig& cfg, StageReport& r) {
  const auto e = cfg.artifact("graph_edges.tsv");
  const auto n = cfg.artifact("graph_nodes.jsonl");
  need(e);
  need(n);
  r.inputs.push_back(e);
  r.inputs.push_back(n);
  return read_graph(e, n);
}

void stage_walk(const PipelineConfig& cfg, StageReport& r) {
  const auto graph = load_graph(cfg, r);
  const auto walks = sample_walks(graph, cfg.walk());
  write_walks(cfg.artifact("walks.txt"), walks, graph);
  r.outputs = {cfg.artifact("walks.txt")};
  r.info_json = ojson{{"walks", walks.size()}}.dump();
}

void stage_train_embed(const PipelineConfig& cfg, StageReport& r) {
  const auto graph = load_graph(cfg, r);
  const auto walks_path = cfg.artifact("walks.txt");
  need(walks_path);
  r.inputs.push_back(walks_path);
  const auto data = decompose(read_walks(walks_path, graph), graph);
  const auto result = train(data, cfg.embedding());
  const auto out = embedding_path(cfg);
  if (cfg.get("embed.format") == "binary")
    result.table.save_binary(out);
  else
    result.table.save_text(out);
  ojson hist;
  hist["epoch_loss"] = result.history.epoch_loss;
  hist["steps"] = result.history.steps;
  write_json(cfg.artifact("embed_history.json"), hist);
  r.outputs = {out, cfg.artifact("embed_history.json")};
  r.info_json = ojson{{"features", result.table.vocab_size()}, {"epoch_loss", result.history.epoch_loss}}.dump();
}

void stage_embed(const PipelineConfig& cfg, StageReport& r) {
  const auto graph = load_graph(cfg, r);
  const auto emb = embedding_path(cfg);
  need(emb);
  r.inputs.push_back(emb);
  const auto table = EmbeddingTable::load(emb);
  std::vector<std::pair<std::string, std::vector<double>>> out;
  std::vector<std::string> skipped;
  std::size_t oov = 0;
  auto add = [&](const std::string& id, const FeatureBag& bag) {
    try {
      auto v = embed_news(bag, table);
      oov += v.skipped;
      out.emplace_back(id, std::move(v.values));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::InvalidData) throw;
      skipped.push_back(id);
    }
  };
  for (NodeId v = 0; v < graph.size(); ++v)
    if (graph.kind(v) == NodeKind::News) add(graph.name(v), graph.features(v));
  for (const auto& [id, bag] : graph.detached_news) add(id, bag);
  write_news_vectors(cfg.artifact("news_vectors.txt"), out);
  r.outputs = {cfg.artifact("news_vectors.txt")};
  r.info_json = ojson{{"vectors", out.size()}, {"skipped_documents", skipped}, {"oov_features", oov}}.dump();
}

void stage_infer(const PipelineConfig& cfg, StageReport& r) {
  const auto corpus_path = cfg.path("paths.corpus");
  const auto emb = embedding_path(cfg);
  r.inputs = {corpus_path, cfg.artifact("corpus_split.json"), cfg.artifact("vocabulary.txt"), emb};
  for (const auto& p : r.inputs) need(p);
  const auto split_info = read_split(cfg.artifact("corpus_split.json"));
  FeatureExtractor fx;
  fx.tokenizer = cfg.tokenizer();
  fx.features = cfg.features();
  fx.features.words_boundaries = split_info.words_boundaries;
  fx.lexicon = maybe_lexicon(cfg, r);
  for (const auto& w : read_lines(cfg.artifact("vocabulary.txt"))) fx.vocabulary.insert(w);
  const auto table = EmbeddingTable::load(emb);

  std::vector<std::pair<std::string, std::vector<double>>> out;
  std::vector<std::string> skipped;
  std::size_t oov = 0;
  for (const auto& d : read_corpus(corpus_path)) {
    if (split_info.graph_docs.count(d.id)) continue;
    try {
      auto v = infer_unseen(d, table, fx);
      oov += v.skipped;
      out.emplace_back(d.id, std::move(v.values));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::InvalidData) throw;
      skipped.push_back(d.id);
    }
  }
  write_news_vectors(cfg.artifact("unseen_vectors.txt"), out);
  r.outputs = {cfg.artifact("unseen_vectors.txt")};
  r.info_json = ojson{{"vectors", out.size()}, {"skipped_documents", skipped}, {"oov_features", oov}}.dump();
}

void stage_fit_swarch(const PipelineConfig& cfg, StageReport& r) {
  const auto returns_path = cfg.path("paths.returns");
  need(returns_path);
  r.inputs = {returns_path};
  const auto series = read_returns_csv(returns_path);
  const auto fit = fit_swarch(series.returns, cfg.swarch());
  const auto filt = hamilton_filter(series.returns, fit.params);
  RegimeSeries regimes{filt.prob_high, label_crises(filt.prob_high, cfg.get_double("swarch.threshold"))};
  open_out(cfg.artifact("swarch_params.json")) << params_to_json(fit.params, fit.log_likelihood) << '\n';
  write_regimes_csv(cfg.artifact("regimes.csv"), series.dates, regimes);
  r.outputs = {cfg.artifact("swarch_params.json"), cfg.artifact("regimes.csv")};
  std::size_t crisis_days = 0;
  for (int c : regimes.crisis) crisis_days += c == 1;
  r.info_json = ojson{{"log_likelihood", fit.log_likelihood},
                      {"converged_starts", fit.converged_starts},
                      {"best_start", fit.best_start},
                      {"crisis_days", crisis_days}}
                    .dump();
}

void stage_label(const PipelineConfig& cfg, StageReport& r) {
  const auto returns_path = cfg.path("paths.returns");
  need(returns_path);
  r.inputs = {returns_path};
  const auto series = read_returns_csv(returns_path);
  std::vector<int> crisis;
  if (cfg.get("samples.task") == "crisis") {
    const auto reg_path = cfg.artifact("regimes.csv");
    need(reg_path);
    r.inputs.push_back(reg_path);
    std::vector<Date> dates;
    crisis = read_regimes_csv(reg_path, &dates).crisis;
    if (dates != series.dates) fail(ErrorKind::InvalidData, "regimes.csv dates do not match the return series");
  }
  const auto labeler = cfg.labeler(crisis);
  auto out = open_out(cfg.artifact("labels.csv"));
  out << "date,return,label\n";
  std::vector<std::size_t> counts(labeler.num_classes(), 0);
  for (std::size_t t = 0; t < series.dates.size(); ++t) {
    const int y = labeler.label(t, series.returns[t]);
    ++counts[static_cast<std::size_t>(y)];
    out << format_date(series.dates[t]) << ',' << format_double(series.returns[t]) << ',' << y << '\n';
  }
  r.outputs = {cfg.artifact("labels.csv")};
  r.info_json = ojson{{"task", cfg.get("samples.task")}, {"class_counts", counts}}.dump();
}

void stage_build_samples(const PipelineConfig& cfg, StageReport& r, const StageOptions& opt) {
  const auto corpus_path = cfg.path("paths.corpus");
  const auto returns_path = cfg.path("paths.returns");
  r.inputs = {corpus_path, returns_path, cfg.artifact("news_vectors.txt"), cfg.artifact("unseen_vectors.txt"),
              cfg.artifact("labels.csv")};
  for (const auto& p : r.inputs) need(p);

  std::map<std::string, Vec> vectors;
  for (const auto* name : {"news_vectors.txt", "unseen_vectors.txt"})
    for (auto& [id, v] : read_news_vectors(cfg.artifact(name)))
      vectors[id] = Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));

  std::map<Date, DayNews> news;
  for (const auto& d : read_corpus(corpus_path)) {
    const auto it = vectors.find(d.id);
    if (it == vectors.end()) continue;
    auto& day = news[d.date];
    day.doc_ids.push_back(d.id);
    day.vectors.push_back(it->second);
  }

  const auto series = read_returns_csv(returns_path);
  std::vector<Date> label_dates;
  const auto file_labels = read_labels_csv(cfg.artifact("labels.csv"), label_dates);
  if (label_dates != series.dates) fail(ErrorKind::InvalidData, "labels.csv dates do not match the return series");
  const auto labeler = cfg.labeler(file_labels);
  for (std::size_t t = 0; t < series.dates.size(); ++t)
    if (labeler.label(t, series.returns[t]) != file_labels[t] && !opt.force)
      fail(ErrorKind::ConfigMismatch, "labels.csv does not match the configured task; rerun `label` (or --force)");

  auto options = cfg.samples();
  if (vectors.empty()) options.dim = cfg.get_size("embed.dim");
  auto set = build_samples(news, series.dates, series.returns, labeler, options, cfg.get("samples.task"));
  set.meta = ojson{{"config_hash", cfg.hash()}, {"seed", cfg.seed()}}.dump();
  set.save(cfg.artifact("samples.bin"));
  r.outputs = {cfg.artifact("samples.bin")};

  std::size_t news_days = 0;
  for (const auto& d : set.days) news_days += d.news.cols() > 0;
  r.info_json = ojson{{"samples", set.samples.size()}, {"trading_days", set.days.size()},
                      {"days_with_news", news_days}, {"dim", set.dim}}
                    .dump();
}

SampleSet load_samples(const PipelineConfig& cfg, StageReport& r, const StageOptions& opt) {
  const auto p = cfg.artifact("samples.bin");
  need(p);
  r.inputs.push_back(p);
  auto set = SampleSet::load(p);
  check_hash(meta_hash(set.meta), cfg, "samples.bin", opt);
  return set;
}

void stage_train_predict(const PipelineConfig& cfg, StageReport& r, const StageOptions& opt) {
  const auto set = load_samples(cfg, r, opt);
  const auto split_ix = chronological_split(set.samples.size(), cfg.get_double("samples.train_fraction"),
                                            cfg.get_double("samples.val_fraction"));
  if (split_ix.train_end == 0) fail(ErrorKind::InvalidData, "training split is empty");
  auto pc = cfg.predictor(set.dim, set.num_classes);
  pc.market_lags = set.market_lags;
  const auto train_set = set.materialize(0, split_ix.train_end);
  const auto val_set = set.materialize(split_ix.train_end, split_ix.val_end);
  const auto outcome = train_predictor(train_set, val_set, pc);

  ojson meta;
  meta["config_hash"] = cfg.hash();
  meta["seed"] = cfg.seed();
  meta["task"] = set.task;
  meta["best_epoch"] = outcome.best_epoch;
  meta["split"] = {{"train_end", split_ix.train_end}, {"val_end", split_ix.val_end}, {"size", split_ix.size}};
  meta["samples_sha256"] = sha256_file(cfg.artifact("samples.bin"));
  save_checkpoint(cfg.artifact("model.bin"), {pc, outcome.params, meta.dump()});

  ojson hist = ojson::array();
  for (const auto& e : outcome.history)
    hist.push_back({{"train_loss", e.train_loss},
                    {"train_accuracy", e.train_accuracy},
                    {"val_loss", e.val_loss},
                    {"val_accuracy", e.val_accuracy}});
  write_json(cfg.artifact("train_history.json"), ojson{{"best_epoch", outcome.best_epoch},
                                                      {"clamped_losses", outcome.clamped_losses},
                                                      {"epochs", hist}});
  r.outputs = {cfg.artifact("model.bin"), cfg.artifact("train_history.json")};
  r.info_json = ojson{{"train_samples", train_set.size()}, {"val_samples", val_set.size()},
                      {"best_epoch", outcome.best_epoch}}
                    .dump();
}

struct LoadedModel {
  Checkpoint checkpoint;
  ojson meta;
  std::size_t val_end = 0;
};

LoadedModel load_model(const PipelineConfig& cfg, StageReport& r, const StageOptions& opt) {
  const auto p = cfg.artifact("model.bin");
  need(p);
  r.inputs.push_back(p);
  LoadedModel m{load_checkpoint(p), {}, 0};
  try {
    m.meta = ojson::parse(m.checkpoint.metadata_json);
    m.val_end = m.meta.at("split").at("val_end");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidData, std::string("model.bin metadata: ") + e.what());
  }
  check_hash(m.meta.value("config_hash", std::string()), cfg, "model.bin", opt);
  return m;
}

void check_samples_match(const LoadedModel& m, const PipelineConfig& cfg, const StageOptions& opt) {
  if (opt.force) return;
  if (m.meta.value("samples_sha256", std::string()) != sha256_file(cfg.artifact("samples.bin")))
    fail(ErrorKind::ConfigMismatch, "samples.bin changed since the model was trained (use --force to override)");
}

void stage_evaluate(const PipelineConfig& cfg, StageReport& r, const StageOptions& opt) {
  const auto model = load_model(cfg, r, opt);
  const auto set = load_samples(cfg, r, opt);
  check_samples_match(model, cfg, opt);
  const auto& pc = model.checkpoint.config;
  if (model.val_end >= set.samples.size()) fail(ErrorKind::InvalidData, "test split is empty");

  std::vector<int> actual, predicted;
  std::vector<Date> dates;
  auto pred_out = open_out(cfg.artifact("predictions.csv"));
  pred_out << "date,actual,predicted";
  for (std::size_t j = 0; j < pc.num_classes; ++j) pred_out << ",p" << j;
  pred_out << '\n';
  for (std::size_t i = model.val_end; i < set.samples.size(); ++i) {
    const auto s = set.materialize(i);
    const Vec p = forward(s, model.checkpoint.params, pc);
    Eigen::Index arg = 0;
    p.maxCoeff(&arg);
    actual.push_back(s.label);
    predicted.push_back(static_cast<int>(arg));
    dates.push_back(set.days[set.target_day(i)].date);
    pred_out << format_date(dates.back()) << ',' << s.label << ',' << arg;
    for (Eigen::Index j = 0; j < p.size(); ++j) pred_out << ',' << format_double(p(j));
    pred_out << '\n';
  }
  pred_out.close();

  const auto cm = ConfusionMatrix::from_labels(predicted, actual, pc.num_classes);
  long correct = 0;
  for (std::size_t i = 0; i < pc.num_classes; ++i) correct += cm.at(i, i);
  const auto [lo, hi] = binomial_interval(static_cast<std::size_t>(correct), actual.size());
  std::vector<long> class_counts(pc.num_classes, 0);
  for (int y : actual) ++class_counts[static_cast<std::size_t>(y)];

  ojson extra;
  extra["task"] = set.task;
  extra["accuracy_ci95"] = {lo, hi};
  extra["majority_rate"] = static_cast<double>(*std::max_element(class_counts.begin(), class_counts.end())) /
                           static_cast<double>(actual.size());
  extra["config_hash"] = model.meta.value("config_hash", std::string());
  std::optional<OnsetReport> onsets;
  if (set.task == "crisis") onsets = onset_metrics(actual, predicted, cfg.get_size("eval.lookahead"));
  open_out(cfg.artifact("metrics.json")) << metrics_json(cm, onsets ? &*onsets : nullptr, dates, extra.dump())
                                         << '\n';
  cm.write_csv(cfg.artifact("confusion.csv"));
  r.outputs = {cfg.artifact("metrics.json"), cfg.artifact("confusion.csv"), cfg.artifact("predictions.csv")};
  r.info_json = ojson{{"accuracy", accuracy(cm)}, {"mcc", mcc(cm)}, {"test_samples", actual.size()}}.dump();
}

void stage_attention_export(const PipelineConfig& cfg, StageReport& r, const StageOptions& opt) {
  const auto model = load_model(cfg, r, opt);
  const auto set = load_samples(cfg, r, opt);
  check_samples_match(model, cfg, opt);
  if (!model.checkpoint.config.use_news) fail(ErrorKind::InvalidArgument, "model has no news branch");
  const std::string range = cfg.get("eval.attention_range");
  const std::size_t begin = range == "all" ? 0 : model.val_end;
  const auto rows = export_attention(model.checkpoint.params, set, begin, set.samples.size());
  write_attention_csv(cfg.artifact("attention.csv"), rows);
  r.outputs = {cfg.artifact("attention.csv")};
  r.info_json = ojson{{"rows", rows.size()}}.dump();
}

void stage_synth(const PipelineConfig& cfg, StageReport& r) {
  const auto sc = cfg.synth();
  const auto corpus = gen_corpus(sc);
  const auto market = gen_market(sc, corpus);
  const auto dir = cfg.path("paths.synth_dir");
  write_synth(dir, sc, corpus, market);
  for (const auto* name : {"corpus.jsonl", "topics.csv", "returns.csv", "true_regimes.csv", "positive.txt",
                           "negative.txt"})
    r.outputs.push_back(dir / name);
  r.info_json = ojson{{"documents", corpus.docs.size()}, {"trading_days", corpus.days.size()}, {"rho", sc.rho}}
                    .dump();
}

}  // namespace

// PipelineConfig ----------------------------------------------------------------------

PipelineConfig::PipelineConfig() {
  for (const auto& [k, v] : default_settings()) values_[k] = v;
}

void PipelineConfig::load_ini(const fs::path& path) {
  if (!fs::exists(path)) fail(ErrorKind::InvalidArgument, "config file not found: " + path.string());
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    fail(ErrorKind::InvalidArgument, std::string("config file: ") + e.what());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty())
      fail(ErrorKind::InvalidArgument, "config file: key '" + section + "' outside a section");
    for (const auto& [key, value] : body) set(section + "." + key, value.get_value<std::string>());
  }
}

void PipelineConfig::set(const std::string& key, const std::string& value) {
  const auto it = values_.find(key);
  if (it == values_.end()) fail(ErrorKind::InvalidArgument, "unknown config key '" + key + "'");
  it->second = trim(value);
}

void PipelineConfig::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) fail(ErrorKind::InvalidArgument, "expected section.key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

const std::string& PipelineConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) fail(ErrorKind::InvalidArgument, "unknown config key '" + key + "'");
  return it->second;
}

double PipelineConfig::get_double(const std::string& key) const {
  try {
    return parse_double(get(key));
  } catch (const Error&) {
    fail(ErrorKind::InvalidArgument, key + ": expected a number, got '" + get(key) + "'");
  }
}

std::size_t PipelineConfig::get_size(const std::string& key) const {
  const auto& s = get(key);
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    fail(ErrorKind::InvalidArgument, key + ": expected a non-negative integer, got '" + s + "'");
  return v;
}

bool PipelineConfig::get_bool(const std::string& key) const {
  const auto& s = get(key);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  fail(ErrorKind::InvalidArgument, key + ": expected a boolean, got '" + s + "'");
}

std::uint64_t PipelineConfig::seed() const {
  const auto& s = get("global.seed");
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    fail(ErrorKind::InvalidArgument, "global.seed: expected an unsigned integer, got '" + s + "'");
  return v;
}

std::size_t PipelineConfig::threads() const {
  const auto t = get_size("global.threads");
  require(t >= 1, "global.threads must be >= 1");
  return t;
}

fs::path PipelineConfig::path(const std::string& key) const { return fs::path(get(key)); }

fs::path PipelineConfig::artifact(const std::string& name) const { return path("paths.artifacts") / name; }

std::string PipelineConfig::hash() const {
  std::string canon;
  for (const auto& [k, v] : values_)
    if (hashed_key(k)) canon += k + "=" + v + "\n";
  return sha256_hex(canon);
}

std::string PipelineConfig::to_json() const {
  ojson j;
  for (const auto& [k, v] : default_settings()) {
    (void)v;
    const auto dot = k.find('.');
    j[k.substr(0, dot)][k.substr(dot + 1)] = values_.at(k);
  }
  return j.dump();
}

void PipelineConfig::validate() const {
  seed();
  threads();
  tokenizer();
  features();
  walk().validate();
  embedding().validate();
  swarch();
  samples();
  labeler();
  predictor(4, 3).validate();
  synth().validate();
  const auto gf = get_double("tfidf.graph_fraction");
  require(gf > 0.0 && gf <= 1.0, "tfidf.graph_fraction must lie in (0, 1]");
  const auto q = get_double("tfidf.quantile");
  require(q > 0.0 && q <= 1.0, "tfidf.quantile must lie in (0, 1]");
  const auto& rm = get("tfidf.rank_mode");
  require(rm == "corpus" || rm == "document", "tfidf.rank_mode must be corpus or document");
  const auto& fmt = get("embed.format");
  require(fmt == "text" || fmt == "binary", "embed.format must be text or binary");
  const auto& ar = get("eval.attention_range");
  require(ar == "test" || ar == "all", "eval.attention_range must be test or all");
  const auto th = get_double("swarch.threshold");
  require(th >= 0.0, "swarch.threshold must be non-negative");
  get_size("eval.lookahead");
  chronological_split(1, get_double("samples.train_fraction"), get_double("samples.val_fraction"));
}

TokenizerConfig PipelineConfig::tokenizer() const {
  TokenizerConfig t;
  t.lowercase = get_bool("tfidf.lowercase");
  t.strip_punctuation = get_bool("tfidf.strip_punctuation");
  return t;
}

FeatureConfig PipelineConfig::features() const {
  FeatureConfig f;
  f.time_features = get_bool("features.time");
  f.sentiment = get_bool("features.sentiment");
  f.words_count = get_bool("features.words_count");
  f.label_features = get_bool("features.labels");
  return f;
}

WalkConfig PipelineConfig::walk() const {
  WalkConfig w;
  w.length = get_size("walk.length");
  w.walks_per_node = get_size("walk.walks_per_node");
  w.p = get_double("walk.p");
  w.q = get_double("walk.q");
  w.use_alias = get_bool("walk.alias");
  w.seed = derive_seed(seed(), 1);
  w.threads = threads();
  return w;
}

TrainConfig PipelineConfig::embedding() const {
  TrainConfig t;
  t.dim = get_size("embed.dim");
  t.window = get_size("embed.window");
  t.negatives = get_size("embed.negatives");
  t.epochs = get_size("embed.epochs");
  t.learning_rate = get_double("embed.lr");
  t.min_learning_rate = get_double("embed.min_lr");
  t.noise_exponent = get_double("embed.noise_exponent");
  t.symmetric = get_bool("embed.symmetric");
  t.normalize_gradient = get_bool("embed.normalize_gradient");
  t.seed = derive_seed(seed(), 2);
  t.threads = threads();
  return t;
}

FitConfig PipelineConfig::swarch() const {
  FitConfig f;
  f.starts = get_size("swarch.starts");
  f.tolerance = get_double("swarch.tolerance");
  f.max_iterations = get_size("swarch.max_iterations");
  f.seed = derive_seed(seed(), 3);
  f.threads = threads();
  require(f.starts >= 1, "swarch.starts must be >= 1");
  require(f.tolerance > 0.0, "swarch.tolerance must be positive");
  return f;
}

SampleOptions PipelineConfig::samples() const {
  SampleOptions o;
  o.window = get_size("samples.window");
  o.stride = get_size("samples.stride");
  o.market_lags = get_size("samples.market_lags");
  require(o.window >= 1 && o.stride >= 1 && o.market_lags >= 1, "samples.window, stride and market_lags must be >= 1");
  return o;
}

Labeler PipelineConfig::labeler(const std::vector<int>& crisis) const {
  const auto& task = get("samples.task");
  if (task == "movement") {
    const double up = get_double("samples.up"), down = get_double("samples.down");
    require(down <= up, "samples.down must not exceed samples.up");
    return Labeler::movement(up, down);
  }
  if (task == "direction") return Labeler::direction();
  if (task == "crisis") return Labeler::crises(crisis);
  fail(ErrorKind::InvalidArgument, "samples.task must be movement, direction or crisis");
}

PredictorConfig PipelineConfig::predictor(std::size_t news_dim, std::size_t num_classes) const {
  PredictorConfig p;
  p.news_dim = news_dim;
  p.num_classes = num_classes;
  p.attention_size = get_size("predictor.attention_size");
  p.news_hidden = get_size("predictor.news_hidden");
  p.market_hidden = get_size("predictor.market_hidden");
  p.market_lags = get_size("samples.market_lags");
  p.use_news = get_bool("predictor.use_news");
  p.use_market = get_bool("predictor.use_market");
  p.mask_empty_days = get_bool("predictor.mask_empty_days");
  p.l2 = get_double("predictor.l2");
  p.learning_rate = get_double("predictor.lr");
  p.beta1 = get_double("predictor.beta1");
  p.beta2 = get_double("predictor.beta2");
  p.epsilon = get_double("predictor.epsilon");
  p.batch_size = get_size("predictor.batch_size");
  p.epochs = get_size("predictor.epochs");
  p.patience = get_size("predictor.patience");
  p.class_weights = get_bool("predictor.class_weights");
  p.seed = derive_seed(seed(), 4);
  p.threads = threads();
  return p;
}

SynthConfig PipelineConfig::synth() const {
  SynthConfig s;
  s.topics = get_size("synth.topics");
  s.docs_per_topic = get_size("synth.docs_per_topic");
  s.docs_per_day = get_size("synth.docs_per_day");
  s.day_purity = get_double("synth.day_purity");
  s.topic_vocab = get_size("synth.topic_vocab");
  s.shared_vocab = get_size("synth.shared_vocab");
  s.title_length = get_size("synth.title_length");
  s.body_length = get_size("synth.body_length");
  s.topic_share = get_double("synth.topic_share");
  s.zipf_exponent = get_double("synth.zipf_exponent");
  s.start_date = get("synth.start_date");
  s.rho = get_double("synth.rho");
  s.drift_scale = get_double("synth.drift_scale");
  s.market.mean = get_double("synth.mean");
  s.market.ar = get_double("synth.ar");
  s.market.alpha0 = get_double("synth.alpha0");
  s.market.alpha1 = get_double("synth.alpha1");
  s.market.gamma_ratio = get_double("synth.gamma_ratio");
  s.market.p11 = get_double("synth.p11");
  s.market.p22 = get_double("synth.p22");
  s.seed = seed();
  return s;
}

// Stage driver ---------------------------------------------------------------------------

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names = {
      "tfidf", "graph",         "walk",          "train-embed", "embed",    "infer",           "fit-swarch",
      "label", "build-samples", "train-predict", "evaluate",    "attention-export", "synth"};
  return names;
}

StageReport run_stage(const std::string& stage, const PipelineConfig& cfg, const StageOptions& options) {
  cfg.validate();
  StageReport r;
  r.stage = stage;
  const auto t0 = std::chrono::steady_clock::now();
  const bool synth = stage == "synth";
  if (!synth) fs::create_directories(cfg.path("paths.artifacts"));

  if (stage == "tfidf") stage_tfidf(cfg, r);
  else if (stage == "graph") stage_graph(cfg, r);
  else if (stage == "walk") stage_walk(cfg, r);
  else if (stage == "train-embed") stage_train_embed(cfg, r);
  else if (stage == "embed") stage_embed(cfg, r);
  else if (stage == "infer") stage_infer(cfg, r);
  else if (stage == "fit-swarch") stage_fit_swarch(cfg, r);
  else if (stage == "label") stage_label(cfg, r);
  else if (stage == "build-samples") stage_build_samples(cfg, r, options);
  else if (stage == "train-predict") stage_train_predict(cfg, r, options);
  else if (stage == "evaluate") stage_evaluate(cfg, r, options);
  else if (stage == "attention-export") stage_attention_export(cfg, r, options);
  else if (synth) stage_synth(cfg, r);
  else fail(ErrorKind::InvalidArgument, "unknown stage '" + stage + "'");

  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  ojson m;
  m["stage"] = stage;
  m["config_hash"] = cfg.hash();
  m["seed"] = cfg.seed();
  m["threads"] = cfg.threads();
  m["force"] = options.force;
  m["config"] = ojson::parse(cfg.to_json());
  auto files = [](const std::vector<fs::path>& paths) {
    ojson a = ojson::array();
    for (const auto& p : paths) a.push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
    return a;
  };
  m["inputs"] = files(r.inputs);
  m["outputs"] = files(r.outputs);
  m["info"] = ojson::parse(r.info_json);
  m["seconds"] = r.seconds;
  const auto dir = synth ? cfg.path("paths.synth_dir") : cfg.path("paths.artifacts");
  write_json(dir / (stage + ".manifest.json"), m);
  return r;
}

// Hashing and statistics -----------------------------------------------------------------

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    fail(ErrorKind::Io, "sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_text(path)); }

std::pair<double, double> binomial_interval(std::size_t successes, std::size_t trials, double confidence) {
  require(trials > 0 && successes <= trials, "binomial_interval: need 0 <= successes <= trials, trials > 0");
  const double alpha = 1.0 - confidence;
  const auto k = static_cast<double>(successes);
  const auto n = static_cast<double>(trials);
  const double lo = successes == 0 ? 0.0 : boost::math::ibeta_inv(k, n - k + 1.0, alpha / 2.0);
  const double hi = successes == trials ? 1.0 : boost::math::ibeta_inv(k + 1.0, n - k, 1.0 - alpha / 2.0);
  return {lo, hi};
}

}  // namespace newsvec

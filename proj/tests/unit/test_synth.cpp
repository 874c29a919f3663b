#include <doctest.h>

#include <filesystem>

#include "newsvec/synth.hpp"

using namespace newsvec;

namespace {

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  std::size_t inter = 0;
  for (const auto& x : a) inter += b.count(x);
  const auto uni = a.size() + b.size() - inter;
  return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

}  // namespace

TEST_CASE("corpus is deterministic and labelled") {
  SynthConfig cfg;
  cfg.docs_per_topic = 30;
  const auto a = gen_corpus(cfg);
  const auto b = gen_corpus(cfg);
  REQUIRE(a.docs.size() == 60);
  for (std::size_t i = 0; i < a.docs.size(); ++i) {
    CHECK(a.docs[i].title == b.docs[i].title);
    CHECK(a.docs[i].body == b.docs[i].body);
    CHECK(a.docs[i].labels == std::vector<std::string>{"topic:" + std::to_string(a.topic[i])});
  }
  cfg.seed = 2;
  CHECK(gen_corpus(cfg).docs[0].body != a.docs[0].body);

  // Consecutive weekdays.
  for (std::size_t d = 1; d < a.days.size(); ++d) {
    CHECK(iso_weekday(a.days[d]) <= 5);
    CHECK(a.days[d] > a.days[d - 1]);
  }
  int topic0 = 0;
  for (int t : a.topic) topic0 += t == 0;
  CHECK(topic0 == 30);
}

TEST_CASE("intra-topic overlap exceeds inter-topic overlap") {
  SynthConfig cfg;
  cfg.docs_per_topic = 25;
  const auto c = gen_corpus(cfg);
  std::vector<std::set<std::string>> words;
  for (const auto& d : c.docs) words.push_back(tokenize_document(d).candidates);
  double intra = 0, inter = 0, ni = 0, nx = 0;
  for (std::size_t i = 0; i < words.size(); ++i)
    for (std::size_t j = i + 1; j < words.size(); ++j) {
      const double o = jaccard(words[i], words[j]);
      if (c.topic[i] == c.topic[j]) {
        intra += o;
        ++ni;
      } else {
        inter += o;
        ++nx;
      }
    }
  CHECK(intra / ni > inter / nx);
}

TEST_CASE("market follows the regime process and the news drift") {
  SynthConfig cfg;
  cfg.docs_per_topic = 100;
  const auto corpus = gen_corpus(cfg);
  const auto m0 = gen_market(cfg, corpus);
  CHECK(m0.series.returns.size() == corpus.days.size());
  CHECK(m0.series.dates == corpus.days);
  for (double d : m0.drift) CHECK(d == 0.0);
  for (int r : m0.regimes) CHECK((r == 1 || r == 2));

  // rho = 0 ignores the news entirely: a different corpus seed leaves the
  // returns unchanged when the market seed is the same.
  auto other = cfg;
  other.topic_share = 0.9;
  const auto m_other = gen_market(other, gen_corpus(other));
  CHECK(m_other.series.returns == m0.series.returns);

  cfg.rho = 0.8;
  const auto m = gen_market(cfg, corpus);
  CHECK(m.drift[0] == 0.0);
  for (std::size_t t = 1; t < m.drift.size(); ++t) {
    const double sign = corpus.dominant_topic[t - 1] % 2 == 0 ? 1.0 : -1.0;
    CHECK(m.drift[t] == doctest::Approx(0.8 * 0.01 * sign));
    CHECK(m.series.returns[t] == doctest::Approx(m0.series.returns[t] + m.drift[t]).epsilon(1e-12));
  }
}

TEST_CASE("config validation") {
  SynthConfig cfg;
  cfg.rho = 1.5;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.topics = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.day_purity = -0.1;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("files are written in the ingest formats") {
  SynthConfig cfg;
  cfg.docs_per_topic = 15;
  const auto corpus = gen_corpus(cfg);
  const auto market = gen_market(cfg, corpus);
  const auto dir = std::filesystem::temp_directory_path() / "newsvec_synth_test";
  std::filesystem::remove_all(dir);
  write_synth(dir, cfg, corpus, market);
  for (const char* f : {"corpus.jsonl", "topics.csv", "returns.csv", "true_regimes.csv", "positive.txt", "negative.txt"})
    CHECK(std::filesystem::exists(dir / f));
  const auto docs = read_corpus(dir / "corpus.jsonl");
  CHECK(docs.size() == corpus.docs.size());
  CHECK(read_returns_csv(dir / "returns.csv").returns == market.series.returns);
  const auto lex = SentimentLexicon::load(dir / "positive.txt", dir / "negative.txt");
  CHECK(lex.positive == synth_lexicon(cfg).positive);
  std::filesystem::remove_all(dir);
}

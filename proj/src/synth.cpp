#include "newsvec/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace newsvec {

namespace {

class Zipf {
 public:
  Zipf(std::size_t n, double s) : cdf_(n) {
    double acc = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      acc += 1.0 / std::pow(static_cast<double>(r + 1), s);
      cdf_[r] = acc;
    }
    for (auto& c : cdf_) c /= acc;
  }

  std::size_t draw(Rng& rng) const {
    const double u = rng.uniform();
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
  }

 private:
  std::vector<double> cdf_;
};

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  return out;
}

}  // namespace

void SynthConfig::validate() const {
  require(topics >= 1 && docs_per_topic >= 1 && docs_per_day >= 1, "synth counts must be >= 1");
  require(topic_vocab >= 1 && shared_vocab >= 1, "synth vocabularies must be non-empty");
  require(title_length >= 1 && body_length >= 1, "synth document lengths must be >= 1");
  require(rho >= 0.0 && rho <= 1.0, "rho must lie in [0, 1]");
  require(day_purity >= 0.0 && day_purity <= 1.0, "day_purity must lie in [0, 1]");
  require(topic_share >= 0.0 && topic_share <= 1.0, "topic_share must lie in [0, 1]");
  require(zipf_exponent >= 0.0, "zipf_exponent must be non-negative");
  require(drift_scale >= 0.0, "drift_scale must be non-negative");
  market.validate(true);
  parse_date(start_date);
}

std::string topic_word(std::size_t topic, std::size_t rank) {
  return "t" + std::to_string(topic) + "w" + std::to_string(rank);
}

std::string shared_word(std::size_t rank) { return "s" + std::to_string(rank); }

SynthCorpus gen_corpus(const SynthConfig& config) {
  config.validate();
  SynthCorpus c;
  const std::size_t n_days = config.num_days();

  Date d = parse_date(config.start_date);
  while (iso_weekday(d) > 5) d = add_days(d, 1);
  for (std::size_t t = 0; t < n_days; ++t) {
    c.days.push_back(d);
    do d = add_days(d, 1);
    while (iso_weekday(d) > 5);
  }

  // Balanced day topics, shuffled.
  Rng topic_rng(derive_seed(config.seed, 1));
  c.dominant_topic.resize(n_days);
  for (std::size_t t = 0; t < n_days; ++t) c.dominant_topic[t] = static_cast<int>(t % config.topics);
  for (std::size_t t = n_days; t > 1; --t) std::swap(c.dominant_topic[t - 1], c.dominant_topic[topic_rng.below(t)]);

  const Zipf topic_zipf(config.topic_vocab, config.zipf_exponent);
  const Zipf shared_zipf(config.shared_vocab, config.zipf_exponent);
  const std::size_t width = std::to_string(config.num_docs()).size();

  std::vector<std::size_t> per_day(n_days, 0);
  for (std::size_t i = 0; i < config.num_docs(); ++i) {
    Rng rng(derive_seed(config.seed, 2, i));
    const std::size_t t = i / config.docs_per_day;
    int k = c.dominant_topic[t];
    if (rng.uniform() >= config.day_purity) k = static_cast<int>(rng.below(config.topics));

    auto words = [&](std::size_t n) {
      std::vector<std::string> out;
      for (std::size_t j = 0; j < n; ++j)
        out.push_back(rng.uniform() < config.topic_share
                          ? topic_word(static_cast<std::size_t>(k), topic_zipf.draw(rng))
                          : shared_word(shared_zipf.draw(rng)));
      return out;
    };

    Document doc;
    std::string num = std::to_string(i);
    doc.id = "n" + std::string(width - num.size(), '0') + num;
    doc.title = join(words(config.title_length));
    doc.body = join(words(config.body_length));
    doc.date = c.days[t];
    doc.labels = {"topic:" + std::to_string(k)};
    c.docs.push_back(std::move(doc));
    c.topic.push_back(k);
    ++per_day[t];
  }
  // Purity below 1 can shift the majority; recompute it from the documents.
  for (std::size_t t = 0; t < n_days; ++t) {
    std::vector<std::size_t> counts(config.topics, 0);
    for (std::size_t i = t * config.docs_per_day; i < std::min(config.num_docs(), (t + 1) * config.docs_per_day); ++i)
      ++counts[static_cast<std::size_t>(c.topic[i])];
    c.dominant_topic[t] = per_day[t] == 0
                              ? -1
                              : static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  }
  return c;
}

SynthMarket gen_market(const SynthConfig& config, const SynthCorpus& corpus) {
  config.validate();
  const std::size_t n = corpus.days.size();
  SynthMarket m;
  m.drift.assign(n, 0.0);
  for (std::size_t t = 1; t < n; ++t) {
    const int k = corpus.dominant_topic[t - 1];
    if (k < 0) continue;
    m.drift[t] = config.rho * config.drift_scale * (k % 2 == 0 ? 1.0 : -1.0);
  }
  auto path = simulate_swarch(config.market, n, derive_seed(config.seed, 3), m.drift);
  m.series.dates = corpus.days;
  m.series.returns = std::move(path.returns);
  m.regimes = std::move(path.regimes);
  return m;
}

SentimentLexicon synth_lexicon(const SynthConfig& config) {
  SentimentLexicon lex;
  for (std::size_t r = 0; r < config.shared_vocab; ++r) {
    if (r % 7 == 1) lex.positive.insert(shared_word(r));
    if (r % 7 == 2) lex.negative.insert(shared_word(r));
  }
  return lex;
}

void write_synth(const std::filesystem::path& dir, const SynthConfig& config,
                 const SynthCorpus& corpus, const SynthMarket& market) {
  std::filesystem::create_directories(dir);
  write_corpus(dir / "corpus.jsonl", corpus.docs);
  {
    auto out = open_out(dir / "topics.csv");
    out << "doc_id,topic\n";
    for (std::size_t i = 0; i < corpus.docs.size(); ++i) out << corpus.docs[i].id << ',' << corpus.topic[i] << '\n';
  }
  write_returns_csv(dir / "returns.csv", market.series);
  {
    auto out = open_out(dir / "true_regimes.csv");
    out << "date,regime,dominant_topic\n";
    for (std::size_t t = 0; t < corpus.days.size(); ++t)
      out << format_date(corpus.days[t]) << ',' << market.regimes[t] << ',' << corpus.dominant_topic[t] << '\n';
  }
  const auto lex = synth_lexicon(config);
  for (const auto& [name, words] : {std::pair{"positive.txt", &lex.positive}, std::pair{"negative.txt", &lex.negative}}) {
    std::vector<std::string> sorted(words->begin(), words->end());
    std::sort(sorted.begin(), sorted.end());
    auto out = open_out(dir / name);
    for (const auto& w : sorted) out << w << '\n';
  }
}

}  // namespace newsvec

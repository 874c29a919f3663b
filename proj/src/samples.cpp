#include "newsvec/samples.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include <json.hpp>

namespace newsvec {

int Labeler::label(std::size_t day, double ret) const {
  switch (kind) {
    case Kind::Movement:
      if (ret > up) return 2;
      if (ret < down) return 0;
      return 1;
    case Kind::Direction:
      return ret > 0.0 ? 1 : 0;
    case Kind::Crisis:
      if (day >= crisis.size()) fail(ErrorKind::InvalidData, "crisis labels do not cover every trading day");
      return crisis[day];
  }
  return 0;
}

PredictionSample SampleSet::materialize(std::size_t i) const {
  const auto& ref = samples.at(i);
  PredictionSample s;
  s.label = ref.label;
  s.news.reserve(window);
  s.market.reserve(window);
  for (std::size_t t = ref.start; t < ref.start + window; ++t) {
    const auto& day = days[t];
    s.news.push_back(day.news.cols() ? day.news : Mat(static_cast<Eigen::Index>(dim), 0));
    Vec x = Vec::Zero(static_cast<Eigen::Index>(market_lags));
    for (std::size_t k = 0; k < market_lags && k <= t; ++k) x(static_cast<Eigen::Index>(k)) = days[t - k].ret;
    s.market.push_back(std::move(x));
  }
  return s;
}

std::vector<PredictionSample> SampleSet::materialize(std::size_t begin, std::size_t end) const {
  std::vector<PredictionSample> out;
  out.reserve(end > begin ? end - begin : 0);
  for (std::size_t i = begin; i < end; ++i) out.push_back(materialize(i));
  return out;
}

SampleSet build_samples(const std::map<Date, DayNews>& news, const std::vector<Date>& dates,
                        const std::vector<double>& returns, const Labeler& labeler,
                        const SampleOptions& options, std::string task) {
  require(options.window >= 1 && options.stride >= 1, "window and stride must be positive");
  require(options.market_lags >= 1, "market lags must be positive");
  if (dates.size() != returns.size())
    fail(ErrorKind::InvalidData, "dates and returns differ in length");
  for (std::size_t t = 1; t < dates.size(); ++t)
    if (!(dates[t - 1] < dates[t])) fail(ErrorKind::InvalidData, "trading dates must be strictly increasing");
  if (labeler.kind == Labeler::Kind::Crisis && labeler.crisis.size() != dates.size())
    fail(ErrorKind::InvalidData, "crisis labels (" + std::to_string(labeler.crisis.size()) +
                                     ") do not align with trading days (" +
                                     std::to_string(dates.size()) + ")");

  const std::set<Date> trading(dates.begin(), dates.end());
  std::vector<std::string> gaps;
  for (const auto& [d, day] : news)
    if (!trading.count(d)) gaps.push_back(format_date(d));
  if (!gaps.empty()) {
    std::string msg = "news dates without a trading day (" + std::to_string(gaps.size()) + "):";
    for (std::size_t i = 0; i < std::min<std::size_t>(gaps.size(), 10); ++i) msg += " " + gaps[i];
    if (gaps.size() > 10) msg += " ...";
    fail(ErrorKind::InvalidData, msg);
  }

  SampleSet set;
  set.window = options.window;
  set.market_lags = options.market_lags;
  set.num_classes = labeler.num_classes();
  set.task = std::move(task);
  set.dim = options.dim;
  for (const auto& [d, day] : news)
    for (const auto& v : day.vectors) {
      if (set.dim == 0) set.dim = static_cast<std::size_t>(v.size());
      if (static_cast<std::size_t>(v.size()) != set.dim)
        fail(ErrorKind::InvalidData, "news vectors on " + format_date(d) + " have inconsistent dimension");
    }
  if (set.dim == 0) fail(ErrorKind::InvalidArgument, "news dimension unknown: no news vectors and no dim given");

  set.days.resize(dates.size());
  for (std::size_t t = 0; t < dates.size(); ++t) {
    auto& day = set.days[t];
    day.date = dates[t];
    day.ret = returns[t];
    day.news = Mat(static_cast<Eigen::Index>(set.dim), 0);
    const auto it = news.find(dates[t]);
    if (it == news.end()) continue;
    if (it->second.doc_ids.size() != it->second.vectors.size())
      fail(ErrorKind::InvalidData, "news ids and vectors differ in count on " + format_date(dates[t]));
    day.doc_ids = it->second.doc_ids;
    day.news.resize(static_cast<Eigen::Index>(set.dim), static_cast<Eigen::Index>(it->second.vectors.size()));
    for (std::size_t i = 0; i < it->second.vectors.size(); ++i)
      day.news.col(static_cast<Eigen::Index>(i)) = it->second.vectors[i];
  }
  for (std::size_t start = 0; start + options.window < dates.size(); start += options.stride) {
    const std::size_t target = start + options.window;
    set.samples.push_back({start, labeler.label(target, returns[target])});
  }
  return set;
}

Split chronological_split(std::size_t n, double train_fraction, double val_fraction) {
  require(train_fraction > 0.0 && val_fraction >= 0.0 && train_fraction + val_fraction <= 1.0,
          "split fractions must be positive and sum to at most 1");
  Split s;
  s.size = n;
  s.train_end = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n)));
  s.val_end = std::min(n, s.train_end + static_cast<std::size_t>(std::floor(val_fraction * static_cast<double>(n))));
  return s;
}

std::vector<AttentionRow> export_attention(const ModelParams& params, const SampleSet& set,
                                           std::size_t begin, std::size_t end) {
  std::set<std::size_t> day_indices;
  for (std::size_t i = begin; i < end && i < set.samples.size(); ++i)
    for (std::size_t t = set.samples[i].start; t < set.samples[i].start + set.window; ++t)
      day_indices.insert(t);
  std::vector<AttentionRow> rows;
  for (auto t : day_indices) {
    const auto& day = set.days[t];
    if (day.news.cols() == 0) continue;
    const auto att = attention_pool(day.news, params);
    for (Eigen::Index i = 0; i < att.weights.size(); ++i)
      rows.push_back({day.date, day.doc_ids[static_cast<std::size_t>(i)], att.weights(i)});
  }
  return rows;
}

void write_attention_csv(const std::filesystem::path& path, const std::vector<AttentionRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << "date,doc_id,alpha\n";
  for (const auto& r : rows) out << format_date(r.date) << ',' << r.doc_id << ',' << format_double(r.weight) << '\n';
}

// Sample store ---------------------------------------------------------------------

namespace {

constexpr char kStoreMagic[8] = {'N', 'V', 'S', 'A', 'M', 'P', 'L', '\0'};
constexpr std::uint32_t kStoreVersion = 1;

}  // namespace

void SampleSet::save(const std::filesystem::path& path) const {
  static_assert(std::endian::native == std::endian::little, "sample store is little endian");
  nlohmann::ordered_json index;
  index["dim"] = dim;
  index["window"] = window;
  index["market_lags"] = market_lags;
  index["num_classes"] = num_classes;
  index["task"] = task;
  index["meta"] = nlohmann::ordered_json::parse(meta);
  auto& jd = index["days"];
  jd = nlohmann::ordered_json::array();
  std::uint64_t offset = 0;
  for (const auto& d : days) {
    jd.push_back({{"date", format_date(d.date)},
                  {"return", d.ret},
                  {"doc_ids", d.doc_ids},
                  {"offset", offset},
                  {"count", d.news.cols()}});
    offset += static_cast<std::uint64_t>(d.news.size());
  }
  auto& js = index["samples"];
  js = nlohmann::ordered_json::array();
  for (const auto& s : samples) js.push_back({{"start", s.start}, {"label", s.label}});
  const std::string header = index.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out.write(kStoreMagic, sizeof kStoreMagic);
  const std::uint32_t version = kStoreVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  const std::uint64_t len = header.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(header.data(), static_cast<std::streamsize>(len));
  for (const auto& d : days)
    out.write(reinterpret_cast<const char*>(d.news.data()),
              static_cast<std::streamsize>(d.news.size() * sizeof(double)));
}

SampleSet SampleSet::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::MissingArtifact, "cannot open sample store " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (in.gcount() != sizeof magic || std::memcmp(magic, kStoreMagic, sizeof magic) != 0)
    fail(ErrorKind::InvalidData, path.string() + " is not a sample store");
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  if (version != kStoreVersion) fail(ErrorKind::InvalidData, "unsupported sample store version");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  SampleSet set;
  try {
    const auto j = nlohmann::json::parse(header);
    set.dim = j.at("dim");
    set.window = j.at("window");
    set.market_lags = j.at("market_lags");
    set.num_classes = j.at("num_classes");
    set.task = j.at("task");
    if (j.contains("meta")) set.meta = j.at("meta").dump();
    for (const auto& d : j.at("days")) {
      TradingDay day;
      day.date = parse_date(d.at("date").get<std::string>());
      day.ret = d.at("return");
      day.doc_ids = d.at("doc_ids").get<std::vector<std::string>>();
      const auto count = d.at("count").get<Eigen::Index>();
      day.news = Mat(static_cast<Eigen::Index>(set.dim), count);
      set.days.push_back(std::move(day));
    }
    for (const auto& s : j.at("samples")) set.samples.push_back({s.at("start"), s.at("label")});
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidData, std::string("corrupt sample store index: ") + e.what());
  }
  for (auto& d : set.days) {
    const auto bytes = static_cast<std::streamsize>(d.news.size() * sizeof(double));
    in.read(reinterpret_cast<char*>(d.news.data()), bytes);
    if (in.gcount() != bytes) fail(ErrorKind::InvalidData, "truncated sample store " + path.string());
  }
  for (const auto& s : set.samples)
    if (s.start + set.window >= set.days.size())
      fail(ErrorKind::InvalidData, "sample store references days beyond its end");
  return set;
}

}  // namespace newsvec

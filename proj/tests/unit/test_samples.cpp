#include <doctest.h>

#include <filesystem>

#include "newsvec/samples.hpp"

using namespace newsvec;

namespace {

std::vector<Date> weekdays(std::size_t n, const std::string& start = "2020-01-06") {
  std::vector<Date> out;
  Date d = parse_date(start);
  while (out.size() < n) {
    if (iso_weekday(d) <= 5) out.push_back(d);
    d = add_days(d, 1);
  }
  return out;
}

}  // namespace

TEST_CASE("labelers use strict thresholds") {
  const auto m = Labeler::movement();
  CHECK(m.label(0, 0.0033) == 1);
  CHECK(m.label(0, 0.00331) == 2);
  CHECK(m.label(0, -0.0029) == 1);
  CHECK(m.label(0, -0.00291) == 0);
  CHECK(m.num_classes() == 3);
  const auto d = Labeler::direction();
  CHECK(d.label(0, 0.0) == 0);
  CHECK(d.label(0, 1e-9) == 1);
  const auto c = Labeler::crises({0, 1, 1});
  CHECK(c.label(1, -5.0) == 1);
  CHECK(c.label(0, 5.0) == 0);
  CHECK_THROWS_AS(c.label(3, 0.0), Error);
}

TEST_CASE("windows, counts and labels") {
  const auto dates = weekdays(25);
  std::vector<double> returns(25);
  for (std::size_t i = 0; i < 25; ++i) returns[i] = (static_cast<double>(i) - 12.0) * 0.001;
  std::map<Date, DayNews> news;
  news[dates[3]] = {{"a", "b"}, {Vec::Constant(2, 1.0), Vec::Constant(2, 2.0)}};
  news[dates[21]] = {{"c"}, {Vec::Constant(2, -1.0)}};

  SampleOptions opt;
  const auto set = build_samples(news, dates, returns, Labeler::movement(), opt);
  REQUIRE(set.samples.size() == 5);
  CHECK(set.dim == 2);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(set.samples[i].start == i);
    CHECK(set.target_day(i) == i + 20);
    CHECK(set.samples[i].label == Labeler::movement().label(i + 20, returns[i + 20]));
  }
  const auto s0 = set.materialize(0);
  CHECK(s0.news.size() == 20);
  CHECK(s0.news[3].cols() == 2);
  CHECK(s0.news[0].cols() == 0);
  CHECK(s0.market[19](0) == returns[19]);

  opt.stride = 2;
  CHECK(build_samples(news, dates, returns, Labeler::movement(), opt).samples.size() == 3);

  // Crisis task passes the labels through.
  std::vector<int> crisis(25, 0);
  crisis[22] = 1;
  opt.stride = 1;
  const auto cs = build_samples(news, dates, returns, Labeler::crises(crisis), opt, "crisis");
  CHECK(cs.samples[2].label == 1);
  CHECK(cs.samples[1].label == 0);
  CHECK(cs.num_classes == 2);
}

TEST_CASE("market lags feed previous returns") {
  const auto dates = weekdays(8);
  const std::vector<double> r = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
  SampleOptions opt;
  opt.window = 3;
  opt.market_lags = 2;
  opt.dim = 2;
  const auto set = build_samples({}, dates, r, Labeler::direction(), opt, "direction");
  CHECK(set.samples.size() == 5);
  // Lag history before the first day is zero filled.
  const auto s = set.materialize(0);
  CHECK(s.market[0](0) == 0.1);
  CHECK(s.market[0](1) == 0.0);
  CHECK(s.market[2](0) == 0.3);
  CHECK(s.market[2](1) == 0.2);
}

TEST_CASE("alignment errors") {
  const auto dates = weekdays(25);
  std::vector<double> returns(25, 0.0);
  std::map<Date, DayNews> news;
  news[parse_date("2020-01-11")] = {{"weekend"}, {Vec::Zero(2)}};  // Saturday, not a trading day
  CHECK_THROWS_AS(build_samples(news, dates, returns, Labeler::movement(), {}), Error);

  auto unsorted = dates;
  std::swap(unsorted[4], unsorted[5]);
  CHECK_THROWS_AS(build_samples({}, unsorted, returns, Labeler::movement(), {20, 1, 1, 2}), Error);
  CHECK_THROWS_AS(build_samples({}, dates, std::vector<double>(24), Labeler::movement(), {20, 1, 1, 2}), Error);
  CHECK(build_samples({}, weekdays(10), std::vector<double>(10), Labeler::movement(), {20, 1, 1, 2}).samples.empty());
}

TEST_CASE("chronological split") {
  const auto s = chronological_split(100, 0.5, 0.25);
  CHECK(s.train_end == 50);
  CHECK(s.val_end == 75);
  CHECK(s.size == 100);
  CHECK_THROWS_AS(chronological_split(10, 0.8, 0.3), Error);
}

TEST_CASE("sample store round trip") {
  const auto dates = weekdays(23);
  std::vector<double> returns(23);
  for (std::size_t i = 0; i < 23; ++i) returns[i] = 0.001 * static_cast<double>(i % 5) - 0.002;
  std::map<Date, DayNews> news;
  news[dates[2]] = {{"x", "y"}, {Vec::Constant(3, 0.25), Vec::Constant(3, -1.0 / 3.0)}};
  auto set = build_samples(news, dates, returns, Labeler::movement(), {});
  set.meta = R"({"config_hash":"abc"})";
  const auto path = std::filesystem::temp_directory_path() / "newsvec_samples.bin";
  set.save(path);
  const auto back = SampleSet::load(path);
  CHECK(back.meta == set.meta);
  CHECK(back.samples.size() == set.samples.size());
  CHECK(back.task == set.task);
  REQUIRE(back.days.size() == set.days.size());
  for (std::size_t i = 0; i < set.days.size(); ++i) {
    CHECK(back.days[i].date == set.days[i].date);
    CHECK(back.days[i].ret == set.days[i].ret);
    CHECK(back.days[i].doc_ids == set.days[i].doc_ids);
    CHECK(back.days[i].news == set.days[i].news);
  }
  std::filesystem::remove(path);
}

TEST_CASE("attention export") {
  const auto dates = weekdays(22);
  std::vector<double> returns(22, 0.0);
  std::map<Date, DayNews> news;
  Rng rng(3);
  for (std::size_t d : {1, 6, 11}) {
    DayNews day;
    for (std::size_t i = 0; i <= d % 4; ++i) {
      day.doc_ids.push_back("n" + std::to_string(d) + "_" + std::to_string(i));
      Vec v(4);
      for (int k = 0; k < 4; ++k) v(k) = rng.uniform(-1, 1);
      day.vectors.push_back(v);
    }
    news[dates[d]] = day;
  }
  const auto set = build_samples(news, dates, returns, Labeler::movement(), {});
  PredictorConfig c;
  c.news_dim = 4;
  c.attention_size = 3;
  c.news_hidden = 2;
  c.market_hidden = 2;
  const auto params = ModelParams::initialize(c, 5);
  const auto rows = export_attention(params, set, 0, set.samples.size());
  std::map<Date, double> sums;
  std::map<Date, int> counts;
  for (const auto& r : rows) {
    sums[r.date] += r.weight;
    ++counts[r.date];
  }
  CHECK(sums.size() == 3);
  for (const auto& [d, s] : sums) CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(counts[dates[1]] == 2);
  CHECK(counts[dates[6]] == 3);
  CHECK(counts[dates[11]] == 4);

  DayNews solo{{"only"}, {Vec::Constant(4, 0.3)}};
  std::map<Date, DayNews> one;
  one[dates[0]] = solo;
  const auto set1 = build_samples(one, dates, returns, Labeler::movement(), {});
  const auto rows1 = export_attention(params, set1, 0, 1);
  REQUIRE(rows1.size() == 1);
  CHECK(rows1[0].weight == 1.0);

  // Highest-weighted row agrees with an argmax over the rows of its day.
  for (const auto& [d, n] : counts) {
    const AttentionRow* best = nullptr;
    for (const auto& r : rows)
      if (r.date == d && (!best || r.weight > best->weight)) best = &r;
    const auto& day = set.days[static_cast<std::size_t>(std::find(dates.begin(), dates.end(), d) - dates.begin())];
    const auto att = attention_pool(day.news, params);
    Eigen::Index arg = 0;
    att.weights.maxCoeff(&arg);
    CHECK(best->doc_id == day.doc_ids[static_cast<std::size_t>(arg)]);
  }
}

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "newsvec/eval.hpp"
#include "oracles.hpp"

using namespace newsvec;

TEST_CASE("accuracy and binary mcc on fixed matrices") {
  const ConfusionMatrix cm({{3, 1}, {1, 3}});
  CHECK(accuracy(cm) == 0.75);
  CHECK(mcc(cm) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(accuracy(ConfusionMatrix({{5, 0}, {0, 7}})) == 1.0);
  CHECK(mcc(ConfusionMatrix({{5, 0}, {0, 7}})) == doctest::Approx(1.0));
  CHECK(mcc(ConfusionMatrix({{0, 4}, {6, 0}})) == doctest::Approx(-1.0));
  CHECK(accuracy(ConfusionMatrix({{0, 4}, {6, 0}})) == 0.0);
  // A constant predictor leaves a zero factor under the root.
  CHECK(mcc(ConfusionMatrix({{0, 0}, {4, 6}})) == 0.0);
}

TEST_CASE("metrics agree with brute force on random label pairs") {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const int classes = 2 + static_cast<int>(rng.below(3));
    const std::size_t n = 1 + rng.below(60);
    std::vector<int> pred(n), act(n);
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] = static_cast<int>(rng.below(static_cast<std::size_t>(classes)));
      act[i] = rng.uniform() < 0.5 ? pred[i] : static_cast<int>(rng.below(static_cast<std::size_t>(classes)));
    }
    const auto cm = ConfusionMatrix::from_labels(pred, act, static_cast<std::size_t>(classes));
    CHECK(cm.total() == static_cast<long>(n));
    double hits = 0;
    for (std::size_t i = 0; i < n; ++i) hits += pred[i] == act[i];
    CHECK(accuracy(cm) == hits / static_cast<double>(n));
    const double expected = classes == 2 ? oracle::binary_mcc(pred, act) : oracle::multiclass_mcc(pred, act, classes);
    CHECK(mcc(cm) == doctest::Approx(expected).epsilon(1e-12));
    if (classes == 2) CHECK(std::abs(mcc_multiclass(cm) - oracle::binary_mcc(pred, act)) <= 1e-12);
  }
}

TEST_CASE("confusion matrix validation and csv") {
  ConfusionMatrix cm(3);
  cm.add(2, 1);
  cm.add(0, 0);
  CHECK(cm.at(2, 1) == 1);
  CHECK_THROWS_AS(cm.add(3, 0), Error);
  CHECK_THROWS_AS(ConfusionMatrix({{1, 2}, {3}}), Error);
  CHECK_THROWS_AS(ConfusionMatrix({{1, -2}, {3, 1}}), Error);
  CHECK_THROWS_AS(ConfusionMatrix::from_labels({0, 1}, {0}, 2), Error);
  const auto path = std::filesystem::temp_directory_path() / "newsvec_cm.csv";
  cm.write_csv(path);
  std::ifstream in(path);
  std::string header, row0;
  std::getline(in, header);
  std::getline(in, row0);
  CHECK(header == "predicted\\actual,0,1,2");
  CHECK(row0 == "0,1,0,0");
  std::filesystem::remove(path);
}

TEST_CASE("onsets forewarned two and three days ahead average 2.5") {
  //                        0  1  2  3  4  5  6  7  8  9 10 11 12 13
  const std::vector<int> actual = {0, 0, 0, 0, 1, 1, 0, 0, 0, 0, 0, 1, 1, 0};
  const std::vector<int> predicted = {0, 0, 1, 0, 0, 1, 0, 0, 1, 0, 0, 0, 1, 0};
  const auto r = onset_metrics(actual, predicted, 5);
  CHECK(r.total == 2);
  CHECK(r.forewarned == 2);
  CHECK(r.percent_forewarned == 100.0);
  CHECK(r.avg_days_ahead == 2.5);
  REQUIRE(r.onsets.size() == 2);
  CHECK(r.onsets[0].day == 4);
  CHECK(*r.onsets[0].warned_from == 2);
  CHECK(r.onsets[1].day == 11);
  CHECK(*r.onsets[1].warned_from == 8);
}

TEST_CASE("onset boundaries") {
  // Prediction turns 1 on the onset day itself: not forewarned.
  const auto at = onset_metrics({0, 0, 0, 1, 1}, {0, 0, 0, 1, 1});
  CHECK(at.total == 1);
  CHECK(at.forewarned == 0);
  CHECK(std::isnan(at.avg_days_ahead));

  CHECK(onset_metrics({0, 1, 0, 1}, {0, 0, 0, 0}).forewarned == 0);

  // Exactly `lookahead` days before counts; one more does not.
  CHECK(onset_metrics({0, 0, 0, 0, 1}, {1, 0, 0, 0, 0}, 4).forewarned == 1);
  CHECK(onset_metrics({0, 0, 0, 0, 1}, {1, 0, 0, 0, 0}, 3).forewarned == 0);

  // A crisis at day 0 is not a transition.
  const auto none = onset_metrics({1, 1, 0, 0}, {1, 1, 1, 1});
  CHECK(none.total == 0);
  CHECK(std::isnan(none.percent_forewarned));
  CHECK_THROWS_AS(onset_metrics({0, 1}, {0}), Error);
}

TEST_CASE("onset report ignores predictions outside lookahead windows") {
  Rng rng(4);
  std::vector<int> actual(80, 0);
  for (std::size_t t : {15, 40, 70})
    for (std::size_t k = t; k < t + 4; ++k) actual[k] = 1;
  std::vector<int> predicted(80);
  for (auto& p : predicted) p = rng.uniform() < 0.3;
  const auto base = onset_metrics(actual, predicted, 5);
  for (int trial = 0; trial < 20; ++trial) {
    auto relabeled = predicted;
    for (std::size_t t = 0; t < 80; ++t) {
      bool inside = false;
      for (std::size_t onset : {15, 40, 70}) inside |= t + 5 >= onset && t < onset;
      if (!inside) relabeled[t] = rng.uniform() < 0.5;
    }
    const auto r = onset_metrics(actual, relabeled, 5);
    CHECK(r.forewarned == base.forewarned);
    if (base.forewarned) CHECK(r.avg_days_ahead == base.avg_days_ahead);
  }
}

TEST_CASE("metrics json") {
  const ConfusionMatrix cm({{3, 1}, {1, 3}});
  const auto onsets = onset_metrics({0, 0, 1}, {0, 1, 1});
  const std::vector<Date> dates = {parse_date("2020-01-06"), parse_date("2020-01-07"), parse_date("2020-01-08")};
  const auto j = nlohmann::json::parse(metrics_json(cm, &onsets, dates, R"({"task":"crisis"})"));
  CHECK(j["samples"] == 8);
  CHECK(j["accuracy"] == 0.75);
  CHECK(j["task"] == "crisis");
  CHECK(j["onsets"]["avg_days_ahead"] == 1.0);
  CHECK(j["onsets"]["events"][0]["date"] == "2020-01-08");

  const auto none = onset_metrics({0, 0}, {0, 0});
  const auto k = nlohmann::json::parse(metrics_json(cm, &none, {}));
  CHECK(k["onsets"]["defined"] == false);
  CHECK(k["onsets"]["avg_days_ahead"].is_null());
}

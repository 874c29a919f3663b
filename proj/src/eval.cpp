#include "newsvec/eval.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

namespace newsvec {

ConfusionMatrix::ConfusionMatrix(std::size_t classes)
    : counts_(classes, std::vector<long>(classes, 0)) {
  require(classes >= 2, "confusion matrix needs at least two classes");
}

ConfusionMatrix::ConfusionMatrix(std::vector<std::vector<long>> counts) : counts_(std::move(counts)) {
  require(counts_.size() >= 2, "confusion matrix needs at least two classes");
  for (const auto& row : counts_) {
    require(row.size() == counts_.size(), "confusion matrix must be square");
    for (long c : row) require(c >= 0, "confusion counts must be non-negative");
  }
}

ConfusionMatrix ConfusionMatrix::from_labels(const std::vector<int>& predicted,
                                             const std::vector<int>& actual, std::size_t classes) {
  require(predicted.size() == actual.size(), "predicted and actual labels differ in length");
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < predicted.size(); ++i) cm.add(predicted[i], actual[i]);
  return cm;
}

void ConfusionMatrix::add(int predicted, int actual) {
  const auto n = static_cast<int>(counts_.size());
  require(predicted >= 0 && predicted < n && actual >= 0 && actual < n, "label outside the class range");
  ++counts_[static_cast<std::size_t>(predicted)][static_cast<std::size_t>(actual)];
}

long ConfusionMatrix::total() const {
  long t = 0;
  for (const auto& row : counts_)
    for (long c : row) t += c;
  return t;
}

void ConfusionMatrix::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << "predicted\\actual";
  for (std::size_t j = 0; j < classes(); ++j) out << ',' << j;
  out << '\n';
  for (std::size_t i = 0; i < classes(); ++i) {
    out << i;
    for (std::size_t j = 0; j < classes(); ++j) out << ',' << counts_[i][j];
    out << '\n';
  }
}

double accuracy(const ConfusionMatrix& cm) {
  const long total = cm.total();
  if (total == 0) return 0.0;
  long trace = 0;
  for (std::size_t i = 0; i < cm.classes(); ++i) trace += cm.at(i, i);
  return static_cast<double>(trace) / static_cast<double>(total);
}

double mcc(const ConfusionMatrix& cm) {
  if (cm.classes() != 2) return mcc_multiclass(cm);
  const double tp = static_cast<double>(cm.at(1, 1));
  const double tn = static_cast<double>(cm.at(0, 0));
  const double fp = static_cast<double>(cm.at(1, 0));
  const double fn = static_cast<double>(cm.at(0, 1));
  const double denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  if (denom == 0.0) return 0.0;
  return (tp * tn - fp * fn) / std::sqrt(denom);
}

double mcc_multiclass(const ConfusionMatrix& cm) {
  const std::size_t k = cm.classes();
  std::vector<double> pred_totals(k, 0.0), true_totals(k, 0.0);
  double correct = 0.0, total = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      const double c = static_cast<double>(cm.at(i, j));
      pred_totals[i] += c;
      true_totals[j] += c;
      total += c;
      if (i == j) correct += c;
    }
  double pt = 0.0, pp = 0.0, tt = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    pt += pred_totals[i] * true_totals[i];
    pp += pred_totals[i] * pred_totals[i];
    tt += true_totals[i] * true_totals[i];
  }
  const double denom = (total * total - pp) * (total * total - tt);
  if (denom == 0.0) return 0.0;
  return (correct * total - pt) / std::sqrt(denom);
}

OnsetReport onset_metrics(const std::vector<int>& actual, const std::vector<int>& predicted,
                          std::size_t lookahead) {
  require(actual.size() == predicted.size(), "onset_metrics: series differ in length");
  OnsetReport r;
  double days_sum = 0.0;
  for (std::size_t t = 1; t < actual.size(); ++t) {
    if (!(actual[t - 1] == 0 && actual[t] == 1)) continue;
    Onset onset{t, std::nullopt};
    const std::size_t from = t >= lookahead ? t - lookahead : 0;
    for (std::size_t j = from; j < t; ++j)
      if (predicted[j] == 1) {
        onset.warned_from = j;
        break;
      }
    if (onset.warned_from) {
      ++r.forewarned;
      days_sum += static_cast<double>(t - *onset.warned_from);
    }
    r.onsets.push_back(onset);
  }
  r.total = r.onsets.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  r.percent_forewarned = r.total ? 100.0 * static_cast<double>(r.forewarned) / static_cast<double>(r.total) : nan;
  r.avg_days_ahead = r.forewarned ? days_sum / static_cast<double>(r.forewarned) : nan;
  return r;
}

std::string metrics_json(const ConfusionMatrix& cm, const OnsetReport* onsets,
                         const std::vector<Date>& dates, const std::string& extra_json) {
  nlohmann::ordered_json j;
  j["samples"] = cm.total();
  j["accuracy"] = accuracy(cm);
  j["mcc"] = mcc(cm);
  auto& m = j["confusion"];
  m = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < cm.classes(); ++i) {
    std::vector<long> row;
    for (std::size_t k = 0; k < cm.classes(); ++k) row.push_back(cm.at(i, k));
    m.push_back(row);
  }
  if (onsets) {
    auto& o = j["onsets"];
    o["total"] = onsets->total;
    o["forewarned"] = onsets->forewarned;
    // JSON has no NaN; undefined averages become null with a flag.
    o["defined"] = onsets->total > 0;
    o["percent_forewarned"] = onsets->total ? nlohmann::ordered_json(onsets->percent_forewarned) : nullptr;
    o["avg_days_ahead"] = onsets->forewarned ? nlohmann::ordered_json(onsets->avg_days_ahead) : nullptr;
    auto& list = o["events"];
    list = nlohmann::ordered_json::array();
    for (const auto& e : onsets->onsets) {
      nlohmann::ordered_json ev;
      ev["day"] = e.day;
      if (!dates.empty()) ev["date"] = format_date(dates.at(e.day));
      ev["forewarned"] = e.warned_from.has_value();
      if (e.warned_from) ev["days_ahead"] = e.day - *e.warned_from;
      list.push_back(ev);
    }
  }
  const auto extra = nlohmann::ordered_json::parse(extra_json);
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  return j.dump(2);
}

}  // namespace newsvec

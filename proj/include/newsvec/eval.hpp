#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "newsvec/common.hpp"

namespace newsvec {

/// counts[predicted][actual].
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes);
  ConfusionMatrix(std::vector<std::vector<long>> counts);
  static ConfusionMatrix from_labels(const std::vector<int>& predicted, const std::vector<int>& actual,
                                     std::size_t classes);

  void add(int predicted, int actual);
  long at(std::size_t predicted, std::size_t actual) const { return counts_[predicted][actual]; }
  std::size_t classes() const { return counts_.size(); }
  long total() const;

  void write_csv(const std::filesystem::path& path) const;

 private:
  std::vector<std::vector<long>> counts_;
};

double accuracy(const ConfusionMatrix& cm);
/// Binary: (TP*TN - FP*FN) / sqrt((TP+FP)(TP+FN)(TN+FP)(TN+FN)), class 1
/// positive. More classes use the multiclass correlation coefficient, which
/// reduces to the binary formula. Zero denominator gives 0.
double mcc(const ConfusionMatrix& cm);
double mcc_multiclass(const ConfusionMatrix& cm);

struct Onset {
  std::size_t day = 0;
  std::optional<std::size_t> warned_from;  ///< earliest warning day, if forewarned
};

struct OnsetReport {
  std::size_t total = 0;
  std::size_t forewarned = 0;
  /// NaN when there are no onsets.
  double percent_forewarned = 0.0;
  /// NaN when nothing was forewarned.
  double avg_days_ahead = 0.0;
  std::vector<Onset> onsets;
};

/// An onset is a 0 -> 1 step in the true labels. It is forewarned when a
/// prediction of 1 occurs within `lookahead` trading days strictly before it;
/// days-ahead counts from the earliest such prediction.
OnsetReport onset_metrics(const std::vector<int>& actual, const std::vector<int>& predicted,
                          std::size_t lookahead = 5);

/// JSON metrics report. Onset dates are formatted when `dates` is non-empty.
std::string metrics_json(const ConfusionMatrix& cm, const OnsetReport* onsets,
                         const std::vector<Date>& dates, const std::string& extra_json = "{}");

}  // namespace newsvec

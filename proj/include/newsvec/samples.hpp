#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "newsvec/predictor.hpp"

namespace newsvec {

/// Rule mapping the target day's return (or precomputed crisis labels) to a
/// class index.
struct Labeler {
  enum class Kind {
    /// DOWN = 0 (return < down), PRESERVE = 1, UP = 2 (return > up).
    Movement,
    /// DOWN = 0 (return <= 0), UP = 1 (return > 0).
    Direction,
    /// Crisis labels aligned with the trading days.
    Crisis,
  };

  Kind kind = Kind::Movement;
  double up = 0.0033;
  double down = -0.0029;
  std::vector<int> crisis;

  std::size_t num_classes() const { return kind == Kind::Movement ? 3 : 2; }
  int label(std::size_t day, double ret) const;

  static Labeler movement(double up = 0.0033, double down = -0.0029) {
    return {Kind::Movement, up, down, {}};
  }
  static Labeler direction() { return {Kind::Direction, 0.0, 0.0, {}}; }
  static Labeler crises(std::vector<int> labels) { return {Kind::Crisis, 0.0, 0.0, std::move(labels)}; }
};

struct DayNews {
  std::vector<std::string> doc_ids;
  std::vector<Vec> vectors;
};

struct TradingDay {
  Date date{};
  double ret = 0.0;
  std::vector<std::string> doc_ids;
  Mat news;  ///< d x N
};

/// Trading days stored once; each sample references a window of them.
struct SampleSet {
  struct Ref {
    std::size_t start = 0;  ///< first day of the window; the target is start + window
    int label = 0;
  };

  std::size_t dim = 0;
  std::size_t window = 20;
  std::size_t market_lags = 1;
  std::size_t num_classes = 3;
  std::string task;
  /// Free-form JSON object stored with the set (provenance, config hash).
  std::string meta = "{}";
  std::vector<TradingDay> days;
  std::vector<Ref> samples;

  std::size_t target_day(std::size_t i) const { return samples[i].start + window; }
  PredictionSample materialize(std::size_t i) const;
  std::vector<PredictionSample> materialize(std::size_t begin, std::size_t end) const;

  void save(const std::filesystem::path& path) const;
  static SampleSet load(const std::filesystem::path& path);
};

struct SampleOptions {
  std::size_t window = 20;
  std::size_t stride = 1;
  std::size_t market_lags = 1;
  std::size_t dim = 0;  ///< required when no news vector is present
};

/// Windows of `window` consecutive trading days predicting the label of the
/// following day. `news` is keyed by date; every news date must be a trading
/// day.
SampleSet build_samples(const std::map<Date, DayNews>& news, const std::vector<Date>& dates,
                        const std::vector<double>& returns, const Labeler& labeler,
                        const SampleOptions& options, std::string task = "movement");

/// Chronological [train, validation, test) index ranges.
struct Split {
  std::size_t train_end = 0;
  std::size_t val_end = 0;
  std::size_t size = 0;
};

Split chronological_split(std::size_t n, double train_fraction, double val_fraction);

struct AttentionRow {
  Date date{};
  std::string doc_id;
  double weight = 0.0;
};

/// Per-news attention weights for every distinct day covered by samples
/// [begin, end). Attention depends only on the day's news, so each day is
/// reported once.
std::vector<AttentionRow> export_attention(const ModelParams& params, const SampleSet& set,
                                           std::size_t begin, std::size_t end);
void write_attention_csv(const std::filesystem::path& path, const std::vector<AttentionRow>& rows);

}  // namespace newsvec

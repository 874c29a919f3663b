#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "newsvec/common.hpp"

namespace newsvec {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct PredictorConfig {
  std::size_t news_dim = 128;
  std::size_t attention_size = 64;
  std::size_t news_hidden = 64;
  std::size_t market_hidden = 64;
  /// Returns fed per market step: today's plus (lags - 1) previous days.
  std::size_t market_lags = 1;
  std::size_t num_classes = 3;
  bool use_news = true;
  bool use_market = true;
  /// Skip news-LSTM steps on days without news instead of feeding zeros.
  bool mask_empty_days = false;
  double l2 = 1e-4;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 32;
  std::size_t epochs = 50;
  std::size_t patience = 10;
  bool class_weights = false;
  std::uint64_t seed = 1;
  std::size_t threads = 1;

  void validate() const;
};

/// Gate parameters of one LSTM. Each weight acts on [a_{t-1}; x_t].
struct LstmParams {
  Mat w_c, w_u, w_f, w_o;
  Mat b_c, b_u, b_f, b_o;
};

struct ModelParams {
  Mat att_w, att_b, att_u;  ///< W_n, b_n, u_w
  LstmParams news;
  LstmParams market;
  Mat out_w, out_b;

  /// Zero-filled parameters with the shapes implied by `config`.
  static ModelParams zeros(const PredictorConfig& config);
  /// Uniform(+-sqrt(6 / (fan_in + fan_out))) weights, zero biases.
  static ModelParams initialize(const PredictorConfig& config, std::uint64_t seed);

  std::vector<std::pair<std::string, Mat*>> blocks();
  std::vector<std::pair<std::string, const Mat*>> blocks() const;
  double squared_norm() const;
  std::size_t size() const;
  ModelParams& operator+=(const ModelParams& other);
  void scale(double factor);
};

/// T days of news (one d x N_t matrix per day, N_t may be 0), T market steps
/// and the class label.
struct PredictionSample {
  std::vector<Mat> news;
  std::vector<Vec> market;
  int label = 0;
};

struct AttentionResult {
  Vec daily;
  Vec weights;
};

AttentionResult attention_pool(const Mat& news, const ModelParams& params);

Vec lstm_encode(const std::vector<Vec>& inputs, const LstmParams& params);

/// Class probabilities.
Vec forward(const PredictionSample& sample, const ModelParams& params, const PredictorConfig& config);
/// Pre-softmax scores.
Vec logits(const PredictionSample& sample, const ModelParams& params, const PredictorConfig& config);
Vec softmax(const Vec& z);

struct LossValue {
  double value = 0.0;
  bool clamped = false;  ///< true-class probability was below 1e-12
};

/// Cross entropy against `label` plus l2 * ||Q||^2.
LossValue loss(const Vec& probs, int label, const ModelParams& params, double l2);

/// Mean weighted cross entropy over `samples` plus the L2 term.
double batch_loss(const std::vector<const PredictionSample*>& samples, const ModelParams& params,
                  const PredictorConfig& config, const std::vector<double>& class_weights = {});
ModelParams batch_gradient(const std::vector<const PredictionSample*>& samples,
                           const ModelParams& params, const PredictorConfig& config,
                           const std::vector<double>& class_weights = {},
                           double* loss_out = nullptr);

struct EpochRecord {
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainOutcome {
  ModelParams params;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  std::size_t clamped_losses = 0;
};

/// Mini-batch Adam with early stopping on validation loss; returns the
/// parameters of the best validation epoch (or the last epoch without a
/// validation set).
TrainOutcome train_predictor(const std::vector<PredictionSample>& train,
                             const std::vector<PredictionSample>& validation,
                             const PredictorConfig& config);

std::vector<double> inverse_frequency_weights(const std::vector<PredictionSample>& samples,
                                              std::size_t num_classes);

int predict_class(const PredictionSample& sample, const ModelParams& params,
                  const PredictorConfig& config);

// Checkpoints ------------------------------------------------------------------

struct Checkpoint {
  PredictorConfig config;
  ModelParams params;
  std::string metadata_json;  ///< free-form (seed, epoch, config hash, ...)
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string config_to_json(const PredictorConfig& config);
PredictorConfig config_from_json(const std::string& text);

}  // namespace newsvec

#include "newsvec/predictor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <thread>

#include <json.hpp>

namespace newsvec {

void PredictorConfig::validate() const {
  require(num_classes >= 2, "predictor needs at least two classes");
  require(use_news || use_market, "predictor needs news input, market input or both");
  if (use_news)
    require(news_dim >= 1 && attention_size >= 1 && news_hidden >= 1,
            "news dimension, attention size and news hidden size must be positive");
  if (use_market) require(market_hidden >= 1 && market_lags >= 1, "market sizes must be positive");
  require(l2 >= 0.0, "L2 weight must be non-negative");
  require(learning_rate >= 0.0, "learning rate must be non-negative");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "Adam betas must lie in [0, 1)");
  require(epsilon > 0.0, "Adam epsilon must be positive");
  require(batch_size >= 1 && epochs >= 1, "batch size and epochs must be positive");
}

// Parameters -------------------------------------------------------------------

namespace {

LstmParams lstm_zeros(std::size_t hidden, std::size_t input) {
  const auto h = static_cast<Eigen::Index>(hidden);
  const auto z = static_cast<Eigen::Index>(hidden + input);
  LstmParams p;
  for (Mat* w : {&p.w_c, &p.w_u, &p.w_f, &p.w_o}) *w = Mat::Zero(h, z);
  for (Mat* b : {&p.b_c, &p.b_u, &p.b_f, &p.b_o}) *b = Mat::Zero(h, 1);
  return p;
}

std::size_t concat_size(const PredictorConfig& c) {
  return (c.use_news ? c.news_hidden : 0) + (c.use_market ? c.market_hidden : 0);
}

template <class P, class M>
std::vector<std::pair<std::string, M*>> collect_blocks(P& p) {
  std::vector<std::pair<std::string, M*>> out{
      {"att_w", &p.att_w},       {"att_b", &p.att_b},       {"att_u", &p.att_u},
      {"news_w_c", &p.news.w_c}, {"news_w_u", &p.news.w_u}, {"news_w_f", &p.news.w_f},
      {"news_w_o", &p.news.w_o}, {"news_b_c", &p.news.b_c}, {"news_b_u", &p.news.b_u},
      {"news_b_f", &p.news.b_f}, {"news_b_o", &p.news.b_o}, {"mkt_w_c", &p.market.w_c},
      {"mkt_w_u", &p.market.w_u}, {"mkt_w_f", &p.market.w_f}, {"mkt_w_o", &p.market.w_o},
      {"mkt_b_c", &p.market.b_c}, {"mkt_b_u", &p.market.b_u}, {"mkt_b_f", &p.market.b_f},
      {"mkt_b_o", &p.market.b_o}, {"out_w", &p.out_w},       {"out_b", &p.out_b}};
  return out;
}

}  // namespace

ModelParams ModelParams::zeros(const PredictorConfig& c) {
  ModelParams p;
  const auto a = static_cast<Eigen::Index>(c.use_news ? c.attention_size : 0);
  const auto d = static_cast<Eigen::Index>(c.use_news ? c.news_dim : 0);
  p.att_w = Mat::Zero(a, d);
  p.att_b = Mat::Zero(a, 1);
  p.att_u = Mat::Zero(a, 1);
  p.news = c.use_news ? lstm_zeros(c.news_hidden, c.news_dim) : lstm_zeros(0, 0);
  p.market = c.use_market ? lstm_zeros(c.market_hidden, c.market_lags) : lstm_zeros(0, 0);
  p.out_w = Mat::Zero(static_cast<Eigen::Index>(c.num_classes),
                      static_cast<Eigen::Index>(concat_size(c)));
  p.out_b = Mat::Zero(static_cast<Eigen::Index>(c.num_classes), 1);
  return p;
}

ModelParams ModelParams::initialize(const PredictorConfig& c, std::uint64_t seed) {
  c.validate();
  ModelParams p = zeros(c);
  Rng rng(derive_seed(seed, 0x1A17));
  for (auto& [name, m] : p.blocks()) {
    if (name.find("_b") != std::string::npos || m->size() == 0) continue;
    // u_w is stored as a column but acts like a 1 x A weight row.
    const double fan = name == "att_u" ? static_cast<double>(m->rows() + 1)
                                       : static_cast<double>(m->rows() + m->cols());
    const double limit = std::sqrt(6.0 / fan);
    for (Eigen::Index j = 0; j < m->cols(); ++j)
      for (Eigen::Index i = 0; i < m->rows(); ++i) (*m)(i, j) = rng.uniform(-limit, limit);
  }
  return p;
}

std::vector<std::pair<std::string, Mat*>> ModelParams::blocks() {
  return collect_blocks<ModelParams, Mat>(*this);
}

std::vector<std::pair<std::string, const Mat*>> ModelParams::blocks() const {
  return collect_blocks<const ModelParams, const Mat>(*this);
}

double ModelParams::squared_norm() const {
  double s = 0.0;
  for (const auto& [name, m] : blocks()) s += m->squaredNorm();
  return s;
}

std::size_t ModelParams::size() const {
  std::size_t n = 0;
  for (const auto& [name, m] : blocks()) n += static_cast<std::size_t>(m->size());
  return n;
}

ModelParams& ModelParams::operator+=(const ModelParams& other) {
  auto mine = blocks();
  const auto theirs = other.blocks();
  for (std::size_t i = 0; i < mine.size(); ++i) *mine[i].second += *theirs[i].second;
  return *this;
}

void ModelParams::scale(double factor) {
  for (auto& [name, m] : blocks()) *m *= factor;
}

// Forward pieces -----------------------------------------------------------------

namespace {

Vec sigmoid(const Vec& x) { return (1.0 + (-x.array()).exp()).inverse().matrix(); }

struct AttentionTrace {
  Mat news;  ///< d x N
  Mat hidden;  ///< A x N, tanh(W_n X + b_n)
  Vec weights;
  Vec daily;
};

AttentionTrace attention_forward(const Mat& news, const ModelParams& p) {
  AttentionTrace tr;
  tr.news = news;
  if (news.cols() == 0) {
    tr.daily = Vec::Zero(p.att_w.cols());
    return tr;
  }
  tr.hidden = ((p.att_w * news).colwise() + p.att_b.col(0)).array().tanh().matrix();
  const Vec scores = tr.hidden.transpose() * p.att_u.col(0);
  tr.weights = softmax(scores);
  tr.daily = news * tr.weights;
  return tr;
}

struct LstmTrace {
  std::vector<Vec> z, cand, gate_u, gate_f, gate_o, c_prev, c, tanh_c;
  std::vector<char> skipped;
  Vec a;
  Vec c_last;
};

LstmTrace lstm_forward(const std::vector<Vec>& x, const LstmParams& p, const std::vector<char>* skip) {
  const auto h = p.w_c.rows();
  LstmTrace tr;
  Vec a = Vec::Zero(h), c = Vec::Zero(h);
  const std::size_t steps = x.size();
  tr.z.resize(steps);
  tr.cand.resize(steps);
  tr.gate_u.resize(steps);
  tr.gate_f.resize(steps);
  tr.gate_o.resize(steps);
  tr.c_prev.resize(steps);
  tr.c.resize(steps);
  tr.tanh_c.resize(steps);
  tr.skipped.assign(steps, 0);
  for (std::size_t t = 0; t < steps; ++t) {
    if (x[t].size() != p.w_c.cols() - h)
      fail(ErrorKind::InvalidArgument, "LSTM input size " + std::to_string(x[t].size()) +
                                           " does not match parameters (" +
                                           std::to_string(p.w_c.cols() - h) + ")");
    if (skip && (*skip)[t]) {
      tr.skipped[t] = 1;
      continue;
    }
    Vec z(p.w_c.cols());
    z << a, x[t];
    tr.z[t] = z;
    tr.cand[t] = ((p.w_c * z) + p.b_c.col(0)).array().tanh().matrix();
    tr.gate_u[t] = sigmoid(p.w_u * z + p.b_u.col(0));
    tr.gate_f[t] = sigmoid(p.w_f * z + p.b_f.col(0));
    tr.gate_o[t] = sigmoid(p.w_o * z + p.b_o.col(0));
    tr.c_prev[t] = c;
    c = tr.gate_u[t].cwiseProduct(tr.cand[t]) + tr.gate_f[t].cwiseProduct(c);
    tr.c[t] = c;
    tr.tanh_c[t] = c.array().tanh().matrix();
    a = tr.gate_o[t].cwiseProduct(tr.tanh_c[t]);
  }
  tr.a = a;
  tr.c_last = c;
  return tr;
}

/// Backpropagates d(loss)/d(a_T) through time, accumulating into `grad`.
/// Fills input gradients when `dx` is given.
void lstm_backward(const LstmTrace& tr, const LstmParams& p, const Vec& da_final, LstmParams& grad,
                   std::vector<Vec>* dx) {
  const auto h = p.w_c.rows();
  const std::size_t steps = tr.z.size();
  Vec da = da_final;
  Vec dc = Vec::Zero(h);
  if (dx) dx->assign(steps, Vec());
  for (std::size_t k = steps; k-- > 0;) {
    if (tr.skipped[k]) {
      if (dx) (*dx)[k] = Vec::Zero(p.w_c.cols() - h);
      continue;
    }
    const Vec d_go = da.cwiseProduct(tr.tanh_c[k]);
    dc += da.cwiseProduct(tr.gate_o[k]).cwiseProduct((1.0 - tr.tanh_c[k].array().square()).matrix());
    const Vec d_cand = dc.cwiseProduct(tr.gate_u[k]);
    const Vec d_gu = dc.cwiseProduct(tr.cand[k]);
    const Vec d_gf = dc.cwiseProduct(tr.c_prev[k]);
    const Vec dc_prev = dc.cwiseProduct(tr.gate_f[k]);

    const Vec pre_c = d_cand.cwiseProduct((1.0 - tr.cand[k].array().square()).matrix());
    const Vec pre_u = d_gu.cwiseProduct(tr.gate_u[k].cwiseProduct((1.0 - tr.gate_u[k].array()).matrix()));
    const Vec pre_f = d_gf.cwiseProduct(tr.gate_f[k].cwiseProduct((1.0 - tr.gate_f[k].array()).matrix()));
    const Vec pre_o = d_go.cwiseProduct(tr.gate_o[k].cwiseProduct((1.0 - tr.gate_o[k].array()).matrix()));

    const auto& z = tr.z[k];
    grad.w_c.noalias() += pre_c * z.transpose();
    grad.w_u.noalias() += pre_u * z.transpose();
    grad.w_f.noalias() += pre_f * z.transpose();
    grad.w_o.noalias() += pre_o * z.transpose();
    grad.b_c.col(0) += pre_c;
    grad.b_u.col(0) += pre_u;
    grad.b_f.col(0) += pre_f;
    grad.b_o.col(0) += pre_o;

    Vec dz = p.w_c.transpose() * pre_c;
    dz.noalias() += p.w_u.transpose() * pre_u;
    dz.noalias() += p.w_f.transpose() * pre_f;
    dz.noalias() += p.w_o.transpose() * pre_o;
    da = dz.head(h);
    if (dx) (*dx)[k] = dz.tail(dz.size() - h);
    dc = dc_prev;
  }
}

void attention_backward(const AttentionTrace& tr, const Vec& d_daily, const ModelParams& p,
                        ModelParams& grad) {
  if (tr.news.cols() == 0) return;
  const Vec d_weights = tr.news.transpose() * d_daily;
  const double mean = tr.weights.dot(d_weights);
  const Vec d_scores = tr.weights.cwiseProduct((d_weights.array() - mean).matrix());
  grad.att_u.col(0).noalias() += tr.hidden * d_scores;
  const Mat d_hidden = p.att_u.col(0) * d_scores.transpose();
  const Mat d_pre = d_hidden.cwiseProduct((1.0 - tr.hidden.array().square()).matrix());
  grad.att_w.noalias() += d_pre * tr.news.transpose();
  grad.att_b.col(0) += d_pre.rowwise().sum();
}

struct SampleTrace {
  std::vector<AttentionTrace> attention;
  LstmTrace news;
  LstmTrace market;
  Vec concat;
  Vec probs;
};

SampleTrace forward_trace(const PredictionSample& s, const ModelParams& p, const PredictorConfig& c) {
  SampleTrace tr;
  Eigen::Index offset = 0;
  tr.concat = Vec::Zero(static_cast<Eigen::Index>(concat_size(c)));
  if (c.use_news) {
    std::vector<Vec> daily;
    std::vector<char> skip;
    daily.reserve(s.news.size());
    for (const auto& day : s.news) {
      if (day.cols() > 0 && day.rows() != p.att_w.cols())
        fail(ErrorKind::InvalidArgument, "news vector dimension " + std::to_string(day.rows()) +
                                             " does not match the model (" +
                                             std::to_string(p.att_w.cols()) + ")");
      tr.attention.push_back(attention_forward(day, p));
      daily.push_back(tr.attention.back().daily);
      skip.push_back(c.mask_empty_days && day.cols() == 0 ? 1 : 0);
    }
    tr.news = lstm_forward(daily, p.news, &skip);
    tr.concat.head(tr.news.a.size()) = tr.news.a;
    offset = tr.news.a.size();
  }
  if (c.use_market) {
    tr.market = lstm_forward(s.market, p.market, nullptr);
    tr.concat.segment(offset, tr.market.a.size()) = tr.market.a;
  }
  tr.probs = softmax(p.out_w * tr.concat + p.out_b.col(0));
  return tr;
}

/// Gradient of weight * CE for one sample (no L2), accumulated into grad.
void backward_sample(const PredictionSample& s, const SampleTrace& tr, const ModelParams& p,
                     const PredictorConfig& c, double weight, ModelParams& grad) {
  Vec d_logits = tr.probs;
  d_logits(s.label) -= 1.0;
  d_logits *= weight;
  grad.out_w.noalias() += d_logits * tr.concat.transpose();
  grad.out_b.col(0) += d_logits;
  const Vec d_concat = p.out_w.transpose() * d_logits;
  Eigen::Index offset = 0;
  if (c.use_news) {
    const auto h = static_cast<Eigen::Index>(c.news_hidden);
    std::vector<Vec> d_daily;
    lstm_backward(tr.news, p.news, d_concat.head(h), grad.news, &d_daily);
    for (std::size_t t = 0; t < tr.attention.size(); ++t)
      attention_backward(tr.attention[t], d_daily[t], p, grad);
    offset = h;
  }
  if (c.use_market)
    lstm_backward(tr.market, p.market, d_concat.segment(offset, static_cast<Eigen::Index>(c.market_hidden)),
                  grad.market, nullptr);
}

void check_label(const PredictionSample& s, const PredictorConfig& c) {
  if (s.label < 0 || static_cast<std::size_t>(s.label) >= c.num_classes)
    fail(ErrorKind::InvalidArgument, "sample label " + std::to_string(s.label) + " outside [0, " +
                                         std::to_string(c.num_classes) + ")");
  if (c.use_market && s.market.size() != s.news.size() && c.use_news)
    fail(ErrorKind::InvalidArgument, "news and market windows differ in length");
}

double sample_weight(const PredictionSample& s, const std::vector<double>& class_weights) {
  return class_weights.empty() ? 1.0 : class_weights[static_cast<std::size_t>(s.label)];
}

constexpr double kProbFloor = 1e-12;

}  // namespace

Vec softmax(const Vec& z) {
  const Vec e = (z.array() - z.maxCoeff()).exp().matrix();
  return e / e.sum();
}

AttentionResult attention_pool(const Mat& news, const ModelParams& params) {
  if (news.cols() == 0)
    fail(ErrorKind::InvalidArgument, "attention_pool needs at least one news vector");
  auto tr = attention_forward(news, params);
  return {std::move(tr.daily), std::move(tr.weights)};
}

Vec lstm_encode(const std::vector<Vec>& inputs, const LstmParams& params) {
  if (inputs.empty()) fail(ErrorKind::InvalidArgument, "lstm_encode needs at least one step");
  return lstm_forward(inputs, params, nullptr).a;
}

Vec logits(const PredictionSample& sample, const ModelParams& params, const PredictorConfig& config) {
  const auto tr = forward_trace(sample, params, config);
  // Recover scores from the trace's concatenated state.
  return params.out_w * tr.concat + params.out_b.col(0);
}

Vec forward(const PredictionSample& sample, const ModelParams& params, const PredictorConfig& config) {
  return forward_trace(sample, params, config).probs;
}

LossValue loss(const Vec& probs, int label, const ModelParams& params, double l2) {
  LossValue out;
  double p = probs(label);
  if (p < kProbFloor) {
    p = kProbFloor;
    out.clamped = true;
  }
  out.value = -std::log(p) + l2 * params.squared_norm();
  return out;
}

double batch_loss(const std::vector<const PredictionSample*>& samples, const ModelParams& params,
                  const PredictorConfig& config, const std::vector<double>& class_weights) {
  double total = 0.0;
  for (const auto* s : samples) {
    check_label(*s, config);
    const Vec probs = forward(*s, params, config);
    total += sample_weight(*s, class_weights) * -std::log(std::max(probs(s->label), kProbFloor));
  }
  const double n = static_cast<double>(std::max<std::size_t>(1, samples.size()));
  return total / n + config.l2 * params.squared_norm();
}

ModelParams batch_gradient(const std::vector<const PredictionSample*>& samples,
                           const ModelParams& params, const PredictorConfig& config,
                           const std::vector<double>& class_weights, double* loss_out) {
  const std::size_t n = samples.size();
  std::vector<ModelParams> per_sample(n);
  std::vector<double> losses(n, 0.0);
  auto work = [&](std::size_t i) {
    const auto& s = *samples[i];
    check_label(s, config);
    const auto tr = forward_trace(s, params, config);
    const double w = sample_weight(s, class_weights);
    losses[i] = w * -std::log(std::max(tr.probs(s.label), kProbFloor));
    per_sample[i] = ModelParams::zeros(config);
    backward_sample(s, tr, params, config, w, per_sample[i]);
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(config.threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        try {
          for (std::size_t i = t; i < n; i += threads) work(i);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  // Fixed summation order keeps results independent of the thread count.
  ModelParams grad = ModelParams::zeros(config);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    grad += per_sample[i];
    total += losses[i];
  }
  const double inv = 1.0 / static_cast<double>(std::max<std::size_t>(1, n));
  grad.scale(inv);
  auto g = grad.blocks();
  const auto p = params.blocks();
  for (std::size_t b = 0; b < g.size(); ++b) *g[b].second += 2.0 * config.l2 * *p[b].second;
  if (loss_out) *loss_out = total * inv + config.l2 * params.squared_norm();
  return grad;
}

int predict_class(const PredictionSample& sample, const ModelParams& params,
                  const PredictorConfig& config) {
  Eigen::Index best = 0;
  forward(sample, params, config).maxCoeff(&best);
  return static_cast<int>(best);
}

std::vector<double> inverse_frequency_weights(const std::vector<PredictionSample>& samples,
                                              std::size_t num_classes) {
  std::vector<double> counts(num_classes, 0.0);
  for (const auto& s : samples) counts.at(static_cast<std::size_t>(s.label)) += 1.0;
  std::vector<double> w(num_classes, 0.0);
  const double n = static_cast<double>(samples.size());
  for (std::size_t j = 0; j < num_classes; ++j)
    w[j] = counts[j] > 0.0 ? n / (static_cast<double>(num_classes) * counts[j]) : 0.0;
  return w;
}

// Training ----------------------------------------------------------------------

namespace {

double accuracy_of(const std::vector<PredictionSample>& samples, const ModelParams& p,
                   const PredictorConfig& c) {
  if (samples.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& s : samples) hits += predict_class(s, p, c) == s.label ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

std::vector<const PredictionSample*> pointers(const std::vector<PredictionSample>& v) {
  std::vector<const PredictionSample*> out;
  out.reserve(v.size());
  for (const auto& s : v) out.push_back(&s);
  return out;
}

}  // namespace

TrainOutcome train_predictor(const std::vector<PredictionSample>& train,
                             const std::vector<PredictionSample>& validation,
                             const PredictorConfig& config) {
  config.validate();
  if (train.empty()) fail(ErrorKind::InvalidArgument, "train_predictor: empty training set");
  const auto weights = config.class_weights ? inverse_frequency_weights(train, config.num_classes)
                                            : std::vector<double>{};
  TrainOutcome out;
  ModelParams params = ModelParams::initialize(config, config.seed);
  ModelParams m = ModelParams::zeros(config);
  ModelParams v = ModelParams::zeros(config);
  ModelParams best = params;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  std::size_t step = 0;

  const auto train_ptrs = pointers(train);
  const auto val_ptrs = pointers(validation);
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, 0xADA, epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      std::vector<const PredictionSample*> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i)
        batch.push_back(&train[order[i]]);
      const ModelParams grad = batch_gradient(batch, params, config, weights);
      ++step;
      const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      auto pb = params.blocks();
      auto mb = m.blocks();
      auto vb = v.blocks();
      const auto gb = grad.blocks();
      for (std::size_t b = 0; b < pb.size(); ++b) {
        Mat& mm = *mb[b].second;
        Mat& vv = *vb[b].second;
        const Mat& g = *gb[b].second;
        mm = config.beta1 * mm + (1.0 - config.beta1) * g;
        vv = config.beta2 * vv + (1.0 - config.beta2) * g.cwiseProduct(g);
        *pb[b].second -= (config.learning_rate * (mm / bc1).array() /
                          ((vv / bc2).array().sqrt() + config.epsilon))
                             .matrix();
      }
    }

    EpochRecord rec;
    rec.train_loss = batch_loss(train_ptrs, params, config, weights);
    rec.train_accuracy = accuracy_of(train, params, config);
    if (!validation.empty()) {
      rec.val_loss = batch_loss(val_ptrs, params, config, weights);
      rec.val_accuracy = accuracy_of(validation, params, config);
    }
    if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.val_loss))
      fail(ErrorKind::Numerical, "predictor training diverged at epoch " + std::to_string(epoch + 1) +
                                     "; config " + config_to_json(config));
    out.history.push_back(rec);

    if (validation.empty()) {
      best = params;
      out.best_epoch = epoch;
      continue;
    }
    if (rec.val_loss < best_val) {
      best_val = rec.val_loss;
      best = params;
      out.best_epoch = epoch;
      stale = 0;
    } else if (config.patience > 0 && ++stale >= config.patience) {
      break;
    }
  }
  out.params = std::move(best);
  for (const auto& s : train)
    if (forward(s, out.params, config)(s.label) < kProbFloor) ++out.clamped_losses;
  return out;
}

// Checkpoints --------------------------------------------------------------------

namespace {

constexpr char kCheckpointMagic[8] = {'N', 'V', 'M', 'O', 'D', 'E', 'L', '\0'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <class T>
void write_pod(std::ostream& out, T v) {
  static_assert(std::endian::native == std::endian::little, "checkpoints are little endian");
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (in.gcount() != sizeof v) fail(ErrorKind::InvalidData, "truncated checkpoint");
  return v;
}

}  // namespace

std::string config_to_json(const PredictorConfig& c) {
  nlohmann::ordered_json j;
  j["news_dim"] = c.news_dim;
  j["attention_size"] = c.attention_size;
  j["news_hidden"] = c.news_hidden;
  j["market_hidden"] = c.market_hidden;
  j["market_lags"] = c.market_lags;
  j["num_classes"] = c.num_classes;
  j["use_news"] = c.use_news;
  j["use_market"] = c.use_market;
  j["mask_empty_days"] = c.mask_empty_days;
  j["l2"] = c.l2;
  j["learning_rate"] = c.learning_rate;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["epsilon"] = c.epsilon;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["patience"] = c.patience;
  j["class_weights"] = c.class_weights;
  j["seed"] = c.seed;
  return j.dump();
}

PredictorConfig config_from_json(const std::string& text) {
  PredictorConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    c.news_dim = j.at("news_dim");
    c.attention_size = j.at("attention_size");
    c.news_hidden = j.at("news_hidden");
    c.market_hidden = j.at("market_hidden");
    c.market_lags = j.at("market_lags");
    c.num_classes = j.at("num_classes");
    c.use_news = j.at("use_news");
    c.use_market = j.at("use_market");
    c.mask_empty_days = j.at("mask_empty_days");
    c.l2 = j.at("l2");
    c.learning_rate = j.at("learning_rate");
    c.beta1 = j.at("beta1");
    c.beta2 = j.at("beta2");
    c.epsilon = j.at("epsilon");
    c.batch_size = j.at("batch_size");
    c.epochs = j.at("epochs");
    c.patience = j.at("patience");
    c.class_weights = j.at("class_weights");
    c.seed = j.at("seed");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidData, std::string("malformed predictor config: ") + e.what());
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  nlohmann::ordered_json meta;
  meta["config"] = nlohmann::ordered_json::parse(config_to_json(ck.config));
  meta["metadata"] = ck.metadata_json.empty() ? nlohmann::ordered_json::object()
                                               : nlohmann::ordered_json::parse(ck.metadata_json);
  auto& shapes = meta["blocks"];
  shapes = nlohmann::ordered_json::array();
  for (const auto& [name, m] : ck.params.blocks())
    shapes.push_back({{"name", name}, {"rows", m->rows()}, {"cols", m->cols()}});
  const std::string header = meta.dump();
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  write_pod<std::uint32_t>(out, kCheckpointVersion);
  write_pod<std::uint64_t>(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& [name, m] : ck.params.blocks()) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(m->rows()));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(m->cols()));
    out.write(reinterpret_cast<const char*>(m->data()),
              static_cast<std::streamsize>(m->size() * sizeof(double)));
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::MissingArtifact, "cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (in.gcount() != sizeof magic || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    fail(ErrorKind::InvalidData, path.string() + " is not a model checkpoint");
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    fail(ErrorKind::InvalidData, "unsupported checkpoint version " + std::to_string(version));
  const auto len = read_pod<std::uint64_t>(in);
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  Checkpoint ck;
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidData, std::string("corrupt checkpoint header: ") + e.what());
  }
  ck.config = config_from_json(meta.at("config").dump());
  ck.metadata_json = meta.at("metadata").dump();
  ck.params = ModelParams::zeros(ck.config);
  for (auto& [name, m] : ck.params.blocks()) {
    const auto rows = read_pod<std::uint32_t>(in);
    const auto cols = read_pod<std::uint32_t>(in);
    if (rows != m->rows() || cols != m->cols())
      fail(ErrorKind::InvalidData, "checkpoint block " + name + " has unexpected shape");
    in.read(reinterpret_cast<char*>(m->data()), static_cast<std::streamsize>(m->size() * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(m->size() * sizeof(double)))
      fail(ErrorKind::InvalidData, "truncated checkpoint block " + name);
  }
  return ck;
}

}  // namespace newsvec

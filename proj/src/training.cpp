#include "quip/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <thread>

#include <nlohmann/json.hpp>

#include "quip/errors.hpp"
#include "quip/ops.hpp"
#include "quip/random.hpp"

namespace quip {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(l2_lambda >= 0.0)) throw ConfigError("l2_lambda must be non-negative");
  if (patience == 0) throw ConfigError("patience must be positive");
  if (patience > epochs) throw ConfigError("patience must not exceed epochs");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in (0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
  if (target_train_accuracy < 0.0 || target_train_accuracy > 1.0) {
    throw ConfigError("target_train_accuracy must lie in [0, 1]");
  }
}

Adam::Adam(ParameterSet& params, const TrainConfig& config)
    : params_(params),
      lr_(config.learning_rate),
      beta1_(config.adam_beta1),
      beta2_(config.adam_beta2),
      eps_(config.adam_eps),
      l2_(config.l2_lambda) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& p : params) {
    m_.emplace_back(p.tensor.size(), 0.0);
    v_.emplace_back(p.tensor.size(), 0.0);
  }
}

void Adam::step() {
  if (m_.size() != params_.size()) throw ContractError("Adam: parameter set changed after construction");
  for (const auto& p : params_) {
    if (p.tensor.requires_grad() && p.tensor.has_grad() && !p.tensor.grad_all_finite()) {
      throw NumericFault("non-finite gradient in parameter '" + p.name + "'");
    }
  }
  ++step_;
  const double t = static_cast<double>(step_);
  const double correction1 = 1.0 - std::pow(beta1_, t);
  const double correction2 = 1.0 - std::pow(beta2_, t);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = params_[k];
    if (!p.tensor.requires_grad()) continue;
    auto theta = p.tensor.mutable_values();
    const auto grad = p.tensor.mutable_grad();
    auto& m = m_[k];
    auto& v = v_[k];
    const double decay = p.weight_decay ? l2_ : 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double g = grad[i] + decay * theta[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      theta[i] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
    }
  }
}

EvalMetrics EvalMetrics::from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  auto ratio = [](double num, double den) { return den == 0.0 ? 0.0 : num / den; };
  auto f1 = [&](double p, double r) { return ratio(2.0 * p * r, p + r); };
  EvalMetrics m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.tn = tn;
  const double TP = static_cast<double>(tp), FP = static_cast<double>(fp);
  const double FN = static_cast<double>(fn), TN = static_cast<double>(tn);
  m.accuracy = ratio(TP + TN, TP + FP + FN + TN);
  m.precision = ratio(TP, TP + FP);
  m.recall = ratio(TP, TP + FN);
  const double neg_precision = ratio(TN, TN + FN);
  const double neg_recall = ratio(TN, TN + FP);
  m.macro_f1 = 0.5 * (f1(m.precision, m.recall) + f1(neg_precision, neg_recall));
  return m;
}

EvalMetrics compute_metrics(std::span<const double> predictions, std::span<const double> labels) {
  if (predictions.size() != labels.size()) throw ContractError("compute_metrics: predictions and labels differ in length");
  if (predictions.empty()) throw ContractError("compute_metrics: empty dataset");
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool predicted = predictions[i] >= kDecisionThreshold;
    const bool actual = labels[i] >= 0.5;
    if (predicted && actual) ++tp;
    else if (predicted) ++fp;
    else if (actual) ++fn;
    else ++tn;
  }
  return EvalMetrics::from_counts(tp, fp, fn, tn);
}

std::vector<double> predict_all(const QuipModel& model, std::span<const EncodedPair> pairs, unsigned threads) {
  std::vector<double> out(pairs.size());
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(threads, pairs.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < pairs.size(); ++i) out[i] = model.predict(pairs[i]);
    return out;
  }
  const std::size_t chunk = (pairs.size() + workers - 1) / workers;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(pairs.size(), lo + chunk);
    pool.emplace_back([&, lo, hi] {
      for (std::size_t i = lo; i < hi; ++i) out[i] = model.predict(pairs[i]);
    });
  }
  for (auto& t : pool) t.join();
  return out;
}

std::vector<EncodedPair> encode_all(const QuipModel& model, std::span<const TokenizedPair> pairs) {
  std::vector<EncodedPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(model.encode(p));
  return out;
}

namespace {
std::vector<double> labels_of(std::span<const EncodedPair> pairs) {
  std::vector<double> labels(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) labels[i] = pairs[i].label;
  return labels;
}
}  // namespace

EvalMetrics evaluate(const QuipModel& model, std::span<const TokenizedPair> dataset, unsigned threads) {
  if (dataset.empty()) throw ContractError("evaluate: empty dataset");
  const auto encoded = encode_all(model, dataset);
  return compute_metrics(predict_all(model, encoded, threads), labels_of(encoded));
}

double dataset_loss(const QuipModel& model, std::span<const EncodedPair> pairs) {
  if (pairs.empty()) throw ContractError("dataset_loss: empty dataset");
  const auto predictions = predict_all(model, pairs);
  const auto labels = labels_of(pairs);
  NoGradGuard no_grad;
  return ops::bce(Tensor::constant({predictions.size()}, predictions), labels).item();
}

bool EarlyStopping::update(std::size_t epoch, double loss) {
  improved_last_ = loss < best_loss_;
  if (improved_last_) {
    best_loss_ = loss;
    best_epoch_ = epoch;
    bad_epochs_ = 0;
    return false;
  }
  ++bad_epochs_;
  return bad_epochs_ >= patience_;
}

TrainHistory train(QuipModel& model, std::span<const TokenizedPair> train_set, std::span<const TokenizedPair> val_set,
                   const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.empty() || val_set.empty()) throw ContractError("train: training and validation sets must be non-empty");

  const auto train_encoded = encode_all(model, train_set);
  const auto val_encoded = encode_all(model, val_set);
  const auto val_labels = labels_of(val_encoded);
  const auto train_labels = labels_of(train_encoded);

  ParameterSet& params = model.parameters();
  Adam optimizer(params, config);
  EarlyStopping stopper(config.patience);
  Rng rng(config.seed);
  std::vector<std::size_t> order(train_encoded.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::vector<double>> best_weights = params.snapshot();

  TrainHistory history;
  std::vector<EncodedPair> batch;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(train_encoded[order[i]]);
      const Tensor loss = model.batch_loss(batch);
      if (!std::isfinite(loss.item())) {
        throw NumericFault("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index + 1));
      }
      params.zero_grad();
      backward(loss);
      optimizer.step();
      loss_sum += loss.item() * static_cast<double>(batch.size());
      history.examples_seen += batch.size();
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(order.size());
    const auto val_predictions = predict_all(model, val_encoded);
    {
      NoGradGuard no_grad;
      record.val_loss = ops::bce(Tensor::constant({val_predictions.size()}, val_predictions), val_labels).item();
    }
    if (!std::isfinite(record.val_loss)) {
      throw NumericFault("non-finite validation loss at epoch " + std::to_string(epoch));
    }
    record.val_metrics = compute_metrics(val_predictions, val_labels);
    if (config.track_train_metrics) {
      record.train_metrics = compute_metrics(predict_all(model, train_encoded), train_labels);
    }
    record.examples_seen = history.examples_seen;
    history.epochs.push_back(record);
    history.stopped_epoch = epoch;

    const bool stop = stopper.update(epoch, record.val_loss);
    if (stopper.improved_last()) best_weights = params.snapshot();
    if (on_epoch) on_epoch(record);
    if (stop) {
      history.stopped_early = epoch < config.epochs;
      break;
    }
    if (config.target_train_accuracy > 0.0 && record.train_metrics &&
        record.train_metrics->accuracy >= config.target_train_accuracy) {
      break;
    }
  }
  history.best_epoch = stopper.best_epoch();
  params.restore(best_weights);
  return history;
}

void write_history_jsonl(std::ostream& out, const TrainHistory& history) {
  auto metrics_json = [](const EvalMetrics& m) {
    return nlohmann::json{{"acc", m.accuracy}, {"macro_f1", m.macro_f1}, {"precision", m.precision},
                          {"recall", m.recall}, {"tp", m.tp}, {"fp", m.fp}, {"fn", m.fn}, {"tn", m.tn}};
  };
  for (const auto& e : history.epochs) {
    nlohmann::json row{{"epoch", e.epoch},
                       {"train_loss", e.train_loss},
                       {"val_loss", e.val_loss},
                       {"val", metrics_json(e.val_metrics)},
                       {"examples_seen", e.examples_seen},
                       {"best", e.epoch == history.best_epoch}};
    if (e.train_metrics) row["train"] = metrics_json(*e.train_metrics);
    out << row.dump() << '\n';
  }
}

}  // namespace quip

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "quip/model.hpp"
#include "quip/parameters.hpp"
#include "quip/textprep.hpp"

namespace quip {

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t epochs = 20;
  std::size_t batch_size = 2000;
  double l2_lambda = 1e-2;
  std::size_t patience = 5;
  std::uint64_t seed = 1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  // Evaluate the training set after every epoch (costs one extra pass).
  bool track_train_metrics = false;
  // Stop as soon as train accuracy reaches this value; 0 disables.
  // Only consulted when track_train_metrics is on.
  double target_train_accuracy = 0.0;

  void validate() const;
};

// Adam with bias-corrected moments. Parameters flagged for weight decay get
// l2_lambda * theta added to their gradient before the moment updates.
// Tensors that do not require grad are left alone.
class Adam {
 public:
  Adam(ParameterSet& params, const TrainConfig& config);

  // Applies one update from the gradients currently held by the parameters.
  // Throws NumericFault naming the parameter if a gradient is not finite.
  void step();
  std::size_t steps() const noexcept { return step_; }

 private:
  ParameterSet& params_;
  double lr_, beta1_, beta2_, eps_, l2_;
  std::size_t step_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

struct EvalMetrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double precision = 0.0;  // positive class
  double recall = 0.0;     // positive class
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::size_t total() const noexcept { return tp + fp + fn + tn; }
  // Zero divisions count as 0.
  static EvalMetrics from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn);
};

inline constexpr double kDecisionThreshold = 0.5;

// Predictions >= 0.5 count as positive.
EvalMetrics compute_metrics(std::span<const double> predictions, std::span<const double> labels);

// Forward passes without graph recording. With threads > 1 the pairs are
// split into contiguous chunks; results do not depend on the thread count.
std::vector<double> predict_all(const QuipModel& model, std::span<const EncodedPair> pairs, unsigned threads = 1);
std::vector<EncodedPair> encode_all(const QuipModel& model, std::span<const TokenizedPair> pairs);

EvalMetrics evaluate(const QuipModel& model, std::span<const TokenizedPair> dataset, unsigned threads = 1);

// Counts consecutive epochs without a strict improvement of the monitored
// loss and signals a stop once that count reaches `patience`.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  // Returns true when training should stop after this epoch.
  bool update(std::size_t epoch, double loss);
  bool improved_last() const noexcept { return improved_last_; }
  std::size_t best_epoch() const noexcept { return best_epoch_; }
  double best_loss() const noexcept { return best_loss_; }

 private:
  std::size_t patience_;
  std::size_t best_epoch_ = 0;
  double best_loss_ = std::numeric_limits<double>::infinity();
  std::size_t bad_epochs_ = 0;
  bool improved_last_ = false;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  EvalMetrics val_metrics;
  std::optional<EvalMetrics> train_metrics;
  std::size_t examples_seen = 0;  // cumulative
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t stopped_epoch = 0;
  std::size_t best_epoch = 0;
  std::size_t examples_seen = 0;
  bool stopped_early = false;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Mini-batch Adam on mean BCE with a seeded per-epoch shuffle (the last
// partial batch is kept). Validation loss drives early stopping and the
// best-epoch weights are restored at the end. A non-finite batch loss throws
// NumericFault naming the epoch and batch.
TrainHistory train(QuipModel& model, std::span<const TokenizedPair> train_set, std::span<const TokenizedPair> val_set,
                   const TrainConfig& config, const EpochCallback& on_epoch = {});

// Mean BCE of the model over encoded pairs, without recording a graph.
double dataset_loss(const QuipModel& model, std::span<const EncodedPair> pairs);

// One JSON object per epoch.
void write_history_jsonl(std::ostream& out, const TrainHistory& history);

}  // namespace quip

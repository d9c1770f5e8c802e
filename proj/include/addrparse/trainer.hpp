#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "addrparse/dataset.hpp"
#include "addrparse/encoding.hpp"
#include "addrparse/model.hpp"
#include "addrparse/optim.hpp"

namespace addrparse {

// One point of the search space; also the optimizer settings of a training run.
struct TrialConfig {
  double learning_rate = 1e-3;
  int batch_size = 32;
  OptimizerKind optimizer = OptimizerKind::kAdamW;
  double weight_decay = 1e-4;
  std::uint64_t trial_seed = 0;

  friend bool operator==(const TrialConfig&, const TrialConfig&) = default;
};

struct TrainConfig {
  int max_epochs = 10;
  int patience = 2;
  TrialConfig trial;

  void validate() const {
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (trial.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(trial.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(trial.weight_decay >= 0.0)) throw ConfigError("weight decay must be >= 0");
  }
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;  // at the first step of the epoch
  double wall_seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  int stopped_epoch = 0;
  int best_epoch = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();

  // Header "epoch,train_loss,val_loss,lr"; values in round-trip precision.
  std::string to_csv() const {
    std::string out = "epoch,train_loss,val_loss,lr\n";
    char buf[128];
    for (const auto& e : epochs) {
      std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", e.epoch, e.train_loss, e.val_loss, e.lr);
      out += buf;
    }
    return out;
  }
};

// Stops after `patience` consecutive epochs without a strict decrease of the
// validation loss.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {
    if (patience < 1) throw ConfigError("patience must be >= 1");
  }

  // Returns true when this epoch becomes the new best.
  bool observe(int epoch, double val_loss) {
    if (val_loss < best_) {
      best_ = val_loss;
      best_epoch_ = epoch;
      stale_ = 0;
      return true;
    }
    ++stale_;
    return false;
  }

  bool should_stop() const noexcept { return stale_ >= patience_; }
  int best_epoch() const noexcept { return best_epoch_; }
  double best() const noexcept { return best_; }

 private:
  int patience_;
  int stale_ = 0;
  int best_epoch_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
};

inline std::vector<std::vector<AddressSample>> make_batches(const std::vector<AddressSample>& samples,
                                                            const std::vector<std::size_t>& order,
                                                            std::size_t batch_size) {
  std::vector<std::vector<AddressSample>> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    std::vector<AddressSample> chunk;
    for (std::size_t i = start; i < std::min(order.size(), start + batch_size); ++i) chunk.push_back(samples[order[i]]);
    out.push_back(std::move(chunk));
  }
  return out;
}

// Mean token-level cross-entropy in evaluation mode, pooled over all samples.
inline double evaluate_loss(const ModelBundle& m, const std::vector<AddressSample>& samples, const Vocabulary& vocab,
                            const TagSchema& schema, std::size_t batch_size = 64) {
  if (samples.empty()) throw ConfigError("cannot evaluate loss on an empty sample set");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  double total = 0.0;
  std::size_t tokens = 0;
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const std::vector<AddressSample> chunk(samples.begin() + static_cast<std::ptrdiff_t>(start),
                                           samples.begin() + static_cast<std::ptrdiff_t>(std::min(samples.size(), start + batch_size)));
    const Batch b = encode_batch(chunk, vocab, schema);
    const std::size_t n = b.real_count();
    total += loss(m, b, Mode::kEval) * static_cast<double>(n);
    tokens += n;
  }
  return total / static_cast<double>(tokens);
}

struct TrainResult {
  ModelBundle model;  // weights from the best epoch
  TrainLog log;
  Optimizer optimizer;  // state at the best epoch
};

inline std::uint64_t total_steps(int epochs, std::size_t train_size, int batch_size) {
  const std::size_t per_epoch = (train_size + static_cast<std::size_t>(batch_size) - 1) / static_cast<std::size_t>(batch_size);
  return static_cast<std::uint64_t>(epochs) * per_epoch;
}

// Mini-batch training with a linear schedule, early stopping on validation
// loss and best-checkpoint restoration. `val_loss_fn(model, epoch)` supplies
// the validation criterion; `on_epoch(model, record)` observes each epoch.
template <typename ValLossFn, typename EpochHook>
TrainResult train(ModelBundle model, const std::vector<AddressSample>& train_set,
                  const std::vector<AddressSample>& validation_set, const Vocabulary& vocab,
                  const TagSchema& schema, const TrainConfig& tc, ValLossFn&& val_loss_fn, EpochHook&& on_epoch) {
  tc.validate();
  if (train_set.empty() || validation_set.empty()) throw ConfigError("train and validation splits must be non-empty");

  const TrialConfig& trial = tc.trial;
  OptimizerHyper hyper;
  hyper.weight_decay = trial.weight_decay;
  Optimizer opt(trial.optimizer, hyper, model.params);
  const LrSchedule schedule{trial.learning_rate, total_steps(tc.max_epochs, train_set.size(), trial.batch_size)};
  Rng dropout_rng(derive_seed(trial.trial_seed, 0xd5));

  EarlyStopping stopper(tc.patience);
  TrainResult result{model, {}, opt};
  std::uint64_t step = 0;
  std::vector<std::size_t> order(train_set.size());

  for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(trial.trial_seed, static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = schedule.at(step);
    double loss_sum = 0.0;
    std::size_t token_sum = 0;
    for (const auto& chunk : make_batches(train_set, order, static_cast<std::size_t>(trial.batch_size))) {
      const Batch b = encode_batch(chunk, vocab, schema);
      LossAndGrads lg = loss_and_grads(model, b, Mode::kTrain, &dropout_rng);
      if (!std::isfinite(lg.loss)) throw NonFiniteGradient("non-finite training loss");
      opt.step(model.params, lg.grads, schedule.at(step));
      ++step;
      loss_sum += lg.loss * static_cast<double>(b.real_count());
      token_sum += b.real_count();
    }
    rec.train_loss = loss_sum / static_cast<double>(token_sum);
    rec.val_loss = val_loss_fn(static_cast<const ModelBundle&>(model), epoch);
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.epochs.push_back(rec);
    on_epoch(static_cast<const ModelBundle&>(model), rec);

    if (stopper.observe(epoch, rec.val_loss)) {
      result.model = model;
      result.optimizer = opt;
    }
    result.log.stopped_epoch = epoch;
    if (stopper.should_stop()) break;
  }
  result.log.best_epoch = stopper.best_epoch();
  result.log.best_val_loss = stopper.best();
  if (result.log.best_epoch == 0) throw NonFiniteGradient("validation loss never finite");
  return result;
}

inline TrainResult train(ModelBundle model, const DatasetSplits& splits, const Vocabulary& vocab,
                         const TagSchema& schema, const TrainConfig& tc) {
  return train(
      std::move(model), splits.train, splits.validation, vocab, schema, tc,
      [&](const ModelBundle& m, int) { return evaluate_loss(m, splits.validation, vocab, schema); },
      [](const ModelBundle&, const EpochRecord&) {});
}

}  // namespace addrparse

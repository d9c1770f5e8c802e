#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "addrparse/trainer.hpp"

namespace addrparse {

struct SearchSpace {
  double lr_min = 5e-5;
  double lr_max = 1e-2;
  bool log_uniform_lr = true;
  std::vector<int> batch_sizes = {8, 16, 32, 64};
  std::vector<OptimizerKind> optimizers = {OptimizerKind::kAdamW, OptimizerKind::kRmsProp, OptimizerKind::kSgd};
  std::vector<double> weight_decays = {1e-3, 1e-2, 1e-4};

  void validate() const {
    if (!(lr_min > 0.0 && lr_min <= lr_max)) throw ConfigError("invalid learning-rate range");
    if (batch_sizes.empty() || optimizers.empty() || weight_decays.empty()) {
      throw ConfigError("search space has an empty choice set");
    }
  }

  bool contains(const TrialConfig& c) const {
    auto in = [](const auto& set, const auto& v) { return std::find(set.begin(), set.end(), v) != set.end(); };
    return c.learning_rate >= lr_min && c.learning_rate <= lr_max && in(batch_sizes, c.batch_size) &&
           in(optimizers, c.optimizer) && in(weight_decays, c.weight_decay);
  }
};

inline TrialConfig sample_trial(const SearchSpace& space, Rng& rng) {
  space.validate();
  TrialConfig c;
  if (space.log_uniform_lr) {
    c.learning_rate = std::exp(rng.uniform(std::log(space.lr_min), std::log(space.lr_max)));
  } else {
    c.learning_rate = rng.uniform(space.lr_min, space.lr_max);
  }
  c.learning_rate = std::clamp(c.learning_rate, space.lr_min, space.lr_max);
  c.batch_size = rng.pick(space.batch_sizes);
  c.optimizer = rng.pick(space.optimizers);
  c.weight_decay = rng.pick(space.weight_decays);
  return c;
}

enum class TrialStatus { kCompleted, kFailed };

struct TrialRecord {
  std::size_t index = 0;
  TrialConfig config;
  TrialStatus status = TrialStatus::kCompleted;
  double best_val_loss = std::numeric_limits<double>::infinity();
  TrainLog log;
  std::string failure;
};

struct StudyResult {
  std::vector<TrialRecord> trials;
  std::optional<std::size_t> best_trial;
  std::optional<ModelBundle> best_model;

  std::string to_csv() const {
    std::string out = "trial,lr,batch,optimizer,wd,status,best_val_loss\n";
    char buf[256];
    for (const auto& t : trials) {
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%d,%s,%.17g,%s,%.17g\n", t.index, t.config.learning_rate,
                    t.config.batch_size, to_string(t.config.optimizer).c_str(), t.config.weight_decay,
                    t.status == TrialStatus::kCompleted ? "completed" : "failed", t.best_val_loss);
      out += buf;
    }
    return out;
  }
};

// Lowest best-validation-loss among completed trials; ties go to the lower index.
inline std::optional<std::size_t> select_best(const std::vector<TrialRecord>& trials) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    if (trials[i].status != TrialStatus::kCompleted) continue;
    if (!best || trials[i].best_val_loss < trials[*best].best_val_loss ||
        (trials[i].best_val_loss == trials[*best].best_val_loss && trials[i].index < trials[*best].index)) {
      best = i;
    }
  }
  return best;
}

inline TrialConfig best_config(const StudyResult& sr) {
  const auto best = select_best(sr.trials);
  if (!best) throw StudyFailed("study has no completed trials");
  return sr.trials[*best].config;
}

struct StudyConfig {
  EncoderConfig encoder;
  HeadConfig head;
  SearchSpace space;
  int n_trials = 40;
  std::uint64_t master_seed = 0;
  int max_epochs = 10;
  int patience = 2;
  unsigned threads = 0;  // 0: hardware concurrency
};

inline std::uint64_t trial_seed(std::uint64_t master_seed, std::size_t index) {
  return derive_seed(master_seed, static_cast<std::uint64_t>(index));
}

struct TrialOutcome {
  TrialRecord record;
  std::optional<ModelBundle> model;
};

// A trial depends only on (study config, data, index).
inline TrialOutcome run_trial(const StudyConfig& sc, const DatasetSplits& splits, const Vocabulary& vocab,
                              const TagSchema& schema, std::size_t index) {
  TrialOutcome out;
  auto& rec = out.record;
  rec.index = index;
  const std::uint64_t seed = trial_seed(sc.master_seed, index);
  Rng rng(seed);
  rec.config = sample_trial(sc.space, rng);
  rec.config.trial_seed = seed;
  TrainConfig tc;
  tc.max_epochs = sc.max_epochs;
  tc.patience = sc.patience;
  tc.trial = rec.config;
  try {
    ModelBundle m = init_model(sc.encoder, sc.head, schema, vocab, derive_seed(seed, 0x1a17));
    TrainResult tr = train(std::move(m), splits, vocab, schema, tc);
    rec.log = std::move(tr.log);
    rec.best_val_loss = rec.log.best_val_loss;
    if (!std::isfinite(rec.best_val_loss)) throw NonFiniteGradient("non-finite validation loss");
    out.model = std::move(tr.model);
  } catch (const NonFiniteGradient& e) {
    rec.status = TrialStatus::kFailed;
    rec.failure = e.what();
    rec.best_val_loss = std::numeric_limits<double>::infinity();
  }
  return out;
}

inline StudyResult run_study(const StudyConfig& sc, const DatasetSplits& splits, const Vocabulary& vocab,
                             const TagSchema& schema) {
  if (sc.n_trials < 1) throw ConfigError("n_trials must be >= 1");
  sc.space.validate();
  const std::size_t n = static_cast<std::size_t>(sc.n_trials);
  std::vector<TrialOutcome> outcomes(n);
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    try {
      for (std::size_t i = next++; i < n; i = next++) outcomes[i] = run_trial(sc, splits, vocab, schema, i);
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!error) error = std::current_exception();
      next = n;
    }
  };
  unsigned threads = sc.threads ? sc.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);

  StudyResult sr;
  for (auto& o : outcomes) sr.trials.push_back(std::move(o.record));
  sr.best_trial = select_best(sr.trials);
  if (!sr.best_trial) throw StudyFailed("all " + std::to_string(n) + " trials failed");
  sr.best_model = std::move(outcomes[*sr.best_trial].model);
  return sr;
}

}  // namespace addrparse

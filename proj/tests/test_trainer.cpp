#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "addrparse/generator.hpp"
#include "addrparse/trainer.hpp"

namespace addrparse {
namespace {

struct TrainerData {
  TagSchema schema = default_schema();
  DatasetSplits splits = split_dataset(generate_dataset(5, 60, schema), 5);
  Vocabulary vocab = Vocabulary::build(splits.train, 1);

  ModelBundle model(HeadKind head = HeadKind::kLinear, std::uint64_t seed = 1) const {
    EncoderConfig ec = variant("small");
    ec.d_model = 16;
    ec.n_heads = 2;
    ec.d_ff = 32;
    return init_model(ec, HeadConfig{head}, schema, vocab, seed);
  }
};

TrainConfig quick_config(int epochs, int patience = 2) {
  TrainConfig tc;
  tc.max_epochs = epochs;
  tc.patience = patience;
  tc.trial.learning_rate = 3e-3;
  tc.trial.batch_size = 8;
  tc.trial.optimizer = OptimizerKind::kAdamW;
  tc.trial.weight_decay = 1e-4;
  tc.trial.trial_seed = 77;
  return tc;
}

TEST(EarlyStopping, StrictDecreaseRule) {
  EarlyStopping es(2);
  EXPECT_TRUE(es.observe(1, 1.0));
  EXPECT_TRUE(es.observe(2, 0.9));
  EXPECT_FALSE(es.observe(3, 0.9));  // equal is not an improvement
  EXPECT_FALSE(es.should_stop());
  EXPECT_FALSE(es.observe(4, 0.95));
  EXPECT_TRUE(es.should_stop());
  EXPECT_EQ(es.best_epoch(), 2);
  EXPECT_EQ(es.best(), 0.9);
}

TEST(Train, LossTraceStopsAtFourAndRestoresEpochTwo) {
  TrainerData s;
  const std::vector<double> trace = {1.0, 0.9, 0.95, 0.97, 0.5, 0.4};
  std::vector<ModelBundle> snapshots;
  const auto res = train(
      s.model(), s.splits.train, s.splits.validation, s.vocab, s.schema, quick_config(10),
      [&](const ModelBundle&, int epoch) { return trace[static_cast<std::size_t>(epoch - 1)]; },
      [&](const ModelBundle& m, const EpochRecord&) { snapshots.push_back(m); });
  EXPECT_EQ(res.log.stopped_epoch, 4);
  EXPECT_EQ(res.log.epochs.size(), 4u);
  EXPECT_EQ(res.log.best_epoch, 2);
  EXPECT_EQ(res.log.best_val_loss, 0.9);
  ASSERT_EQ(snapshots.size(), 4u);
  EXPECT_EQ(res.model, snapshots[1]);
  EXPECT_FALSE(res.model == snapshots[3]);
}

TEST(Train, SingleEpoch) {
  TrainerData s;
  const auto res = train(s.model(), s.splits, s.vocab, s.schema, quick_config(1));
  EXPECT_EQ(res.log.epochs.size(), 1u);
  EXPECT_EQ(res.log.best_epoch, 1);
  EXPECT_EQ(res.log.stopped_epoch, 1);
}

TEST(Train, DeterministicForSameSeed) {
  TrainerData s;
  const auto a = train(s.model(HeadKind::kMlp), s.splits, s.vocab, s.schema, quick_config(3));
  const auto b = train(s.model(HeadKind::kMlp), s.splits, s.vocab, s.schema, quick_config(3));
  ASSERT_EQ(a.log.epochs.size(), b.log.epochs.size());
  for (std::size_t i = 0; i < a.log.epochs.size(); ++i) {
    EXPECT_EQ(a.log.epochs[i].train_loss, b.log.epochs[i].train_loss);
    EXPECT_EQ(a.log.epochs[i].val_loss, b.log.epochs[i].val_loss);
    EXPECT_EQ(a.log.epochs[i].lr, b.log.epochs[i].lr);
  }
  EXPECT_EQ(a.log.to_csv(), b.log.to_csv());
  EXPECT_EQ(a.model, b.model);
  EXPECT_EQ(a.optimizer, b.optimizer);

  TrainConfig other = quick_config(3);
  other.trial.trial_seed = 78;
  const auto c = train(s.model(HeadKind::kMlp), s.splits, s.vocab, s.schema, other);
  EXPECT_NE(a.log.epochs[0].train_loss, c.log.epochs[0].train_loss);
}

TEST(Train, RestoredModelHasMinimumValidationLoss) {
  TrainerData s;
  TrainConfig tc = quick_config(6, 6);
  tc.trial.learning_rate = 1e-2;
  const auto res = train(s.model(HeadKind::kMlp), s.splits, s.vocab, s.schema, tc);
  double best = INFINITY;
  for (const auto& e : res.log.epochs) best = std::min(best, e.val_loss);
  EXPECT_EQ(res.log.best_val_loss, best);
  EXPECT_NEAR(evaluate_loss(res.model, s.splits.validation, s.vocab, s.schema), best, 1e-12);
  EXPECT_LE(res.log.stopped_epoch, tc.max_epochs);
}

TEST(Train, LearningRateFollowsLinearSchedule) {
  TrainerData s;
  const TrainConfig tc = quick_config(3, 5);
  const auto res = train(s.model(), s.splits, s.vocab, s.schema, tc);
  const std::uint64_t per_epoch = (s.splits.train.size() + 7) / 8;
  const LrSchedule sched{tc.trial.learning_rate, 3 * per_epoch};
  for (std::size_t e = 0; e < res.log.epochs.size(); ++e) {
    EXPECT_DOUBLE_EQ(res.log.epochs[e].lr, sched.at(e * per_epoch));
  }
}

TEST(Train, ConfigErrors) {
  TrainerData s;
  EXPECT_THROW(train(s.model(), DatasetSplits{{}, s.splits.validation, {}}, s.vocab, s.schema, quick_config(1)),
               ConfigError);
  EXPECT_THROW(train(s.model(), DatasetSplits{s.splits.train, {}, {}}, s.vocab, s.schema, quick_config(1)),
               ConfigError);
  TrainConfig bad = quick_config(0);
  EXPECT_THROW(train(s.model(), s.splits, s.vocab, s.schema, bad), ConfigError);
  bad = quick_config(1, 0);
  EXPECT_THROW(train(s.model(), s.splits, s.vocab, s.schema, bad), ConfigError);
}

TEST(Train, ExplodingStepsSurfaceAsNonFinite) {
  TrainerData s;
  TrainConfig tc = quick_config(3);
  tc.trial.optimizer = OptimizerKind::kSgd;
  tc.trial.learning_rate = 1e200;
  EXPECT_THROW(train(s.model(), s.splits, s.vocab, s.schema, tc), NonFiniteGradient);
}

TEST(EvaluateLoss, NearLog25AtInit) {
  TrainerData s;
  for (std::uint64_t seed : {1, 2, 3}) {
    EXPECT_NEAR(evaluate_loss(s.model(HeadKind::kMlp, seed), s.splits.test, s.vocab, s.schema), std::log(25.0), 0.5);
    EXPECT_NEAR(evaluate_loss(s.model(HeadKind::kLinear, seed), s.splits.test, s.vocab, s.schema), std::log(25.0), 0.5);
  }
}

TEST(EvaluateLoss, BatchSizeInvariant) {
  TrainerData s;
  const auto m = s.model(HeadKind::kMlp);
  const double a = evaluate_loss(m, s.splits.train, s.vocab, s.schema, 8);
  const double b = evaluate_loss(m, s.splits.train, s.vocab, s.schema, 64);
  const double c = evaluate_loss(m, s.splits.train, s.vocab, s.schema, 1);
  EXPECT_NEAR(a, b, 1e-9);
  EXPECT_NEAR(a, c, 1e-9);
  EXPECT_THROW(evaluate_loss(m, {}, s.vocab, s.schema), ConfigError);
}

TEST(EvaluateLoss, MemorizedTrainSetHasLowLoss) {
  TrainerData s;
  std::vector<AddressSample> tiny(s.splits.train.begin(), s.splits.train.begin() + 8);
  TrainConfig tc = quick_config(150, 150);
  tc.trial.learning_rate = 1e-2;
  tc.trial.weight_decay = 0.0;
  const auto res = train(
      s.model(HeadKind::kLinear), tiny, tiny, s.vocab, s.schema, tc,
      [&](const ModelBundle& m, int) { return evaluate_loss(m, tiny, s.vocab, s.schema); },
      [](const ModelBundle&, const EpochRecord&) {});
  EXPECT_LT(evaluate_loss(res.model, tiny, s.vocab, s.schema), 0.1);
}

TEST(MakeBatches, ShuffledOrderVisitsEverySampleOnce) {
  TrainerData s;
  std::vector<std::size_t> order(s.splits.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(77, 1));
  rng.shuffle(order);
  const auto batches = make_batches(s.splits.train, order, 8);
  std::multiset<std::string> seen, expect;
  std::size_t count = 0;
  for (const auto& b : batches) {
    EXPECT_LE(b.size(), 8u);
    for (const auto& smp : b) {
      std::string key;
      for (const auto& t : smp.tokens) key += t.str() + " ";
      seen.insert(key);
      ++count;
    }
  }
  for (const auto& smp : s.splits.train) {
    std::string key;
    for (const auto& t : smp.tokens) key += t.str() + " ";
    expect.insert(key);
  }
  EXPECT_EQ(count, s.splits.train.size());
  EXPECT_EQ(seen, expect);
}

TEST(TrainLog, CsvLayout) {
  TrainLog log;
  log.epochs.push_back({1, 2.5, 2.25, 1e-3, 0.1});
  EXPECT_EQ(log.to_csv().substr(0, 29), "epoch,train_loss,val_loss,lr\n");
}

}  // namespace
}  // namespace addrparse

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "addrparse/checkpoint.hpp"
#include "addrparse/generator.hpp"
#include "addrparse/model.hpp"
#include "gradcheck.hpp"
#include "test_util.hpp"

namespace addrparse {
namespace {

struct Fixture {
  TagSchema schema = default_schema();
  std::vector<AddressSample> data = generate_dataset(21, 40, schema);
  Vocabulary vocab = Vocabulary::build(data, 1);
};

EncoderConfig small_encoder() {
  EncoderConfig ec = variant("small");
  ec.d_model = 16;
  ec.n_heads = 2;
  ec.d_ff = 24;
  return ec;
}

TEST(ModelConfig, Validation) {
  EncoderConfig ec;
  ec.n_heads = 5;
  EXPECT_THROW(ec.validate(), ConfigError);
  ec = EncoderConfig{};
  ec.max_len = 128;
  EXPECT_THROW(ec.validate(), ConfigError);
  HeadConfig hc;
  hc.dropout_p = 1.0;
  EXPECT_THROW(hc.validate(), ConfigError);
  EXPECT_THROW(variant("huge"), ConfigError);
  EXPECT_THROW(init_model(ec, HeadConfig{}, 10, 25, 1), ConfigError);
}

TEST(ModelConfig, HeadParameterCounts) {
  const EncoderConfig ec;  // d_model 64
  EXPECT_EQ(head_parameter_count(ec, HeadConfig{HeadKind::kLinear}, 25), 1625u);
  EXPECT_EQ(head_parameter_count(ec, HeadConfig{HeadKind::kMlp, 64}, 25), 9945u);
}

TEST(ModelConfig, CountsMatchAllocatedSizes) {
  for (const auto& name : variant_names()) {
    for (HeadKind k : {HeadKind::kLinear, HeadKind::kMlp}) {
      const EncoderConfig ec = variant(name);
      const HeadConfig hc{k};
      const ModelBundle m = init_model(ec, hc, 300, 25, 5);
      EXPECT_EQ(m.parameter_count(), parameter_count(ec, hc, 300, 25)) << name;
      std::size_t head = 0;
      for (std::size_t i = m.head_offset(); i < m.params.size(); ++i) head += static_cast<std::size_t>(m.params[i].size());
      EXPECT_EQ(head, head_parameter_count(ec, hc, 25));
    }
  }
}

TEST(InitModel, DeterministicAndFinite) {
  Fixture f;
  const auto a = init_model(variant("distil"), HeadConfig{HeadKind::kMlp}, f.schema, f.vocab, 9);
  const auto b = init_model(variant("distil"), HeadConfig{HeadKind::kMlp}, f.schema, f.vocab, 9);
  EXPECT_EQ(a, b);
  EXPECT_TRUE(a.all_finite());
  const auto c = init_model(variant("distil"), HeadConfig{HeadKind::kMlp}, f.schema, f.vocab, 10);
  EXPECT_FALSE(a == c);
  // Layer-norm gains start at one, biases at zero.
  EXPECT_TRUE(a.layer(0, kLn1Gain).isOnes());
  EXPECT_TRUE(a.layer(0, kBq).isZero());
}

TEST(Forward, ShapeAndDeterminism) {
  Fixture f;
  const auto m = init_model(variant("base"), HeadConfig{HeadKind::kMlp}, f.schema, f.vocab, 1);
  std::vector<AddressSample> two = {f.data[0], f.data[1]};
  two[0].tokens.resize(5);
  two[0].tags.assign(5, 0);
  two[1].tokens.resize(3);
  two[1].tags.assign(3, 0);
  for (auto& t : two[0].tokens) t = turkish_lowercase("x");
  for (auto& t : two[1].tokens) t = turkish_lowercase("y");
  const Batch b = encode_batch(two, f.vocab, f.schema);
  const auto r1 = forward(m, b, Mode::kEval);
  EXPECT_EQ(r1.logits.rows(), 2 * 5);
  EXPECT_EQ(r1.logits.cols(), 25);
  const auto r2 = forward(m, b, Mode::kEval);
  EXPECT_EQ(r1.logits, r2.logits);

  // Pad keys get zero attention, real rows are distributions.
  for (int l = 0; l < m.encoder.n_layers; ++l) {
    for (int h = 0; h < m.encoder.n_heads; ++h) {
      const Matrix& a = r1.cache.attention(l, 1, h, m.encoder.n_heads);
      for (Eigen::Index i = 0; i < a.rows(); ++i) {
        EXPECT_EQ(a(i, 3), 0.0);
        EXPECT_EQ(a(i, 4), 0.0);
        EXPECT_NEAR(a.row(i).sum(), 1.0, 1e-12);
      }
    }
  }
}

TEST(Forward, PaddingDoesNotChangeRealPositions) {
  Fixture f;
  const auto m = init_model(small_encoder(), HeadConfig{HeadKind::kLinear}, f.schema, f.vocab, 3);
  const AddressSample shortest = *std::min_element(f.data.begin(), f.data.end(),
                                                   [](const auto& a, const auto& b) { return a.size() < b.size(); });
  const AddressSample longest = *std::max_element(f.data.begin(), f.data.end(),
                                                  [](const auto& a, const auto& b) { return a.size() < b.size(); });
  ASSERT_LT(shortest.size(), longest.size());
  const auto alone = forward(m, encode_batch({shortest}, f.vocab, f.schema), Mode::kEval);
  const auto padded = forward(m, encode_batch({shortest, longest}, f.vocab, f.schema), Mode::kEval);
  for (std::size_t i = 0; i < shortest.size(); ++i) {
    EXPECT_LT((alone.at(0, i) - padded.at(0, i)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Forward, ShapeErrors) {
  Fixture f;
  const auto m = init_model(small_encoder(), HeadConfig{}, f.schema, f.vocab, 3);
  Batch b = encode_batch({f.data[0]}, f.vocab, f.schema);
  b.token_ids[0] = static_cast<int>(f.vocab.size());
  EXPECT_THROW(forward(m, b, Mode::kEval), ShapeError);
  Batch empty;
  EXPECT_THROW(forward(m, empty, Mode::kEval), ShapeError);
}

TEST(Loss, UniformLogitsGiveLog25) {
  Fixture f;
  auto m = init_model(small_encoder(), HeadConfig{HeadKind::kLinear}, f.schema, f.vocab, 3);
  m.params[m.head_offset()].setZero();
  const Batch b = encode_batch({f.data[0], f.data[1]}, f.vocab, f.schema);
  EXPECT_NEAR(loss(m, b), std::log(25.0), 1e-12);
  EXPECT_NEAR(std::log(25.0), 3.2189, 1e-4);
}

TEST(Loss, VanishesWithGrowingMargin) {
  Fixture f;
  const Batch b = encode_batch({f.data[0]}, f.vocab, f.schema);
  double previous = std::numeric_limits<double>::infinity();
  for (double margin : {1.0, 5.0, 10.0, 20.0, 40.0}) {
    Matrix logits = Matrix::Zero(static_cast<Eigen::Index>(b.cols), 25);
    for (std::size_t i = 0; i < b.cols; ++i) logits(static_cast<Eigen::Index>(i), b.tag(0, i)) = margin;
    const double l = detail::cross_entropy(logits, b, nullptr);
    EXPECT_NEAR(l, std::log1p(24.0 * std::exp(-margin)), 1e-12);
    EXPECT_LT(l, previous);
    previous = l;
  }
  EXPECT_LT(previous, 1e-15);
}

TEST(Loss, AllMaskedBatchRaises) {
  Fixture f;
  const auto m = init_model(small_encoder(), HeadConfig{}, f.schema, f.vocab, 3);
  Batch b = encode_batch({f.data[0]}, f.vocab, f.schema);
  std::fill(b.mask.begin(), b.mask.end(), 0);
  Rng rng(1);
  EXPECT_THROW(loss_and_grads(m, b, Mode::kTrain, &rng), EmptyLoss);
}

TEST(Loss, PermutationEquivariantOverBatchOrder) {
  Fixture f;
  const auto m = init_model(small_encoder(), HeadConfig{HeadKind::kMlp}, f.schema, f.vocab, 4);
  std::vector<AddressSample> batch(f.data.begin(), f.data.begin() + 8);
  const double a = loss(m, encode_batch(batch, f.vocab, f.schema));
  std::reverse(batch.begin(), batch.end());
  std::rotate(batch.begin(), batch.begin() + 3, batch.end());
  const double b = loss(m, encode_batch(batch, f.vocab, f.schema));
  EXPECT_NEAR(a, b, 1e-12);
}

TEST(Softmax, RowsSumToOne) {
  Fixture f;
  const auto m = init_model(variant("small"), HeadConfig{HeadKind::kMlp}, f.schema, f.vocab, 6);
  const auto fr = forward(m, encode_batch(f.data, f.vocab, f.schema), Mode::kEval);
  for (Eigen::Index r = 0; r < fr.logits.rows(); ++r) EXPECT_NEAR(softmax(fr.logits.row(r)).sum(), 1.0, 1e-9);
}

TEST(Dropout, InvertedScalingPreservesExpectation) {
  Rng rng(99);
  const double x = 3.7;
  const Matrix mask = dropout_mask(100, 100, 0.4, rng);  // 10^4 draws
  const double mean = (x * mask.array()).mean();
  EXPECT_NEAR(mean, x, 0.02 * x);
  const double keep = (mask.array() > 0).cast<double>().mean();
  EXPECT_NEAR(keep, 0.6, 0.02);
}

TEST(Dropout, EvalModeIsDeterministicTrainModeIsNot) {
  Fixture f;
  const auto m = init_model(small_encoder(), HeadConfig{HeadKind::kMlp}, f.schema, f.vocab, 4);
  const Batch b = encode_batch({f.data[0], f.data[1]}, f.vocab, f.schema);
  Rng r1(1), r2(2);
  EXPECT_EQ(forward(m, b, Mode::kEval, &r1).logits, forward(m, b, Mode::kEval, &r2).logits);
  EXPECT_NE(forward(m, b, Mode::kTrain, &r1).logits, forward(m, b, Mode::kTrain, &r2).logits);
  EXPECT_THROW(forward(m, b, Mode::kTrain, nullptr), ConfigError);
}

TEST(Gradients, MatchFiniteDifferencesDropoutOff) {
  for (std::uint64_t seed = 100; seed < 106; ++seed) {
    const auto tc = testing::random_tiny_case(seed);
    const auto res = testing::check_gradients(tc.model, tc.batch, Mode::kEval);
    EXPECT_LT(res.max_rel_error, 1e-4) << "seed " << seed << ": " << res.worst;
  }
}

TEST(Gradients, MatchFiniteDifferencesWithFixedDropoutMask) {
  for (std::uint64_t seed = 200; seed < 204; ++seed) {
    auto tc = testing::random_tiny_case(seed);
    tc.model.head.kind = HeadKind::kMlp;
    tc.model = init_model(tc.model.encoder, HeadConfig{HeadKind::kMlp}, tc.model.vocab_size, tc.model.num_tags, seed);
    const auto res = testing::check_gradients(tc.model, tc.batch, Mode::kTrain, seed);
    EXPECT_LT(res.max_rel_error, 1e-4) << "seed " << seed << ": " << res.worst;
  }
}

TEST(Predict, LengthsDeterminismAndShiftInvariance) {
  Fixture f;
  auto m = init_model(small_encoder(), HeadConfig{HeadKind::kLinear}, f.schema, f.vocab, 8);
  const auto p1 = predict_tags(m, f.data, f.vocab, f.schema, 7);
  const auto p2 = predict_tags(m, f.data, f.vocab, f.schema, 64);
  ASSERT_EQ(p1.size(), f.data.size());
  for (std::size_t i = 0; i < p1.size(); ++i) EXPECT_EQ(p1[i].size(), f.data[i].size());
  EXPECT_EQ(p1, p2);
  m.params.back().array() += 17.25;  // shifts every logit by the same constant
  EXPECT_EQ(predict_tags(m, f.data, f.vocab, f.schema), p1);
}

TEST(Predict, TiesGoToLowestTag) {
  Fixture f;
  auto m = init_model(small_encoder(), HeadConfig{HeadKind::kLinear}, f.schema, f.vocab, 8);
  m.params[m.head_offset()].setZero();
  m.params.back().setZero();
  m.params.back()(0, 7) = 1.0;
  m.params.back()(0, 3) = 1.0;
  for (const auto& row : predict_tags(m, f.data, f.vocab, f.schema)) {
    for (TagId t : row) EXPECT_EQ(t, 3);
  }
}

TEST(Representations, RowsAlignWithTokens) {
  Fixture f;
  const auto m = init_model(small_encoder(), HeadConfig{HeadKind::kMlp}, f.schema, f.vocab, 8);
  const TagSchema& s = f.schema;
  const std::vector<AddressSample> two = {make_sample({"a", "b", "c"}, {"O", "B-CITY", "O"}, s),
                                          make_sample({"d", "e", "f", "g"}, {"B-POI", "I-POI", "O", "O"}, s)};
  const auto reps = export_representations(m, two, f.vocab, s);
  EXPECT_EQ(reps.vectors.rows(), 7);
  EXPECT_EQ(reps.vectors.cols(), 16);
  EXPECT_TRUE(reps.vectors.allFinite());
  EXPECT_EQ(reps.gold, (std::vector<TagId>{0, s.tag_id("B-CITY"), 0, s.tag_id("B-POI"), s.tag_id("I-POI"), 0, 0}));
  EXPECT_EQ(export_representations(m, two, f.vocab, s).vectors, reps.vectors);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  Fixture f;
  const auto m = init_model(variant("distil"), HeadConfig{HeadKind::kMlp, 32, 0.4}, f.schema, f.vocab, 12);
  Optimizer opt(OptimizerKind::kAdamW, OptimizerHyper{0.01}, m.params);
  auto params = m.params;
  Rng rng(1);
  const auto lg = loss_and_grads(m, encode_batch(f.data, f.vocab, f.schema), Mode::kTrain, &rng);
  opt.step(params, lg.grads, 1e-3);
  const Checkpoint ck{m, f.vocab.fingerprint(), f.schema.to_text(), opt};
  const Checkpoint back = deserialize_checkpoint(serialize_checkpoint(ck));
  EXPECT_EQ(back.model, m);
  EXPECT_EQ(back.vocab_fingerprint, ck.vocab_fingerprint);
  EXPECT_EQ(back.schema_text, ck.schema_text);
  ASSERT_TRUE(back.optimizer.has_value());
  EXPECT_EQ(*back.optimizer, opt);
  EXPECT_EQ(serialize_checkpoint(back), serialize_checkpoint(ck));

  std::string bytes = serialize_checkpoint(ck);
  EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, bytes.size() / 2)), FormatError);
  bytes[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(bytes), FormatError);
}

}  // namespace
}  // namespace addrparse

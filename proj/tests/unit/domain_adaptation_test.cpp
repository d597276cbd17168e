#include <gtest/gtest.h>

#include <cmath>

#include <json.hpp>

#include "cropmon/domain_adaptation.hpp"
#include "cropmon/errors.hpp"
#include "support.hpp"

namespace cropmon {
namespace {

using testing::random_tensor;
using testing::two_class_set;

TEST(Mapper, IdentityInitialisation) {
  Rng rng(1);
  const MapperParams m = MapperParams::identity(4, 7, 3, rng);
  const Tensor x = random_tensor({43, 28}, rng, 0.0, 1.0);
  const Tensor y = map_steps(x, m);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y[i], x[i], 1e-12);
}

TEST(Mapper, ZeroInputGivesOffset) {
  Rng rng(2);
  MapperParams m = MapperParams::identity(2, 3, 0, rng);
  m.mix = random_tensor({2, 2}, rng);
  m.offset = random_tensor({6}, rng);
  const Tensor y = map_steps(Tensor::matrix(5, 6), m);
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t k = 0; k < 6; ++k) EXPECT_EQ(y.at(t, k), m.offset[k]);
}

TEST(Mapper, MixActsPerBandAcrossComposites) {
  Rng rng(3);
  MapperParams m = MapperParams::identity(2, 2, 0, rng);
  // Slot 0 takes the value of slot 1: x + M x with M = [[-1, 1], [0, 0]].
  m.mix = Tensor::matrix(2, 2, {-1.0, 1.0, 0.0, 0.0});
  const std::vector<double> x = {0.1, 0.2, 0.3, 0.4};  // composite-major, two bands
  const auto y = map_step(x, m);
  EXPECT_NEAR(y[0], 0.3, 1e-15);
  EXPECT_NEAR(y[1], 0.4, 1e-15);
  EXPECT_NEAR(y[2], 0.3, 1e-15);
  EXPECT_NEAR(y[3], 0.4, 1e-15);
}

TEST(Mapper, ResidualHandEvaluation) {
  Rng rng(4);
  MapperParams m = MapperParams::identity(1, 2, 1, rng);
  m.u_weight = Tensor::matrix(1, 2, {0.5, -1.0});
  m.u_bias = Tensor::vector({0.25});
  m.v_weight = Tensor::matrix(2, 1, {2.0, -3.0});
  const std::vector<double> x = {0.4, 0.2};
  const double z = std::tanh(0.5 * 0.4 - 0.2 + 0.25);
  const auto y = map_step(x, m);
  EXPECT_NEAR(y[0], 0.4 + 2.0 * z, 1e-15);
  EXPECT_NEAR(y[1], 0.2 - 3.0 * z, 1e-15);
}

TEST(Mapper, RejectsWrongStepLength) {
  Rng rng(5);
  const MapperParams m = MapperParams::identity(2, 2, 0, rng);
  EXPECT_THROW(map_step(std::vector<double>(3), m), DimensionError);
}

DiscriminatorParams zero_disc(std::size_t h, std::size_t k) {
  DiscriminatorParams d;
  d.hidden = DenseParams::zeros(h, k);
  d.output = DenseParams::zeros(k, 1);
  return d;
}

TEST(DomainScore, ZeroWeightsGiveHalf) {
  EXPECT_DOUBLE_EQ(domain_score(std::vector<double>{0.3, -2.0, 1.0}, zero_disc(3, 4)), 0.5);
}

TEST(DomainScore, HandSetTwoUnitNetwork) {
  DiscriminatorParams d = zero_disc(2, 2);
  d.hidden.weight = Tensor::matrix(2, 2, {1.0, 0.0, 0.5, -0.5});
  d.hidden.bias = Tensor::vector({0.0, 0.1});
  d.output.weight = Tensor::matrix(1, 2, {2.0, -1.0});
  d.output.bias = Tensor::vector({0.3});
  const std::vector<double> c = {0.4, 0.8};
  const double logit = 0.3 + 2.0 * std::tanh(0.4) - std::tanh(0.5 * 0.4 - 0.5 * 0.8 + 0.1);
  EXPECT_NEAR(domain_score(c, d), 1.0 / (1.0 + std::exp(-logit)), 1e-15);
}

TEST(DiscriminatorLoss, ChanceLevelIsLnTwo) {
  const std::vector<std::vector<double>> src = {{0.1, 0.2}, {0.3, 0.4}}, tgt = {{0.5, 0.6}};
  EXPECT_NEAR(discriminator_loss(src, tgt, zero_disc(2, 3)), std::log(2.0), 1e-15);
}

TEST(DiscriminatorLoss, HandOneDimensionalBce) {
  DiscriminatorParams d = zero_disc(1, 1);
  d.hidden.weight[0] = 1.0;
  d.output.weight[0] = 1.0;
  const std::vector<std::vector<double>> src = {{0.5}}, tgt = {{-1.0}};
  const double p_src = 1.0 / (1.0 + std::exp(-std::tanh(0.5)));
  const double p_tgt = 1.0 / (1.0 + std::exp(-std::tanh(-1.0)));
  const double want = 0.5 * (-std::log(p_src) - std::log(1.0 - p_tgt));
  EXPECT_NEAR(discriminator_loss(src, tgt, d), want, 1e-15);
}

TEST(DiscriminatorTrainer, SeparatesDisjointClouds) {
  Rng rng(6);
  std::vector<std::vector<double>> src, tgt;
  for (int i = 0; i < 64; ++i) {
    src.push_back({1.0 + 0.1 * rng.normal(), 1.0 + 0.1 * rng.normal()});
    tgt.push_back({-1.0 + 0.1 * rng.normal(), -1.0 + 0.1 * rng.normal()});
  }
  DiscriminatorParams d = DiscriminatorParams::init(2, 8, rng);
  DiscriminatorTrainer trainer(d, 1e-2);
  for (int it = 0; it < 200; ++it) trainer.step(src, tgt);
  std::size_t correct = 0;
  for (const auto& c : src) correct += domain_score(c, d) > 0.5;
  for (const auto& c : tgt) correct += domain_score(c, d) < 0.5;
  EXPECT_GE(static_cast<double>(correct) / 128.0, 0.95);
  EXPECT_LT(discriminator_loss(src, tgt, d), std::log(2.0));
}

TEST(AttentionConsistency, HandExamples) {
  EXPECT_DOUBLE_EQ(attention_consistency({{1.0, 0.0}}, {{0.0, 1.0}}), 1.0);
  EXPECT_DOUBLE_EQ(attention_consistency({{0.25, 0.75}}, {{0.25, 0.75}}), 0.0);
  EXPECT_NEAR(attention_consistency({{0.5, 0.25, 0.25}}, {{0.25, 0.5, 0.25}}), 0.125 / 3.0, 1e-15);
}

TEST(AttentionConsistency, Symmetric) {
  const AttentionProfile a{{0.1, 0.6, 0.3}}, b{{0.4, 0.4, 0.2}};
  EXPECT_DOUBLE_EQ(attention_consistency(a, b), attention_consistency(b, a));
  EXPECT_THROW(attention_consistency(a, AttentionProfile{{1.0}}), DimensionError);
}

class DaFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    source_ = new Dataset(two_class_set(30, 0, 1));
    target_ = new Dataset(two_class_set(30, 16, 2));
    TrainConfig cfg;
    cfg.hidden_dim = 8;
    cfg.epochs = 5;
    model_ = new ModelBundle(train(*source_, cfg));
  }
  static void TearDownTestSuite() {
    delete source_;
    delete target_;
    delete model_;
  }
  static DaConfig quick() {
    DaConfig c;
    c.iterations = 10;
    c.batch_size = 8;
    return c;
  }
  static Dataset* source_;
  static Dataset* target_;
  static ModelBundle* model_;
};

Dataset* DaFixture::source_ = nullptr;
Dataset* DaFixture::target_ = nullptr;
ModelBundle* DaFixture::model_ = nullptr;

TEST_F(DaFixture, SourceModelStaysFrozen) {
  const std::string before = model_->digest();
  const AdaptedBundle a = train_da(*source_, *target_, *model_, quick());
  EXPECT_EQ(model_->digest(), before);
  EXPECT_EQ(a.source_digest, before);
  EXPECT_EQ(a.target_digest, target_->digest());
  EXPECT_EQ(a.adapt_loss_history.size(), 10u);
}

TEST_F(DaFixture, SameSeedSameMapper) {
  const AdaptedBundle a = train_da(*source_, *target_, *model_, quick());
  const AdaptedBundle b = train_da(*source_, *target_, *model_, quick());
  EXPECT_EQ(a.digest(), b.digest());
  DaConfig other = quick();
  other.seed = 2;
  EXPECT_NE(train_da(*source_, *target_, *model_, other).digest(), a.digest());
}

TEST_F(DaFixture, FixedOffsetStaysZero) {
  DaConfig c = quick();
  c.learn_offset = false;
  const AdaptedBundle a = train_da(*source_, *target_, *model_, c);
  for (double v : a.mapper.offset.data()) EXPECT_EQ(v, 0.0);
}

TEST_F(DaFixture, LearnedOffsetMoves) {
  DaConfig c = quick();
  c.learn_offset = true;
  const AdaptedBundle a = train_da(*source_, *target_, *model_, c);
  double norm = 0.0;
  for (double v : a.mapper.offset.data()) norm += std::abs(v);
  EXPECT_GT(norm, 0.0);
}

TEST_F(DaFixture, JsonRoundTrip) {
  DaConfig c = quick();
  c.mapper_hidden = 3;
  const AdaptedBundle a = train_da(*source_, *target_, *model_, c);
  const AdaptedBundle back = adapted_from_json(adapted_to_json(a), *model_);
  EXPECT_EQ(back.digest(), a.digest());
  EXPECT_EQ(back.config.mapper_hidden, 3u);
  EXPECT_EQ(predict_adapted_batch(*model_, back, *target_), predict_adapted_batch(*model_, a, *target_));
}

TEST_F(DaFixture, RefusesMismatchedSourceModel) {
  const AdaptedBundle a = train_da(*source_, *target_, *model_, quick());
  ModelBundle other = *model_;
  other.head.bias[0] += 1.0;
  EXPECT_THROW(adapted_from_json(adapted_to_json(a), other), ValidationError);
}

TEST_F(DaFixture, RejectsBadInputs) {
  ModelBundle last = *model_;
  last.pooling = Pooling::last_hidden;
  EXPECT_THROW(train_da(*source_, *target_, last, quick()), ValidationError);
  ModelBundle untrained = *model_;
  untrained.trained = false;
  EXPECT_THROW(train_da(*source_, *target_, untrained, quick()), StateError);
  DaConfig bad = quick();
  bad.lambda_att = -1.0;
  EXPECT_THROW(train_da(*source_, *target_, *model_, bad), ValidationError);
  const Dataset short_set = source_->map_windowed([](const WindowedSequence& w) {
    WindowedSequence out = w;
    out.steps = Tensor::matrix(w.length() - 1, w.feature_dim());
    return out;
  });
  EXPECT_THROW(check_domain_pair(*source_, short_set), DimensionError);
}

TEST_F(DaFixture, IdentityMapperReproducesSourcePredictions) {
  AdaptedBundle a = train_da(*source_, *target_, *model_, quick());
  Rng rng(1);
  a.mapper = MapperParams::identity(4, 7, 0, rng);
  EXPECT_EQ(predict_adapted_batch(*model_, a, *target_), predict_batch(*model_, *target_));
  EXPECT_NEAR(mean_attention_consistency(*model_, a, *target_), 0.0, 1e-30);
}

TEST_F(DaFixture, LossesAtIdentityHaveNoConsistencyPenalty) {
  Rng rng(2);
  const MapperParams m = MapperParams::identity(4, 7, 0, rng);
  const DiscriminatorParams d = DiscriminatorParams::init(8, 4, rng);
  std::vector<const Tensor*> src, tgt;
  for (std::size_t i = 0; i < 4; ++i) {
    src.push_back(&(*source_)[i].windowed.steps);
    tgt.push_back(&(*target_)[i].windowed.steps);
  }
  const AdversarialLosses l = adversarial_losses(src, tgt, *model_, m, d, 1.0);
  EXPECT_EQ(l.consistency, 0.0);
  EXPECT_DOUBLE_EQ(l.adapt_loss, l.adversarial);
}

}  // namespace
}  // namespace cropmon

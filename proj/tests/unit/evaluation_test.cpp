#include <gtest/gtest.h>

#include <cmath>

#include "cropmon/errors.hpp"
#include "cropmon/evaluation.hpp"
#include "support.hpp"

namespace cropmon {
namespace {

using testing::pair_count_auc;
using testing::two_class_set;

TEST(Auc, PerfectAndReversed) {
  const std::vector<double> s = {0.1, 0.2, 0.8, 0.9};
  EXPECT_DOUBLE_EQ(auc(s, std::vector<int>{0, 0, 1, 1}), 1.0);
  EXPECT_DOUBLE_EQ(auc(s, std::vector<int>{1, 1, 0, 0}), 0.0);
}

TEST(Auc, AllTiedIsHalf) {
  EXPECT_DOUBLE_EQ(auc(std::vector<double>(6, 0.3), std::vector<int>{0, 1, 0, 1, 1, 0}), 0.5);
}

TEST(Auc, HandTies) {
  // Pairs (pos, neg): (0.5 vs 0.5) = 1/2, (0.5 vs 0.2) = 1, (0.9 vs both) = 2.
  EXPECT_DOUBLE_EQ(auc(std::vector<double>{0.5, 0.9, 0.5, 0.2}, std::vector<int>{1, 1, 0, 0}), 3.5 / 4.0);
}

TEST(Auc, MatchesPairCountingOnRandomSets) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(49);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse grid so that ties are common.
      scores[i] = static_cast<double>(rng.below(10)) / 10.0;
      labels[i] = static_cast<int>(rng.below(2));
    }
    labels[0] = 0;
    labels[1] = 1;
    EXPECT_NEAR(auc(scores, labels), pair_count_auc(scores, labels), 1e-12);
  }
}

TEST(Auc, RejectsDegenerateInput) {
  EXPECT_THROW(auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), ValidationError);
  EXPECT_THROW(auc(std::vector<double>{0.1}, std::vector<int>{1, 0}), DimensionError);
  EXPECT_THROW(auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 2}), ValidationError);
  EXPECT_THROW(auc(std::vector<double>{0.1, NAN}, std::vector<int>{1, 0}), ValidationError);
}

TEST(MacroAuc, AveragesOneVsRest) {
  const std::vector<std::vector<double>> p = {{0.8, 0.1, 0.1}, {0.1, 0.8, 0.1}, {0.1, 0.1, 0.8}, {0.6, 0.3, 0.1}};
  const std::vector<std::size_t> y = {0, 1, 2, 0};
  EXPECT_DOUBLE_EQ(macro_auc(p, y), 1.0);
  // A class absent from the labels is skipped.
  const std::vector<std::size_t> y2 = {0, 1, 1, 0};
  EXPECT_DOUBLE_EQ(macro_auc(p, y2), (1.0 + auc(std::vector<double>{0.1, 0.8, 0.1, 0.3}, std::vector<int>{0, 1, 1, 0})) / 2.0);
}

TEST(F1, HandCounts) {
  // positive 0: tp = 2, fp = 1, fn = 1 -> precision 2/3, recall 2/3.
  const std::vector<std::size_t> pred = {0, 0, 0, 1, 1};
  const std::vector<std::size_t> truth = {0, 0, 1, 0, 1};
  EXPECT_NEAR(f1(pred, truth, 0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(f1(pred, truth, 1), 2.0 * 0.5 * 0.5 / 1.0, 1e-15);
  EXPECT_NEAR(macro_f1(pred, truth, 2), (2.0 / 3.0 + 0.5) / 2.0, 1e-15);
}

TEST(F1, NoPositivesPredictedIsZero) {
  EXPECT_EQ(f1(std::vector<std::size_t>{1, 1}, std::vector<std::size_t>{0, 1}, 0), 0.0);
}

TEST(ScoreProbabilities, BinaryUsesPositiveColumn) {
  const std::vector<std::vector<double>> p = {{0.9, 0.1}, {0.4, 0.6}, {0.7, 0.3}, {0.2, 0.8}};
  const std::vector<std::size_t> y = {0, 1, 1, 1};
  const Scores s = score_probabilities(p, y, 0);
  EXPECT_DOUBLE_EQ(s.auc, 1.0);
  EXPECT_NEAR(s.f1, 2.0 * 0.5 * 1.0 / 1.5, 1e-15);
}

TEST(SliceSteps, KeepsInclusiveRange) {
  const Dataset d = two_class_set(2, 0, 1);
  const Dataset s = slice_steps(d, 10, 15);
  EXPECT_EQ(s.steps(), 6u);
  EXPECT_EQ(s.feature_dim(), d.feature_dim());
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t t = 0; t < 6; ++t)
      for (std::size_t k = 0; k < d.feature_dim(); ++k)
        EXPECT_EQ(s[i].windowed.steps.at(t, k), d[i].windowed.steps.at(10 + t, k));
  }
  EXPECT_THROW(slice_steps(d, 5, 43), ValidationError);
  EXPECT_THROW(slice_steps(d, 6, 5), ValidationError);
}

TEST(Methods, NamesRoundTrip) {
  for (Method m : all_methods()) EXPECT_EQ(method_from_string(to_string(m)), m);
  EXPECT_EQ(method_from_string("knn_dtw"), Method::knn_dtw);
  EXPECT_EQ(to_string(Method::lstm_att), "LSTM-ATT");
  EXPECT_THROW(method_from_string("svm"), ValidationError);
}

TEST(CompareMethods, ReportShapeAndDeterminism) {
  const Dataset train_set = two_class_set(8, 0, 1);
  const std::vector<Scenario> tests = {{"shift0", two_class_set(6, 0, 2)}, {"shift16", two_class_set(6, 16, 3)}};
  CompareConfig cfg;
  cfg.train.hidden_dim = 4;
  cfg.train.epochs = 2;
  cfg.da.iterations = 3;
  cfg.da.batch_size = 4;
  const auto methods = all_methods();
  const EvalReport r = compare_methods(train_set, tests, methods, 3, cfg);
  ASSERT_EQ(r.rows.size(), methods.size() * tests.size());
  for (const EvalRow& row : r.rows) {
    EXPECT_GE(row.auc, 0.0);
    EXPECT_LE(row.auc, 1.0);
    EXPECT_EQ(row.seed, 3u);
    EXPECT_EQ(row.train_digest, train_set.digest());
  }
  ASSERT_NE(r.find(Method::da, "shift16"), nullptr);
  EXPECT_EQ(r.find(Method::da, "shift16")->test_digest, tests[1].second.digest());
  const std::string csv = r.to_csv();
  EXPECT_EQ(csv.rfind("method,scenario,auc,f1,train_digest,test_digest,seed\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 11);
  EXPECT_NE(r.to_table().find("LSTM-ATT"), std::string::npos);
  EXPECT_EQ(compare_methods(train_set, tests, methods, 3, cfg).to_csv(), csv);
}

TEST(CompareMethods, PretrainedModelMustMatchTrainingSet) {
  const Dataset train_set = two_class_set(6, 0, 1);
  const Dataset other = two_class_set(6, 0, 9);
  TrainConfig tc;
  tc.hidden_dim = 4;
  tc.epochs = 1;
  const ModelBundle m = train(other, tc);
  CompareConfig cfg;
  cfg.pretrained = &m;
  const std::vector<Scenario> tests = {{"s", two_class_set(4, 0, 2)}};
  const std::vector<Method> methods = {Method::lstm_att};
  EXPECT_THROW(compare_methods(train_set, tests, methods, 1, cfg), ValidationError);
}

}  // namespace
}  // namespace cropmon

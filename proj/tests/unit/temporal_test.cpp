#include <gtest/gtest.h>

#include <cmath>

#include "cropmon/errors.hpp"
#include "cropmon/temporal.hpp"
#include "support.hpp"

namespace cropmon {
namespace {

using testing::two_class_set;

// Two-class curve whose class-0 confidence follows `c0`.
ConfidenceCurve curve_of(const std::vector<double>& c0) {
  ConfidenceCurve c{Tensor::matrix(c0.size(), 2)};
  for (std::size_t t = 0; t < c0.size(); ++t) {
    c.per_step.at(t, 0) = c0[t];
    c.per_step.at(t, 1) = 1.0 - c0[t];
  }
  return c;
}

TEST(EarliestDetection, HandSequence) {
  const ConfidenceCurve c = curve_of({0.3, 0.85, 0.7, 0.9, 0.92});
  EXPECT_EQ(earliest_detection(c, 0, 0.8, 2), std::optional<std::size_t>(4));
  EXPECT_EQ(earliest_detection(c, 0, 0.8, 1), std::optional<std::size_t>(2));
  EXPECT_EQ(earliest_detection(c, 0, 0.8, 3), std::nullopt);
  EXPECT_EQ(earliest_detection(c, 1, 0.8, 1), std::nullopt);
}

TEST(EarliestDetection, ThresholdIsInclusive) {
  EXPECT_EQ(earliest_detection(curve_of({0.8, 0.8}), 0, 0.8, 2), std::optional<std::size_t>(1));
}

TEST(EarliestDetection, RejectsBadArguments) {
  const ConfidenceCurve c = curve_of({0.5});
  EXPECT_THROW(earliest_detection(c, 2, 0.8, 2), IndexError);
  EXPECT_THROW(earliest_detection(c, 0, 1.0, 2), ValidationError);
  EXPECT_THROW(earliest_detection(c, 0, 0.8, 0), ValidationError);
}

TEST(EarliestDetection, UndetectedCountsAsOnePastTheEnd) {
  const std::vector<ConfidenceCurve> curves = {curve_of({0.9, 0.9, 0.9}), curve_of({0.1, 0.1, 0.1})};
  EXPECT_DOUBLE_EQ(mean_earliest_detection(curves, 0, 0.8, 2), (1.0 + 4.0) / 2.0);
}

TEST(CohortStatistics, MeanAndPopulationStd) {
  const std::vector<ConfidenceCurve> curves = {curve_of({0.2, 0.6}), curve_of({0.4, 0.6}), curve_of({0.9, 0.6})};
  const CohortCurve s = cohort_statistics(curves, 0);
  EXPECT_NEAR(s.mean[0], 0.5, 1e-15);
  const double var = (0.09 + 0.01 + 0.16) / 3.0;
  EXPECT_NEAR(s.std[0], std::sqrt(var), 1e-15);
  EXPECT_NEAR(s.mean[1], 0.6, 1e-15);
  EXPECT_NEAR(s.std[1], 0.0, 1e-15);
}

TEST(CohortStatistics, RejectsRaggedAndEmpty) {
  const std::vector<ConfidenceCurve> ragged = {curve_of({0.2}), curve_of({0.2, 0.3})};
  EXPECT_THROW(cohort_statistics(ragged, 0), DimensionError);
  EXPECT_THROW(cohort_statistics(std::vector<ConfidenceCurve>{}, 0), ValidationError);
}

TEST(ConfidenceProgression, LastStepMatchesFullPrediction) {
  const Dataset d = two_class_set(10, 0, 1);
  TrainConfig cfg;
  cfg.hidden_dim = 6;
  cfg.epochs = 3;
  const ModelBundle m = train(d, cfg);
  const ConfidenceCurve c = confidence_progression(m, d[0].windowed);
  ASSERT_EQ(c.steps(), d.steps());
  const auto full = predict_proba(m, d[0].windowed);
  for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(c.per_step.at(c.steps() - 1, k), full[k], 1e-15);
  for (std::size_t t = 0; t < c.steps(); ++t) EXPECT_NEAR(c.per_step.at(t, 0) + c.per_step.at(t, 1), 1.0, 1e-12);
  const CohortCurve s = cohort_confidence(m, d, 1);
  EXPECT_EQ(s.mean.size(), d.steps());
}

TEST(ConfidenceProgression, NeedsTrainedModel) {
  const Dataset d = two_class_set(2, 0, 1);
  TrainConfig cfg;
  cfg.hidden_dim = 4;
  const ModelBundle m = init_model(d.feature_dim(), 2, cfg);
  EXPECT_THROW(confidence_progression(m, d[0].windowed), StateError);
}

TEST(ConfidenceOutput, CsvAndSvgShape) {
  const std::vector<ConfidenceCurve> curves = {curve_of({0.2, 0.6, 0.9})};
  const std::vector<CohortCurve> cohorts = {cohort_statistics(curves, 0), cohort_statistics(curves, 1)};
  const std::vector<std::string> names = {"corn", "soybean"};
  const std::string csv = confidence_csv(cohorts, names);
  EXPECT_EQ(csv.rfind("step,class,mean,std\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
  EXPECT_NE(csv.find("\n3,soybean,"), std::string::npos);
  const std::string svg = confidence_svg(cohorts, names);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  std::size_t polylines = 0;
  for (std::size_t at = svg.find("<polyline"); at != std::string::npos; at = svg.find("<polyline", at + 1)) ++polylines;
  EXPECT_EQ(polylines, 2u);
  EXPECT_NE(svg.find(">soybean<"), std::string::npos);
}

std::vector<double> noiseless_ndvi(const std::string& cls) {
  SeasonScenario s;
  s.noise_sigma = 0.0;
  s.cloud_drop_prob = 0.0;
  return ndvi_series(synth_pixel(default_templates().at(cls), 0, s, 1).sequence);
}

TEST(CoverCrop, NoiselessTemplatesClassified) {
  EXPECT_EQ(detect_cover_crop(noiseless_ndvi("corn")), CoverClass::primary_only);
  EXPECT_EQ(detect_cover_crop(noiseless_ndvi("soybean")), CoverClass::primary_only);
  EXPECT_EQ(detect_cover_crop(noiseless_ndvi("corn_cover")), CoverClass::cover_cropped);
  EXPECT_EQ(detect_cover_crop(noiseless_ndvi("soybean_cover")), CoverClass::cover_cropped);
  EXPECT_EQ(detect_cover_crop(noiseless_ndvi("alfalfa")), CoverClass::evergreen);
}

TEST(CoverCrop, HandSeries) {
  CoverCropRule rule;
  rule.harvest_step = 6;
  rule.post_window = 2;
  rule.season_first = 1;
  rule.season_last = 4;
  rule.median_filter = false;
  EXPECT_EQ(detect_cover_crop(std::vector<double>{0.1, 0.3, 0.8, 0.7, 0.3, 0.1, 0.5, 0.5}, rule),
            CoverClass::cover_cropped);
  EXPECT_EQ(detect_cover_crop(std::vector<double>{0.1, 0.3, 0.8, 0.7, 0.3, 0.1, 0.2, 0.1}, rule),
            CoverClass::primary_only);
  EXPECT_EQ(detect_cover_crop(std::vector<double>{0.6, 0.7, 0.8, 0.8, 0.7, 0.6, 0.6, 0.6}, rule),
            CoverClass::evergreen);
  // Green after the season but never green during it is not a cover crop.
  EXPECT_EQ(detect_cover_crop(std::vector<double>{0.1, 0.2, 0.3, 0.3, 0.2, 0.1, 0.5, 0.5}, rule),
            CoverClass::primary_only);
  rule.require_dip = true;
  EXPECT_EQ(detect_cover_crop(std::vector<double>{0.1, 0.3, 0.8, 0.7, 0.6, 0.5, 0.5, 0.5}, rule),
            CoverClass::primary_only);
}

TEST(CoverCrop, MedianFilterRemovesSingleDrop) {
  const std::vector<double> s = {0.5, 0.5, 0.05, 0.5, 0.5};
  const auto m = median3(s);
  EXPECT_EQ(m[2], 0.5);
  EXPECT_EQ(m.front(), 0.5);
  EXPECT_EQ(median3(std::vector<double>{0.3, 0.1}), (std::vector<double>{0.3, 0.1}));
}

TEST(CoverCrop, RuleValidation) {
  CoverCropRule rule;
  EXPECT_THROW(rule.validate(44), ValidationError);
  rule.green_threshold = 0.6;
  EXPECT_THROW(rule.validate(46), ValidationError);
}

TEST(CoverTable, ArithmeticFixture) {
  std::vector<std::string> labels = {"corn", "corn"};
  std::vector<CoverClass> det = {CoverClass::cover_cropped, CoverClass::primary_only};
  const std::vector<double> areas = {4597.0, 1014653.0 - 4597.0};
  const CoverTable t = cover_crop_table(labels, det, areas);
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_NEAR(t.rows[0].percent(), 0.45, 0.005);
  EXPECT_NE(t.to_csv().find("corn,1014653,4597,0.45\n"), std::string::npos) << t.to_csv();
}

TEST(CoverTable, GroupsInFirstAppearanceOrderWithTotal) {
  const std::vector<std::string> labels = {"soybean", "corn", "soybean", "corn"};
  const std::vector<CoverClass> det = {CoverClass::cover_cropped, CoverClass::primary_only, CoverClass::primary_only,
                                       CoverClass::evergreen};
  const CoverTable t = cover_crop_table(labels, det);
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0].class_name, "soybean");
  EXPECT_DOUBLE_EQ(t.rows[0].percent(), 50.0);
  EXPECT_DOUBLE_EQ(t.rows[1].percent(), 0.0);
  EXPECT_DOUBLE_EQ(t.total.total_area, 4.0);
  EXPECT_DOUBLE_EQ(t.total.percent(), 25.0);
  EXPECT_THROW(cover_crop_table(labels, std::vector<CoverClass>(3)), DimensionError);
}

}  // namespace
}  // namespace cropmon

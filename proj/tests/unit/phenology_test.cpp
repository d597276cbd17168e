#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "cropmon/errors.hpp"
#include "cropmon/phenology.hpp"

namespace cropmon {
namespace {

CropProfile corn() { return default_templates().at("corn"); }

SeasonScenario noiseless(int shift = 0) {
  SeasonScenario s;
  s.planting_shift_days = shift;
  s.noise_sigma = 0.0;
  s.cloud_drop_prob = 0.0;
  return s;
}

std::size_t argmax_index(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

TEST(DoubleLogistic, BaselineFarBeforeGreenup) {
  const CropProfile p = corn();
  EXPECT_NEAR(double_logistic_ndvi(1.0, p), p.baseline_ndvi, 1e-3);
}

TEST(DoubleLogistic, MidpointAtGreenupDay) {
  const CropProfile p = corn();
  EXPECT_NEAR(double_logistic_ndvi(p.greenup_day, p), p.baseline_ndvi + 0.5 * (p.peak_ndvi - p.baseline_ndvi), 1e-3);
}

TEST(DoubleLogistic, PeakStrictlyInsideSeason) {
  const CropProfile p = corn();
  double best = -1.0;
  int best_day = 0;
  for (int d = 1; d <= 366; ++d) {
    const double v = double_logistic_ndvi(d, p);
    if (v > best) {
      best = v;
      best_day = d;
    }
  }
  EXPECT_GT(best_day, p.greenup_day);
  EXPECT_LT(best_day, p.senescence_day);
}

TEST(DoubleLogistic, RejectsBadInputs) {
  CropProfile p = corn();
  EXPECT_THROW(double_logistic_ndvi(0.0, p), ValidationError);
  p.senescence_day = p.greenup_day - 1;
  EXPECT_THROW(double_logistic_ndvi(100.0, p), ValidationError);
  p = corn();
  p.peak_ndvi = 0.99;
  EXPECT_THROW(p.validate(), ValidationError);
}

TEST(BandExpand, NoiselessNdviInverts) {
  Rng rng(1);
  for (double v = 0.0; v <= 1.0; v += 0.05) {
    const auto b = band_expand(v, 7, 0.0, rng);
    EXPECT_NEAR(ndvi_from_bands(b[0], b[1]), v, 1e-15);
  }
}

TEST(BandExpand, RedProxyMaximalAtZeroNdvi) {
  const double at_zero = band_reflectance(1, 0.0);
  for (double v = 0.0; v <= 1.0; v += 0.01) EXPECT_LE(band_reflectance(1, v), at_zero);
  EXPECT_LT(band_reflectance(0, 0.2), band_reflectance(0, 0.8));
}

TEST(BandExpand, MonteCarloMeanRecoversNdvi) {
  Rng rng(2);
  double sum = 0.0, sq = 0.0;
  const int n = 1000;
  const double sigma = 0.02;
  for (int i = 0; i < n; ++i) {
    const auto b = band_expand(0.5, 7, sigma, rng);
    const double err = ndvi_from_bands(b[0], b[1]) - 0.5;
    sum += err;
    sq += err * err;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.005);
  EXPECT_LT(std::sqrt(sq / n), 3.0 * sigma);
}

TEST(BandExpand, ReflectancesStayInUnitRange) {
  Rng rng(3);
  for (int i = 0; i < 2000; ++i) {
    for (double r : band_expand(rng.uniform(), 7, 0.3, rng)) {
      ASSERT_GE(r, 0.0);
      ASSERT_LE(r, 1.0);
    }
  }
}

TEST(SynthPixel, SameSeedSamePixel) {
  SeasonScenario s;
  const LabeledPixel a = synth_pixel(corn(), 0, s, 77);
  const LabeledPixel b = synth_pixel(corn(), 0, s, 77);
  EXPECT_EQ(a.sequence.values, b.sequence.values);
  EXPECT_NE(a.sequence.values, synth_pixel(corn(), 0, s, 78).sequence.values);
}

TEST(SynthPixel, ShiftMovesPeakLater) {
  const auto base = ndvi_series(synth_pixel(corn(), 0, noiseless(0), 1).sequence);
  const auto late = ndvi_series(synth_pixel(corn(), 0, noiseless(16), 1).sequence);
  EXPECT_GE(argmax_index(late), argmax_index(base) + 1);
}

TEST(SynthPixel, ShiftIsMonotone) {
  for (const auto& [name, profile] : default_templates()) {
    if (profile.evergreen) continue;
    std::size_t prev = 0;
    for (int shift = -56; shift <= 56; shift += 4) {
      const std::size_t at = argmax_index(ndvi_series(synth_pixel(profile, 0, noiseless(shift), 1).sequence));
      EXPECT_GE(at, prev) << name << " shift " << shift;
      prev = at;
    }
  }
}

TEST(SynthPixel, CoverCropStaysGreenAfterHarvest) {
  const TemplateSet t = default_templates();
  const auto cover = ndvi_series(synth_pixel(t.at("corn_cover"), 0, noiseless(), 1).sequence);
  const auto plain = ndvi_series(synth_pixel(t.at("corn"), 0, noiseless(), 1).sequence);
  for (std::size_t i = cover.size() - 5; i < cover.size(); ++i) {
    EXPECT_GT(cover[i], 0.4);
    EXPECT_LT(plain[i], 0.25);
  }
}

TEST(SynthPixel, EvergreenNeverDropsBelowHalfPeak) {
  const CropProfile alfalfa = default_templates().at("alfalfa");
  const auto v = ndvi_series(synth_pixel(alfalfa, 0, noiseless(), 1).sequence);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (composite_day(i, 8) >= alfalfa.greenup_day) EXPECT_GE(v[i], 0.5 * alfalfa.peak_ndvi);
  }
}

TEST(SynthPixel, CloudsReplaceComposites) {
  SeasonScenario s;
  s.cloud_drop_prob = 0.5;
  const auto v = synth_pixel(corn(), 0, s, 5).sequence.values;
  std::size_t dark = 0;
  for (std::size_t t = 0; t < v.rows(); ++t) dark += v.at(t, 0) < 0.2;
  EXPECT_GT(dark, 10u);
}

TEST(SynthDataset, CountsAndLabels) {
  const std::vector<ClassCount> mix = {{"corn", 500}, {"soybean", 500}};
  const auto px = synth_dataset(mix, default_templates(), SeasonScenario{}, 1);
  ASSERT_EQ(px.size(), 1000u);
  std::size_t corn_count = 0;
  for (const auto& p : px) corn_count += p.class_label == 0;
  EXPECT_EQ(corn_count, 500u);
}

TEST(SynthDataset, SinglePixel) {
  const std::vector<ClassCount> mix = {{"soybean", 1}};
  const auto px = synth_dataset(mix, default_templates(), SeasonScenario{}, 1);
  ASSERT_EQ(px.size(), 1u);
  EXPECT_EQ(px[0].class_label, 0u);
}

TEST(SynthDataset, SeedsChangeDrawsNotCounts) {
  const std::vector<ClassCount> mix = {{"corn", 20}, {"soybean", 30}};
  const auto a = synth_dataset(mix, default_templates(), SeasonScenario{}, 1);
  const auto b = synth_dataset(mix, default_templates(), SeasonScenario{}, 2);
  std::size_t ca = 0, cb = 0;
  for (const auto& p : a) ca += p.class_label == 1;
  for (const auto& p : b) cb += p.class_label == 1;
  EXPECT_EQ(ca, 30u);
  EXPECT_EQ(cb, 30u);
  EXPECT_NE(a[0].sequence.values, b[0].sequence.values);
}

TEST(SynthDataset, SerialAndParallelAreBitIdentical) {
  const std::vector<ClassCount> mix = {{"corn", 40}, {"soybean", 40}, {"alfalfa", 10}};
  const auto a = synth_dataset(mix, default_templates(), SeasonScenario{}, 9, Execution::serial);
  const auto b = synth_dataset(mix, default_templates(), SeasonScenario{}, 9, Execution::parallel);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].pixel_id, b[i].pixel_id);
    EXPECT_EQ(a[i].sequence.values, b[i].sequence.values);
  }
}

TEST(SynthDataset, RejectsBadMixes) {
  EXPECT_THROW(synth_dataset({}, default_templates(), SeasonScenario{}, 1), ValidationError);
  const std::vector<ClassCount> unknown = {{"rice", 3}};
  EXPECT_THROW(synth_dataset(unknown, default_templates(), SeasonScenario{}, 1), ValidationError);
  SeasonScenario s;
  s.planting_shift_days = 60;
  const std::vector<ClassCount> mix = {{"corn", 3}};
  EXPECT_THROW(synth_dataset(mix, default_templates(), s, 1), ValidationError);
}

// Brute-force threshold sweep on the NDVI of one mid-season composite.
double best_threshold_accuracy(double sigma, std::size_t composite) {
  SeasonScenario s;
  s.noise_sigma = sigma;
  s.cloud_drop_prob = 0.0;
  const std::vector<ClassCount> mix = {{"corn", 500}, {"soybean", 500}};
  const auto px = synth_dataset(mix, default_templates(), s, 11);
  std::vector<std::pair<double, std::size_t>> v;
  for (const auto& p : px) v.emplace_back(ndvi_series(p.sequence)[composite], p.class_label);
  std::sort(v.begin(), v.end());
  // Predict corn (0) above the threshold.
  std::size_t best = 0;
  for (std::size_t cut = 0; cut <= v.size(); ++cut) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < v.size(); ++i) correct += (i >= cut) == (v[i].second == 0);
    best = std::max(best, correct);
  }
  return static_cast<double>(best) / static_cast<double>(v.size());
}

// Composite 19 (day 156.5) lies between the corn and soybean green-up dates.
TEST(SynthDataset, MidSeasonThresholdSeparatesClassesAtDefaultNoise) {
  EXPECT_GE(best_threshold_accuracy(0.02, 19), 0.95);
}

TEST(SynthDataset, MidSeasonThresholdSeparatesClassesAtUpperNoise) {
  EXPECT_GE(best_threshold_accuracy(0.05, 19), 0.95);
}

}  // namespace
}  // namespace cropmon

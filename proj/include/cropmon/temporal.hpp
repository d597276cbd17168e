#pragma once

// Confidence progression for early detection, and rule-based cover-crop
// detection on NDVI series.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cropmon/classifier.hpp"
#include "cropmon/parallel.hpp"
#include "cropmon/pipeline.hpp"

namespace cropmon {

// Row t-1 is the class distribution given steps 1..t.
struct ConfidenceCurve {
  Tensor per_step;  // T x C
  std::size_t steps() const { return per_step.rows(); }
  std::size_t classes() const { return per_step.cols(); }
};

ConfidenceCurve confidence_progression(const ModelBundle& model, const WindowedSequence& seq);

// First 1-based step t where confidence(cls) >= threshold holds for
// `patience` consecutive steps starting at t.
std::optional<std::size_t> earliest_detection(const ConfidenceCurve& curve, std::size_t cls, double threshold,
                                              std::size_t patience = 2);

struct CohortCurve {
  std::size_t class_index = 0;
  std::vector<double> mean;
  std::vector<double> std;  // population standard deviation
};

CohortCurve cohort_confidence(const ModelBundle& model, const Dataset& cohort, std::size_t cls,
                              Execution exec = Execution::parallel);
// Same statistics from precomputed curves.
CohortCurve cohort_statistics(std::span<const ConfidenceCurve> curves, std::size_t cls);

// Undetected pixels count as T + 1.
double mean_earliest_detection(std::span<const ConfidenceCurve> curves, std::size_t cls, double threshold,
                               std::size_t patience);

// step,class,mean,std with 1-based steps.
std::string confidence_csv(std::span<const CohortCurve> curves, std::span<const std::string> class_names);
// Mean curves with +-1 std error bars.
std::string confidence_svg(std::span<const CohortCurve> curves, std::span<const std::string> class_names);

enum class CoverClass { primary_only, cover_cropped, evergreen };
std::string to_string(CoverClass c);

struct CoverCropRule {
  std::size_t harvest_step = 41;  // first composite of the post-harvest window
  std::size_t post_window = 5;
  double green_threshold = 0.35;
  double evergreen_min = 0.55;
  std::size_t season_first = 16;  // growing-season composites, inclusive
  std::size_t season_last = 30;
  // Also require NDVI below green_threshold somewhere between the seasonal
  // peak and the post window.
  bool require_dip = false;
  // 3-point running median before the rule, removing single-composite cloud
  // drops.
  bool median_filter = true;

  void validate(std::size_t composites) const;
};

std::vector<double> median3(std::span<const double> series);
CoverClass detect_cover_crop(std::span<const double> ndvi, const CoverCropRule& rule = {});

struct CoverTableRow {
  std::string class_name;
  double total_area = 0.0;
  double cover_area = 0.0;
  double percent() const { return total_area > 0.0 ? 100.0 * cover_area / total_area : 0.0; }
};

struct CoverTable {
  std::vector<CoverTableRow> rows;  // in first-appearance order
  CoverTableRow total;

  std::string to_csv() const;
  std::string to_text() const;
};

// `areas` may be empty, meaning unit area per pixel.
CoverTable cover_crop_table(std::span<const std::string> labels, std::span<const CoverClass> detections,
                            std::span<const double> areas = {});

}  // namespace cropmon

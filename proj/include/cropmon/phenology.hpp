#pragma once

// Synthetic labelled pixel series. NDVI follows a double-logistic season
// curve (residue, green-up, peak, harvest) and is expanded into B band
// reflectances by fixed per-band affine maps. The band maps are
// conventions rather than measured spectra.

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cropmon/parallel.hpp"
#include "cropmon/rng.hpp"
#include "cropmon/sequence.hpp"

namespace cropmon {

struct CropProfile {
  std::string class_name;
  // Primary crop this profile is accounted under; cover-cropped variants
  // share it with their plain counterpart.
  std::string base_class;
  double baseline_ndvi = 0.15;
  double peak_ndvi = 0.85;
  double greenup_day = 150.0;
  double senescence_day = 255.0;
  double greenup_rate = 0.12;
  double senescence_rate = 0.08;
  bool post_harvest_green = false;
  bool evergreen = false;
  // Post-harvest regrowth: logistic rise to cover_peak_ndvi centred at
  // senescence_day + cover_delay_days.
  double cover_peak_ndvi = 0.6;
  double cover_delay_days = 25.0;

  void validate() const;
};

using TemplateSet = std::map<std::string, CropProfile>;

// corn, soybean, sugarbeet, alfalfa, corn_cover, soybean_cover.
TemplateSet default_templates();

struct SeasonScenario {
  std::string name = "shift0";
  int planting_shift_days = 0;
  double noise_sigma = 0.02;
  double cloud_drop_prob = 0.03;
  std::size_t composites_per_year = 46;
  std::size_t bands = 7;
  int composite_period_days = 8;

  void validate() const;
};

struct LabeledPixel {
  std::string pixel_id;
  std::size_t class_label = 0;
  SpectralSequence sequence;
  std::string scenario_tag;
};

inline constexpr std::size_t kMaxBands = 7;

// Day-of-year at the centre of composite `index`.
double composite_day(std::size_t index, int period_days);

double double_logistic_ndvi(double day, const CropProfile& profile);

// Noiseless reflectance of `band` for a given NDVI.
double band_reflectance(std::size_t band, double ndvi);

// Band 0 is the near-infrared proxy, band 1 the red proxy; both are built so
// that (b0 - b1) / (b0 + b1) == ndvi exactly when sigma == 0.
std::vector<double> band_expand(double ndvi, std::size_t bands, double noise_sigma, Rng& rng);

double ndvi_from_bands(double nir, double red);
std::vector<double> ndvi_series(const SpectralSequence& seq);

// Applies the scenario's planting shift to the profile's calendar.
CropProfile shifted_profile(const CropProfile& profile, int shift_days);

CropProfile jitter_profile(const CropProfile& profile, Rng& rng);

LabeledPixel synth_pixel(const CropProfile& profile, std::size_t class_label,
                         const SeasonScenario& scenario, std::uint64_t seed,
                         std::string pixel_id = "px");

struct ClassCount {
  std::string class_name;
  std::size_t count = 0;
};

// Class labels are positions in `mix`. Each pixel's profile is jittered
// around its template (+-10% rates, +-4 days dates) from a per-pixel seed,
// then the list is shuffled by `seed`.
std::vector<LabeledPixel> synth_dataset(std::span<const ClassCount> mix, const TemplateSet& templates,
                                        const SeasonScenario& scenario, std::uint64_t seed,
                                        Execution exec = Execution::parallel);

}  // namespace cropmon

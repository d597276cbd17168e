#include "cropmon/phenology.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "cropmon/errors.hpp"

namespace cropmon {

namespace {

struct BandMap {
  double offset;
  double slope;
};

// Bands 0/1 form the NIR/red pair with constant sum 0.8; the rest are
// monotone in NDVI with mixed signs.
constexpr std::array<BandMap, kMaxBands> kBandMaps = {{
    {0.40, 0.40},    // near-infrared proxy
    {0.40, -0.40},   // red proxy
    {0.10, -0.05},   // blue
    {0.12, 0.05},    // green
    {0.30, 0.15},    // NIR plateau
    {0.35, -0.15},   // shortwave infrared 1
    {0.25, -0.15},   // shortwave infrared 2
}};

constexpr double kCloudReflectance = 0.05;

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::string fmt_index(const std::string& tag, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_%06zu", i);
  return tag + buf;
}

}  // namespace

void CropProfile::validate() const {
  auto fail = [&](const std::string& what) {
    throw ValidationError("crop profile '" + class_name + "': " + what);
  };
  if (class_name.empty()) throw ValidationError("crop profile has an empty class_name");
  if (!(baseline_ndvi >= 0.0 && baseline_ndvi <= 0.3)) fail("baseline_ndvi must lie in [0, 0.3]");
  if (!(peak_ndvi >= 0.6 && peak_ndvi <= 0.95)) fail("peak_ndvi must lie in [0.6, 0.95]");
  if (!(baseline_ndvi < peak_ndvi)) fail("baseline_ndvi must be below peak_ndvi");
  if (!(greenup_day < senescence_day)) fail("greenup_day must precede senescence_day");
  if (!(greenup_rate > 0.0) || !(senescence_rate > 0.0)) fail("rates must be positive");
  if (post_harvest_green && !(cover_peak_ndvi > baseline_ndvi && cover_peak_ndvi <= 0.95)) {
    fail("cover_peak_ndvi must lie in (baseline_ndvi, 0.95]");
  }
}

TemplateSet default_templates() {
  TemplateSet t;
  CropProfile corn;
  corn.class_name = corn.base_class = "corn";
  corn.greenup_day = 150.0;
  corn.greenup_rate = 0.12;
  t[corn.class_name] = corn;

  CropProfile soybean = corn;
  soybean.class_name = soybean.base_class = "soybean";
  soybean.greenup_day = 160.0;
  soybean.greenup_rate = 0.09;
  t[soybean.class_name] = soybean;

  CropProfile sugarbeet = soybean;
  sugarbeet.class_name = sugarbeet.base_class = "sugarbeet";
  sugarbeet.senescence_day = 285.0;
  t[sugarbeet.class_name] = sugarbeet;

  CropProfile alfalfa;
  alfalfa.class_name = alfalfa.base_class = "alfalfa";
  alfalfa.baseline_ndvi = 0.2;
  alfalfa.peak_ndvi = 0.85;
  alfalfa.greenup_day = 95.0;
  alfalfa.greenup_rate = 0.1;
  alfalfa.evergreen = true;
  t[alfalfa.class_name] = alfalfa;

  CropProfile corn_cover = corn;
  corn_cover.class_name = "corn_cover";
  corn_cover.post_harvest_green = true;
  t[corn_cover.class_name] = corn_cover;

  CropProfile soybean_cover = soybean;
  soybean_cover.class_name = "soybean_cover";
  soybean_cover.post_harvest_green = true;
  t[soybean_cover.class_name] = soybean_cover;
  return t;
}

void SeasonScenario::validate() const {
  auto fail = [&](const std::string& what) {
    throw ValidationError("scenario '" + name + "': " + what);
  };
  if (std::abs(planting_shift_days) >= 60) fail("|planting_shift_days| must be below 60");
  if (!(noise_sigma >= 0.0)) fail("noise_sigma must be nonnegative");
  if (!(cloud_drop_prob >= 0.0 && cloud_drop_prob < 1.0)) fail("cloud_drop_prob must lie in [0, 1)");
  if (composites_per_year == 0) fail("composites_per_year must be positive");
  if (bands < 2 || bands > kMaxBands) fail("bands must lie in [2, 7]");
  if (composite_period_days <= 0) fail("composite_period_days must be positive");
  if (composite_day(composites_per_year - 1, composite_period_days) > 366.0) {
    fail("composites_per_year x composite_period_days exceeds one year");
  }
}

double composite_day(std::size_t index, int period_days) {
  return static_cast<double>(period_days) * static_cast<double>(index) + (period_days + 1) / 2.0;
}

double double_logistic_ndvi(double day, const CropProfile& p) {
  if (!(day >= 1.0 && day <= 366.0)) {
    throw ValidationError("day-of-year " + std::to_string(day) + " outside [1, 366]");
  }
  p.validate();
  const double amplitude = p.peak_ndvi - p.baseline_ndvi;
  double season = logistic(p.greenup_rate * (day - p.greenup_day));
  if (!p.evergreen) season -= logistic(p.senescence_rate * (day - p.senescence_day));
  double ndvi = p.baseline_ndvi + amplitude * season;
  if (p.post_harvest_green && !p.evergreen) {
    const double regrowth_mid = p.senescence_day + p.cover_delay_days;
    ndvi += (p.cover_peak_ndvi - p.baseline_ndvi) * logistic(p.greenup_rate * (day - regrowth_mid));
  }
  return std::clamp(ndvi, 0.0, 1.0);
}

double band_reflectance(std::size_t band, double ndvi) {
  const BandMap& m = kBandMaps.at(band);
  return m.offset + m.slope * ndvi;
}

std::vector<double> band_expand(double ndvi, std::size_t bands, double noise_sigma, Rng& rng) {
  std::vector<double> out(bands);
  for (std::size_t b = 0; b < bands; ++b) {
    double r = band_reflectance(b, ndvi);
    if (noise_sigma > 0.0) r += rng.normal(0.0, noise_sigma);
    out[b] = std::clamp(r, 0.0, 1.0);
  }
  return out;
}

double ndvi_from_bands(double nir, double red) {
  const double total = nir + red;
  if (total <= 1e-12) return 0.0;
  return (nir - red) / total;
}

std::vector<double> ndvi_series(const SpectralSequence& seq) {
  if (seq.bands() < 2) throw ValidationError("NDVI needs at least two bands");
  std::vector<double> out(seq.composites());
  for (std::size_t t = 0; t < out.size(); ++t) {
    out[t] = ndvi_from_bands(seq.values.at(t, 0), seq.values.at(t, 1));
  }
  return out;
}

CropProfile shifted_profile(const CropProfile& profile, int shift_days) {
  CropProfile p = profile;
  p.greenup_day += shift_days;
  p.senescence_day += shift_days;
  return p;
}

CropProfile jitter_profile(const CropProfile& profile, Rng& rng) {
  CropProfile p = profile;
  p.greenup_rate *= rng.uniform(0.9, 1.1);
  p.senescence_rate *= rng.uniform(0.9, 1.1);
  p.greenup_day += rng.uniform(-4.0, 4.0);
  p.senescence_day += rng.uniform(-4.0, 4.0);
  return p;
}

LabeledPixel synth_pixel(const CropProfile& profile, std::size_t class_label,
                         const SeasonScenario& scenario, std::uint64_t seed, std::string pixel_id) {
  profile.validate();
  scenario.validate();
  const CropProfile p = shifted_profile(profile, scenario.planting_shift_days);
  Rng rng(seed);
  const std::size_t n = scenario.composites_per_year;
  const std::size_t bands = scenario.bands;
  Tensor values = Tensor::matrix(n, bands);
  const double cloud_sigma = std::max(scenario.noise_sigma, 0.01);
  for (std::size_t t = 0; t < n; ++t) {
    const bool cloudy = scenario.cloud_drop_prob > 0.0 && rng.uniform() < scenario.cloud_drop_prob;
    if (cloudy) {
      for (std::size_t b = 0; b < bands; ++b) {
        values.at(t, b) = std::clamp(kCloudReflectance + rng.normal(0.0, cloud_sigma), 0.0, 1.0);
      }
      continue;
    }
    const double ndvi = double_logistic_ndvi(composite_day(t, scenario.composite_period_days), p);
    const auto refl = band_expand(ndvi, bands, scenario.noise_sigma, rng);
    std::copy(refl.begin(), refl.end(), values.row(t).begin());
  }
  LabeledPixel px;
  px.pixel_id = std::move(pixel_id);
  px.class_label = class_label;
  px.sequence = SpectralSequence{std::move(values), scenario.composite_period_days};
  px.scenario_tag = scenario.name;
  return px;
}

std::vector<LabeledPixel> synth_dataset(std::span<const ClassCount> mix, const TemplateSet& templates,
                                        const SeasonScenario& scenario, std::uint64_t seed,
                                        Execution exec) {
  if (mix.empty()) throw ValidationError("class mix is empty");
  scenario.validate();
  struct Job {
    const CropProfile* profile;
    std::size_t label;
  };
  std::vector<Job> jobs;
  for (std::size_t label = 0; label < mix.size(); ++label) {
    const auto& entry = mix[label];
    if (entry.count == 0) {
      throw ValidationError("class '" + entry.class_name + "' has a zero count in the mix");
    }
    auto it = templates.find(entry.class_name);
    if (it == templates.end()) {
      throw ValidationError("class '" + entry.class_name + "' has no template");
    }
    it->second.validate();
    for (std::size_t i = 0; i < entry.count; ++i) jobs.push_back({&it->second, label});
  }

  std::vector<LabeledPixel> pixels(jobs.size());
  for_each_index(jobs.size(), exec, [&](std::size_t i) {
    const std::uint64_t pixel_seed = mix_seed(seed, i);
    Rng jitter(pixel_seed);
    const CropProfile p = jitter_profile(*jobs[i].profile, jitter);
    pixels[i] = synth_pixel(p, jobs[i].label, scenario, jitter.next_u64(),
                            fmt_index(scenario.name, i));
  });

  Rng order(mix_seed(seed, ~0ULL));
  order.shuffle(pixels);
  return pixels;
}

}  // namespace cropmon

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cropmon/phenology.hpp"
#include "cropmon/sequence.hpp"

namespace cropmon {

struct WindowConfig {
  std::size_t window_composites = 4;
  std::size_t stride_composites = 1;
  int composite_period_days = 8;
};

// T = floor((T_raw - window) / stride) + 1; steps concatenate composites in
// composite order, then band order.
WindowedSequence window_sequence(const SpectralSequence& raw, std::size_t window_composites,
                                 std::size_t stride_composites);

struct Pixel {
  std::string id;
  std::size_t label = 0;
  SpectralSequence raw;
  WindowedSequence windowed;
};

class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<Pixel> pixels, std::vector<std::string> class_names, WindowConfig window);

  static Dataset from_labeled(std::vector<LabeledPixel> pixels, std::vector<std::string> class_names,
                              WindowConfig window = {});

  const std::vector<Pixel>& pixels() const { return pixels_; }
  const Pixel& operator[](std::size_t i) const { return pixels_[i]; }
  std::size_t size() const { return pixels_.size(); }
  bool empty() const { return pixels_.empty(); }

  const std::vector<std::string>& class_names() const { return class_names_; }
  std::size_t num_classes() const { return class_names_.size(); }
  const WindowConfig& window() const { return window_; }

  std::size_t steps() const;
  std::size_t feature_dim() const;
  std::size_t raw_composites() const;
  std::size_t bands() const;

  std::vector<std::size_t> labels() const;
  std::vector<std::size_t> class_counts() const;

  Dataset subset(std::span<const std::size_t> indices) const;
  // Same pixels with every windowed sequence replaced by `transform(seq)`.
  template <typename Fn>
  Dataset map_windowed(Fn&& transform) const {
    Dataset out = *this;
    for (Pixel& p : out.pixels_) p.windowed = transform(p.windowed);
    return out;
  }

  // Canonical CSV text and its FNV-1a digest.
  std::string to_csv() const;
  std::string digest() const;

 private:
  void validate() const;

  std::vector<Pixel> pixels_;
  std::vector<std::string> class_names_;
  WindowConfig window_;
};

struct LoadOptions {
  WindowConfig window;
  // When empty, class names are taken in order of first appearance.
  std::vector<std::string> class_names;
};

Dataset parse_dataset_csv(const std::string& text, const LoadOptions& options = {},
                          const std::string& source_name = "<memory>");
Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& options = {});
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

// Stratified by class; each part receives round(cumulative fraction) pixels
// of every class. Parts keep the original pixel order.
std::vector<Dataset> split(const Dataset& dataset, std::span<const double> fractions, std::uint64_t seed);

std::string read_file(const std::filesystem::path& path);
// Writes via a temporary sibling and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

std::string format_double(double v);  // 17 significant digits

}  // namespace cropmon

#pragma once

#include "kmine/data/sample.hpp"

#include <json.hpp>

#include <cstdint>

namespace kmine::data {

/// Generator settings for the synthetic shapes dataset.
struct ShapeSpec {
  int min_shapes = 1;
  int max_shapes = 3;
  bool ellipses = true;
  bool rectangles = true;
  double min_extent = 0.08;  // semi-axis / half-side as a fraction of image size
  double max_extent = 0.22;
  bool force_disjoint = false;
  int min_gap_px = 2;
  double contrast_min = 0.15;
  double contrast_max = 0.45;
  double noise_sigma = 0.05;
  double texture_amplitude = 0.08;
  /// Shapes painted into the image but not into the mask.
  int distractors = 0;
  double distractor_contrast = 0.2;

  void validate() const;
};

void to_json(nlohmann::json& j, const ShapeSpec& s);
void from_json(const nlohmann::json& j, ShapeSpec& s);

/// n labelled samples of 1-3 filled ellipses/rectangles on a textured background.
/// Sample i depends only on (seed, i).
std::vector<ImageSample> generate_synthetic_dataset(int n, int image_size, const ShapeSpec& spec,
                                                    std::uint64_t seed);

/// Writes samples as flat_pairs PNG files (<id>.img.png / <id>.mask.png).
void export_flat_pairs(const std::filesystem::path& dir, const std::vector<ImageSample>& samples);

}  // namespace kmine::data

#include "kmine/data/augment.hpp"

#include <cassert>

namespace kmine::data {

void AugmentationConfig::validate() const {
  for (double p : {flip_prob, rotate_prob, transpose_prob}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("augmentation: probabilities must be in [0,1]");
  }
  if (resize_shortest_side < 1 || crop_size < 1) {
    throw ValidationError("augmentation: resize_shortest_side and crop_size must be positive");
  }
  if (crop_size > resize_shortest_side) {
    throw ValidationError("augmentation: crop_size must not exceed resize_shortest_side");
  }
}

void to_json(nlohmann::json& j, const AugmentationConfig& c) {
  j = {{"enabled", c.enabled},
       {"flip_prob", c.flip_prob},
       {"rotate_prob", c.rotate_prob},
       {"transpose_prob", c.transpose_prob},
       {"resize_shortest_side", c.resize_shortest_side},
       {"crop_size", c.crop_size},
       {"free_rotation", c.free_rotation},
       {"max_rotation_deg", c.max_rotation_deg}};
}

void from_json(const nlohmann::json& j, AugmentationConfig& c) {
  c = AugmentationConfig{};
  c.enabled = j.value("enabled", c.enabled);
  c.flip_prob = j.value("flip_prob", c.flip_prob);
  c.rotate_prob = j.value("rotate_prob", c.rotate_prob);
  c.transpose_prob = j.value("transpose_prob", c.transpose_prob);
  c.resize_shortest_side = j.value("resize_shortest_side", c.resize_shortest_side);
  c.crop_size = j.value("crop_size", c.crop_size);
  c.free_rotation = j.value("free_rotation", c.free_rotation);
  c.max_rotation_deg = j.value("max_rotation_deg", c.max_rotation_deg);
}

void to_json(nlohmann::json& j, const ViewTransform& t) {
  j = {{"src", {t.src_rows, t.src_cols}},
       {"resized", {t.resized_rows, t.resized_cols}},
       {"crop", {t.crop_row, t.crop_col, t.crop_size_rows, t.crop_size_cols}},
       {"hflip", t.hflip},
       {"vflip", t.vflip},
       {"quarter_turns", t.quarter_turns},
       {"transpose", t.transpose},
       {"angle_deg", t.angle_deg}};
}

ViewTransform ViewTransform::identity(Eigen::Index rows, Eigen::Index cols) {
  ViewTransform t;
  t.src_rows = t.resized_rows = t.crop_size_rows = rows;
  t.src_cols = t.resized_cols = t.crop_size_cols = cols;
  return t;
}

Eigen::Index ViewTransform::out_rows() const {
  const bool swap = (quarter_turns % 2 != 0) != transpose;
  return swap ? crop_size_cols : crop_size_rows;
}

Eigen::Index ViewTransform::out_cols() const {
  const bool swap = (quarter_turns % 2 != 0) != transpose;
  return swap ? crop_size_rows : crop_size_cols;
}

RgbImage ViewTransform::apply(const RgbImage& image) const {
  RgbImage out;
  for (int c = 0; c < 3; ++c) {
    out.channels[c] = apply<float>(image.channels[c], false).cwiseMax(0.0f).cwiseMin(1.0f);
  }
  return out;
}

ImageSample ViewTransform::apply(const ImageSample& sample) const {
  ImageSample out{sample.id, apply(sample.image), std::nullopt, sample.source};
  if (sample.mask) out.mask = apply(*sample.mask);
  return out;
}

ViewTransform eval_transform(Eigen::Index rows, Eigen::Index cols, const AugmentationConfig& cfg) {
  if (rows <= 0 || cols <= 0) throw ValidationError("augment: image has non-positive dims");
  ViewTransform t = ViewTransform::identity(rows, cols);
  const double scale = static_cast<double>(cfg.resize_shortest_side) /
                       static_cast<double>(std::min(rows, cols));
  t.resized_rows = std::max<Eigen::Index>(cfg.resize_shortest_side, std::lround(rows * scale));
  t.resized_cols = std::max<Eigen::Index>(cfg.resize_shortest_side, std::lround(cols * scale));
  if (std::min(rows, cols) == cfg.resize_shortest_side) {
    t.resized_rows = rows;
    t.resized_cols = cols;
  }
  assert(t.resized_rows >= cfg.crop_size && t.resized_cols >= cfg.crop_size);
  t.crop_size_rows = t.crop_size_cols = cfg.crop_size;
  t.crop_row = (t.resized_rows - cfg.crop_size) / 2;
  t.crop_col = (t.resized_cols - cfg.crop_size) / 2;
  return t;
}

ViewTransform draw_transform(Eigen::Index rows, Eigen::Index cols, const AugmentationConfig& cfg,
                             Rng& rng) {
  ViewTransform t = eval_transform(rows, cols, cfg);
  if (!cfg.enabled) return t;
  // Fixed draw order keeps the stream reproducible.
  t.hflip = uniform01(rng) < cfg.flip_prob;
  t.vflip = uniform01(rng) < cfg.flip_prob;
  const bool rotate = uniform01(rng) < cfg.rotate_prob;
  const double angle_u = uniform01(rng);
  const int turns = 1 + static_cast<int>(uniform_index(rng, 3));
  t.transpose = uniform01(rng) < cfg.transpose_prob;
  if (rotate) {
    if (cfg.free_rotation) {
      t.angle_deg = (2.0 * angle_u - 1.0) * cfg.max_rotation_deg;
    } else {
      t.quarter_turns = turns;
    }
  }
  return t;
}

ImageSample augment(const ImageSample& sample, const AugmentationConfig& cfg, Rng& rng) {
  if (sample.image.empty()) throw ValidationError("augment: image has non-positive dims");
  return draw_transform(sample.image.rows(), sample.image.cols(), cfg, rng).apply(sample);
}

}  // namespace kmine::data

#include "kmine/prompt/prompt.hpp"

#include "kmine/data/resample.hpp"

#include <algorithm>
#include <cmath>

namespace kmine::prompt {

void ProbabilityMask::validate() const {
  if (probs.size() == 0) throw ValidationError("probability mask '" + source_id + "' is empty");
  if (!probs.isFinite().all()) {
    throw ValidationError("probability mask '" + source_id + "' has non-finite values");
  }
  if ((probs < 0.0f).any() || (probs > 1.0f).any()) {
    throw ValidationError("probability mask '" + source_id + "' has values outside [0,1]");
  }
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw ValidationError("probability mask threshold must be in [0,1]");
  }
}

std::string to_string(PromptMode mode) {
  switch (mode) {
    case PromptMode::points: return "points";
    case PromptMode::box: return "box";
    case PromptMode::points_box: return "points_box";
    case PromptMode::points_box_mask: return "points_box_mask";
  }
  return "?";
}

PromptMode prompt_mode_from_string(const std::string& s) {
  if (s == "points") return PromptMode::points;
  if (s == "box") return PromptMode::box;
  if (s == "points_box") return PromptMode::points_box;
  if (s == "points_box_mask") return PromptMode::points_box_mask;
  throw ValidationError("unknown prompt mode '" + s +
                        "' (expected points|box|points_box|points_box_mask)");
}

bool mode_uses_points(PromptMode mode) { return mode != PromptMode::box; }
bool mode_uses_box(PromptMode mode) { return mode != PromptMode::points; }
bool mode_uses_mask(PromptMode mode) { return mode == PromptMode::points_box_mask; }

void PromptSet::validate(Eigen::Index rows, Eigen::Index cols) const {
  if (mode_uses_points(mode) == points.empty()) {
    throw ValidationError("prompt set: points do not match mode " + to_string(mode));
  }
  if (mode_uses_box(mode) != box.has_value()) {
    throw ValidationError("prompt set: box does not match mode " + to_string(mode));
  }
  if (mode_uses_mask(mode) != mask_prompt.has_value()) {
    throw ValidationError("prompt set: mask prompt does not match mode " + to_string(mode));
  }
  auto inside = [&](int c, int r) { return c >= 0 && r >= 0 && c < cols && r < rows; };
  for (const auto& p : points) {
    if (!inside(p.at.col, p.at.row)) throw ValidationError("prompt set: point outside image");
  }
  if (box && (!inside(box->min_col, box->min_row) || !inside(box->max_col, box->max_row) ||
              box->min_col > box->max_col || box->min_row > box->max_row)) {
    throw ValidationError("prompt set: malformed box");
  }
}

void PromptConfig::validate() const {
  if (point_count < 1) throw ValidationError("prompt.point_count must be >= 1");
  if (mask_prompt_size && *mask_prompt_size < 1) {
    throw ValidationError("prompt.mask_prompt_size must be >= 1");
  }
}

void to_json(nlohmann::json& j, const PromptConfig& c) {
  j = {{"mode", to_string(c.mode)}, {"point_count", c.point_count}};
  j["mask_prompt_size"] = c.mask_prompt_size ? nlohmann::json(*c.mask_prompt_size) : nullptr;
}

void from_json(const nlohmann::json& j, PromptConfig& c) {
  c = PromptConfig{};
  if (j.contains("mode")) c.mode = prompt_mode_from_string(j.at("mode").get<std::string>());
  c.point_count = j.value("point_count", c.point_count);
  if (j.contains("mask_prompt_size") && !j.at("mask_prompt_size").is_null()) {
    c.mask_prompt_size = j.at("mask_prompt_size").get<int>();
  }
}

std::vector<PixelCoord> extract_points(const ProbabilityMask& mask, int x, Rng& rng) {
  mask.validate();
  const auto n = mask.probs.size();
  if (x < 1) throw ValidationError("extract_points: x must be >= 1");
  if (x > n) {
    throw ValidationError("extract_points: x=" + std::to_string(x) + " exceeds pixel count " +
                          std::to_string(n));
  }
  const float* p = mask.probs.data();
  std::vector<float> values(p, p + n);
  std::nth_element(values.begin(), values.begin() + (x - 1), values.end(), std::greater<>());
  const float level = values[static_cast<std::size_t>(x - 1)];

  const auto cols = mask.probs.cols();
  auto coord = [cols](Eigen::Index i) {
    return PixelCoord{static_cast<int>(i % cols), static_cast<int>(i / cols)};
  };
  std::vector<PixelCoord> out;
  std::vector<Eigen::Index> ties;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (p[i] > level) {
      out.push_back(coord(i));
    } else if (p[i] == level) {
      ties.push_back(i);
    }
  }
  // Partial Fisher-Yates over the tie set.
  const auto need = static_cast<std::size_t>(x) - out.size();
  for (std::size_t k = 0; k < need; ++k) {
    const auto j = k + uniform_index(rng, ties.size() - k);
    std::swap(ties[k], ties[j]);
    out.push_back(coord(ties[k]));
  }
  return out;
}

std::optional<Box> extract_box(const ProbabilityMask& mask) {
  mask.validate();
  std::optional<Box> box;
  const auto thr = static_cast<float>(mask.threshold);
  for (Eigen::Index r = 0; r < mask.probs.rows(); ++r) {
    for (Eigen::Index c = 0; c < mask.probs.cols(); ++c) {
      if (mask.probs(r, c) < thr) continue;
      const int ci = static_cast<int>(c), ri = static_cast<int>(r);
      if (!box) {
        box = Box{ci, ri, ci, ri};
      } else {
        box->min_col = std::min(box->min_col, ci);
        box->max_col = std::max(box->max_col, ci);
        box->min_row = std::min(box->min_row, ri);
        box->max_row = std::max(box->max_row, ri);
      }
    }
  }
  return box;
}

std::optional<PromptSet> build_prompt_set(const ProbabilityMask& mask, const PromptConfig& config,
                                          Rng& rng) {
  config.validate();
  PromptSet set;
  set.mode = config.mode;
  if (mode_uses_box(config.mode)) {
    set.box = extract_box(mask);
    if (!set.box) return std::nullopt;
  }
  if (mode_uses_points(config.mode)) {
    for (const auto& c : extract_points(mask, config.point_count, rng)) set.points.push_back({c});
  }
  if (mode_uses_mask(config.mode)) {
    set.mask_prompt = config.mask_prompt_size
                          ? data::resize_bilinear(mask.probs, *config.mask_prompt_size,
                                                  *config.mask_prompt_size)
                          : mask.probs;
  }
  return set;
}

namespace {

nlohmann::json box_json(const std::optional<Box>& box) {
  if (!box) return nullptr;
  return {box->min_col, box->min_row, box->max_col, box->max_row};
}

}  // namespace

nlohmann::json audit_json(const std::string& sample_id, const PromptSet& prompts) {
  auto points = nlohmann::json::array();
  for (const auto& p : prompts.points) points.push_back({p.at.col, p.at.row});
  return {{"sample_id", sample_id},
          {"mode", to_string(prompts.mode)},
          {"points", points},
          {"box", box_json(prompts.box)},
          {"has_mask_prompt", prompts.mask_prompt.has_value()}};
}

nlohmann::json rejection_audit_json(const std::string& sample_id, PromptMode mode) {
  return {{"sample_id", sample_id},
          {"mode", to_string(mode)},
          {"points", nlohmann::json::array()},
          {"box", nullptr},
          {"has_mask_prompt", false},
          {"rejected", true}};
}

}  // namespace kmine::prompt

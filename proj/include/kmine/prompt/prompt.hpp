#pragma once

#include "kmine/core/rng.hpp"
#include "kmine/core/types.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace kmine::prompt {

/// Student output for one sample; values are foreground probabilities.
struct ProbabilityMask {
  ProbPlane probs;
  std::string source_id;
  double threshold = 0.5;

  /// Nonempty, finite, every value in [0,1].
  void validate() const;
};

enum class PromptMode { points, box, points_box, points_box_mask };

std::string to_string(PromptMode mode);
PromptMode prompt_mode_from_string(const std::string& s);
bool mode_uses_points(PromptMode mode);
bool mode_uses_box(PromptMode mode);
bool mode_uses_mask(PromptMode mode);

/// Guiding point; only positive points are produced.
struct PromptPoint {
  PixelCoord at;
  bool positive = true;
  friend bool operator==(const PromptPoint&, const PromptPoint&) = default;
};

struct PromptSet {
  PromptMode mode = PromptMode::points_box;
  std::vector<PromptPoint> points;
  std::optional<Box> box;
  std::optional<ProbPlane> mask_prompt;

  /// Fields agree with the mode and all coordinates lie inside a rows x cols image.
  void validate(Eigen::Index rows, Eigen::Index cols) const;
};

struct PromptConfig {
  PromptMode mode = PromptMode::points_box;
  int point_count = 3;
  /// Side length the mask prompt is resized to; unset keeps the student resolution.
  std::optional<int> mask_prompt_size;

  void validate() const;
};

void to_json(nlohmann::json& j, const PromptConfig& c);
void from_json(const nlohmann::json& j, PromptConfig& c);

/// The x highest-probability pixels. Pixels strictly above the x-th largest value are always
/// taken; the remainder is drawn uniformly without replacement from the pixels equal to it.
/// Strict pixels come first in row-major order, then the drawn ties in draw order.
std::vector<PixelCoord> extract_points(const ProbabilityMask& mask, int x, Rng& rng);

/// Tight inclusive box of pixels with prob >= threshold; nullopt when none pass.
std::optional<Box> extract_box(const ProbabilityMask& mask);

/// Prompts for the requested mode. nullopt is the rejection marker: the mode needs a box and
/// no pixel reaches the threshold, so the teacher must not be consulted for this sample.
std::optional<PromptSet> build_prompt_set(const ProbabilityMask& mask, const PromptConfig& config,
                                          Rng& rng);

/// Audit record {sample_id, mode, points, box|null, has_mask_prompt}.
nlohmann::json audit_json(const std::string& sample_id, const PromptSet& prompts);
/// Audit record for a rejected sample (mode kept, no points, box null).
nlohmann::json rejection_audit_json(const std::string& sample_id, PromptMode mode);

}  // namespace kmine::prompt

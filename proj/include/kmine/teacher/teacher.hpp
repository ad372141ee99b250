#pragma once

#include "kmine/core/types.hpp"
#include "kmine/data/augment.hpp"
#include "kmine/prompt/prompt.hpp"

#include <json.hpp>

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace kmine::teacher {

struct TeacherRequest {
  std::string sample_id;
  RgbImage image;
  prompt::PromptSet prompts;
  /// How `image` was derived from the stored sample. Lets teachers that know the stored
  /// sample (the oracle) stay registered with augmented views.
  data::ViewTransform view;
  /// Mining pass or epoch index, recorded on the pseudo label.
  int pass = 0;

  /// Prompt coordinates inside the image, fields consistent with the mode.
  void validate() const;
};

/// Builds a request for an untransformed image.
TeacherRequest make_request(std::string sample_id, const RgbImage& image,
                            prompt::PromptSet prompts, int pass);

struct PseudoLabel {
  BinaryMask mask;
  std::optional<double> confidence;
  int generated_at = 0;
  std::string teacher_id;
};

/// Per-element outcome of predict_batch.
struct TeacherResult {
  std::optional<PseudoLabel> label;
  std::string error;

  bool ok() const { return label.has_value(); }
};

class UnknownSampleError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Frozen promptable segmenter. predict never changes the teacher's state.
class Teacher {
 public:
  virtual ~Teacher() = default;

  virtual std::string id() const = 0;
  virtual PseudoLabel predict(const TeacherRequest& request) const = 0;
  /// Order-preserving; a failing element is reported in place and does not abort the rest.
  /// BackendUnavailable is not per-element and propagates.
  virtual std::vector<TeacherResult> predict_batch(std::span<const TeacherRequest> requests) const;
  /// Digest of everything that determines the teacher's outputs.
  virtual std::string state_checksum() const = 0;
  /// False means callers must serialize predict calls.
  virtual bool concurrent_safe() const = 0;
};

enum class Backend { sam, medsam, oracle };

std::string to_string(Backend b);
Backend backend_from_string(const std::string& s);

struct OracleNoise {
  int boundary_jitter_px = 0;
  double component_drop_prob = 0.0;
  bool prompt_sensitivity = true;

  void validate() const;
};

struct TeacherConfig {
  Backend backend = Backend::oracle;
  std::string weights_path;
  std::string endpoint_url;
  std::string device = "cpu";
  bool multimask = true;
  double timeout_s = 60.0;
  OracleNoise oracle;
  std::uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const OracleNoise& n);
void from_json(const nlohmann::json& j, OracleNoise& n);
void to_json(nlohmann::json& j, const TeacherConfig& c);
void from_json(const nlohmann::json& j, TeacherConfig& c);

using GroundTruthLookup = std::map<std::string, BinaryMask>;

/// Builds the configured backend. The oracle needs `ground_truth`; remote backends ignore it.
std::unique_ptr<Teacher> make_teacher(const TeacherConfig& config, GroundTruthLookup ground_truth);

}  // namespace kmine::teacher

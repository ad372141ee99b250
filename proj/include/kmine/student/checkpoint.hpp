#pragma once

#include "kmine/core/types.hpp"
#include "kmine/nn/adam.hpp"
#include "kmine/student/student.hpp"

#include <json.hpp>

#include <map>
#include <memory>
#include <optional>
#include <string>

namespace kmine::student {

inline constexpr int kCheckpointVersion = 1;

class VersionMismatch : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ArchitectureMismatch : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

void to_json(nlohmann::json& j, const StudentConfig& c);
void from_json(const nlohmann::json& j, StudentConfig& c);

/// Everything besides tensors that a resumable checkpoint carries.
struct CheckpointMeta {
  int epoch = 0;
  std::string manifest_hash;
  std::map<std::string, std::string> rng_states;
  nlohmann::json extra = nlohmann::json::object();
};

/// Optimizer snapshot restored from a checkpoint.
struct OptimizerState {
  double lr = 0;
  long long step = 0;
  std::vector<nn::Tensor> first_moments;
  std::vector<nn::Tensor> second_moments;

  void apply_to(nn::Adam& opt) const;
};

struct LoadedCheckpoint {
  std::unique_ptr<Student> student;
  CheckpointMeta meta;
  std::optional<OptimizerState> optimizer;
};

/// Single self-describing file: magic, version, JSON header, raw float32 tensors.
void save_checkpoint(const std::string& path, Student& student, const CheckpointMeta& meta,
                     nn::Adam* optimizer = nullptr);

LoadedCheckpoint load_checkpoint(const std::string& path,
                                 std::optional<Architecture> expected = std::nullopt);

/// Header only.
nlohmann::json read_checkpoint_header(const std::string& path);

/// Model tensors by name (no optimizer state).
std::map<std::string, nn::Tensor> read_checkpoint_tensors(const std::string& path);

}  // namespace kmine::student

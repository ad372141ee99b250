#pragma once

#include "kmine/data/sample.hpp"
#include "kmine/data/synthetic.hpp"
#include "kmine/pipeline/config.hpp"
#include "kmine/student/student.hpp"
#include "kmine/teacher/teacher.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace kmine::cli {

struct SyntheticBlock {
  int count = 300;
  int image_size = 96;
  std::uint64_t seed = 0;
  data::ShapeSpec spec;
};

struct DatasetBlock {
  /// kvasir_seg | covid_qu_ex | flat_pairs | synthetic
  std::string layout = "synthetic";
  std::string root;
  double labeled_fraction = 0.5;
  double val_fraction = 0.1;
  double test_fraction = 0.1;
  /// Split seed; the experiment seed when unset.
  std::optional<std::uint64_t> split_seed;
  std::optional<int> resize_shortest_side;
  SyntheticBlock synthetic;
};

struct ExperimentConfig {
  std::string name;
  std::uint64_t seed = 0;
  DatasetBlock dataset;
  student::StudentConfig student;
  teacher::TeacherConfig teacher;
  pipeline::TrainConfig train;
  std::string output_dir = "runs/default";

  /// Field ranges plus resolvable paths.
  void validate() const;
  std::uint64_t split_seed() const { return dataset.split_seed.value_or(seed); }
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

/// Applies KMINE_<KEY>__<SUBKEY>=value variables to a config document. Keys are matched
/// case-insensitively against the existing structure; values are parsed as JSON when possible
/// and taken as strings otherwise.
void apply_env_overrides(nlohmann::json& doc, const std::map<std::string, std::string>& env);
std::map<std::string, std::string> environment_with_prefix(const std::string& prefix);

inline constexpr const char* kEnvPrefix = "KMINE_";

/// Reads a JSON config file (or defaults when `path` is empty), applies environment overrides.
ExperimentConfig load_experiment(const std::string& path,
                                 const std::map<std::string, std::string>& env);

/// All samples of the configured dataset.
data::Dataset load_experiment_dataset(const ExperimentConfig& config);

/// Exclusive claim on an output directory, released on destruction. A lock left behind by a
/// dead process is taken over.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::filesystem::path& dir);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  std::filesystem::path path_;
};

class LockError : public Error {
 public:
  using Error::Error;
};

}  // namespace kmine::cli

#pragma once

#include "kmine/data/augment.hpp"
#include "kmine/metrics/losses.hpp"
#include "kmine/prompt/prompt.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>

namespace kmine::pipeline {

enum class Scheduling { supervised_only, one_time, continuous };

std::string to_string(Scheduling s);
Scheduling scheduling_from_string(const std::string& s);

struct TrainConfig {
  double base_lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 0.0;
  int batch_size = 8;
  int max_epochs = 100;
  double plateau_factor = 0.5;
  int plateau_patience = 3;
  /// Relative improvement a val loss needs over the best so far to count as progress.
  double plateau_threshold = 1e-4;
  double min_lr = 1e-7;
  int early_stop_patience = 10;
  metrics::LossConfig loss;
  prompt::PromptConfig prompt;
  Scheduling scheduling = Scheduling::supervised_only;
  data::AugmentationConfig augmentation;
  std::uint64_t seed = 0;
  /// Start phase 2 from a freshly initialized student instead of the warm start.
  bool reinit_student = false;

  /// base_lr == 0 is accepted and means a frozen student: no parameter or statistics updates.
  void validate() const;
  bool frozen() const { return base_lr == 0.0; }
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

}  // namespace kmine::pipeline

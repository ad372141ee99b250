#include "kmine/pipeline/config.hpp"

namespace kmine::pipeline {

std::string to_string(Scheduling s) {
  switch (s) {
    case Scheduling::supervised_only: return "supervised_only";
    case Scheduling::one_time: return "one_time";
    case Scheduling::continuous: return "continuous";
  }
  return "?";
}

Scheduling scheduling_from_string(const std::string& s) {
  if (s == "supervised_only" || s == "supervised") return Scheduling::supervised_only;
  if (s == "one_time") return Scheduling::one_time;
  if (s == "continuous") return Scheduling::continuous;
  throw ValidationError("unknown scheduling '" + s +
                        "' (expected supervised_only|one_time|continuous)");
}

void TrainConfig::validate() const {
  if (!(min_lr > 0.0)) throw ValidationError("train.min_lr must be > 0");
  if (!(base_lr == 0.0 || base_lr > min_lr)) {
    throw ValidationError("train.base_lr must exceed train.min_lr (or be 0 for a frozen run)");
  }
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) {
    throw ValidationError("train.beta1/beta2 must be in [0,1)");
  }
  if (batch_size < 1) throw ValidationError("train.batch_size must be >= 1");
  if (max_epochs < 1) throw ValidationError("train.max_epochs must be >= 1");
  if (!(plateau_factor > 0 && plateau_factor < 1)) {
    throw ValidationError("train.plateau_factor must be in (0,1)");
  }
  if (plateau_patience < 1) throw ValidationError("train.plateau_patience must be >= 1");
  if (early_stop_patience < 1) throw ValidationError("train.early_stop_patience must be >= 1");
  if (plateau_threshold < 0) throw ValidationError("train.plateau_threshold must be >= 0");
  loss.validate();
  prompt.validate();
  augmentation.validate();
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"base_lr", c.base_lr},
       {"beta1", c.beta1},
       {"beta2", c.beta2},
       {"weight_decay", c.weight_decay},
       {"batch_size", c.batch_size},
       {"max_epochs", c.max_epochs},
       {"plateau_factor", c.plateau_factor},
       {"plateau_patience", c.plateau_patience},
       {"plateau_threshold", c.plateau_threshold},
       {"min_lr", c.min_lr},
       {"early_stop_patience", c.early_stop_patience},
       {"loss",
        {{"k", c.loss.k}, {"lambda", c.loss.lambda_pseudo}, {"dice_smooth", c.loss.dice_smooth}}},
       {"prompt", c.prompt},
       {"scheduling", to_string(c.scheduling)},
       {"augmentation", c.augmentation},
       {"seed", c.seed},
       {"reinit_student", c.reinit_student}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c = TrainConfig{};
  c.base_lr = j.value("base_lr", c.base_lr);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.plateau_factor = j.value("plateau_factor", c.plateau_factor);
  c.plateau_patience = j.value("plateau_patience", c.plateau_patience);
  c.plateau_threshold = j.value("plateau_threshold", c.plateau_threshold);
  c.min_lr = j.value("min_lr", c.min_lr);
  c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
  if (j.contains("loss")) {
    const auto& l = j.at("loss");
    c.loss.k = l.value("k", c.loss.k);
    c.loss.lambda_pseudo = l.value("lambda", c.loss.lambda_pseudo);
    c.loss.dice_smooth = l.value("dice_smooth", c.loss.dice_smooth);
  }
  if (j.contains("prompt")) c.prompt = j.at("prompt").get<prompt::PromptConfig>();
  if (j.contains("scheduling")) {
    c.scheduling = scheduling_from_string(j.at("scheduling").get<std::string>());
  }
  if (j.contains("augmentation")) {
    c.augmentation = j.at("augmentation").get<data::AugmentationConfig>();
  }
  c.seed = j.value("seed", c.seed);
  c.reinit_student = j.value("reinit_student", c.reinit_student);
}

}  // namespace kmine::pipeline

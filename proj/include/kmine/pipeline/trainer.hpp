#pragma once

#include "kmine/data/sample.hpp"
#include "kmine/metrics/losses.hpp"
#include "kmine/pipeline/config.hpp"
#include "kmine/pipeline/record.hpp"
#include "kmine/student/student.hpp"
#include "kmine/teacher/teacher.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <span>

namespace kmine::pipeline {

/// One optimisation step as seen by the loss.
struct BatchLog {
  int epoch = 0;
  int batch = 0;
  std::span<const metrics::LossPair> labeled;
  std::span<const metrics::LossPair> pseudo;
  metrics::LossConfig loss_config;
  metrics::CombinedLoss loss;
};

/// Scores a pseudo label against hidden truth for the audit log only. Receives the sample id,
/// the view the label was produced in, and the label. Its result is written to the audit and
/// never read back by training.
using AuditScorer = std::function<std::optional<double>(
    const std::string&, const data::ViewTransform&, const BinaryMask&)>;

struct Hooks {
  std::function<void(const BatchLog&)> on_batch;
  std::function<void(const EpochRecord&)> on_epoch;
  AuditScorer audit_scorer;
  /// Progress lines; null for silence.
  std::ostream* log = nullptr;
  /// When set, last.ckpt / best.ckpt are written here after every epoch.
  std::optional<std::filesystem::path> checkpoint_dir;
  /// Continue from checkpoint_dir/last.ckpt when present.
  bool resume = false;
  std::string manifest_hash;
};

/// Fixed pseudo labels from one mining pass, at the resolution of the eval view.
struct PseudoLabelSet {
  /// Unlabeled samples in their eval view, carrying the pseudo label as mask.
  std::vector<data::ImageSample> samples;
  std::map<std::string, teacher::PseudoLabel> labels;
  std::vector<nlohmann::json> audit;
  int rejected = 0;
  int failures = 0;
};

/// Supervised training on labeled data only; restores the best-val-loss weights on return.
RunRecord train_supervised(student::Student& student, std::span<const data::ImageSample> labeled,
                           std::span<const data::ImageSample> val, const TrainConfig& config,
                           const Hooks& hooks = {});

/// Student forward -> prompts -> teacher for every unlabeled sample, once, in eval mode.
/// Rejected prompts and teacher failures are left out of the result.
PseudoLabelSet mine_one_time(student::Student& student,
                             std::span<const data::ImageSample> unlabeled,
                             const teacher::Teacher& teacher, const TrainConfig& config,
                             const Hooks& hooks = {});

/// Writes masks as PNG plus index.json and audit.jsonl.
void save_pseudo_labels(const std::filesystem::path& dir, const PseudoLabelSet& set);
/// Reloads a saved set; images come from `unlabeled` passed through the eval view.
PseudoLabelSet load_pseudo_labels(const std::filesystem::path& dir,
                                  std::span<const data::ImageSample> unlabeled,
                                  const TrainConfig& config);

/// Training on labeled data plus fixed pseudo labels (weighted by lambda).
RunRecord train_one_time(student::Student& student, std::span<const data::ImageSample> labeled,
                         const PseudoLabelSet& pseudo, std::span<const data::ImageSample> val,
                         const TrainConfig& config, const Hooks& hooks = {});

/// Training where each visit of an unlabeled sample asks the teacher for a fresh pseudo label
/// from prompts built on the current prediction.
RunRecord train_continuous(student::Student& student, std::span<const data::ImageSample> labeled,
                           std::span<const data::ImageSample> unlabeled,
                           const teacher::Teacher& teacher,
                           std::span<const data::ImageSample> val, const TrainConfig& config,
                           const Hooks& hooks = {});

/// Scores the student on labeled samples. With refine on, the student prompts the teacher and
/// the teacher's mask is scored instead (a rejected prompt scores the student's empty mask).
metrics::MetricReport evaluate(student::Student& student, std::span<const data::ImageSample> test,
                               const TrainConfig& config, const teacher::Teacher* teacher = nullptr,
                               bool refine = false);

/// Mean combined loss and overlap metrics on a labeled set, eval mode.
struct ValidationResult {
  double loss = 0;
  metrics::MetricReport report;
};
ValidationResult validate(student::Student& student, std::span<const data::ImageSample> val,
                          const TrainConfig& config);

}  // namespace kmine::pipeline

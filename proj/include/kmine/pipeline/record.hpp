#pragma once

#include "kmine/metrics/metrics.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace kmine::pipeline {

struct EpochRecord {
  int epoch = 0;
  double lr = 0;
  double train_loss = 0;
  double train_supervised = 0;
  double train_pseudo = 0;
  double val_loss = 0;
  double val_dice = 0;
  double val_iou = 0;
  int pseudo_accepted = 0;
  int pseudo_rejected = 0;
  int teacher_failures = 0;
  bool improved = false;
};

void to_json(nlohmann::json& j, const EpochRecord& r);
void from_json(const nlohmann::json& j, EpochRecord& r);

nlohmann::json to_json(const metrics::MetricReport& report, bool include_rows);

struct RunRecord {
  std::string scheduling;
  std::vector<EpochRecord> epochs;
  /// Pseudo-label audit lines (prompt, acceptance, analysis-only Dice).
  std::vector<nlohmann::json> audit;
  int best_epoch = 0;
  double best_val_loss = 0;
  bool early_stopped = false;
  std::string teacher_checksum_before;
  std::string teacher_checksum_after;
  std::optional<metrics::MetricReport> test;
};

/// Writes epochs.jsonl, audit.jsonl and summary.json into `dir`. `context` is merged into the
/// summary (config copy, manifest hash, method label ...). No wall-clock data is written, so
/// identical runs give identical files.
void write_run(const std::filesystem::path& dir, const RunRecord& record,
               const nlohmann::json& context);

nlohmann::json summary_json(const RunRecord& record, const nlohmann::json& context);

}  // namespace kmine::pipeline

#include "kmine/pipeline/record.hpp"

#include "kmine/core/types.hpp"

#include <fstream>

namespace kmine::pipeline {

void to_json(nlohmann::json& j, const EpochRecord& r) {
  j = {{"epoch", r.epoch},
       {"lr", r.lr},
       {"train_loss", r.train_loss},
       {"train_supervised", r.train_supervised},
       {"train_pseudo", r.train_pseudo},
       {"val_loss", r.val_loss},
       {"val_dice", r.val_dice},
       {"val_iou", r.val_iou},
       {"pseudo_accepted", r.pseudo_accepted},
       {"pseudo_rejected", r.pseudo_rejected},
       {"teacher_failures", r.teacher_failures},
       {"improved", r.improved}};
}

void from_json(const nlohmann::json& j, EpochRecord& r) {
  r.epoch = j.at("epoch");
  r.lr = j.at("lr");
  r.train_loss = j.at("train_loss");
  r.train_supervised = j.at("train_supervised");
  r.train_pseudo = j.at("train_pseudo");
  r.val_loss = j.at("val_loss");
  r.val_dice = j.at("val_dice");
  r.val_iou = j.at("val_iou");
  r.pseudo_accepted = j.at("pseudo_accepted");
  r.pseudo_rejected = j.at("pseudo_rejected");
  r.teacher_failures = j.at("teacher_failures");
  r.improved = j.at("improved");
}

nlohmann::json to_json(const metrics::MetricReport& report, bool include_rows) {
  nlohmann::json j = {
      {"dice", {{"mean", report.dice.mean}, {"std", report.dice.std}, {"n", report.dice.n}}},
      {"iou", {{"mean", report.iou.mean}, {"std", report.iou.std}, {"n", report.iou.n}}},
      {"std_kind", "per-sample population std"}};
  if (include_rows) {
    auto& rows = j["samples"] = nlohmann::json::array();
    for (const auto& r : report.rows) {
      rows.push_back({{"sample_id", r.sample_id}, {"dice", r.dice}, {"iou", r.iou}});
    }
  }
  return j;
}

nlohmann::json summary_json(const RunRecord& record, const nlohmann::json& context) {
  nlohmann::json j = context.is_object() ? context : nlohmann::json::object();
  j["scheduling"] = record.scheduling;
  j["epochs_run"] = record.epochs.size();
  j["best_epoch"] = record.best_epoch;
  j["best_val_loss"] = record.best_val_loss;
  j["early_stopped"] = record.early_stopped;
  if (!record.teacher_checksum_before.empty()) {
    j["teacher_checksum_before"] = record.teacher_checksum_before;
    j["teacher_checksum_after"] = record.teacher_checksum_after;
  }
  if (!record.epochs.empty()) {
    const auto& best = record.epochs[static_cast<std::size_t>(
        std::max(0, record.best_epoch - record.epochs.front().epoch))];
    j["val"] = {{"loss", best.val_loss}, {"dice", best.val_dice}, {"iou", best.val_iou}};
  }
  j["test"] = record.test ? to_json(*record.test, true) : nlohmann::json(nullptr);
  return j;
}

void write_run(const std::filesystem::path& dir, const RunRecord& record,
               const nlohmann::json& context) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream os(dir / name);
    if (!os) throw IoError("cannot write " + (dir / name).string());
    return os;
  };
  {
    auto os = open("epochs.jsonl");
    for (const auto& e : record.epochs) os << nlohmann::json(e).dump() << "\n";
  }
  {
    auto os = open("audit.jsonl");
    for (const auto& a : record.audit) os << a.dump() << "\n";
  }
  auto os = open("summary.json");
  os << summary_json(record, context).dump(2) << "\n";
}

}  // namespace kmine::pipeline

#include "kmine/cli/commands.hpp"

#include "kmine/cli/experiment.hpp"
#include "kmine/data/split.hpp"
#include "kmine/metrics/metrics.hpp"
#include "kmine/pipeline/trainer.hpp"
#include "kmine/student/checkpoint.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace kmine::cli {

namespace {

namespace fs = std::filesystem;

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string output_dir;
  bool force = false;
};

struct Context {
  ExperimentConfig config;
  fs::path out;
  bool force = false;
  std::ostream& log;
};

Context make_context(const GlobalOptions& g, std::ostream& log) {
  ExperimentConfig cfg = load_experiment(g.config_path, environment_with_prefix(kEnvPrefix));
  if (g.seed) cfg.seed = *g.seed;
  if (!g.output_dir.empty()) cfg.output_dir = g.output_dir;
  cfg.train.seed = cfg.seed;
  cfg.teacher.seed = cfg.seed;
  cfg.validate();
  return Context{cfg, fs::path(cfg.output_dir), g.force, log};
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << j.dump(2) << "\n";
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path.string());
  return nlohmann::json::parse(is);
}

/// Refuses to replace `path` unless --force was given.
void guard_overwrite(const Context& ctx, const fs::path& path) {
  if (fs::exists(path) && !ctx.force) {
    throw ValidationError(path.string() + " already exists (use --force to overwrite)");
  }
}

fs::path manifest_path(const Context& ctx) { return ctx.out / "split.json"; }

struct Loaded {
  data::Dataset dataset;
  data::SplitManifest manifest;
  data::SplitData split;
};

Loaded load_split(const Context& ctx) {
  if (!fs::exists(manifest_path(ctx))) {
    throw ValidationError("no split manifest at " + manifest_path(ctx).string() +
                          " (run `split` first)");
  }
  Loaded l;
  l.manifest = data::read_manifest(manifest_path(ctx));
  l.dataset = load_experiment_dataset(ctx.config);
  l.split = data::apply_split(l.dataset.samples, l.manifest);
  return l;
}

teacher::GroundTruthLookup truth_of(const data::Dataset& ds) {
  teacher::GroundTruthLookup gt;
  for (const auto& s : ds.samples) {
    if (s.mask) gt.emplace(s.id, *s.mask);
  }
  return gt;
}

/// Analysis-only scorer: Dice of a pseudo label against the hidden mask of its sample.
pipeline::AuditScorer make_scorer(std::shared_ptr<const teacher::GroundTruthLookup> gt) {
  return [gt](const std::string& id, const data::ViewTransform& view,
              const BinaryMask& mask) -> std::optional<double> {
    const auto it = gt->find(id);
    if (it == gt->end()) return std::nullopt;
    return metrics::dice_score(view.apply(it->second), mask);
  };
}

std::string method_label(const ExperimentConfig& cfg, pipeline::Scheduling phase) {
  if (!cfg.name.empty()) return cfg.name;
  if (phase == pipeline::Scheduling::supervised_only) return "supervised";
  return pipeline::to_string(phase) + "/" + prompt::to_string(cfg.train.prompt.mode) + "/" +
         teacher::to_string(cfg.teacher.backend);
}

nlohmann::json run_context(const Context& ctx, const Loaded& l, pipeline::Scheduling phase) {
  return {{"method", method_label(ctx.config, phase)},
          {"phase", pipeline::to_string(phase)},
          {"seed", ctx.config.seed},
          {"labeled_fraction", l.manifest.labeled_fraction},
          {"manifest_hash", l.manifest.hash()},
          {"split_sizes",
           {{"labeled", l.manifest.labeled_ids.size()},
            {"unlabeled", l.manifest.unlabeled_ids.size()},
            {"val", l.manifest.val_ids.size()},
            {"test", l.manifest.test_ids.size()}}},
          {"config", ctx.config}};
}

fs::path phase_dir(const Context& ctx, pipeline::Scheduling phase) {
  switch (phase) {
    case pipeline::Scheduling::supervised_only: return ctx.out / "supervised";
    case pipeline::Scheduling::one_time: return ctx.out / "one_time";
    case pipeline::Scheduling::continuous: return ctx.out / "continuous";
  }
  return ctx.out;
}

fs::path warm_checkpoint(const Context& ctx) {
  return phase_dir(ctx, pipeline::Scheduling::supervised_only) / "model.ckpt";
}

std::unique_ptr<student::Student> fresh_student(const ExperimentConfig& cfg) {
  auto s = student::make_student(cfg.student, sub_seed(cfg.seed, "init"));
  if (!cfg.student.encoder_weights.empty()) s->load_encoder_weights(cfg.student.encoder_weights);
  return s;
}

void save_model(const fs::path& path, student::Student& s, const Loaded& l, int epoch) {
  student::CheckpointMeta meta;
  meta.epoch = epoch;
  meta.manifest_hash = l.manifest.hash();
  student::save_checkpoint(path.string(), s, meta);
}

void print_report(std::ostream& out, const std::string& what, const metrics::MetricReport& r) {
  out << std::fixed << std::setprecision(4) << what << ": dice " << r.dice.mean << " ± "
      << r.dice.std << "  iou " << r.iou.mean << " ± " << r.iou.std << "  (n=" << r.dice.n
      << ")\n";
}

// ---------------------------------------------------------------------------------------------

int cmd_split(const Context& ctx) {
  DirectoryLock lock(ctx.out);
  guard_overwrite(ctx, manifest_path(ctx));
  const auto ds = load_experiment_dataset(ctx.config);
  const auto& d = ctx.config.dataset;
  const auto m = data::make_split(ds.samples, d.labeled_fraction, d.val_fraction, d.test_fraction,
                                  ctx.config.split_seed(), ds.presplit);
  data::write_manifest(manifest_path(ctx), m);
  ctx.log << "labeled " << m.labeled_ids.size() << "\nunlabeled " << m.unlabeled_ids.size()
          << "\nval " << m.val_ids.size() << "\ntest " << m.test_ids.size() << "\nmanifest "
          << manifest_path(ctx).string() << " (" << m.hash() << ")\n";
  return kOk;
}

/// Supervised phase into <out>/supervised; returns the trained student.
std::unique_ptr<student::Student> run_supervised(const Context& ctx, const Loaded& l) {
  const fs::path dir = phase_dir(ctx, pipeline::Scheduling::supervised_only);
  guard_overwrite(ctx, dir / "summary.json");
  fs::create_directories(dir);
  auto s = fresh_student(ctx.config);
  pipeline::Hooks hooks;
  hooks.log = &ctx.log;
  hooks.checkpoint_dir = dir / "ckpt";
  hooks.manifest_hash = l.manifest.hash();
  auto record = pipeline::train_supervised(*s, l.split.labeled, l.split.val, ctx.config.train, hooks);
  record.test = pipeline::evaluate(*s, l.split.test, ctx.config.train);
  save_model(dir / "model.ckpt", *s, l, record.best_epoch);
  write_json(dir / "config.json", ctx.config);
  pipeline::write_run(dir, record, run_context(ctx, l, pipeline::Scheduling::supervised_only));
  print_report(ctx.log, "supervised test", *record.test);
  return s;
}

std::unique_ptr<student::Student> warm_student(const Context& ctx, const Loaded& l, bool warmup) {
  std::unique_ptr<student::Student> s;
  if (fs::exists(warm_checkpoint(ctx))) {
    auto loaded = student::load_checkpoint(warm_checkpoint(ctx).string(),
                                           ctx.config.student.architecture);
    if (loaded.meta.manifest_hash != l.manifest.hash()) {
      throw ValidationError("warm-start checkpoint was trained on a different split");
    }
    s = std::move(loaded.student);
  } else if (warmup) {
    ctx.log << "no warm-start checkpoint, running the supervised phase first\n";
    s = run_supervised(ctx, l);
  } else {
    throw ValidationError("missing warm-start checkpoint " + warm_checkpoint(ctx).string() +
                          " (run `train --phase supervised` or pass --warmup)");
  }
  if (ctx.config.train.reinit_student) s = fresh_student(ctx.config);
  return s;
}

fs::path pseudo_dir(const Context& ctx) { return ctx.out / "pseudo"; }

int cmd_mine(const Context& ctx, bool warmup) {
  DirectoryLock lock(ctx.out);
  guard_overwrite(ctx, pseudo_dir(ctx) / "index.json");
  const Loaded l = load_split(ctx);
  auto gt = std::make_shared<const teacher::GroundTruthLookup>(truth_of(l.dataset));
  auto teacher = teacher::make_teacher(ctx.config.teacher, *gt);
  auto s = warm_student(ctx, l, warmup);
  pipeline::Hooks hooks;
  hooks.log = &ctx.log;
  hooks.audit_scorer = make_scorer(gt);
  const auto set = pipeline::mine_one_time(*s, l.split.unlabeled, *teacher, ctx.config.train, hooks);
  pipeline::save_pseudo_labels(pseudo_dir(ctx), set);
  ctx.log << "pseudo labels written to " << pseudo_dir(ctx).string() << "\n";
  return kOk;
}

int cmd_train(const Context& ctx, const std::string& phase_name, bool warmup, bool resume) {
  DirectoryLock lock(ctx.out);
  const auto phase = pipeline::scheduling_from_string(phase_name);
  const Loaded l = load_split(ctx);
  if (phase == pipeline::Scheduling::supervised_only) {
    run_supervised(ctx, l);
    return kOk;
  }
  const fs::path dir = phase_dir(ctx, phase);
  if (!resume) guard_overwrite(ctx, dir / "summary.json");
  auto gt = std::make_shared<const teacher::GroundTruthLookup>(truth_of(l.dataset));
  auto teacher = teacher::make_teacher(ctx.config.teacher, *gt);
  auto s = warm_student(ctx, l, warmup);
  fs::create_directories(dir);

  pipeline::Hooks hooks;
  hooks.log = &ctx.log;
  hooks.audit_scorer = make_scorer(gt);
  hooks.checkpoint_dir = dir / "ckpt";
  hooks.resume = resume;
  hooks.manifest_hash = l.manifest.hash();
  pipeline::RunRecord record;
  if (phase == pipeline::Scheduling::one_time) {
    pipeline::PseudoLabelSet set;
    if (fs::exists(pseudo_dir(ctx) / "index.json")) {
      set = pipeline::load_pseudo_labels(pseudo_dir(ctx), l.split.unlabeled, ctx.config.train);
      ctx.log << "loaded " << set.labels.size() << " pseudo labels from "
              << pseudo_dir(ctx).string() << "\n";
    } else {
      set = pipeline::mine_one_time(*s, l.split.unlabeled, *teacher, ctx.config.train, hooks);
      pipeline::save_pseudo_labels(pseudo_dir(ctx), set);
    }
    record = pipeline::train_one_time(*s, l.split.labeled, set, l.split.val, ctx.config.train, hooks);
    record.teacher_checksum_before = record.teacher_checksum_after = teacher->state_checksum();
  } else {
    record = pipeline::train_continuous(*s, l.split.labeled, l.split.unlabeled, *teacher,
                                        l.split.val, ctx.config.train, hooks);
  }
  record.test = pipeline::evaluate(*s, l.split.test, ctx.config.train);
  save_model(dir / "model.ckpt", *s, l, record.best_epoch);
  write_json(dir / "config.json", ctx.config);
  pipeline::write_run(dir, record, run_context(ctx, l, phase));
  print_report(ctx.log, phase_name + " test", *record.test);
  return kOk;
}

int cmd_evaluate(const Context& ctx, std::string checkpoint, bool refine) {
  DirectoryLock lock(ctx.out);
  const Loaded l = load_split(ctx);
  if (checkpoint.empty()) {
    for (const auto phase : {pipeline::Scheduling::continuous, pipeline::Scheduling::one_time,
                             pipeline::Scheduling::supervised_only}) {
      if (fs::exists(phase_dir(ctx, phase) / "model.ckpt")) {
        checkpoint = (phase_dir(ctx, phase) / "model.ckpt").string();
        break;
      }
    }
    if (checkpoint.empty()) throw ValidationError("no trained model under " + ctx.out.string());
  }
  auto loaded = student::load_checkpoint(checkpoint, ctx.config.student.architecture);
  std::unique_ptr<teacher::Teacher> teacher;
  if (refine) teacher = teacher::make_teacher(ctx.config.teacher, truth_of(l.dataset));
  const auto report =
      pipeline::evaluate(*loaded.student, l.split.test, ctx.config.train, teacher.get(), refine);
  const fs::path path = ctx.out / (refine ? "evaluation_refined.json" : "evaluation.json");
  guard_overwrite(ctx, path);
  write_json(path, {{"checkpoint", checkpoint},
                    {"refine", refine},
                    {"manifest_hash", l.manifest.hash()},
                    {"test", pipeline::to_json(report, true)}});
  print_report(ctx.log, refine ? "test (teacher-refined)" : "test", report);
  return kOk;
}

// ---------------------------------------------------------------------------------------------

struct RunSummary {
  std::string method;
  double split = 0;
  double dice = 0;
  double iou = 0;
};

fs::path find_summary(const fs::path& p) {
  if (fs::is_regular_file(p)) return p;
  if (fs::exists(p / "summary.json")) return p / "summary.json";
  throw ValidationError("no summary.json in " + p.string());
}

int cmd_report(const Context* ctx, const std::vector<std::string>& dirs, const std::string& csv,
               std::ostream& out) {
  if (dirs.empty()) throw ValidationError("report needs at least one run directory");
  std::vector<RunSummary> runs;
  for (const auto& d : dirs) {
    const auto path = find_summary(d);
    nlohmann::json j;
    try {
      j = read_json(path);
      if (j.at("test").is_null()) throw ValidationError("run has no test metrics");
      runs.push_back({j.at("method").get<std::string>(), j.at("labeled_fraction").get<double>(),
                      j.at("test").at("dice").at("mean").get<double>(),
                      j.at("test").at("iou").at("mean").get<double>()});
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("malformed run summary " + path.string() + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError("malformed run summary " + path.string() + ": " + e.what());
    }
  }
  // split -> method -> runs, methods in first-seen order.
  std::map<double, std::vector<std::string>, std::greater<>> order;
  std::map<std::pair<double, std::string>, std::vector<const RunSummary*>> groups;
  for (const auto& r : runs) {
    auto& methods = order[r.split];
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) {
      methods.push_back(r.method);
    }
    groups[{r.split, r.method}].push_back(&r);
  }

  std::ostringstream csv_text;
  csv_text << "split,method,runs,iou_mean,iou_std,dice_mean,dice_std,single_run\n";
  out << std::fixed << std::setprecision(3);
  for (const auto& [split, methods] : order) {
    out << "Labeled/Unlabeled Split (" << std::lround(split * 100) << "% Labeled)\n";
    out << "  " << std::left << std::setw(36) << "Method" << std::setw(18) << "IOU (AVG±STD)"
        << std::setw(18) << "DICE (AVG±STD)" << "runs\n";
    for (const auto& method : methods) {
      const auto& g = groups.at({split, method});
      std::vector<double> dice, iou;
      for (const auto* r : g) {
        dice.push_back(r->dice);
        iou.push_back(r->iou);
      }
      const auto d = metrics::sample_mean_std(dice);
      const auto i = metrics::sample_mean_std(iou);
      const bool single = g.size() == 1;
      std::ostringstream iou_cell, dice_cell;
      iou_cell << std::fixed << std::setprecision(3) << i.mean << " ± " << i.std;
      dice_cell << std::fixed << std::setprecision(3) << d.mean << " ± " << d.std;
      out << "  " << std::left << std::setw(36) << method << std::setw(20) << iou_cell.str()
          << std::setw(20) << dice_cell.str() << g.size() << (single ? " (single run)" : "")
          << "\n";
      csv_text << std::fixed << std::setprecision(6) << split << "," << method << "," << g.size()
               << "," << i.mean << "," << i.std << "," << d.mean << "," << d.std << ","
               << (single ? 1 : 0) << "\n";
    }
  }
  out << "std is the sample std of per-run mean scores across runs\n";
  fs::path csv_path = csv;
  if (csv_path.empty() && ctx) csv_path = ctx->out / "report.csv";
  if (!csv_path.empty()) {
    if (csv_path.has_parent_path()) fs::create_directories(csv_path.parent_path());
    if (ctx) guard_overwrite(*ctx, csv_path);
    std::ofstream os(csv_path);
    if (!os) throw IoError("cannot write " + csv_path.string());
    os << csv_text.str();
    out << "csv written to " << csv_path.string() << "\n";
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pseudo-label mining from a promptable teacher into a lightweight segmenter",
               "kmine"};
  app.require_subcommand(1);
  GlobalOptions g;
  std::uint64_t seed_value = 0;
  app.add_option("--config", g.config_path, "Experiment config (JSON)");
  auto* seed_opt = app.add_option("--seed", seed_value, "Experiment seed (overrides config)");
  app.add_option("--output-dir", g.output_dir, "Output directory (overrides config)");
  app.add_flag("--force", g.force, "Overwrite existing outputs");

  auto* split = app.add_subcommand("split", "Create the labeled/unlabeled/val/test manifest");
  auto* train = app.add_subcommand("train", "Train a phase");
  std::string phase = "supervised";
  bool warmup = false, resume = false;
  train->add_option("--phase", phase, "supervised | one_time | continuous")
      ->check(CLI::IsMember({"supervised", "one_time", "continuous"}));
  train->add_flag("--warmup", warmup, "Run the supervised phase first when no warm start exists");
  train->add_flag("--resume", resume, "Continue an interrupted run from its last checkpoint");
  std::string teacher_backend;
  train->add_option("--teacher", teacher_backend, "Teacher backend (overrides config)")
      ->check(CLI::IsMember({"oracle", "sam", "medsam"}));

  auto* mine = app.add_subcommand("mine", "Mine one-time pseudo labels with the warm student");
  mine->add_flag("--warmup", warmup, "Run the supervised phase first when no warm start exists");
  mine->add_option("--teacher", teacher_backend, "Teacher backend (overrides config)")
      ->check(CLI::IsMember({"oracle", "sam", "medsam"}));

  auto* evaluate = app.add_subcommand("evaluate", "Score a trained student on the test split");
  std::string checkpoint;
  bool refine = false;
  evaluate->add_option("--checkpoint", checkpoint, "Model checkpoint (default: latest phase)");
  evaluate->add_flag("--refine", refine, "Score teacher masks prompted by the student");
  evaluate->add_option("--teacher", teacher_backend, "Teacher backend (overrides config)")
      ->check(CLI::IsMember({"oracle", "sam", "medsam"}));

  auto* report = app.add_subcommand("report", "Aggregate run summaries into a comparison table");
  std::vector<std::string> run_dirs;
  std::string csv;
  report->add_option("runs", run_dirs, "Run directories or summary.json files")->required();
  report->add_option("--csv", csv, "CSV output path (default: <output-dir>/report.csv)");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  }
  if (*seed_opt) g.seed = seed_value;

  try {
    if (*report) {
      std::optional<Context> ctx;
      if (!g.output_dir.empty() || !g.config_path.empty()) ctx.emplace(make_context(g, out));
      return cmd_report(ctx ? &*ctx : nullptr, run_dirs, csv, out);
    }
    Context ctx = make_context(g, out);
    if (!teacher_backend.empty()) {
      ctx.config.teacher.backend = teacher::backend_from_string(teacher_backend);
    }
    if (*split) return cmd_split(ctx);
    if (*train) return cmd_train(ctx, phase == "supervised" ? "supervised_only" : phase, warmup, resume);
    if (*mine) return cmd_mine(ctx, warmup);
    if (*evaluate) return cmd_evaluate(ctx, checkpoint, refine);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kValidation;
}

}  // namespace kmine::cli

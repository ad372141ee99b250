#include "kmine/pipeline/trainer.hpp"

#include "kmine/core/rng.hpp"
#include "kmine/metrics/metrics.hpp"
#include "kmine/nn/adam.hpp"
#include "kmine/nn/ops.hpp"
#include "kmine/pipeline/schedule.hpp"
#include "kmine/student/checkpoint.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace kmine::pipeline {

namespace {

using data::ImageSample;
using ConstProbMap = Eigen::Map<const ProbPlane>;

nn::Tensor stack_images(const std::vector<const RgbImage*>& images) {
  const auto& first = *images.front();
  const int h = static_cast<int>(first.rows()), w = static_cast<int>(first.cols());
  nn::Tensor t(static_cast<int>(images.size()), 3, h, w);
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i]->rows() != h || images[i]->cols() != w) {
      throw ShapeMismatch("batch: images differ in size; set augmentation crop_size");
    }
    for (int c = 0; c < 3; ++c) {
      Eigen::Map<ProbPlane>(t.plane(static_cast<int>(i), c), h, w) = images[i]->channels[c];
    }
  }
  return t;
}

ConstProbMap prob_plane(const nn::Tensor& t, int i) { return {t.plane(i, 0), t.h(), t.w()}; }

std::vector<nn::Tensor> snapshot(student::Student& s) {
  std::vector<nn::Tensor> out;
  for (const auto& ref : s.state()) out.push_back(*ref.tensor);
  return out;
}

void restore(student::Student& s, const std::vector<nn::Tensor>& state) {
  const auto refs = s.state();
  for (std::size_t i = 0; i < refs.size(); ++i) *refs[i].tensor = state[i];
}

void copy_state(student::Student& from, student::Student& to) {
  const auto src = from.state();
  const auto dst = to.state();
  if (src.size() != dst.size()) throw ValidationError("checkpoint: state layout differs");
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i].name != dst[i].name || !src[i].tensor->same_shape(*dst[i].tensor)) {
      throw ValidationError("checkpoint: tensor '" + src[i].name + "' does not match");
    }
    *dst[i].tensor = *src[i].tensor;
  }
}

/// Cycles over [0, n) in shuffled passes; each pass gets its own derived seed.
class Cycler {
 public:
  Cycler(std::size_t n, std::uint64_t seed) : n_(n), seed_(seed) {}

  std::size_t next() {
    if (pos_ == order_.size()) refill();
    return order_[pos_++];
  }

 private:
  void refill() {
    order_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) order_[i] = i;
    Rng rng(sub_seed(seed_, "pass", pass_++));
    shuffle(order_.begin(), order_.end(), rng);
    pos_ = 0;
  }

  std::size_t n_;
  std::uint64_t seed_;
  std::uint64_t pass_ = 0;
  std::size_t pos_ = 0;
  std::vector<std::size_t> order_;
};

/// Where the unlabeled part of each batch comes from.
struct UnlabeledSource {
  /// Fixed pseudo-labeled samples (one-time scheduling).
  std::span<const ImageSample> fixed;
  /// Unlabeled images answered by the teacher on every visit (continuous scheduling).
  std::span<const ImageSample> live;
  const teacher::Teacher* teacher = nullptr;

  std::size_t size() const { return fixed.empty() ? live.size() : fixed.size(); }
};

struct BatchPlan {
  int labeled_per_batch = 0;
  int unlabeled_per_batch = 0;
  int batches = 0;
};

BatchPlan plan_batches(std::size_t n_labeled, std::size_t n_unlabeled, int batch_size) {
  // batch_size fixes the labeled part B, so the labeled stream is the same with or without
  // unlabeled data. B' keeps B:B' = |L|:|U| and is at least one.
  BatchPlan p;
  p.labeled_per_batch = batch_size;
  p.batches = static_cast<int>((n_labeled + batch_size - 1) / batch_size);
  if (n_unlabeled > 0) {
    const double ratio = static_cast<double>(n_unlabeled) / static_cast<double>(n_labeled);
    p.unlabeled_per_batch = std::max(1, static_cast<int>(std::lround(batch_size * ratio)));
  }
  return p;
}

struct EpochStats {
  double loss = 0, supervised = 0, pseudo = 0;
  int batches = 0, accepted = 0, rejected = 0, failures = 0;
};

class Trainer {
 public:
  Trainer(student::Student& student, std::span<const ImageSample> labeled, UnlabeledSource unl,
          std::span<const ImageSample> val, const TrainConfig& cfg, const Hooks& hooks)
      : student_(student), labeled_(labeled), unl_(unl), val_(val), cfg_(cfg), hooks_(hooks) {}

  RunRecord run();

 private:
  EpochStats train_epoch(int epoch, nn::Adam& opt);
  void log(const std::string& line) const {
    if (hooks_.log) *hooks_.log << line << std::endl;
  }

  student::Student& student_;
  std::span<const ImageSample> labeled_;
  UnlabeledSource unl_;
  std::span<const ImageSample> val_;
  const TrainConfig& cfg_;
  const Hooks& hooks_;
  RunRecord record_;
};

EpochStats Trainer::train_epoch(int epoch, nn::Adam& opt) {
  const auto e = static_cast<std::uint64_t>(epoch);
  const BatchPlan plan = plan_batches(labeled_.size(), unl_.size(), cfg_.batch_size);
  Cycler lab_order(labeled_.size(), sub_seed(cfg_.seed, "order", e));
  Cycler unl_order(unl_.size(), sub_seed(cfg_.seed, "order_unlabeled", e));
  Rng aug_rng(sub_seed(cfg_.seed, "augment", e));
  Rng unl_aug_rng(sub_seed(cfg_.seed, "augment_unlabeled", e));
  Rng tie_rng(sub_seed(cfg_.seed, "tie_break", e));

  student_.train(!cfg_.frozen());
  EpochStats stats;
  std::size_t labeled_left = labeled_.size();
  for (int b = 0; b < plan.batches; ++b) {
    // Each labeled sample is visited once per epoch; the last batch may be short.
    const int n_lab =
        static_cast<int>(std::min<std::size_t>(labeled_left, plan.labeled_per_batch));
    labeled_left -= static_cast<std::size_t>(n_lab);
    std::vector<ImageSample> lab;
    for (int i = 0; i < n_lab; ++i) {
      lab.push_back(data::augment(labeled_[lab_order.next()], cfg_.augmentation, aug_rng));
    }
    std::vector<ImageSample> unl;
    std::vector<data::ViewTransform> views;
    for (int i = 0; i < plan.unlabeled_per_batch && unl_.size() > 0; ++i) {
      const std::size_t k = unl_order.next();
      if (!unl_.fixed.empty()) {
        unl.push_back(data::augment(unl_.fixed[k], cfg_.augmentation, unl_aug_rng));
      } else {
        const auto& s = unl_.live[k];
        views.push_back(data::draw_transform(s.image.rows(), s.image.cols(), cfg_.augmentation,
                                             unl_aug_rng));
        unl.push_back(ImageSample{s.id, views.back().apply(s.image), std::nullopt, s.source});
      }
    }

    // Unlabeled images reach the student only through the pseudo loss: they get their own pass,
    // which leaves the batch-norm running statistics alone. With no pseudo term a step is then
    // exactly a supervised step.
    auto forward = [&](const std::vector<ImageSample>& group) {
      std::vector<const RgbImage*> images;
      for (const auto& s : group) images.push_back(&s.image);
      return student_.forward(nn::constant(stack_images(images)));
    };
    const nn::Var out = forward(lab);
    nn::Var unl_out;
    if (!unl.empty()) {
      nn::RunningStatsFreeze freeze;
      unl_out = forward(unl);
    }

    std::vector<metrics::LossPair> lab_pairs;
    for (int i = 0; i < n_lab; ++i) lab_pairs.push_back({prob_plane(out->value, i), *lab[i].mask});

    std::vector<BinaryMask> live_targets;
    std::vector<int> pseudo_pos;  // index into `unl` of each pseudo pair
    if (!unl_.fixed.empty()) {
      for (std::size_t j = 0; j < unl.size(); ++j) pseudo_pos.push_back(static_cast<int>(j));
    } else if (!unl.empty()) {
      std::vector<teacher::TeacherRequest> requests;
      std::vector<int> request_pos;
      std::vector<nlohmann::json> prompt_audit;
      for (std::size_t j = 0; j < unl.size(); ++j) {
        const int pos = static_cast<int>(j);
        prompt::ProbabilityMask pm{ProbPlane(prob_plane(unl_out->value, pos)), unl[j].id};
        auto prompts = prompt::build_prompt_set(pm, cfg_.prompt, tie_rng);
        if (!prompts) {
          ++stats.rejected;
          auto a = prompt::rejection_audit_json(unl[j].id, cfg_.prompt.mode);
          a["epoch"] = epoch;
          a["batch"] = b;
          a["accepted"] = false;
          record_.audit.push_back(std::move(a));
          continue;
        }
        prompt_audit.push_back(prompt::audit_json(unl[j].id, *prompts));
        teacher::TeacherRequest r;
        r.sample_id = unl[j].id;
        r.image = unl[j].image;
        r.prompts = std::move(*prompts);
        r.view = views[j];
        r.pass = epoch;
        requests.push_back(std::move(r));
        request_pos.push_back(pos);
      }
      const auto results = unl_.teacher->predict_batch(requests);
      live_targets.reserve(results.size());
      for (std::size_t q = 0; q < results.size(); ++q) {
        auto a = std::move(prompt_audit[q]);
        a["epoch"] = epoch;
        a["batch"] = b;
        a["pass"] = epoch;
        if (!results[q].ok()) {
          ++stats.failures;
          a["accepted"] = false;
          a["teacher_error"] = results[q].error;
          record_.audit.push_back(std::move(a));
          continue;
        }
        ++stats.accepted;
        a["accepted"] = true;
        const auto& mask = results[q].label->mask;
        if (hooks_.audit_scorer) {
          const auto d = hooks_.audit_scorer(requests[q].sample_id, requests[q].view, mask);
          a["pseudo_dice"] = d ? nlohmann::json(*d) : nlohmann::json(nullptr);
        }
        record_.audit.push_back(std::move(a));
        live_targets.push_back(mask);
        pseudo_pos.push_back(request_pos[q]);
      }
    }

    std::vector<metrics::LossPair> pseudo_pairs;
    for (std::size_t q = 0; q < pseudo_pos.size(); ++q) {
      const int pos = pseudo_pos[q];
      const BinaryMask& target =
          unl_.fixed.empty() ? live_targets[q] : *unl[static_cast<std::size_t>(pos)].mask;
      pseudo_pairs.push_back({prob_plane(unl_out->value, pos), target});
    }

    const auto loss = metrics::combined_loss(lab_pairs, pseudo_pairs, cfg_.loss);
    if (hooks_.on_batch) hooks_.on_batch({epoch, b, lab_pairs, pseudo_pairs, cfg_.loss, loss});
    stats.loss += loss.total;
    stats.supervised += loss.supervised;
    stats.pseudo += loss.pseudo;
    ++stats.batches;

    if (cfg_.frozen()) continue;
    const auto grads = metrics::combined_loss_gradients(lab_pairs, pseudo_pairs, cfg_.loss);
    auto put = [](nn::Tensor& grad, int pos, const Plane<double>& g) {
      Eigen::Map<ProbPlane>(grad.plane(pos, 0), grad.h(), grad.w()) = g.cast<float>();
    };
    opt.zero_grad();
    nn::Tensor grad_out = nn::Tensor::zeros_like(out->value);
    for (int i = 0; i < n_lab; ++i) put(grad_out, i, grads[static_cast<std::size_t>(i)]);
    nn::backward(out, grad_out);
    if (!pseudo_pos.empty()) {
      nn::Tensor unl_grad = nn::Tensor::zeros_like(unl_out->value);
      for (std::size_t q = 0; q < pseudo_pos.size(); ++q) {
        put(unl_grad, pseudo_pos[q], grads[static_cast<std::size_t>(n_lab) + q]);
      }
      nn::backward(unl_out, unl_grad);
    }
    opt.step();
  }
  if (stats.batches > 0) {
    stats.loss /= stats.batches;
    stats.supervised /= stats.batches;
    stats.pseudo /= stats.batches;
  }
  return stats;
}

RunRecord Trainer::run() {
  cfg_.validate();
  if (labeled_.empty()) throw ValidationError("training needs at least one labeled sample");
  if (val_.empty()) throw ValidationError("training needs a nonempty validation set");
  if (!unl_.live.empty() && unl_.teacher == nullptr) {
    throw ValidationError("continuous training needs a teacher");
  }
  record_.scheduling = to_string(cfg_.scheduling);
  if (unl_.teacher) record_.teacher_checksum_before = unl_.teacher->state_checksum();

  nn::Adam opt(student_.parameters(),
               nn::AdamOptions{cfg_.base_lr, cfg_.beta1, cfg_.beta2, 1e-8, cfg_.weight_decay});
  PlateauScheduler plateau(cfg_.base_lr, cfg_.plateau_factor, cfg_.plateau_patience, cfg_.min_lr,
                           cfg_.plateau_threshold);
  EarlyStopping stopper(cfg_.early_stop_patience, cfg_.plateau_threshold);
  std::vector<nn::Tensor> best_state = snapshot(student_);
  int start_epoch = 1;

  std::optional<std::filesystem::path> last_ckpt, best_ckpt;
  if (hooks_.checkpoint_dir) {
    std::filesystem::create_directories(*hooks_.checkpoint_dir);
    last_ckpt = *hooks_.checkpoint_dir / "last.ckpt";
    best_ckpt = *hooks_.checkpoint_dir / "best.ckpt";
  }
  if (hooks_.resume && last_ckpt && std::filesystem::exists(*last_ckpt)) {
    // The audit log restarts at the resumed epoch; everything else continues seamlessly.
    auto loaded = student::load_checkpoint(last_ckpt->string(), student_.config().architecture);
    copy_state(*loaded.student, student_);
    if (loaded.optimizer) loaded.optimizer->apply_to(opt);
    const auto& extra = loaded.meta.extra;
    plateau.load_state(extra.at("plateau"));
    stopper.load_state(extra.at("early_stopping"));
    record_.best_epoch = extra.at("best_epoch");
    record_.epochs = extra.at("epochs").get<std::vector<EpochRecord>>();
    start_epoch = loaded.meta.epoch + 1;
    if (std::filesystem::exists(*best_ckpt)) {
      auto best = student::load_checkpoint(best_ckpt->string(), student_.config().architecture);
      best_state = snapshot(*best.student);
    }
    log("resumed from " + last_ckpt->string() + " at epoch " + std::to_string(start_epoch));
    if (extra.value("finished", false)) start_epoch = cfg_.max_epochs + 1;
  }

  for (int epoch = start_epoch; epoch <= cfg_.max_epochs; ++epoch) {
    const double lr = plateau.lr();
    opt.set_lr(lr);
    const EpochStats s = train_epoch(epoch, opt);
    const ValidationResult v = validate(student_, val_, cfg_);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = s.loss;
    rec.train_supervised = s.supervised;
    rec.train_pseudo = s.pseudo;
    rec.val_loss = v.loss;
    rec.val_dice = v.report.dice.mean;
    rec.val_iou = v.report.iou.mean;
    rec.pseudo_accepted = s.accepted;
    rec.pseudo_rejected = s.rejected;
    rec.teacher_failures = s.failures;

    const bool stop = stopper.step(v.loss);
    rec.improved = stopper.improved();
    plateau.step(v.loss);
    if (rec.improved) {
      best_state = snapshot(student_);
      record_.best_epoch = epoch;
    }
    record_.epochs.push_back(rec);
    if (hooks_.on_epoch) hooks_.on_epoch(rec);

    std::string pseudo_note;
    if (!unl_.live.empty()) {
      pseudo_note = " pseudo " + std::to_string(s.accepted) + "/" +
                    std::to_string(s.accepted + s.rejected + s.failures);
    }
    char line[256];
    std::snprintf(line, sizeof(line), "epoch %3d lr %.2e train %.4f val %.4f dice %.4f%s%s",
                  epoch, lr, s.loss, v.loss, v.report.dice.mean, rec.improved ? " *" : "",
                  pseudo_note.c_str());
    log(line);

    if (last_ckpt) {
      student::CheckpointMeta meta;
      meta.epoch = epoch;
      meta.manifest_hash = hooks_.manifest_hash;
      meta.extra = {{"plateau", plateau.state()},
                    {"early_stopping", stopper.state()},
                    {"best_epoch", record_.best_epoch},
                    {"epochs", record_.epochs},
                    {"scheduling", record_.scheduling},
                    {"finished", stop || epoch == cfg_.max_epochs}};
      student::save_checkpoint(last_ckpt->string(), student_, meta, &opt);
      if (rec.improved) student::save_checkpoint(best_ckpt->string(), student_, meta);
    }
    if (stop) {
      record_.early_stopped = true;
      log("early stop at epoch " + std::to_string(epoch));
      break;
    }
  }

  restore(student_, best_state);
  if (!record_.epochs.empty() && record_.best_epoch > 0) {
    record_.best_val_loss =
        record_.epochs[static_cast<std::size_t>(record_.best_epoch - record_.epochs.front().epoch)]
            .val_loss;
  }
  if (unl_.teacher) record_.teacher_checksum_after = unl_.teacher->state_checksum();
  return std::move(record_);
}

struct Prediction {
  ImageSample view;  // eval view of the sample (mask transformed when present)
  data::ViewTransform transform;
  ProbPlane probs;
};

/// Eval-mode predictions in batches of `batch_size`, in input order.
template <typename Fn>
void predict_all(student::Student& student, std::span<const ImageSample> samples,
                 const TrainConfig& cfg, Fn&& fn) {
  for (std::size_t begin = 0; begin < samples.size(); begin += cfg.batch_size) {
    const std::size_t end = std::min(samples.size(), begin + cfg.batch_size);
    std::vector<Prediction> batch;
    for (std::size_t i = begin; i < end; ++i) {
      const auto& s = samples[i];
      const auto t = data::eval_transform(s.image.rows(), s.image.cols(), cfg.augmentation);
      batch.push_back({t.apply(s), t, {}});
    }
    std::vector<const RgbImage*> images;
    for (const auto& p : batch) images.push_back(&p.view.image);
    const nn::Tensor out = student.predict(stack_images(images));
    for (std::size_t k = 0; k < batch.size(); ++k) {
      batch[k].probs = prob_plane(out, static_cast<int>(k));
      fn(batch[k]);
    }
  }
}

}  // namespace

ValidationResult validate(student::Student& student, std::span<const ImageSample> val,
                          const TrainConfig& config) {
  ValidationResult r;
  std::vector<metrics::SampleScore> rows;
  double total = 0;
  predict_all(student, val, config, [&](const Prediction& p) {
    if (!p.view.mask) throw ValidationError("validation sample '" + p.view.id + "' has no mask");
    total += metrics::sample_loss(p.probs, *p.view.mask, config.loss);
    const BinaryMask pred = metrics::binarize(p.probs);
    rows.push_back({p.view.id, metrics::dice_score(*p.view.mask, pred),
                    metrics::iou_score(*p.view.mask, pred)});
  });
  r.loss = val.empty() ? 0.0 : total / static_cast<double>(val.size());
  r.report = metrics::summarize(std::move(rows));
  return r;
}

RunRecord train_supervised(student::Student& student, std::span<const ImageSample> labeled,
                           std::span<const ImageSample> val, const TrainConfig& config,
                           const Hooks& hooks) {
  TrainConfig cfg = config;
  cfg.scheduling = Scheduling::supervised_only;
  return Trainer(student, labeled, UnlabeledSource{}, val, cfg, hooks).run();
}

PseudoLabelSet mine_one_time(student::Student& student, std::span<const ImageSample> unlabeled,
                             const teacher::Teacher& teacher, const TrainConfig& config,
                             const Hooks& hooks) {
  config.validate();
  PseudoLabelSet set;
  Rng tie_rng(sub_seed(config.seed, "tie_break_mine"));
  std::vector<teacher::TeacherRequest> requests;
  std::vector<ImageSample> views;
  std::vector<nlohmann::json> prompt_audit;
  predict_all(student, unlabeled, config, [&](const Prediction& p) {
    prompt::ProbabilityMask pm{p.probs, p.view.id};
    auto prompts = prompt::build_prompt_set(pm, config.prompt, tie_rng);
    if (!prompts) {
      ++set.rejected;
      auto a = prompt::rejection_audit_json(p.view.id, config.prompt.mode);
      a["pass"] = 0;
      a["accepted"] = false;
      set.audit.push_back(std::move(a));
      return;
    }
    prompt_audit.push_back(prompt::audit_json(p.view.id, *prompts));
    teacher::TeacherRequest r;
    r.sample_id = p.view.id;
    r.image = p.view.image;
    r.prompts = std::move(*prompts);
    r.view = p.transform;
    r.pass = 0;
    requests.push_back(std::move(r));
    views.push_back(p.view.without_mask());
  });
  const auto results = teacher.predict_batch(requests);
  for (std::size_t q = 0; q < results.size(); ++q) {
    auto a = std::move(prompt_audit[q]);
    a["pass"] = 0;
    if (!results[q].ok()) {
      ++set.failures;
      a["accepted"] = false;
      a["teacher_error"] = results[q].error;
      if (hooks.log) *hooks.log << "teacher failed on " << requests[q].sample_id << ": "
                                << results[q].error << std::endl;
      set.audit.push_back(std::move(a));
      continue;
    }
    a["accepted"] = true;
    const auto& label = *results[q].label;
    if (hooks.audit_scorer) {
      const auto d = hooks.audit_scorer(requests[q].sample_id, requests[q].view, label.mask);
      a["pseudo_dice"] = d ? nlohmann::json(*d) : nlohmann::json(nullptr);
    }
    set.audit.push_back(std::move(a));
    ImageSample s = std::move(views[q]);
    s.mask = label.mask;
    set.samples.push_back(std::move(s));
    set.labels.emplace(requests[q].sample_id, label);
  }
  if (hooks.log) {
    *hooks.log << "mined " << set.labels.size() << " pseudo labels (" << set.rejected
               << " rejected, " << set.failures << " teacher failures)" << std::endl;
  }
  return set;
}

void save_pseudo_labels(const std::filesystem::path& dir, const PseudoLabelSet& set) {
  std::filesystem::create_directories(dir / "masks");
  nlohmann::json index = nlohmann::json::array();
  for (const auto& [id, label] : set.labels) {
    data::write_mask(dir / "masks" / (id + ".png"), label.mask);
    index.push_back({{"sample_id", id},
                     {"generated_at", label.generated_at},
                     {"teacher_id", label.teacher_id},
                     {"confidence", label.confidence ? nlohmann::json(*label.confidence)
                                                     : nlohmann::json(nullptr)}});
  }
  std::ofstream os(dir / "index.json");
  if (!os) throw IoError("cannot write " + (dir / "index.json").string());
  os << nlohmann::json{{"labels", index}, {"rejected", set.rejected}, {"failures", set.failures}}
            .dump(2)
     << "\n";
  std::ofstream audit(dir / "audit.jsonl");
  for (const auto& a : set.audit) audit << a.dump() << "\n";
}

PseudoLabelSet load_pseudo_labels(const std::filesystem::path& dir,
                                  std::span<const ImageSample> unlabeled,
                                  const TrainConfig& config) {
  std::ifstream is(dir / "index.json");
  if (!is) throw IoError("no pseudo labels at " + dir.string() + " (run `mine` first)");
  const auto index = nlohmann::json::parse(is);
  std::map<std::string, const ImageSample*> by_id;
  for (const auto& s : unlabeled) by_id[s.id] = &s;
  PseudoLabelSet set;
  set.rejected = index.value("rejected", 0);
  set.failures = index.value("failures", 0);
  for (const auto& e : index.at("labels")) {
    const std::string id = e.at("sample_id");
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw ValidationError("pseudo label '" + id + "' is not unlabeled");
    teacher::PseudoLabel label;
    label.mask = data::read_mask(dir / "masks" / (id + ".png"));
    label.generated_at = e.value("generated_at", 0);
    label.teacher_id = e.value("teacher_id", std::string());
    if (e.contains("confidence") && e.at("confidence").is_number()) {
      label.confidence = e.at("confidence").get<double>();
    }
    const auto& s = *it->second;
    const auto t = data::eval_transform(s.image.rows(), s.image.cols(), config.augmentation);
    ImageSample view = t.apply(s.without_mask());
    require_same_shape(view.image.channels[0], label.mask, "pseudo label");
    view.mask = label.mask;
    set.samples.push_back(std::move(view));
    set.labels.emplace(id, std::move(label));
  }
  std::ifstream audit(dir / "audit.jsonl");
  for (std::string line; std::getline(audit, line);) {
    if (!line.empty()) set.audit.push_back(nlohmann::json::parse(line));
  }
  return set;
}

RunRecord train_one_time(student::Student& student, std::span<const ImageSample> labeled,
                         const PseudoLabelSet& pseudo, std::span<const ImageSample> val,
                         const TrainConfig& config, const Hooks& hooks) {
  TrainConfig cfg = config;
  cfg.scheduling = Scheduling::one_time;
  if (pseudo.samples.empty() && hooks.log) {
    *hooks.log << "warning: no pseudo labels, training on labeled data only" << std::endl;
  }
  UnlabeledSource src;
  src.fixed = pseudo.samples;
  RunRecord r = Trainer(student, labeled, src, val, cfg, hooks).run();
  r.audit.insert(r.audit.begin(), pseudo.audit.begin(), pseudo.audit.end());
  return r;
}

RunRecord train_continuous(student::Student& student, std::span<const ImageSample> labeled,
                           std::span<const ImageSample> unlabeled, const teacher::Teacher& teacher,
                           std::span<const ImageSample> val, const TrainConfig& config,
                           const Hooks& hooks) {
  TrainConfig cfg = config;
  cfg.scheduling = Scheduling::continuous;
  UnlabeledSource src;
  src.live = unlabeled;
  src.teacher = &teacher;
  return Trainer(student, labeled, src, val, cfg, hooks).run();
}

metrics::MetricReport evaluate(student::Student& student, std::span<const ImageSample> test,
                               const TrainConfig& config, const teacher::Teacher* teacher,
                               bool refine) {
  config.validate();
  if (refine && teacher == nullptr) throw ValidationError("evaluate: refine needs a teacher");
  Rng tie_rng(sub_seed(config.seed, "tie_break_eval"));
  std::vector<metrics::SampleScore> rows;
  predict_all(student, test, config, [&](const Prediction& p) {
    if (!p.view.mask) throw ValidationError("test sample '" + p.view.id + "' has no mask");
    BinaryMask pred = metrics::binarize(p.probs);
    if (refine) {
      prompt::ProbabilityMask pm{p.probs, p.view.id};
      if (auto prompts = prompt::build_prompt_set(pm, config.prompt, tie_rng)) {
        teacher::TeacherRequest r;
        r.sample_id = p.view.id;
        r.image = p.view.image;
        r.prompts = std::move(*prompts);
        r.view = p.transform;
        pred = teacher->predict(r).mask;
      }
    }
    rows.push_back({p.view.id, metrics::dice_score(*p.view.mask, pred),
                    metrics::iou_score(*p.view.mask, pred)});
  });
  return metrics::summarize(std::move(rows));
}

}  // namespace kmine::pipeline

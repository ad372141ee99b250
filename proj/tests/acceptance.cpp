// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "kmine/cli/commands.hpp"
#include "kmine/cli/experiment.hpp"
#include "kmine/data/split.hpp"
#include "kmine/data/synthetic.hpp"
#include "kmine/metrics/losses.hpp"
#include "kmine/metrics/metrics.hpp"
#include "kmine/pipeline/trainer.hpp"
#include "kmine/prompt/prompt.hpp"
#include "kmine/teacher/oracle.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <unistd.h>

using namespace kmine;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

std::string sci(double v) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(2) << v;
  return os.str();
}

BinaryMask random_mask(int rows, int cols, double density, Rng& rng) {
  BinaryMask m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform01(rng) < density ? 1 : 0;
  return m;
}

ProbPlane random_probs(int rows, int cols, Rng& rng, double lo = 0.0, double hi = 1.0) {
  ProbPlane p(rows, cols);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = static_cast<float>(uniform(rng, lo, hi));
  return p;
}

// ---------------------------------------------------------------------------------------------

Outcome metric_oracle() {
  const auto t0 = Clock::now();
  Rng rng(101);
  double worst = 0, worst_identity = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const double density = uniform01(rng);
    const BinaryMask y = random_mask(16, 16, density, rng);
    const BinaryMask y_hat = random_mask(16, 16, uniform01(rng), rng);
    std::set<int> a, b, both, either;
    for (int i = 0; i < 256; ++i) {
      if (y.data()[i]) a.insert(i);
      if (y_hat.data()[i]) b.insert(i);
    }
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::inserter(both, both.end()));
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::inserter(either, either.end()));
    const double dice_ref = a.size() + b.size() == 0 ? 1.0 : 2.0 * both.size() / (a.size() + b.size());
    const double iou_ref = either.empty() ? 1.0 : static_cast<double>(both.size()) / either.size();
    const double dice = metrics::dice_score(y, y_hat);
    const double iou = metrics::iou_score(y, y_hat);
    worst = std::max({worst, std::abs(dice - dice_ref), std::abs(iou - iou_ref)});
    worst_identity = std::max(worst_identity, std::abs(dice - 2 * iou / (1 + iou)));
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-12 && worst_identity <= 1e-12 && t < 10,
          "max error " + sci(worst) + ", identity error " + sci(worst_identity) + ", " +
              fmt(t, 2) + " s (limit 10 s)"};
}

Outcome dice_gradient() {
  const auto t0 = Clock::now();
  Rng rng(202);
  const double h = 1e-4;
  double worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    // Kept away from 0 and 1 so the central difference stays inside the probability range.
    const Plane<double> p = random_probs(8, 8, rng, 0.01, 0.99).cast<double>();
    const BinaryMask g = random_mask(8, 8, 0.4, rng);
    const Plane<double> analytic = metrics::dice_loss_gradient(p, g);
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      Plane<double> up = p, down = p;
      up.data()[i] += h;
      down.data()[i] -= h;
      const double numeric = (metrics::dice_loss(up, g) - metrics::dice_loss(down, g)) / (2 * h);
      const double a = analytic.data()[i];
      const double scale = std::max({std::abs(a), std::abs(numeric), 1e-12});
      worst = std::max(worst, std::abs(a - numeric) / scale);
    }
  }
  const double t = seconds_since(t0);
  return {worst < 1e-3 && t < 30,
          "max relative error " + sci(worst) + " (limit 1e-3), " + fmt(t, 2) + " s (limit 30 s)"};
}

Outcome loss_formula() {
  // Labeled pair: p = 0.5 everywhere, half the pixels foreground.
  ProbPlane p1 = ProbPlane::Constant(2, 2, 0.5f);
  BinaryMask g1(2, 2);
  g1 << 1, 1, 0, 0;
  // Pseudo pair: confident and mostly right.
  ProbPlane p2(2, 2);
  p2 << 0.8f, 0.2f, 0.2f, 0.8f;
  BinaryMask g2(2, 2);
  g2 << 1, 0, 0, 1;

  const double s = 1e-6, k = 0.2, lambda = 0.25;
  // Dice: 1 - (2*intersection + s) / (sum p + sum g + s); BCE: mean over 4 pixels.
  const double dice1 = 1.0 - (2.0 * 1.0 + s) / (2.0 + 2.0 + s);
  const double bce1 = std::log(2.0);
  const double p08 = static_cast<double>(0.8f), p02 = static_cast<double>(0.2f);
  const double dice2 = 1.0 - (2.0 * (2 * p08) + s) / (2 * p08 + 2 * p02 + 2.0 + s);
  const double bce2 = -(2 * std::log(p08) + 2 * std::log(1 - p02)) / 4.0;
  const double expected = (dice1 + k * bce1) + lambda * (dice2 + k * bce2);

  metrics::LossConfig cfg;
  cfg.k = k;
  cfg.lambda_pseudo = lambda;
  cfg.dice_smooth = s;
  const std::vector<metrics::LossPair> lab{{p1, g1}}, pseudo{{p2, g2}};
  const double total = metrics::combined_loss(lab, pseudo, cfg).total;
  const double err = std::abs(total - expected);
  return {err <= 1e-6, "total " + fmt(total, 9) + " vs hand " + fmt(expected, 9) + " (k=0.2, lambda=0.25)"};
}

Outcome prompt_oracle() {
  const auto t0 = Clock::now();
  Rng rng(303);
  int point_mismatch = 0, box_mismatch = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int rows = 1 + static_cast<int>(uniform_index(rng, 24));
    const int cols = 1 + static_cast<int>(uniform_index(rng, 24));
    ProbPlane p = random_probs(rows, cols, rng);
    if (trial % 2) {
      // Few levels, so ties at the cut-off are common.
      p = (p * 4.0f).floor() / 4.0f;
    }
    const int x = 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(std::min(rows * cols, 8))));
    const prompt::ProbabilityMask pm{p, "a"};
    const auto pts = prompt::extract_points(pm, x, rng);

    std::vector<float> all(p.data(), p.data() + p.size());
    std::sort(all.begin(), all.end(), std::greater<>());
    std::vector<float> want(all.begin(), all.begin() + x), got;
    std::set<std::pair<int, int>> distinct;
    for (const auto& c : pts) {
      got.push_back(p(c.row, c.col));
      distinct.insert({c.row, c.col});
    }
    std::sort(got.begin(), got.end(), std::greater<>());
    if (got != want || distinct.size() != pts.size()) ++point_mismatch;

    int r0 = rows, c0 = cols, r1 = -1, c1 = -1;
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        if (p(r, c) >= 0.5f) {
          r0 = std::min(r0, r);
          r1 = std::max(r1, r);
          c0 = std::min(c0, c);
          c1 = std::max(c1, c);
        }
      }
    }
    const auto box = prompt::extract_box(pm);
    const bool ok = r1 < 0 ? !box : (box && *box == Box{c0, r0, c1, r1});
    if (!ok) ++box_mismatch;
  }
  // Tie uniformity: one winner plus eight tied pixels, second point drawn among the ties.
  ProbPlane tie = ProbPlane::Constant(3, 3, 0.5f);
  tie(1, 1) = 0.9f;
  std::map<std::pair<int, int>, int> counts;
  const int draws = 8000;
  for (int i = 0; i < draws; ++i) {
    const auto pts = prompt::extract_points({tie, "t"}, 2, rng);
    ++counts[{pts[1].row, pts[1].col}];
  }
  double chi2 = 0;
  for (const auto& [pix, n] : counts) chi2 += (n - draws / 8.0) * (n - draws / 8.0) / (draws / 8.0);
  const bool uniform_ties = counts.size() == 8 && chi2 < 24.3;
  const double t = seconds_since(t0);
  return {point_mismatch == 0 && box_mismatch == 0 && uniform_ties && t < 20,
          std::to_string(point_mismatch) + " point and " + std::to_string(box_mismatch) +
              " box mismatches in 1000 maps, tie chi2 " + fmt(chi2, 2) + " (limit 24.3), " + fmt(t, 2) +
              " s (limit 20 s)"};
}

// ---------------------------------------------------------------------------------------------

/// Scaled trend experiment: 300 synthetic 96x96 images, 50% labeled.
struct TrendSetup {
  int images = 300;
  int image_size = 96;
  int width = 8;
  int warm_epochs = 20;
  int phase_epochs = 10;
  double lr = 1e-3;
  int jitter = 1;
  double drop = 0.1;
};

struct SeedResult {
  std::map<std::string, double> dice;
  bool checksums_equal = true;
  double trend_seconds = 0;
  double lambda_seconds = 0;
};

SeedResult run_seed(std::uint64_t seed, const TrendSetup& t) {
  SeedResult out;
  const auto samples = data::generate_synthetic_dataset(t.images, t.image_size, {}, seed);
  const auto manifest = data::make_split(samples, 0.5, 50.0 / t.images, 50.0 / t.images, seed);
  const auto split = data::apply_split(samples, manifest);
  if (split.val.size() != 50 || split.test.size() != 50 || split.labeled.size() + split.unlabeled.size() != 200) {
    throw Error("unexpected split sizes");
  }
  teacher::GroundTruthLookup gt;
  for (const auto& s : samples) gt.emplace(s.id, *s.mask);
  teacher::OracleNoise noise;
  noise.boundary_jitter_px = t.jitter;
  noise.component_drop_prob = t.drop;
  noise.prompt_sensitivity = true;
  const teacher::OracleTeacher oracle(gt, noise, seed);

  pipeline::TrainConfig cfg;
  cfg.seed = seed;
  cfg.base_lr = t.lr;
  cfg.max_epochs = t.warm_epochs;
  cfg.augmentation.resize_shortest_side = t.image_size;
  cfg.augmentation.crop_size = t.image_size;
  student::StudentConfig sc;
  sc.tiny_width = t.width;
  auto student = student::make_student(sc, sub_seed(seed, "init"));

  auto t0 = Clock::now();
  pipeline::train_supervised(*student, split.labeled, split.val, cfg);
  std::vector<nn::Tensor> warm;
  for (const auto& ref : student->state()) warm.push_back(*ref.tensor);
  auto restore = [&] {
    const auto refs = student->state();
    for (std::size_t i = 0; i < refs.size(); ++i) *refs[i].tensor = warm[i];
  };
  out.trend_seconds += seconds_since(t0);

  pipeline::TrainConfig phase = cfg;
  phase.max_epochs = t.phase_epochs;
  const std::string checksum = oracle.state_checksum();
  auto continuous = [&](prompt::PromptMode mode, double lambda) {
    pipeline::TrainConfig c = phase;
    c.prompt.mode = mode;
    c.loss.lambda_pseudo = lambda;
    const auto r = pipeline::train_continuous(*student, split.labeled, split.unlabeled, oracle, split.val, c);
    out.checksums_equal = out.checksums_equal && r.teacher_checksum_before == checksum &&
                          r.teacher_checksum_after == checksum && oracle.state_checksum() == checksum;
  };

  const std::vector<std::string> methods{"supervised", "continuous", "one_time", "points", "box", "mask", "lambda0"};
  for (const auto& m : methods) {
    restore();
    t0 = Clock::now();
    if (m == "supervised") {
      pipeline::train_supervised(*student, split.labeled, split.val, phase);
    } else if (m == "one_time") {
      const auto set = pipeline::mine_one_time(*student, split.unlabeled, oracle, phase);
      pipeline::train_one_time(*student, split.labeled, set, split.val, phase);
    } else if (m == "continuous") {
      continuous(prompt::PromptMode::points_box, phase.loss.lambda_pseudo);
    } else if (m == "points") {
      continuous(prompt::PromptMode::points, phase.loss.lambda_pseudo);
    } else if (m == "box") {
      continuous(prompt::PromptMode::box, phase.loss.lambda_pseudo);
    } else if (m == "mask") {
      continuous(prompt::PromptMode::points_box_mask, phase.loss.lambda_pseudo);
    } else {
      continuous(prompt::PromptMode::points_box, 0.0);
    }
    out.dice[m] = pipeline::evaluate(*student, split.test, phase).dice.mean;
    (m == "lambda0" ? out.lambda_seconds : out.trend_seconds) += seconds_since(t0);
  }
  return out;
}

// ---------------------------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / ("kmine_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  cli::ExperimentConfig c;
  c.seed = 5;
  c.dataset.synthetic.count = 60;
  c.dataset.synthetic.image_size = 32;
  c.dataset.synthetic.seed = 5;
  c.dataset.val_fraction = 0.2;
  c.dataset.test_fraction = 0.2;
  c.student.tiny_width = 4;
  c.teacher.oracle.boundary_jitter_px = 1;
  c.teacher.oracle.component_drop_prob = 0.1;
  c.train.max_epochs = 3;
  c.train.base_lr = 1e-3;
  c.train.augmentation.resize_shortest_side = 32;
  c.train.augmentation.crop_size = 32;
  c.output_dir = (dir / "run").string();
  const fs::path cfg = dir / "config.json";
  std::ofstream(cfg) << nlohmann::json(c).dump(2);

  const std::vector<std::string> files{"supervised/summary.json", "continuous/summary.json",
                                       "one_time/summary.json", "continuous/audit.jsonl"};
  auto run_all = [&] {
    std::ostringstream out, err;
    for (const auto& args : std::vector<std::vector<std::string>>{
             {"split"},
             {"train", "--phase", "supervised"},
             {"train", "--phase", "continuous"},
             {"train", "--phase", "one_time"}}) {
      std::vector<std::string> full{"--config", cfg.string(), "--force"};
      full.insert(full.end(), args.begin(), args.end());
      if (const int code = cli::run(full, out, err); code != 0) {
        throw Error("command failed (" + std::to_string(code) + "): " + err.str());
      }
    }
    std::vector<std::string> contents;
    for (const auto& f : files) contents.push_back(slurp(dir / "run" / f));
    fs::remove_all(dir / "run");
    return contents;
  };
  const auto first = run_all();
  const auto second = run_all();
  fs::remove_all(dir);
  int differing = 0;
  for (std::size_t i = 0; i < files.size(); ++i) differing += first[i].empty() || first[i] != second[i];
  return {differing == 0, std::to_string(files.size() - differing) + "/" + std::to_string(files.size()) +
                              " run files bit-identical across two full runs"};
}

double mean_of(const std::vector<SeedResult>& runs, const std::string& method) {
  double s = 0;
  for (const auto& r : runs) s += r.dice.at(method);
  return s / static_cast<double>(runs.size());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks", "kmine_acceptance"};
  int seeds = 5;
  std::set<int> only;
  app.add_option("--seeds", seeds, "Paired seeds for the training experiments")->check(CLI::PositiveNumber);
  app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  auto wanted = [&](int n) { return only.empty() || only.count(n) > 0; };

  std::map<int, std::pair<std::string, Outcome>> results;
  auto record = [&](int n, const std::string& name, const std::function<Outcome()>& f) {
    if (!wanted(n)) return;
    std::cerr << "running " << n << ": " << name << std::endl;
    try {
      results[n] = {name, f()};
    } catch (const std::exception& e) {
      results[n] = {name, {false, std::string("error: ") + e.what()}};
    }
  };

  record(1, "metric oracle equivalence", metric_oracle);
  record(2, "soft Dice gradient check", dice_gradient);
  record(3, "combined loss formula", loss_formula);
  record(4, "prompt extraction oracle equivalence", prompt_oracle);
  record(8, "determinism of repeated runs", determinism);

  if (wanted(5) || wanted(6) || wanted(7)) {
    std::vector<SeedResult> runs;
    std::string failure;
    try {
      for (int s = 1; s <= seeds; ++s) {
        std::cerr << "training experiments, seed " << s << "/" << seeds << std::endl;
        runs.push_back(run_seed(static_cast<std::uint64_t>(s), TrendSetup{}));
        for (const auto& [m, d] : runs.back().dice) std::cerr << "  " << m << " test dice " << fmt(d) << "\n";
      }
    } catch (const std::exception& e) {
      failure = std::string("error: ") + e.what();
    }
    if (!failure.empty()) {
      for (int n : {5, 6, 7}) results[n] = {"training experiments", {false, failure}};
    } else {
      bool frozen = true;
      double trend_s = 0;
      for (const auto& r : runs) {
        frozen = frozen && r.checksums_equal;
        trend_s += r.trend_seconds;
      }
      results[5] = {"frozen teacher checksum",
                    {frozen, std::to_string(runs.size() * 5) + " continuous runs, checksum " +
                                 (frozen ? "unchanged" : "CHANGED")}};

      const double sup = mean_of(runs, "supervised"), cont = mean_of(runs, "continuous"),
                   one = mean_of(runs, "one_time"), pts = mean_of(runs, "points"),
                   box = mean_of(runs, "box"), mask = mean_of(runs, "mask"), lam0 = mean_of(runs, "lambda0");
      const bool a = cont >= sup + 0.01, b = cont >= one - 0.005, c = cont >= pts && cont >= box,
                 d = mask <= cont + 0.005, fast = trend_s < 45 * 60;
      std::ostringstream detail;
      detail << "mean test Dice over " << runs.size() << " seeds: supervised " << fmt(sup) << ", continuous "
             << fmt(cont) << ", one_time " << fmt(one) << ", points " << fmt(pts) << ", box " << fmt(box)
             << ", points_box_mask " << fmt(mask) << "; (a) " << (a ? "ok" : "FAIL") << " (b) "
             << (b ? "ok" : "FAIL") << " (c) " << (c ? "ok" : "FAIL") << " (d) " << (d ? "ok" : "FAIL")
             << "; " << fmt(trend_s / 60, 1) << " min (limit 45)";
      results[6] = {"scaled trend reproduction", {a && b && c && d && fast, detail.str()}};
      const double gap = std::abs(lam0 - sup);
      results[7] = {"lambda sensitivity",
                    {gap < 0.01, "lambda=0 " + fmt(lam0) + " vs supervised " + fmt(sup) + ", gap " + fmt(gap) +
                                     " (limit 0.01)"}};
    }
  }

  bool all = true;
  for (const auto& [n, r] : results) {
    const auto& [name, o] = r;
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << n << " " << name << ": " << o.detail << "\n";
    all = all && o.pass;
  }
  return all ? 0 : 1;
}

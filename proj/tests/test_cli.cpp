#include "kmine/cli/commands.hpp"
#include "kmine/cli/experiment.hpp"
#include "kmine/data/sample.hpp"
#include "kmine/data/split.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace kmine;
using namespace kmine::cli;
using testing::TempDir;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result kmine_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

/// A seconds-scale synthetic experiment.
ExperimentConfig small_experiment(const fs::path& out) {
  ExperimentConfig c;
  c.seed = 3;
  c.dataset.synthetic.count = 40;
  c.dataset.synthetic.image_size = 16;
  c.dataset.val_fraction = 0.2;
  c.dataset.test_fraction = 0.2;
  c.student.tiny_width = 4;
  c.train.batch_size = 4;
  c.train.max_epochs = 2;
  c.train.base_lr = 1e-3;
  c.train.augmentation.resize_shortest_side = 16;
  c.train.augmentation.crop_size = 16;
  c.output_dir = out.string();
  return c;
}

fs::path write_config(const fs::path& dir, const ExperimentConfig& c) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << nlohmann::json(c).dump(2);
  return p;
}

nlohmann::json read(const fs::path& p) {
  std::ifstream is(p);
  return nlohmann::json::parse(is);
}

std::size_t line_count(const fs::path& p) {
  std::ifstream is(p);
  std::size_t n = 0;
  for (std::string line; std::getline(is, line);) n += !line.empty();
  return n;
}

void write_summary(const fs::path& dir, const std::string& method, double fraction, double dice,
                   double iou) {
  fs::create_directories(dir);
  std::ofstream(dir / "summary.json") << nlohmann::json{
      {"method", method},
      {"labeled_fraction", fraction},
      {"test", {{"dice", {{"mean", dice}}}, {"iou", {{"mean", iou}}}}}};
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("experiment config survives serialization") {
    ExperimentConfig c = small_experiment("runs/x");
    c.dataset.split_seed = 11;
    c.teacher.backend = teacher::Backend::oracle;
    const nlohmann::json once = c;
    const nlohmann::json twice = once.get<ExperimentConfig>();
    CHECK(once == twice);
    CHECK(nlohmann::json(ExperimentConfig{}).get<ExperimentConfig>().split_seed() == 0);
  }

  TEST_CASE("environment variables override nested keys") {
    nlohmann::json doc = ExperimentConfig{};
    apply_env_overrides(doc, {{"KMINE_SEED", "9"},
                              {"KMINE_TRAIN__MAX_EPOCHS", "7"},
                              {"KMINE_DATASET__LAYOUT", "flat_pairs"},
                              {"KMINE_TRAIN__LOSS__K", "0.5"}});
    const auto c = doc.get<ExperimentConfig>();
    CHECK(c.seed == 9);
    CHECK(c.train.max_epochs == 7);
    CHECK(c.dataset.layout == "flat_pairs");
    CHECK(c.train.loss.k == 0.5);
    CHECK_THROWS_AS(apply_env_overrides(doc, {{"KMINE_TRAIN__NO_SUCH_KEY", "1"}}), ValidationError);
  }

  TEST_CASE("environment overrides reach the command line") {
    TempDir dir;
    const auto cfg = write_config(dir.path(), small_experiment(dir.path() / "out"));
    ::setenv("KMINE_DATASET__LABELED_FRACTION", "0.25", 1);
    const Result r = kmine_cli({"--config", cfg.string(), "split"});
    ::unsetenv("KMINE_DATASET__LABELED_FRACTION");
    REQUIRE(r.code == kOk);
    const auto m = data::read_manifest(dir.path() / "out" / "split.json");
    CHECK(m.labeled_fraction == 0.25);
  }

  TEST_CASE("split prints partition sizes for a 1000-image Kvasir folder") {
    TempDir data, out;
    fs::create_directories(data.path() / "images");
    fs::create_directories(data.path() / "masks");
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) {
      const std::string stem = "img" + std::to_string(i);
      data::write_rgb(data.path() / "images" / (stem + ".png"), testing::random_image(8, 8, rng));
      data::write_mask(data.path() / "masks" / (stem + ".png"), testing::random_mask(8, 8, 0.3, rng));
    }
    ExperimentConfig c;
    c.dataset.layout = "kvasir_seg";
    c.dataset.root = data.path().string();
    c.dataset.labeled_fraction = 0.75;
    c.dataset.val_fraction = 0.1;
    c.dataset.test_fraction = 0.1;
    c.output_dir = out.path().string();
    const auto cfg = write_config(out.path(), c);
    const Result r = kmine_cli({"--config", cfg.string(), "split"});
    REQUIRE(r.code == kOk);
    CHECK(r.out.find("labeled 600\n") != std::string::npos);
    CHECK(r.out.find("unlabeled 200\n") != std::string::npos);
    CHECK(r.out.find("val 100\n") != std::string::npos);
    CHECK(r.out.find("test 100\n") != std::string::npos);

    const Result again = kmine_cli({"--config", cfg.string(), "split"});
    CHECK(again.code == kValidation);
    CHECK(again.err.find("--force") != std::string::npos);
    CHECK(kmine_cli({"--config", cfg.string(), "--force", "split"}).code == kOk);
  }

  TEST_CASE("an invalid fraction is a validation error naming the field") {
    TempDir dir;
    ExperimentConfig c = small_experiment(dir.path() / "out");
    c.dataset.labeled_fraction = 1.5;
    const auto cfg = write_config(dir.path(), c);
    const Result r = kmine_cli({"--config", cfg.string(), "split"});
    CHECK(r.code == kValidation);
    CHECK(r.err.find("labeled_fraction") != std::string::npos);
  }

  TEST_CASE("usage errors and runtime failures map to their exit codes") {
    CHECK(kmine_cli({}).code == kValidation);
    CHECK(kmine_cli({"frobnicate"}).code == kValidation);
    CHECK(kmine_cli({"--help"}).code == kOk);
    TempDir dir;
    CHECK(kmine_cli({"--config", (dir.path() / "missing.json").string(), "split"}).code == kValidation);
    std::ofstream(dir.path() / "bad.json") << "{ not json";
    CHECK(kmine_cli({"--config", (dir.path() / "bad.json").string(), "split"}).code == kValidation);

    // A remote teacher nobody listens to fails at run time.
    ExperimentConfig c = small_experiment(dir.path() / "out");
    c.teacher.backend = teacher::Backend::sam;
    c.teacher.endpoint_url = "http://127.0.0.1:9";
    c.teacher.timeout_s = 1;
    const auto cfg = write_config(dir.path(), c);
    REQUIRE(kmine_cli({"--config", cfg.string(), "split"}).code == kOk);
    REQUIRE(kmine_cli({"--config", cfg.string(), "train", "--phase", "supervised"}).code == kOk);
    const Result r = kmine_cli({"--config", cfg.string(), "mine"});
    CHECK(r.code == kRuntime);
  }

  TEST_CASE("end to end: split, train, mine, evaluate, report") {
    TempDir dir;
    const fs::path out = dir.path() / "out";
    const auto cfg = write_config(dir.path(), small_experiment(out));
    const std::string c = cfg.string();

    REQUIRE(kmine_cli({"--config", c, "split"}).code == kOk);
    const Result early = kmine_cli({"--config", c, "train", "--phase", "one_time"});
    CHECK(early.code == kValidation);
    CHECK(early.err.find("warm-start") != std::string::npos);

    REQUIRE(kmine_cli({"--config", c, "train", "--phase", "supervised"}).code == kOk);
    const auto summary = read(out / "supervised" / "summary.json");
    CHECK(summary["test"]["dice"].contains("mean"));
    CHECK(summary["manifest_hash"] == data::read_manifest(out / "split.json").hash());
    CHECK(fs::exists(out / "supervised" / "config.json"));
    CHECK(fs::exists(out / "supervised" / "model.ckpt"));
    CHECK(line_count(out / "supervised" / "epochs.jsonl") == 2);

    const Result cont = kmine_cli({"--config", c, "train", "--phase", "continuous", "--teacher", "oracle"});
    REQUIRE(cont.code == kOk);
    CHECK(line_count(out / "continuous" / "audit.jsonl") > 0);

    REQUIRE(kmine_cli({"--config", c, "mine"}).code == kOk);
    CHECK(fs::exists(out / "pseudo" / "index.json"));
    REQUIRE(kmine_cli({"--config", c, "train", "--phase", "one_time"}).code == kOk);
    CHECK(read(out / "one_time" / "summary.json")["phase"] == "one_time");

    REQUIRE(kmine_cli({"--config", c, "evaluate"}).code == kOk);
    const auto eval = read(out / "evaluation.json");
    CHECK(eval["checkpoint"].get<std::string>().find("continuous") != std::string::npos);
    REQUIRE(kmine_cli({"--config", c, "evaluate", "--refine"}).code == kOk);
    CHECK(fs::exists(out / "evaluation_refined.json"));

    const Result rep = kmine_cli({"--output-dir", (dir.path() / "rep").string(), "report",
                                  (out / "supervised").string(), (out / "continuous").string(),
                                  (out / "one_time").string()});
    REQUIRE(rep.code == kOk);
    CHECK(rep.out.find("Labeled/Unlabeled Split (50% Labeled)") != std::string::npos);
    CHECK(fs::exists(dir.path() / "rep" / "report.csv"));
    CHECK_FALSE(fs::exists(out / ".kmine.lock"));
  }

  TEST_CASE("report aggregates seeds per method and groups splits") {
    TempDir dir;
    const double a[] = {0.80, 0.82, 0.84}, b[] = {0.70, 0.71, 0.75};
    std::vector<std::string> args{"report", "--csv", (dir.path() / "r.csv").string()};
    for (int s = 0; s < 3; ++s) {
      const auto pa = dir.path() / ("a" + std::to_string(s));
      const auto pb = dir.path() / ("b" + std::to_string(s));
      write_summary(pa, "continuous", 0.75, a[s], a[s] - 0.1);
      write_summary(pb, "supervised", 0.75, b[s], b[s] - 0.1);
      args.push_back(pa.string());
      args.push_back(pb.string());
    }
    const auto single = dir.path() / "single";
    write_summary(single, "supervised", 0.25, 0.6, 0.5);
    args.push_back(single.string());
    const Result r = kmine_cli(args);
    REQUIRE(r.code == kOk);
    // 75% first, then 25%, each under its own heading.
    const auto h75 = r.out.find("Labeled/Unlabeled Split (75% Labeled)");
    const auto h25 = r.out.find("Labeled/Unlabeled Split (25% Labeled)");
    REQUIRE(h75 != std::string::npos);
    REQUIRE(h25 != std::string::npos);
    CHECK(h75 < h25);
    CHECK(r.out.find("0.820 ± 0.020") != std::string::npos);  // mean and sample std of a
    CHECK(r.out.find("0.720 ± 0.026") != std::string::npos);  // b: mean .72, std .0265
    CHECK(r.out.find("0.600 ± 0.000") != std::string::npos);
    CHECK(r.out.find("(single run)") != std::string::npos);

    std::ifstream csv(dir.path() / "r.csv");
    std::vector<std::string> rows;
    for (std::string line; std::getline(csv, line);) rows.push_back(line);
    REQUIRE(rows.size() == 4);
    CHECK(rows[1].rfind("0.750000,continuous,3,", 0) == 0);
    CHECK(rows[2].rfind("0.750000,supervised,3,", 0) == 0);
    CHECK(rows[3].substr(rows[3].size() - 2) == ",1");

    std::ofstream(dir.path() / "junk.json") << "{}";
    CHECK(kmine_cli({"report", (dir.path() / "junk.json").string()}).code == kValidation);
    CHECK(kmine_cli({"report", (dir.path() / "nowhere").string()}).code == kValidation);
  }

  TEST_CASE("a live lock blocks a second command and a stale one is taken over") {
    TempDir dir;
    const fs::path out = dir.path() / "out";
    const auto cfg = write_config(dir.path(), small_experiment(out));
    {
      DirectoryLock held(out);
      CHECK_THROWS_AS(DirectoryLock{out}, LockError);
      const Result r = kmine_cli({"--config", cfg.string(), "split"});
      CHECK(r.code == kRuntime);
      CHECK(r.err.find("in use") != std::string::npos);
    }
    CHECK_FALSE(fs::exists(out / ".kmine.lock"));
    std::ofstream(out / ".kmine.lock") << "999999999\n";  // no such process
    CHECK(kmine_cli({"--config", cfg.string(), "split"}).code == kOk);
    CHECK_FALSE(fs::exists(out / ".kmine.lock"));
  }
}

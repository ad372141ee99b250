#include "kmine/cli/experiment.hpp"

#include "kmine/student/checkpoint.hpp"

#include <algorithm>
#include <cctype>
#include <csignal>
#include <fstream>
#include <unistd.h>

extern char** environ;

namespace kmine::cli {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

template <typename T>
nlohmann::json optional_json(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

template <typename T>
std::optional<T> optional_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

}  // namespace

void ExperimentConfig::validate() const {
  if (dataset.layout == "synthetic") {
    if (dataset.synthetic.count < 10) throw ValidationError("dataset.synthetic.count must be >= 10");
    if (dataset.synthetic.image_size < 8) {
      throw ValidationError("dataset.synthetic.image_size must be >= 8");
    }
    dataset.synthetic.spec.validate();
  } else {
    data::layout_from_string(dataset.layout);
    if (dataset.root.empty()) throw ValidationError("dataset.root is required for " + dataset.layout);
    if (!std::filesystem::is_directory(dataset.root)) {
      throw ValidationError("dataset.root '" + dataset.root + "' is not a directory");
    }
  }
  auto fraction = [](double f, const char* name) {
    if (!(f > 0.0 && f <= 1.0)) {
      throw ValidationError(std::string(name) + " must be in (0,1], got " + std::to_string(f));
    }
  };
  fraction(dataset.labeled_fraction, "dataset.labeled_fraction");
  fraction(dataset.val_fraction, "dataset.val_fraction");
  fraction(dataset.test_fraction, "dataset.test_fraction");
  if (dataset.val_fraction + dataset.test_fraction >= 1.0) {
    throw ValidationError("dataset.val_fraction + dataset.test_fraction must be < 1");
  }
  if (dataset.resize_shortest_side && *dataset.resize_shortest_side < 8) {
    throw ValidationError("dataset.resize_shortest_side must be >= 8");
  }
  student.validate();
  if (!student.encoder_weights.empty() && !std::filesystem::exists(student.encoder_weights)) {
    throw ValidationError("student.encoder_weights '" + student.encoder_weights + "' not found");
  }
  teacher.validate();
  train.validate();
  if (output_dir.empty()) throw ValidationError("output_dir must be set");
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  const auto& d = c.dataset;
  j = {{"name", c.name},
       {"seed", c.seed},
       {"dataset",
        {{"layout", d.layout},
         {"root", d.root},
         {"labeled_fraction", d.labeled_fraction},
         {"val_fraction", d.val_fraction},
         {"test_fraction", d.test_fraction},
         {"split_seed", optional_json(d.split_seed)},
         {"resize_shortest_side", optional_json(d.resize_shortest_side)},
         {"synthetic",
          {{"count", d.synthetic.count},
           {"image_size", d.synthetic.image_size},
           {"seed", d.synthetic.seed},
           {"spec", d.synthetic.spec}}}}},
       {"student", c.student},
       {"teacher", c.teacher},
       {"train", c.train},
       {"output_dir", c.output_dir}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  c = ExperimentConfig{};
  c.name = j.value("name", c.name);
  c.seed = j.value("seed", c.seed);
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    c.dataset.layout = d.value("layout", c.dataset.layout);
    c.dataset.root = d.value("root", c.dataset.root);
    c.dataset.labeled_fraction = d.value("labeled_fraction", c.dataset.labeled_fraction);
    c.dataset.val_fraction = d.value("val_fraction", c.dataset.val_fraction);
    c.dataset.test_fraction = d.value("test_fraction", c.dataset.test_fraction);
    c.dataset.split_seed = optional_from<std::uint64_t>(d, "split_seed");
    c.dataset.resize_shortest_side = optional_from<int>(d, "resize_shortest_side");
    if (d.contains("synthetic")) {
      const auto& s = d.at("synthetic");
      c.dataset.synthetic.count = s.value("count", c.dataset.synthetic.count);
      c.dataset.synthetic.image_size = s.value("image_size", c.dataset.synthetic.image_size);
      c.dataset.synthetic.seed = s.value("seed", c.dataset.synthetic.seed);
      if (s.contains("spec")) c.dataset.synthetic.spec = s.at("spec").get<data::ShapeSpec>();
    }
  }
  if (j.contains("student")) c.student = j.at("student").get<student::StudentConfig>();
  if (j.contains("teacher")) c.teacher = j.at("teacher").get<teacher::TeacherConfig>();
  if (j.contains("train")) c.train = j.at("train").get<pipeline::TrainConfig>();
  c.output_dir = j.value("output_dir", c.output_dir);
}

void apply_env_overrides(nlohmann::json& doc, const std::map<std::string, std::string>& env) {
  const std::string prefix = kEnvPrefix;
  for (const auto& [name, raw] : env) {
    if (name.rfind(prefix, 0) != 0) continue;
    std::string rest = name.substr(prefix.size());
    std::vector<std::string> keys;
    for (std::size_t pos = 0;;) {
      const auto next = rest.find("__", pos);
      keys.push_back(lower(rest.substr(pos, next == std::string::npos ? next : next - pos)));
      if (next == std::string::npos) break;
      pos = next + 2;
    }
    nlohmann::json* node = &doc;
    for (std::size_t k = 0; k < keys.size(); ++k) {
      if (!node->is_object() || !node->contains(keys[k])) {
        throw ValidationError("env override " + name + ": no config key '" + keys[k] + "'");
      }
      if (k + 1 < keys.size()) node = &(*node)[keys[k]];
    }
    nlohmann::json value;
    try {
      value = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::exception&) {
      value = raw;
    }
    (*node)[keys.back()] = std::move(value);
  }
}

std::map<std::string, std::string> environment_with_prefix(const std::string& prefix) {
  std::map<std::string, std::string> out;
  for (char** e = environ; e && *e; ++e) {
    const std::string entry = *e;
    const auto eq = entry.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = entry.substr(0, eq);
    if (key.rfind(prefix, 0) == 0) out[key] = entry.substr(eq + 1);
  }
  return out;
}

ExperimentConfig load_experiment(const std::string& path,
                                 const std::map<std::string, std::string>& env) {
  nlohmann::json doc = nlohmann::json(ExperimentConfig{});
  if (!path.empty()) {
    std::ifstream is(path);
    if (!is) throw ValidationError("cannot read config file '" + path + "'");
    try {
      // Keys missing from the file keep their defaults and stay addressable by overrides.
      doc.merge_patch(nlohmann::json::parse(is, nullptr, true, true));
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError("config file '" + path + "': " + e.what());
    }
  }
  apply_env_overrides(doc, env);
  try {
    return doc.get<ExperimentConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
}

data::Dataset load_experiment_dataset(const ExperimentConfig& config) {
  const auto& d = config.dataset;
  if (d.layout == "synthetic") {
    data::Dataset ds;
    ds.samples = data::generate_synthetic_dataset(d.synthetic.count, d.synthetic.image_size,
                                                  d.synthetic.spec, d.synthetic.seed);
    return ds;
  }
  data::LoadOptions opts;
  opts.resize_shortest_side = d.resize_shortest_side;
  return data::load_dataset(d.root, data::layout_from_string(d.layout), opts);
}

DirectoryLock::DirectoryLock(const std::filesystem::path& dir) : path_(dir / ".kmine.lock") {
  std::filesystem::create_directories(dir);
  for (int attempt = 0; attempt < 2; ++attempt) {
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (f) {
      std::fprintf(f, "%ld\n", static_cast<long>(::getpid()));
      std::fclose(f);
      return;
    }
    long pid = 0;
    if (std::ifstream is(path_); is >> pid && pid > 0 && ::kill(static_cast<pid_t>(pid), 0) == 0) {
      throw LockError("output directory " + dir.string() + " is in use by process " +
                      std::to_string(pid));
    }
    std::filesystem::remove(path_);  // stale
  }
  throw LockError("cannot lock output directory " + dir.string());
}

DirectoryLock::~DirectoryLock() {
  std::error_code ec;
  std::filesystem::remove(path_, ec);
}

}  // namespace kmine::cli

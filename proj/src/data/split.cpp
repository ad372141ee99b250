#include "kmine/data/split.hpp"

#include "kmine/core/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

namespace kmine::data {

void SplitManifest::validate() const {
  std::set<std::string> seen;
  for (const auto* list : {&labeled_ids, &unlabeled_ids, &val_ids, &test_ids}) {
    for (const auto& id : *list) {
      if (!seen.insert(id).second) {
        throw ValidationError("split manifest: id '" + id + "' appears in more than one partition");
      }
    }
  }
}

std::string SplitManifest::hash() const {
  std::uint64_t h = fnv1a("kmine-manifest-v" + std::to_string(version));
  for (const auto* list : {&labeled_ids, &unlabeled_ids, &val_ids, &test_ids}) {
    h = fnv1a("|", h);
    for (const auto& id : *list) h = fnv1a(id + ",", h);
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void to_json(nlohmann::json& j, const SplitManifest& m) {
  j = {{"version", m.version},
       {"seed", m.seed},
       {"labeled_fraction", m.labeled_fraction},
       {"val_fraction", m.val_fraction},
       {"test_fraction", m.test_fraction},
       {"labeled_ids", m.labeled_ids},
       {"unlabeled_ids", m.unlabeled_ids},
       {"val_ids", m.val_ids},
       {"test_ids", m.test_ids}};
}

void from_json(const nlohmann::json& j, SplitManifest& m) {
  m.version = j.at("version");
  if (m.version != kManifestVersion) {
    throw ValidationError("split manifest: unsupported version " + std::to_string(m.version));
  }
  m.seed = j.at("seed");
  m.labeled_fraction = j.at("labeled_fraction");
  m.val_fraction = j.value("val_fraction", 0.0);
  m.test_fraction = j.value("test_fraction", 0.0);
  m.labeled_ids = j.at("labeled_ids").get<std::vector<std::string>>();
  m.unlabeled_ids = j.at("unlabeled_ids").get<std::vector<std::string>>();
  m.val_ids = j.at("val_ids").get<std::vector<std::string>>();
  m.test_ids = j.at("test_ids").get<std::vector<std::string>>();
  m.validate();
}

SplitManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read manifest " + path.string());
  return nlohmann::json::parse(is).get<SplitManifest>();
}

void write_manifest(const std::filesystem::path& path, const SplitManifest& m) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write manifest " + path.string());
  os << nlohmann::json(m).dump(2) << "\n";
}

namespace {

void check_fraction(double f, const char* name) {
  if (!(f > 0.0 && f <= 1.0)) {
    throw ValidationError(std::string("split: ") + name + " must be in (0,1], got " +
                          std::to_string(f));
  }
}

}  // namespace

SplitManifest make_split(std::span<const ImageSample> samples, double labeled_fraction,
                         double val_fraction, double test_fraction, std::uint64_t seed,
                         const std::optional<PreSplit>& presplit) {
  check_fraction(labeled_fraction, "labeled_fraction");
  SplitManifest m;
  m.seed = seed;
  m.labeled_fraction = labeled_fraction;

  std::vector<std::string> train;
  if (presplit) {
    m.val_fraction = m.test_fraction = 0.0;
    train = presplit->train_ids;
    m.val_ids = presplit->val_ids;
    m.test_ids = presplit->test_ids;
    std::sort(train.begin(), train.end());
  } else {
    check_fraction(val_fraction, "val_fraction");
    check_fraction(test_fraction, "test_fraction");
    if (val_fraction + test_fraction >= 1.0) {
      throw ValidationError("split: val_fraction + test_fraction must be < 1");
    }
    m.val_fraction = val_fraction;
    m.test_fraction = test_fraction;
    std::vector<std::string> ids;
    ids.reserve(samples.size());
    for (const auto& s : samples) ids.push_back(s.id);
    std::sort(ids.begin(), ids.end());
    Rng rng(sub_seed(seed, "split"));
    shuffle(ids.begin(), ids.end(), rng);
    const auto n = static_cast<double>(ids.size());
    const auto n_val = static_cast<std::size_t>(std::llround(n * val_fraction));
    const auto n_test = static_cast<std::size_t>(std::llround(n * test_fraction));
    if (n_val == 0 || n_test == 0 || n_val + n_test >= ids.size()) {
      throw ValidationError("split: too few samples (" + std::to_string(ids.size()) +
                            ") for the requested fractions");
    }
    m.val_ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_val));
    m.test_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_val),
                      ids.begin() + static_cast<std::ptrdiff_t>(n_val + n_test));
    train.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_val + n_test), ids.end());
    std::sort(train.begin(), train.end());
  }
  if (train.empty() || m.val_ids.empty() || m.test_ids.empty()) {
    throw ValidationError("split: too few samples, a partition would be empty");
  }

  // Labels are dropped, samples are kept: the training partition does not depend on the fraction.
  Rng label_rng(sub_seed(seed, "label_drop"));
  shuffle(train.begin(), train.end(), label_rng);
  auto n_labeled = static_cast<std::size_t>(
      std::llround(static_cast<double>(train.size()) * labeled_fraction));
  n_labeled = std::clamp<std::size_t>(n_labeled, 1, train.size());
  m.labeled_ids.assign(train.begin(), train.begin() + static_cast<std::ptrdiff_t>(n_labeled));
  m.unlabeled_ids.assign(train.begin() + static_cast<std::ptrdiff_t>(n_labeled), train.end());
  m.validate();
  return m;
}

SplitData apply_split(std::span<const ImageSample> samples, const SplitManifest& manifest) {
  std::map<std::string, const ImageSample*> by_id;
  for (const auto& s : samples) by_id[s.id] = &s;
  auto pick = [&](const std::vector<std::string>& ids, bool keep_mask, const char* part) {
    std::vector<ImageSample> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
      auto it = by_id.find(id);
      if (it == by_id.end()) {
        throw ValidationError(std::string("split: ") + part + " id '" + id + "' not in dataset");
      }
      if (keep_mask) {
        if (!it->second->labeled()) {
          throw ValidationError(std::string("split: ") + part + " sample '" + id + "' has no mask");
        }
        out.push_back(*it->second);
      } else {
        out.push_back(it->second->without_mask());
      }
    }
    return out;
  };
  SplitData d;
  d.labeled = pick(manifest.labeled_ids, true, "labeled");
  d.unlabeled = pick(manifest.unlabeled_ids, false, "unlabeled");
  d.val = pick(manifest.val_ids, true, "val");
  d.test = pick(manifest.test_ids, true, "test");
  return d;
}

}  // namespace kmine::data

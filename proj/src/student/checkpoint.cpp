#include "kmine/student/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace kmine::student {

namespace {

constexpr char kMagic[8] = {'K', 'M', 'I', 'N', 'E', 'C', 'K', 'P'};

struct RawCheckpoint {
  nlohmann::json header;
  std::vector<std::pair<std::string, nn::Tensor>> tensors;
};

void write_tensor(std::ofstream& os, const nn::Tensor& t) {
  os.write(reinterpret_cast<const char*>(t.data()),
           static_cast<std::streamsize>(t.size() * sizeof(float)));
}

RawCheckpoint read_raw(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("checkpoint: cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0) {
    throw ValidationError("checkpoint: " + path + " is not a checkpoint file");
  }
  std::uint32_t version = 0;
  is.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (version != kCheckpointVersion) {
    throw VersionMismatch("checkpoint: version " + std::to_string(version) + " in " + path +
                          ", expected " + std::to_string(kCheckpointVersion));
  }
  std::uint64_t header_len = 0;
  is.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  std::string header(header_len, '\0');
  is.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!is) throw IoError("checkpoint: truncated header in " + path);

  RawCheckpoint raw;
  raw.header = nlohmann::json::parse(header);
  for (const auto& entry : raw.header.at("tensors")) {
    const auto shape = entry.at("shape").get<std::array<int, 4>>();
    nn::Tensor t(shape[0], shape[1], shape[2], shape[3]);
    is.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(float)));
    if (!is) throw IoError("checkpoint: truncated tensor data in " + path);
    raw.tensors.emplace_back(entry.at("name").get<std::string>(), std::move(t));
  }
  return raw;
}

}  // namespace

void to_json(nlohmann::json& j, const StudentConfig& c) {
  j = nlohmann::json{{"architecture", to_string(c.architecture)},
                     {"in_channels", c.in_channels},
                     {"out_channels", c.out_channels},
                     {"pretrained_encoder", c.pretrained_encoder},
                     {"encoder_weights", c.encoder_weights},
                     {"tiny_width", c.tiny_width}};
}

void from_json(const nlohmann::json& j, StudentConfig& c) {
  c = StudentConfig{};
  if (j.contains("architecture")) c.architecture = architecture_from_string(j.at("architecture"));
  c.in_channels = j.value("in_channels", c.in_channels);
  c.out_channels = j.value("out_channels", c.out_channels);
  c.pretrained_encoder = j.value("pretrained_encoder", c.pretrained_encoder);
  c.encoder_weights = j.value("encoder_weights", c.encoder_weights);
  c.tiny_width = j.value("tiny_width", c.tiny_width);
}

void OptimizerState::apply_to(nn::Adam& opt) const {
  if (first_moments.size() != opt.first_moments().size()) {
    throw ValidationError("checkpoint: optimizer state does not match parameter count");
  }
  opt.set_lr(lr);
  opt.set_step_count(step);
  for (std::size_t i = 0; i < first_moments.size(); ++i) {
    opt.first_moments()[i] = first_moments[i];
    opt.second_moments()[i] = second_moments[i];
  }
}

void save_checkpoint(const std::string& path, Student& student, const CheckpointMeta& meta,
                     nn::Adam* optimizer) {
  std::vector<std::pair<std::string, const nn::Tensor*>> tensors;
  for (const auto& ref : student.state()) tensors.emplace_back(ref.name, ref.tensor);
  if (optimizer) {
    for (std::size_t i = 0; i < optimizer->first_moments().size(); ++i) {
      tensors.emplace_back("optim.m." + std::to_string(i), &optimizer->first_moments()[i]);
      tensors.emplace_back("optim.v." + std::to_string(i), &optimizer->second_moments()[i]);
    }
  }

  nlohmann::json header;
  header["format"] = "kmine-checkpoint";
  header["version"] = kCheckpointVersion;
  header["architecture"] = to_string(student.config().architecture);
  header["config"] = student.config();
  header["epoch"] = meta.epoch;
  header["manifest_hash"] = meta.manifest_hash;
  header["rng_states"] = meta.rng_states;
  header["extra"] = meta.extra;
  if (optimizer) {
    header["optimizer"] = {{"type", "adam"},
                           {"lr", optimizer->lr()},
                           {"step", optimizer->step_count()},
                           {"beta1", optimizer->options().beta1},
                           {"beta2", optimizer->options().beta2}};
  }
  auto& list = header["tensors"] = nlohmann::json::array();
  for (const auto& [name, t] : tensors) list.push_back({{"name", name}, {"shape", t->shape()}});

  const std::string text = header.dump();
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("checkpoint: cannot write " + path);
    os.write(kMagic, 8);
    const std::uint32_t version = kCheckpointVersion;
    os.write(reinterpret_cast<const char*>(&version), sizeof(version));
    const std::uint64_t len = text.size();
    os.write(reinterpret_cast<const char*>(&len), sizeof(len));
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, t] : tensors) write_tensor(os, *t);
    if (!os) throw IoError("checkpoint: write failed for " + path);
  }
  std::rename(tmp.c_str(), path.c_str());
}

nlohmann::json read_checkpoint_header(const std::string& path) { return read_raw(path).header; }

std::map<std::string, nn::Tensor> read_checkpoint_tensors(const std::string& path) {
  auto raw = read_raw(path);
  std::map<std::string, nn::Tensor> out;
  for (auto& [name, t] : raw.tensors) {
    if (name.rfind("optim.", 0) != 0) out.emplace(name, std::move(t));
  }
  return out;
}

LoadedCheckpoint load_checkpoint(const std::string& path, std::optional<Architecture> expected) {
  auto raw = read_raw(path);
  const auto arch_name = raw.header.at("architecture").get<std::string>();
  if (expected && to_string(*expected) != arch_name) {
    throw ArchitectureMismatch("checkpoint: " + path + " holds architecture '" + arch_name +
                               "', expected '" + to_string(*expected) + "'");
  }
  StudentConfig cfg = raw.header.at("config").get<StudentConfig>();
  // Weights come from the file, not from an external encoder.
  cfg.pretrained_encoder = false;

  LoadedCheckpoint out;
  out.student = make_student(cfg, 0);
  std::map<std::string, nn::Tensor*> slots;
  for (const auto& ref : out.student->state()) slots[ref.name] = ref.tensor;

  OptimizerState opt;
  std::map<std::size_t, nn::Tensor> m, v;
  std::size_t restored = 0;
  for (auto& [name, t] : raw.tensors) {
    if (name.rfind("optim.m.", 0) == 0) {
      m[std::stoul(name.substr(8))] = std::move(t);
      continue;
    }
    if (name.rfind("optim.v.", 0) == 0) {
      v[std::stoul(name.substr(8))] = std::move(t);
      continue;
    }
    auto it = slots.find(name);
    if (it == slots.end() || !it->second->same_shape(t)) {
      throw ArchitectureMismatch("checkpoint: tensor '" + name + "' does not fit architecture " +
                                 arch_name);
    }
    *it->second = std::move(t);
    ++restored;
  }
  if (restored != slots.size()) {
    throw ArchitectureMismatch("checkpoint: " + path + " is missing model tensors");
  }

  out.meta.epoch = raw.header.value("epoch", 0);
  out.meta.manifest_hash = raw.header.value("manifest_hash", "");
  out.meta.rng_states = raw.header.value("rng_states", std::map<std::string, std::string>{});
  out.meta.extra = raw.header.value("extra", nlohmann::json::object());
  if (raw.header.contains("optimizer")) {
    opt.lr = raw.header["optimizer"].at("lr");
    opt.step = raw.header["optimizer"].at("step");
    for (auto& [i, t] : m) opt.first_moments.push_back(std::move(t));
    for (auto& [i, t] : v) opt.second_moments.push_back(std::move(t));
    out.optimizer = std::move(opt);
  }
  return out;
}

}  // namespace kmine::student

#include "kmine/teacher/remote.hpp"

#include "kmine/core/rng.hpp"
#include "kmine/data/resample.hpp"
#include "kmine/teacher/wire.hpp"

#include <httplib.h>

#include <cstdio>

namespace kmine::teacher {

namespace {

/// Splits "http://host:port/path" into ("http://host:port", "/path").
std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) {
    throw ValidationError("teacher.endpoint_url must look like http://host:port/path, got '" + url +
                          "'");
  }
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace

RemoteTeacher::RemoteTeacher(TeacherConfig config) : config_(std::move(config)) {
  if (config_.backend == Backend::oracle) {
    throw ValidationError("RemoteTeacher: backend must be sam or medsam");
  }
  std::tie(host_, path_) = split_url(config_.endpoint_url);
}

nlohmann::json RemoteTeacher::request_body(const TeacherRequest& request) const {
  const auto& prompts = request.prompts;
  const bool box_only = config_.backend == Backend::medsam && prompts.box.has_value();
  auto points = nlohmann::json::array();
  if (!box_only) {
    for (const auto& p : prompts.points) points.push_back({p.at.col, p.at.row});
  }
  nlohmann::json body = {
      {"sample_id", request.sample_id},
      {"model", to_string(config_.backend)},
      {"image_b64", base64_encode(data::encode_png(request.image))},
      {"points", points},
      // A box removes the whole/part ambiguity, so a single mask is requested then.
      {"multimask", config_.multimask && !prompts.box.has_value()},
  };
  body["box"] = prompts.box ? nlohmann::json{prompts.box->min_col, prompts.box->min_row,
                                             prompts.box->max_col, prompts.box->max_row}
                            : nlohmann::json(nullptr);
  if (prompts.mask_prompt) {
    body["mask_prompt"] = rle_json((*prompts.mask_prompt >= 0.5f).cast<std::uint8_t>());
  } else {
    body["mask_prompt"] = nullptr;
  }
  return body;
}

PseudoLabel RemoteTeacher::parse_reply(const nlohmann::json& reply, Eigen::Index rows,
                                       Eigen::Index cols) {
  const nlohmann::json* chosen = &reply;
  if (reply.contains("candidates")) {
    const auto& cands = reply.at("candidates");
    if (!cands.is_array() || cands.empty()) throw Error("teacher reply: empty candidate list");
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& c : cands) {
      const double q = c.value("confidence", 0.0);
      if (q > best) {
        best = q;
        chosen = &c;
      }
    }
  }
  if (!chosen->contains("mask_rle")) throw Error("teacher reply: missing mask_rle");
  BinaryMask mask = mask_from_rle_json(chosen->at("mask_rle"));
  if (mask.rows() != rows || mask.cols() != cols) mask = data::resize_nearest(mask, rows, cols);
  PseudoLabel label;
  label.mask = std::move(mask);
  if (chosen->contains("confidence") && chosen->at("confidence").is_number()) {
    label.confidence = chosen->at("confidence").get<double>();
  }
  return label;
}

PseudoLabel RemoteTeacher::predict(const TeacherRequest& request) const {
  request.validate();
  httplib::Client client(host_);
  const auto secs = static_cast<time_t>(config_.timeout_s);
  client.set_connection_timeout(secs, 0);
  client.set_read_timeout(secs, 0);
  client.set_write_timeout(secs, 0);
  const auto res = client.Post(path_, request_body(request).dump(), "application/json");
  if (!res) {
    throw BackendUnavailable(id() + " teacher: cannot reach " + config_.endpoint_url + " (" +
                             httplib::to_string(res.error()) + ")");
  }
  if (res->status != 200) {
    throw Error(id() + " teacher: HTTP " + std::to_string(res->status) + ": " + res->body);
  }
  nlohmann::json reply;
  try {
    reply = nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(id() + " teacher: malformed reply: " + e.what());
  }
  PseudoLabel label = parse_reply(reply, request.image.rows(), request.image.cols());
  label.generated_at = request.pass;
  label.teacher_id = id();
  return label;
}

std::string RemoteTeacher::state_checksum() const {
  // The remote weights are outside this process; identity of the endpoint and model stands in.
  std::uint64_t h = fnv1a(to_string(config_.backend));
  h = fnv1a(config_.endpoint_url, h);
  h = fnv1a(config_.weights_path, h);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace kmine::teacher

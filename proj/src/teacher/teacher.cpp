#include "kmine/teacher/teacher.hpp"

#include "kmine/teacher/oracle.hpp"
#include "kmine/teacher/remote.hpp"

namespace kmine::teacher {

void TeacherRequest::validate() const {
  if (image.empty()) throw ValidationError("teacher request '" + sample_id + "': empty image");
  prompts.validate(image.rows(), image.cols());
  if (view.out_rows() != image.rows() || view.out_cols() != image.cols()) {
    throw ShapeMismatch("teacher request '" + sample_id + "': view does not produce image dims");
  }
}

TeacherRequest make_request(std::string sample_id, const RgbImage& image,
                            prompt::PromptSet prompts, int pass) {
  TeacherRequest r;
  r.sample_id = std::move(sample_id);
  r.image = image;
  r.prompts = std::move(prompts);
  r.view = data::ViewTransform::identity(image.rows(), image.cols());
  r.pass = pass;
  return r;
}

std::vector<TeacherResult> Teacher::predict_batch(std::span<const TeacherRequest> requests) const {
  std::vector<TeacherResult> out(requests.size());
  for (std::size_t i = 0; i < requests.size(); ++i) {
    try {
      out[i].label = predict(requests[i]);
    } catch (const BackendUnavailable&) {
      throw;  // no point asking again for the rest
    } catch (const std::exception& e) {
      out[i].error = e.what();
    }
  }
  return out;
}

std::string to_string(Backend b) {
  switch (b) {
    case Backend::sam: return "sam";
    case Backend::medsam: return "medsam";
    case Backend::oracle: return "oracle";
  }
  return "?";
}

Backend backend_from_string(const std::string& s) {
  if (s == "sam") return Backend::sam;
  if (s == "medsam") return Backend::medsam;
  if (s == "oracle") return Backend::oracle;
  throw ValidationError("unknown teacher backend '" + s + "' (expected sam|medsam|oracle)");
}

void OracleNoise::validate() const {
  if (boundary_jitter_px < 0) throw ValidationError("teacher.oracle.boundary_jitter_px must be >= 0");
  if (!(component_drop_prob >= 0.0 && component_drop_prob <= 1.0)) {
    throw ValidationError("teacher.oracle.component_drop_prob must be in [0,1]");
  }
}

void TeacherConfig::validate() const {
  oracle.validate();
  if (timeout_s <= 0) throw ValidationError("teacher.timeout_s must be > 0");
}

void to_json(nlohmann::json& j, const OracleNoise& n) {
  j = {{"boundary_jitter_px", n.boundary_jitter_px},
       {"component_drop_prob", n.component_drop_prob},
       {"prompt_sensitivity", n.prompt_sensitivity}};
}

void from_json(const nlohmann::json& j, OracleNoise& n) {
  n = OracleNoise{};
  n.boundary_jitter_px = j.value("boundary_jitter_px", n.boundary_jitter_px);
  n.component_drop_prob = j.value("component_drop_prob", n.component_drop_prob);
  n.prompt_sensitivity = j.value("prompt_sensitivity", n.prompt_sensitivity);
}

void to_json(nlohmann::json& j, const TeacherConfig& c) {
  j = {{"backend", to_string(c.backend)}, {"weights_path", c.weights_path},
       {"endpoint_url", c.endpoint_url}, {"device", c.device},
       {"multimask", c.multimask},       {"timeout_s", c.timeout_s},
       {"oracle", c.oracle},             {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TeacherConfig& c) {
  c = TeacherConfig{};
  if (j.contains("backend")) c.backend = backend_from_string(j.at("backend").get<std::string>());
  c.weights_path = j.value("weights_path", c.weights_path);
  c.endpoint_url = j.value("endpoint_url", c.endpoint_url);
  c.device = j.value("device", c.device);
  c.multimask = j.value("multimask", c.multimask);
  c.timeout_s = j.value("timeout_s", c.timeout_s);
  if (j.contains("oracle")) c.oracle = j.at("oracle").get<OracleNoise>();
  c.seed = j.value("seed", c.seed);
}

std::unique_ptr<Teacher> make_teacher(const TeacherConfig& config, GroundTruthLookup ground_truth) {
  config.validate();
  if (config.backend == Backend::oracle) {
    return std::make_unique<OracleTeacher>(std::move(ground_truth), config.oracle, config.seed);
  }
  if (config.endpoint_url.empty()) {
    if (!config.weights_path.empty()) {
      throw BackendUnavailable(to_string(config.backend) +
                               " teacher: in-process inference is not built; serve the model over "
                               "HTTP and set teacher.endpoint_url (weights_path=" +
                               config.weights_path + ")");
    }
    throw BackendUnavailable(to_string(config.backend) +
                             " teacher: no endpoint_url configured");
  }
  return std::make_unique<RemoteTeacher>(config);
}

}  // namespace kmine::teacher

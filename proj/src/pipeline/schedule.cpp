#include "kmine/pipeline/schedule.hpp"

#include <algorithm>

namespace kmine::pipeline {

namespace {

nlohmann::json best_json(double best) {
  return std::isinf(best) ? nlohmann::json(nullptr) : nlohmann::json(best);
}

double best_from(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

}  // namespace

double PlateauScheduler::step(double loss) {
  if (improves(loss, best_, threshold_)) {
    best_ = loss;
    bad_ = 0;
    return lr_;
  }
  if (++bad_ >= patience_) {
    const double next = std::max(lr_ * factor_, min_lr_);
    if (lr_ - next > 1e-12) lr_ = next;
    bad_ = 0;
  }
  return lr_;
}

nlohmann::json PlateauScheduler::state() const {
  return {{"lr", lr_}, {"best", best_json(best_)}, {"bad", bad_}};
}

void PlateauScheduler::load_state(const nlohmann::json& j) {
  lr_ = j.at("lr");
  best_ = best_from(j.at("best"));
  bad_ = j.at("bad");
}

bool EarlyStopping::step(double loss) {
  improved_ = improves(loss, best_, threshold_);
  if (improved_) {
    best_ = loss;
    bad_ = 0;
    return false;
  }
  return ++bad_ >= patience_;
}

nlohmann::json EarlyStopping::state() const {
  return {{"best", best_json(best_)}, {"bad", bad_}};
}

void EarlyStopping::load_state(const nlohmann::json& j) {
  best_ = best_from(j.at("best"));
  bad_ = j.at("bad");
}

}  // namespace kmine::pipeline

#pragma once

#include <json.hpp>

#include <limits>

namespace kmine::pipeline {

/// True when `value` beats `best` by more than the relative `threshold`.
inline bool improves(double value, double best, double threshold) {
  return value < best * (1.0 - threshold);
}

/// Halves (by `factor`) the learning rate once `patience` consecutive epochs fail to improve
/// the monitored loss, then starts counting afresh. Never goes below `min_lr`.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, double factor, int patience, double min_lr, double threshold)
      : lr_(lr), factor_(factor), patience_(patience), min_lr_(min_lr), threshold_(threshold) {}

  /// Feeds one epoch's loss; returns the learning rate for the next epoch.
  double step(double loss);

  double lr() const { return lr_; }
  int bad_epochs() const { return bad_; }
  double best() const { return best_; }

  nlohmann::json state() const;
  void load_state(const nlohmann::json& j);

 private:
  double lr_;
  double factor_;
  int patience_;
  double min_lr_;
  double threshold_;
  double best_ = std::numeric_limits<double>::infinity();
  int bad_ = 0;
};

/// Signals a stop after `patience` consecutive non-improving epochs.
class EarlyStopping {
 public:
  EarlyStopping(int patience, double threshold) : patience_(patience), threshold_(threshold) {}

  /// Feeds one epoch's loss; returns true when training should stop.
  bool step(double loss);
  /// Whether the last step set a new best.
  bool improved() const { return improved_; }
  double best() const { return best_; }
  int bad_epochs() const { return bad_; }

  nlohmann::json state() const;
  void load_state(const nlohmann::json& j);

 private:
  int patience_;
  double threshold_;
  double best_ = std::numeric_limits<double>::infinity();
  int bad_ = 0;
  bool improved_ = false;
};

}  // namespace kmine::pipeline

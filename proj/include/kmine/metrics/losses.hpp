#pragma once

#include "kmine/core/types.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace kmine::metrics {

struct LossConfig {
  double k = 0.2;               // BCE weight
  double lambda_pseudo = 0.25;  // pseudo-label term weight
  double dice_smooth = 1e-6;

  void validate() const;
};

inline constexpr double kBceClamp = 1e-7;

template <typename P>
void require_probabilities(const Eigen::ArrayBase<P>& p, const char* what) {
  const auto pd = p.derived().template cast<double>();
  if (!((pd >= 0.0) && (pd <= 1.0)).all()) {
    throw ValidationError(std::string(what) + ": probabilities must lie in [0,1]");
  }
}

/// Soft Dice loss 1 - (2Σpg + s) / (Σp + Σg + s).
template <typename P, typename G>
double dice_loss(const Eigen::ArrayBase<P>& p, const Eigen::ArrayBase<G>& g, double smooth = 1e-6) {
  require_same_shape(p, g, "dice_loss");
  require_probabilities(p, "dice_loss");
  const auto pd = p.derived().template cast<double>();
  const auto gd = g.derived().template cast<double>();
  const double inter = (pd * gd).sum();
  return 1.0 - (2.0 * inter + smooth) / (pd.sum() + gd.sum() + smooth);
}

/// d(dice_loss)/dp, same shape as p.
template <typename P, typename G>
Plane<double> dice_loss_gradient(const Eigen::ArrayBase<P>& p, const Eigen::ArrayBase<G>& g,
                                 double smooth = 1e-6) {
  require_same_shape(p, g, "dice_loss_gradient");
  const auto pd = p.derived().template cast<double>();
  const auto gd = g.derived().template cast<double>();
  const double num = 2.0 * (pd * gd).sum() + smooth;
  const double den = pd.sum() + gd.sum() + smooth;
  return -(2.0 * gd * den - num) / (den * den);
}

/// Mean binary cross entropy with p clamped to [1e-7, 1-1e-7].
template <typename P, typename G>
double bce_loss(const Eigen::ArrayBase<P>& p, const Eigen::ArrayBase<G>& g) {
  require_same_shape(p, g, "bce_loss");
  const auto pc = p.derived().template cast<double>().max(kBceClamp).min(1.0 - kBceClamp);
  const auto gd = g.derived().template cast<double>();
  const double n = static_cast<double>(p.size());
  return -(gd * pc.log() + (1.0 - gd) * (1.0 - pc).log()).sum() / n;
}

/// d(bce_loss)/dp evaluated at the clamped probability (clamp treated as identity).
template <typename P, typename G>
Plane<double> bce_loss_gradient(const Eigen::ArrayBase<P>& p, const Eigen::ArrayBase<G>& g) {
  require_same_shape(p, g, "bce_loss_gradient");
  const Plane<double> pc = p.derived().template cast<double>().max(kBceClamp).min(1.0 - kBceClamp);
  const auto gd = g.derived().template cast<double>();
  const double n = static_cast<double>(p.size());
  return (pc - gd) / (pc * (1.0 - pc) * n);
}

/// L_Dice + k * L_BCE for one sample.
template <typename P, typename G>
double sample_loss(const Eigen::ArrayBase<P>& p, const Eigen::ArrayBase<G>& g,
                   const LossConfig& cfg) {
  return dice_loss(p, g, cfg.dice_smooth) + cfg.k * bce_loss(p, g);
}

template <typename P, typename G>
Plane<double> sample_loss_gradient(const Eigen::ArrayBase<P>& p, const Eigen::ArrayBase<G>& g,
                                   const LossConfig& cfg) {
  return dice_loss_gradient(p, g, cfg.dice_smooth) + cfg.k * bce_loss_gradient(p, g);
}

/// Non-owning (probabilities, target) pair.
struct LossPair {
  Eigen::Ref<const ProbPlane> p;
  Eigen::Ref<const BinaryMask> g;
};

struct CombinedLoss {
  double total = 0;
  double supervised = 0;  // (1/B) Σ (L_Dice + k L_BCE)
  double pseudo = 0;      // (1/B') Σ (...), before λ
};

/// (1/B)Σ(L_Dice + k·L_BCE) + λ·(1/B')Σ(L_Dice' + k·L_BCE'). An empty side contributes 0.
CombinedLoss combined_loss(std::span<const LossPair> labeled, std::span<const LossPair> pseudo,
                           const LossConfig& cfg);

/// Gradients of combined_loss w.r.t. every p, labeled first then pseudo.
std::vector<Plane<double>> combined_loss_gradients(std::span<const LossPair> labeled,
                                                   std::span<const LossPair> pseudo,
                                                   const LossConfig& cfg);

}  // namespace kmine::metrics

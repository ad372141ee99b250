#include "kmine/metrics/metrics.hpp"

#include "kmine/metrics/losses.hpp"

#include <numeric>

namespace kmine::metrics {

MeanStd population_mean_std(const std::vector<double>& values) {
  MeanStd out;
  out.n = values.size();
  if (values.empty()) return out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(out.n);
  double ss = 0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(ss / static_cast<double>(out.n));
  return out;
}

MeanStd sample_mean_std(const std::vector<double>& values) {
  MeanStd out;
  out.n = values.size();
  if (values.empty()) return out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(out.n);
  if (out.n < 2) return out;
  double ss = 0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(ss / static_cast<double>(out.n - 1));
  return out;
}

MetricReport summarize(std::vector<SampleScore> rows) {
  MetricReport r;
  std::vector<double> d, i;
  d.reserve(rows.size());
  i.reserve(rows.size());
  for (const auto& s : rows) {
    d.push_back(s.dice);
    i.push_back(s.iou);
  }
  r.dice = population_mean_std(d);
  r.iou = population_mean_std(i);
  r.rows = std::move(rows);
  return r;
}

void LossConfig::validate() const {
  if (!(k >= 0)) throw ValidationError("loss.k must be >= 0");
  if (!(lambda_pseudo >= 0)) throw ValidationError("loss.lambda must be >= 0");
  if (!(dice_smooth > 0)) throw ValidationError("loss.dice_smooth must be > 0");
}

CombinedLoss combined_loss(std::span<const LossPair> labeled, std::span<const LossPair> pseudo,
                           const LossConfig& cfg) {
  if (labeled.empty() && pseudo.empty()) {
    throw ValidationError("combined_loss: both labeled and pseudo batches are empty");
  }
  CombinedLoss out;
  for (const auto& pair : labeled) out.supervised += sample_loss(pair.p, pair.g, cfg);
  if (!labeled.empty()) out.supervised /= static_cast<double>(labeled.size());
  for (const auto& pair : pseudo) out.pseudo += sample_loss(pair.p, pair.g, cfg);
  if (!pseudo.empty()) out.pseudo /= static_cast<double>(pseudo.size());
  out.total = out.supervised + cfg.lambda_pseudo * out.pseudo;
  return out;
}

std::vector<Plane<double>> combined_loss_gradients(std::span<const LossPair> labeled,
                                                   std::span<const LossPair> pseudo,
                                                   const LossConfig& cfg) {
  std::vector<Plane<double>> grads;
  grads.reserve(labeled.size() + pseudo.size());
  const double wl = labeled.empty() ? 0.0 : 1.0 / static_cast<double>(labeled.size());
  const double wp = pseudo.empty() ? 0.0 : cfg.lambda_pseudo / static_cast<double>(pseudo.size());
  for (const auto& pair : labeled) grads.push_back(wl * sample_loss_gradient(pair.p, pair.g, cfg));
  for (const auto& pair : pseudo) grads.push_back(wp * sample_loss_gradient(pair.p, pair.g, cfg));
  return grads;
}

}  // namespace kmine::metrics

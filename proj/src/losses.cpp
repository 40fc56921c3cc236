#include "lpr/losses.hpp"

#include <algorithm>
#include <cmath>

#include "lpr/error.hpp"

namespace lpr::losses {

void LossWeights::validate() const {
  require(std::isfinite(lambda) && lambda >= 0.0, "loss weights: lambda must be finite and >= 0");
  require(std::isfinite(beta) && beta >= 0.0, "loss weights: beta must be finite and >= 0");
}

template <std::floating_point T>
LossGrad<T> focal_loss(std::span<const T> pred, std::span<const T> target) {
  require(pred.size() == target.size(), "focal loss: shape mismatch");
  LossGrad<T> r;
  r.grad.assign(pred.size(), T(0));
  std::vector<double> d(pred.size());
  double pos = 0.0, neg = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = std::clamp(static_cast<double>(pred[i]), kPredClamp, 1.0 - kPredClamp);
    const double y = static_cast<double>(target[i]);
    if (y == 1.0) {
      ++n_pos;
      const double q = 1.0 - p;
      pos += -std::log(p) * q * q;
      d[i] = -q * q / p + 2.0 * std::log(p) * q;
    } else {
      const double w = std::pow(1.0 - y, 4);
      const double l = std::log1p(-p);
      neg += -l * p * p * w;
      d[i] = (p * p / (1.0 - p) - 2.0 * p * l) * w;
    }
  }
  const double scale = n_pos > 0 ? 1.0 / static_cast<double>(n_pos) : 1.0;
  r.value = (pos + neg) * scale;
  for (std::size_t i = 0; i < d.size(); ++i) r.grad[i] = static_cast<T>(d[i] * scale);
  return r;
}

template <std::floating_point T>
LossGrad<T> l1_loss(std::span<const T> pred, std::span<const T> target, std::span<const std::uint8_t> mask,
                    std::size_t n) {
  require(pred.size() == target.size() && pred.size() == mask.size(), "l1 loss: shape mismatch");
  const bool any = std::any_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; });
  require(!any || n >= 1, "l1 loss: non-empty mask needs n >= 1");
  require(any || n == 0, "l1 loss: empty mask with n >= 1");
  LossGrad<T> r;
  r.grad.assign(pred.size(), T(0));
  if (!any) return r;
  const double inv = 1.0 / static_cast<double>(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!mask[i]) continue;
    const double diff = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    sum += std::abs(diff);
    r.grad[i] = static_cast<T>(diff > 0.0 ? inv : (diff < 0.0 ? -inv : 0.0));
  }
  r.value = sum * inv;
  return r;
}

namespace {

std::vector<std::uint8_t> expand_mask(const std::vector<std::uint8_t>& cells, std::size_t channels) {
  std::vector<std::uint8_t> out;
  out.reserve(cells.size() * channels);
  for (std::size_t c = 0; c < channels; ++c) out.insert(out.end(), cells.begin(), cells.end());
  return out;
}

double l1_head(const Tensor& pred, const Tensor& target, const std::vector<std::uint8_t>& cells, double weight,
               Tensor& grad) {
  require(pred.same_shape(target), "detection loss: prediction " + pred.shape_string() +
                                       " does not match target " + target.shape_string());
  const auto mask = expand_mask(cells, pred.channels());
  const auto n = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
  auto r = l1_loss<float>(pred.data(), target.data(), mask, n);
  grad = Tensor(pred.dims());
  for (std::size_t i = 0; i < r.grad.size(); ++i) grad.data()[i] = static_cast<float>(r.grad[i] * weight);
  return r.value;
}

double focal_head(const Tensor& pred, const Tensor& target, Tensor& grad) {
  require(pred.same_shape(target), "detection loss: heat prediction " + pred.shape_string() +
                                       " does not match target " + target.shape_string());
  auto r = focal_loss<float>(pred.data(), target.data());
  grad = Tensor(pred.dims(), std::move(r.grad));
  return r.value;
}

}  // namespace

DetectionLoss detection_loss(const heatmap::DetectionMaps& pred, const heatmap::DetectionTargets& targets,
                             const LossWeights& weights) {
  weights.validate();
  pred.validate();
  targets.maps.validate();
  require(targets.center_mask.size() == pred.height() * pred.width() &&
              targets.corner_mask.size() == pred.height() * pred.width(),
          "detection loss: mask size does not match maps");
  DetectionLoss l;
  auto& g = l.grad;
  l.center = focal_head(pred.center_heat, targets.maps.center_heat, g.center_heat);
  l.wh = l1_head(pred.wh, targets.maps.wh, targets.center_mask, 1.0, g.wh);
  l.center_off = l1_head(pred.center_off, targets.maps.center_off, targets.center_mask, weights.beta, g.center_off);
  l.corner = focal_head(pred.corner_heat, targets.maps.corner_heat, g.corner_heat);
  l.corner_rel = l1_head(pred.corner_rel, targets.maps.corner_rel, targets.center_mask, 1.0, g.corner_rel);
  l.corner_off = l1_head(pred.corner_off, targets.maps.corner_off, targets.corner_mask, weights.beta, g.corner_off);
  l.total = l.center + l.wh + weights.beta * l.center_off + l.corner + l.corner_rel + weights.beta * l.corner_off;
  l.n_center = targets.n_center;
  l.n_corner = targets.n_corner;
  return l;
}

LossReport total_loss(const DetectionLoss& d, std::span<const double> recognition_losses,
                      const LossWeights& weights) {
  weights.validate();
  LossReport r;
  r.detection = d.total;
  r.center = d.center;
  r.wh = d.wh;
  r.center_off = d.center_off;
  r.corner = d.corner;
  r.corner_rel = d.corner_rel;
  r.corner_off = d.corner_off;
  r.n_pos = d.n_center;
  double sum = 0.0;
  for (double v : recognition_losses) {
    if (std::isfinite(v)) {
      sum += v;
      ++r.feasible_plates;
    } else {
      ++r.infeasible_plates;
    }
  }
  r.has_recognition = r.feasible_plates > 0;
  r.recognition = r.has_recognition ? sum / static_cast<double>(r.feasible_plates) : 0.0;
  r.total = r.detection + (r.has_recognition ? weights.lambda * r.recognition : 0.0);
  return r;
}

template LossGrad<float> focal_loss(std::span<const float>, std::span<const float>);
template LossGrad<double> focal_loss(std::span<const double>, std::span<const double>);
template LossGrad<float> l1_loss(std::span<const float>, std::span<const float>, std::span<const std::uint8_t>,
                                 std::size_t);
template LossGrad<double> l1_loss(std::span<const double>, std::span<const double>, std::span<const std::uint8_t>,
                                  std::size_t);

}  // namespace lpr::losses

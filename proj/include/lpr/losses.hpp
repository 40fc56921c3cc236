#pragma once

#include <concepts>
#include <cstdint>
#include <span>
#include <vector>

#include "lpr/heatmap.hpp"

namespace lpr::losses {

inline constexpr double kPredClamp = 1e-6;

struct LossWeights {
  double lambda = 10.0;  // recognition
  double beta = 0.05;    // offsets
  void validate() const;
};

template <std::floating_point T>
struct LossGrad {
  double value = 0.0;
  std::vector<T> grad;  // same layout as the prediction
};

/// Penalty-reduced focal loss over a heatmap. Positives are cells whose
/// target is exactly 1; predictions are clamped to [1e-6, 1 - 1e-6] and the
/// gradient is that of the loss expression at the clamped value.
template <std::floating_point T>
LossGrad<T> focal_loss(std::span<const T> pred, std::span<const T> target);

/// Mean absolute error over masked elements, normalized by n. The gradient is
/// sign(pred - target) / n on the mask (0 at exact ties), 0 elsewhere.
template <std::floating_point T>
LossGrad<T> l1_loss(std::span<const T> pred, std::span<const T> target, std::span<const std::uint8_t> mask,
                    std::size_t n);

struct DetectionLoss {
  double center = 0.0;      // focal, box centres
  double wh = 0.0;          // L1, box size
  double center_off = 0.0;  // L1, box centre offset
  double corner = 0.0;      // focal, corner heatmaps
  double corner_rel = 0.0;  // L1, corners relative to centre
  double corner_off = 0.0;  // L1, corner offsets
  double total = 0.0;       // weighted sum
  std::size_t n_center = 0;
  std::size_t n_corner = 0;
  heatmap::DetectionMaps grad;  // d total / d prediction, per map
};

/// Six-term detection objective. Heat predictions are post-sigmoid. L1 heads
/// are evaluated on their own masked cells (centre cells for wh, centre
/// offset and corner_rel; corner cells for corner offset) and normalized by
/// the number of masked elements.
DetectionLoss detection_loss(const heatmap::DetectionMaps& pred, const heatmap::DetectionTargets& targets,
                             const LossWeights& weights = {});

struct LossReport {
  double total = 0.0;
  double detection = 0.0;    // L_d
  double recognition = 0.0;  // mean CTC loss over feasible plates
  bool has_recognition = false;
  std::size_t feasible_plates = 0;
  std::size_t infeasible_plates = 0;
  double center = 0.0, wh = 0.0, center_off = 0.0, corner = 0.0, corner_rel = 0.0, corner_off = 0.0;
  std::size_t n_pos = 0;
};

/// total = L_d + lambda * mean(finite recognition losses). Plates whose loss
/// is +inf are counted as infeasible and excluded; with none left the
/// recognition term is absent.
LossReport total_loss(const DetectionLoss& detection, std::span<const double> recognition_losses,
                      const LossWeights& weights = {});

extern template LossGrad<float> focal_loss(std::span<const float>, std::span<const float>);
extern template LossGrad<double> focal_loss(std::span<const double>, std::span<const double>);
extern template LossGrad<float> l1_loss(std::span<const float>, std::span<const float>,
                                        std::span<const std::uint8_t>, std::size_t);
extern template LossGrad<double> l1_loss(std::span<const double>, std::span<const double>,
                                         std::span<const std::uint8_t>, std::size_t);

}  // namespace lpr::losses

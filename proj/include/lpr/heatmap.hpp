#pragma once

// Six-branch detection targets: centre heatmap, box size, centre offset,
// four corner heatmaps, corner positions relative to the centre, and corner
// offsets. Encoding turns plate annotations into these maps; decoding turns
// maps back into boxes with corners, using local-maximum peaks instead of NMS.

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "lpr/tensor.hpp"
#include "lpr/types.hpp"

namespace lpr::heatmap {

inline constexpr std::size_t kStride = 4;
inline constexpr double kCenterRadiusFactor = 0.4;
inline constexpr double kCornerRadiusFactor = 0.2;

struct GaussianSpec {
  double center_x = 0.0;  // feature-map coordinates
  double center_y = 0.0;
  double radius = 1.0;
  double sigma() const noexcept { return radius / 3.0; }
};

/// new = max(old, exp(-d^2 / (2 sigma^2))) over the whole plane, then the
/// pixel nearest the centre is set to exactly 1.
void gaussian_splat(std::span<float> plane, std::size_t height, std::size_t width, const GaussianSpec& spec);
void gaussian_splat(Tensor& map, std::size_t channel, const GaussianSpec& spec);

/// Channel layout: wh = (w, h); offsets = (dx, dy); corner_rel = 4 x (dx, dy)
/// in LT, RT, LD, RD order. All tensors are 1 x C x H x W.
struct DetectionMaps {
  Tensor center_heat;  // 1 channel
  Tensor wh;           // 2
  Tensor center_off;   // 2
  Tensor corner_heat;  // 4
  Tensor corner_rel;   // 8
  Tensor corner_off;   // 2

  static DetectionMaps zeros(std::size_t height, std::size_t width);
  std::size_t height() const { return center_heat.height(); }
  std::size_t width() const { return center_heat.width(); }
  /// Throws unless every map is 1 x C x H x W with the expected channel count.
  void validate() const;
};

struct DetectionTargets {
  DetectionMaps maps;
  std::vector<std::uint8_t> center_mask;  // H*W, cells with box/corner_rel targets
  std::vector<std::uint8_t> corner_mask;  // H*W, cells with corner_off targets
  std::size_t n_center = 0;
  std::size_t n_corner = 0;
};

/// image dims must be divisible by stride; every plate must have positive
/// area with centre and corners inside the image.
DetectionTargets encode_targets(std::span<const PlateAnnotation> plates, std::size_t image_width,
                                std::size_t image_height, std::size_t stride = kStride);

struct Peak {
  std::size_t y = 0;
  std::size_t x = 0;
  double score = 0.0;
};

/// 3x3 local maxima (equal neighbours suppress all but the raster-first one)
/// with score >= threshold; best max_k by descending score, then raster order.
std::vector<Peak> extract_peaks(std::span<const float> plane, std::size_t height, std::size_t width,
                                std::size_t max_k, double threshold);

struct DecodeOptions {
  std::size_t max_k = 8;
  double threshold = 0.3;
  std::size_t stride = kStride;
  double image_width = 0.0;   // clip bounds; 0 means width * stride
  double image_height = 0.0;
};

/// Boxes from centre peaks, in descending score order.
std::vector<Detection> decode_boxes(const DetectionMaps& maps, const DecodeOptions& options);

struct CornerCandidate {
  Point position;  // image pixels
  double score = 0.0;
};
using CornerCandidates = std::array<std::vector<CornerCandidate>, kCorners>;

CornerCandidates decode_corners(const DetectionMaps& maps, const DecodeOptions& options);

/// Gate on the distance between a box centre and a corner candidate.
inline double association_gate(const Box& box) { return 1.5 * std::max(box.width(), box.height()) / 2.0; }

/// Attaches the nearest gated candidate per category to each box (greedy by
/// box score, each candidate used at most once); otherwise falls back to the
/// regressed corner_rel position at the box's centre cell.
std::vector<Detection> associate_corners(std::vector<Detection> boxes, const CornerCandidates& candidates,
                                         const Tensor& corner_rel, const DecodeOptions& options);

/// decode_boxes + decode_corners + associate_corners.
std::vector<Detection> decode(const DetectionMaps& maps, const DecodeOptions& options);

}  // namespace lpr::heatmap

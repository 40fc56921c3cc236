#pragma once

// RoIAlign cropping of the shared feature map followed by projective
// rectification of the plate quadrilateral inside the crop.
//
// Crop coordinates are pixel-centre coordinates of the 32 x 96 crop: cell
// (r, c) sits at (x = c, y = r), so the crop's outer edges are at -0.5 and
// 95.5 / 31.5.

#include <span>
#include <vector>

#include "lpr/homography.hpp"
#include "lpr/tensor.hpp"
#include "lpr/types.hpp"

namespace lpr::rectify {

inline constexpr std::size_t kCropHeight = 32;
inline constexpr std::size_t kCropWidth = 96;

struct PlateCrop {
  Tensor features;  // 1 x C x 32 x 96
  Box source_box;   // image pixels
  Quad corners{};   // crop coordinates, LT RT LD RD
};

/// Maps an image point into crop coordinates for the given box.
Point image_to_crop(const Point& p, const Box& box);

/// The crop's own outer corners in crop coordinates (LT, RT, LD, RD).
Quad crop_frame();

/// One bilinear sample per output cell at the cell centre of the box-aligned
/// grid. box and corners are in image pixels; the shared map has the given
/// stride relative to the image.
PlateCrop roi_align(const Tensor& shared, std::size_t batch, const Box& box, const Quad& corners,
                    std::size_t stride = 4);
PlateCrop roi_align(const Tensor& shared, std::size_t batch, const Box& box, std::size_t stride = 4);

struct WarpResult {
  Tensor features;          // 1 x C x 32 x 96
  Homography transform;     // output crop coordinates -> input crop coordinates
  bool rectified = false;   // false when the quad was degenerate and the crop passed through
};

/// Inverse warping: each output cell samples the crop at H(x, y), where H
/// maps the crop frame onto the stored corner quad.
WarpResult warp_features(const PlateCrop& crop);

/// roi_align then warp_features for one detection.
WarpResult rectify_plate(const Tensor& shared, std::size_t batch, const Detection& det, std::size_t stride = 4);

struct RectifiedBatch {
  Tensor crops;                   // B_r x C x 32 x 96
  std::vector<bool> rectified;    // per slice
  std::vector<std::size_t> image; // batch index of each slice
};

/// Stacks every detection of every image; per_image[b] holds detections on
/// batch item b of the shared map.
RectifiedBatch rectify_plates(const Tensor& shared, std::span<const std::vector<Detection>> per_image,
                              std::size_t stride = 4);

}  // namespace lpr::rectify

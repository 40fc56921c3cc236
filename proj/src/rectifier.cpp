#include "lpr/rectifier.hpp"

#include <cmath>
#include <cstring>

#include "lpr/error.hpp"
#include "lpr/ops.hpp"

namespace lpr::rectify {
namespace {

constexpr double kW = static_cast<double>(kCropWidth);
constexpr double kH = static_cast<double>(kCropHeight);

}  // namespace

Point image_to_crop(const Point& p, const Box& box) {
  return {(p.x - box.x1) * kW / box.width() - 0.5, (p.y - box.y1) * kH / box.height() - 0.5};
}

Quad crop_frame() { return {Point{-0.5, -0.5}, Point{kW - 0.5, -0.5}, Point{-0.5, kH - 0.5}, Point{kW - 0.5, kH - 0.5}}; }

PlateCrop roi_align(const Tensor& shared, std::size_t batch, const Box& box, const Quad& corners,
                    std::size_t stride) {
  require(shared.rank() == 4, "roi_align: shared map must be rank 4");
  require(stride >= 1, "roi_align: stride must be >= 1");
  const double s = static_cast<double>(stride);
  const double fx1 = box.x1 / s, fy1 = box.y1 / s;
  const double fw = box.width() / s, fh = box.height() / s;
  require(fw > 0.0 && fh > 0.0 && std::isfinite(fw) && std::isfinite(fh), "roi_align: degenerate box");

  std::vector<SamplePoint> grid(kCropHeight * kCropWidth);
  for (std::size_t r = 0; r < kCropHeight; ++r) {
    for (std::size_t c = 0; c < kCropWidth; ++c) {
      grid[r * kCropWidth + c] = {fy1 + (static_cast<double>(r) + 0.5) * fh / kH - 0.5,
                                  fx1 + (static_cast<double>(c) + 0.5) * fw / kW - 0.5};
    }
  }
  PlateCrop crop;
  crop.features = bilinear_resample(shared, batch, grid, kCropHeight, kCropWidth);
  crop.source_box = box;
  for (std::size_t k = 0; k < kCorners; ++k) crop.corners[k] = image_to_crop(corners[k], box);
  return crop;
}

PlateCrop roi_align(const Tensor& shared, std::size_t batch, const Box& box, std::size_t stride) {
  const Quad corners{Point{box.x1, box.y1}, Point{box.x2, box.y1}, Point{box.x1, box.y2}, Point{box.x2, box.y2}};
  return roi_align(shared, batch, box, corners, stride);
}

WarpResult warp_features(const PlateCrop& crop) {
  const Tensor& in = crop.features;
  require(in.rank() == 4 && in.batch() == 1 && in.height() == kCropHeight && in.width() == kCropWidth,
          "warp_features: crop must be 1 x C x 32 x 96");
  WarpResult result;
  const Quad frame = crop_frame();
  try {
    result.transform = solve_homography(std::span<const Point, 4>(frame), std::span<const Point, 4>(crop.corners));
  } catch (const ValidationError&) {
    result.features = in;
    result.rectified = false;
    return result;
  }
  std::vector<SamplePoint> grid(kCropHeight * kCropWidth);
  for (std::size_t r = 0; r < kCropHeight; ++r) {
    for (std::size_t c = 0; c < kCropWidth; ++c) {
      const Point p = result.transform.apply({static_cast<double>(c), static_cast<double>(r)});
      grid[r * kCropWidth + c] = {p.y, p.x};
    }
  }
  result.features = bilinear_resample(in, 0, grid, kCropHeight, kCropWidth);
  result.rectified = true;
  return result;
}

WarpResult rectify_plate(const Tensor& shared, std::size_t batch, const Detection& det, std::size_t stride) {
  return warp_features(roi_align(shared, batch, det.box, det.corners, stride));
}

RectifiedBatch rectify_plates(const Tensor& shared, std::span<const std::vector<Detection>> per_image,
                              std::size_t stride) {
  require(shared.rank() == 4, "rectify: shared map must be rank 4");
  require(per_image.size() <= shared.batch(), "rectify: more images than shared-map batch items");
  std::size_t total = 0;
  for (const auto& dets : per_image) total += dets.size();
  RectifiedBatch out;
  if (total == 0) return out;
  out.crops = Tensor::nchw(total, shared.channels(), kCropHeight, kCropWidth);
  const std::size_t item = shared.channels() * kCropHeight * kCropWidth;
  std::size_t slot = 0;
  for (std::size_t b = 0; b < per_image.size(); ++b) {
    for (const Detection& d : per_image[b]) {
      WarpResult w = rectify_plate(shared, b, d, stride);
      std::memcpy(out.crops.data().data() + slot * item, w.features.data().data(), item * sizeof(float));
      out.rectified.push_back(w.rectified);
      out.image.push_back(b);
      ++slot;
    }
  }
  return out;
}

}  // namespace lpr::rectify

#include "lpr/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lpr/error.hpp"

namespace lpr::heatmap {

void gaussian_splat(std::span<float> plane, std::size_t height, std::size_t width, const GaussianSpec& spec) {
  require(spec.radius > 0.0, "gaussian_splat: radius must be positive");
  require(plane.size() == height * width, "gaussian_splat: plane size mismatch");
  require(spec.center_x >= 0.0 && spec.center_y >= 0.0 && spec.center_x < static_cast<double>(width) &&
              spec.center_y < static_cast<double>(height),
          "gaussian_splat: centre outside map");
  const double sigma = spec.sigma();
  const double denom = 2.0 * sigma * sigma;
  for (std::size_t y = 0; y < height; ++y) {
    const double dy = static_cast<double>(y) - spec.center_y;
    for (std::size_t x = 0; x < width; ++x) {
      const double dx = static_cast<double>(x) - spec.center_x;
      const float g = static_cast<float>(std::exp(-(dx * dx + dy * dy) / denom));
      float& v = plane[y * width + x];
      v = std::max(v, g);
    }
  }
  const auto nearest = [](double c, std::size_t extent) {
    return std::min(static_cast<std::size_t>(std::floor(c + 0.5)), extent - 1);
  };
  plane[nearest(spec.center_y, height) * width + nearest(spec.center_x, width)] = 1.0f;
}

void gaussian_splat(Tensor& map, std::size_t channel, const GaussianSpec& spec) {
  gaussian_splat(map.plane(0, channel), map.height(), map.width(), spec);
}

DetectionMaps DetectionMaps::zeros(std::size_t h, std::size_t w) {
  return {Tensor::nchw(1, 1, h, w), Tensor::nchw(1, 2, h, w), Tensor::nchw(1, 2, h, w),
          Tensor::nchw(1, 4, h, w), Tensor::nchw(1, 8, h, w), Tensor::nchw(1, 2, h, w)};
}

void DetectionMaps::validate() const {
  require(center_heat.rank() == 4, "detection maps: center_heat must be rank 4");
  const std::size_t h = height(), w = width();
  const auto check = [&](const Tensor& t, std::size_t c, const char* name) {
    require(t.rank() == 4 && t.batch() == 1 && t.channels() == c && t.height() == h && t.width() == w,
            std::string("detection maps: ") + name + " has shape " + t.shape_string() + ", expected 1x" +
                std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w));
  };
  check(center_heat, 1, "center_heat");
  check(wh, 2, "wh");
  check(center_off, 2, "center_off");
  check(corner_heat, 4, "corner_heat");
  check(corner_rel, 8, "corner_rel");
  check(corner_off, 2, "corner_off");
}

DetectionTargets encode_targets(std::span<const PlateAnnotation> plates, std::size_t image_width,
                                std::size_t image_height, std::size_t stride) {
  require(stride >= 1, "encode_targets: stride must be >= 1");
  require(image_width >= stride && image_height >= stride && image_width % stride == 0 &&
              image_height % stride == 0,
          "encode_targets: stride must divide the image extents");
  const std::size_t h = image_height / stride, w = image_width / stride;
  const double s = static_cast<double>(stride);
  DetectionTargets t;
  t.maps = DetectionMaps::zeros(h, w);
  t.center_mask.assign(h * w, 0);
  t.corner_mask.assign(h * w, 0);

  for (const PlateAnnotation& plate : plates) {
    require(!plate.box.degenerate(), "encode_targets: degenerate plate box");
    const double fw = plate.box.width() / s;
    const double fh = plate.box.height() / s;
    const Point c{plate.box.center().x / s, plate.box.center().y / s};
    require(c.x >= 0.0 && c.y >= 0.0 && c.x < static_cast<double>(w) && c.y < static_cast<double>(h),
            "encode_targets: centre outside map after stride division");
    const std::size_t cx = static_cast<std::size_t>(std::floor(c.x));
    const std::size_t cy = static_cast<std::size_t>(std::floor(c.y));
    const double min_side = std::min(fw, fh);

    gaussian_splat(t.maps.center_heat, 0,
                   {static_cast<double>(cx), static_cast<double>(cy), kCenterRadiusFactor * min_side});
    t.maps.wh.at(0, 0, cy, cx) = static_cast<float>(fw);
    t.maps.wh.at(0, 1, cy, cx) = static_cast<float>(fh);
    t.maps.center_off.at(0, 0, cy, cx) = static_cast<float>(c.x - static_cast<double>(cx));
    t.maps.center_off.at(0, 1, cy, cx) = static_cast<float>(c.y - static_cast<double>(cy));
    t.center_mask[cy * w + cx] = 1;

    for (std::size_t k = 0; k < kCorners; ++k) {
      const Point p{plate.corners[k].x / s, plate.corners[k].y / s};
      require(p.x >= 0.0 && p.y >= 0.0 && p.x <= static_cast<double>(w) && p.y <= static_cast<double>(h),
              "encode_targets: corner outside image");
      t.maps.corner_rel.at(0, 2 * k, cy, cx) = static_cast<float>(p.x - c.x);
      t.maps.corner_rel.at(0, 2 * k + 1, cy, cx) = static_cast<float>(p.y - c.y);
      // A corner on the far image edge belongs to the last cell.
      const std::size_t px = std::min(static_cast<std::size_t>(std::floor(p.x)), w - 1);
      const std::size_t py = std::min(static_cast<std::size_t>(std::floor(p.y)), h - 1);
      gaussian_splat(t.maps.corner_heat, k,
                     {static_cast<double>(px), static_cast<double>(py), kCornerRadiusFactor * min_side});
      t.maps.corner_off.at(0, 0, py, px) = static_cast<float>(p.x - static_cast<double>(px));
      t.maps.corner_off.at(0, 1, py, px) = static_cast<float>(p.y - static_cast<double>(py));
      t.corner_mask[py * w + px] = 1;
    }
  }
  t.n_center = static_cast<std::size_t>(std::count(t.center_mask.begin(), t.center_mask.end(), 1));
  t.n_corner = static_cast<std::size_t>(std::count(t.corner_mask.begin(), t.corner_mask.end(), 1));
  return t;
}

std::vector<Peak> extract_peaks(std::span<const float> plane, std::size_t height, std::size_t width,
                                std::size_t max_k, double threshold) {
  require(plane.size() == height * width, "extract_peaks: plane size mismatch");
  std::vector<Peak> peaks;
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const float v = plane[y * width + x];
      if (!(static_cast<double>(v) >= threshold)) continue;
      bool peak = true;
      for (std::size_t ny = (y == 0 ? 0 : y - 1); peak && ny <= std::min(y + 1, height - 1); ++ny) {
        for (std::size_t nx = (x == 0 ? 0 : x - 1); nx <= std::min(x + 1, width - 1); ++nx) {
          if (ny == y && nx == x) continue;
          const float n = plane[ny * width + nx];
          const bool before = ny < y || (ny == y && nx < x);
          if (n > v || (n == v && before)) {
            peak = false;
            break;
          }
        }
      }
      if (peak) peaks.push_back({y, x, static_cast<double>(v)});
    }
  }
  std::stable_sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) { return a.score > b.score; });
  if (peaks.size() > max_k) peaks.resize(max_k);
  return peaks;
}

namespace {

struct Bounds {
  double width, height;
};

Bounds clip_bounds(const DetectionMaps& maps, const DecodeOptions& o) {
  const double s = static_cast<double>(o.stride);
  return {o.image_width > 0.0 ? o.image_width : static_cast<double>(maps.width()) * s,
          o.image_height > 0.0 ? o.image_height : static_cast<double>(maps.height()) * s};
}

Point clip(Point p, const Bounds& b) {
  return {std::clamp(p.x, 0.0, b.width), std::clamp(p.y, 0.0, b.height)};
}

}  // namespace

std::vector<Detection> decode_boxes(const DetectionMaps& maps, const DecodeOptions& options) {
  maps.validate();
  const Bounds bounds = clip_bounds(maps, options);
  const double s = static_cast<double>(options.stride);
  std::vector<Detection> out;
  for (const Peak& p : extract_peaks(maps.center_heat.plane(0, 0), maps.height(), maps.width(), options.max_k,
                                     options.threshold)) {
    const double cx = (static_cast<double>(p.x) + maps.center_off.at(0, 0, p.y, p.x)) * s;
    const double cy = (static_cast<double>(p.y) + maps.center_off.at(0, 1, p.y, p.x)) * s;
    const double half_w = static_cast<double>(maps.wh.at(0, 0, p.y, p.x)) * s / 2.0;
    const double half_h = static_cast<double>(maps.wh.at(0, 1, p.y, p.x)) * s / 2.0;
    Detection d;
    d.center = {cx, cy};
    const Point lo = clip({cx - half_w, cy - half_h}, bounds);
    const Point hi = clip({cx + half_w, cy + half_h}, bounds);
    d.box = {lo.x, lo.y, hi.x, hi.y};
    d.score = std::clamp(p.score, 0.0, 1.0);
    d.cell_y = p.y;
    d.cell_x = p.x;
    out.push_back(d);
  }
  return out;
}

CornerCandidates decode_corners(const DetectionMaps& maps, const DecodeOptions& options) {
  maps.validate();
  const Bounds bounds = clip_bounds(maps, options);
  const double s = static_cast<double>(options.stride);
  CornerCandidates out;
  for (std::size_t k = 0; k < kCorners; ++k) {
    for (const Peak& p : extract_peaks(maps.corner_heat.plane(0, k), maps.height(), maps.width(), options.max_k,
                                       options.threshold)) {
      const Point pos{(static_cast<double>(p.x) + maps.corner_off.at(0, 0, p.y, p.x)) * s,
                      (static_cast<double>(p.y) + maps.corner_off.at(0, 1, p.y, p.x)) * s};
      out[k].push_back({clip(pos, bounds), p.score});
    }
  }
  return out;
}

std::vector<Detection> associate_corners(std::vector<Detection> boxes, const CornerCandidates& candidates,
                                         const Tensor& corner_rel, const DecodeOptions& options) {
  const double s = static_cast<double>(options.stride);
  require(corner_rel.rank() == 4 && corner_rel.channels() == 8, "associate_corners: corner_rel must be 1x8xHxW");
  const Bounds bounds{options.image_width > 0.0 ? options.image_width : static_cast<double>(corner_rel.width()) * s,
                      options.image_height > 0.0 ? options.image_height
                                                 : static_cast<double>(corner_rel.height()) * s};

  std::vector<std::size_t> order(boxes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return boxes[a].score > boxes[b].score; });

  std::array<std::vector<bool>, kCorners> used;
  for (std::size_t k = 0; k < kCorners; ++k) used[k].assign(candidates[k].size(), false);

  for (std::size_t i : order) {
    Detection& d = boxes[i];
    const double gate = association_gate(d.box);
    for (std::size_t k = 0; k < kCorners; ++k) {
      std::size_t best = candidates[k].size();
      double best_dist = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < candidates[k].size(); ++j) {
        if (used[k][j]) continue;
        const double dist = std::hypot(candidates[k][j].position.x - d.center.x,
                                       candidates[k][j].position.y - d.center.y);
        if (dist < best_dist) {
          best_dist = dist;
          best = j;
        }
      }
      if (best < candidates[k].size() && best_dist <= gate) {
        used[k][best] = true;
        d.corners[k] = candidates[k][best].position;
        d.corner_scores[k] = candidates[k][best].score;
        d.corner_source[k] = CornerSource::peak;
      } else {
        const double dx = corner_rel.at(0, 2 * k, d.cell_y, d.cell_x);
        const double dy = corner_rel.at(0, 2 * k + 1, d.cell_y, d.cell_x);
        d.corners[k] = clip({d.center.x + dx * s, d.center.y + dy * s}, bounds);
        d.corner_scores[k] = 0.0;
        d.corner_source[k] = CornerSource::regressed_fallback;
      }
    }
  }
  return boxes;
}

std::vector<Detection> decode(const DetectionMaps& maps, const DecodeOptions& options) {
  return associate_corners(decode_boxes(maps, options), decode_corners(maps, options), maps.corner_rel, options);
}

}  // namespace lpr::heatmap

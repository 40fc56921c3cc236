#include "lpr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "lpr/error.hpp"

namespace lpr::metrics {

double iou(const Box& a, const Box& b) {
  if (a.degenerate() || b.degenerate()) return 0.0;
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

Letterbox letterbox(std::size_t width_in, std::size_t height_in, std::size_t width_out, std::size_t height_out) {
  require(width_in > 0 && height_in > 0 && width_out > 0 && height_out > 0, "letterbox: dims must be positive");
  Letterbox l;
  l.scale = std::min(static_cast<double>(width_out) / static_cast<double>(width_in),
                     static_cast<double>(height_out) / static_cast<double>(height_in));
  l.content_width = std::min(width_out, static_cast<std::size_t>(std::llround(static_cast<double>(width_in) * l.scale)));
  l.content_height =
      std::min(height_out, static_cast<std::size_t>(std::llround(static_cast<double>(height_in) * l.scale)));
  l.pad_right = width_out - l.content_width;
  l.pad_bottom = height_out - l.content_height;
  return l;
}

void EvalConfig::validate() const {
  require(iou_threshold > 0.0 && iou_threshold < 1.0, "eval: IoU threshold must lie in (0, 1)");
}

namespace {

auto box_key(const Box& b) { return std::tie(b.x1, b.y1, b.x2, b.y2); }

// Descending score; ties by box geometry then text so input order never matters.
bool prediction_before(const Prediction& a, const Prediction& b) {
  if (a.score != b.score) return a.score > b.score;
  if (box_key(a.box) != box_key(b.box)) return box_key(a.box) < box_key(b.box);
  return a.text < b.text;
}

// Raster-first centre among equal-score predictions.
bool raster_before(const Prediction& a, const Prediction& b) {
  if (a.score != b.score) return a.score > b.score;
  const Point ca = a.box.center(), cb = b.box.center();
  if (ca.y != cb.y) return ca.y < cb.y;
  if (ca.x != cb.x) return ca.x < cb.x;
  return prediction_before(a, b);
}

std::vector<Prediction> kept_predictions(const ImageEval& img, const EvalConfig& config) {
  std::vector<Prediction> preds = img.predictions;
  if (config.one_prediction_per_image && preds.size() > 1) {
    std::sort(preds.begin(), preds.end(), raster_before);
    preds.resize(1);
  }
  std::sort(preds.begin(), preds.end(), prediction_before);
  return preds;
}

struct MatchCount {
  std::size_t correct = 0;
  std::size_t predictions = 0;
  std::size_t degenerate = 0;
};

MatchCount match_image(const ImageEval& img, const EvalConfig& config, bool require_text) {
  MatchCount m;
  const auto preds = kept_predictions(img, config);
  m.predictions = preds.size();
  std::vector<bool> used(img.ground_truth.size(), false);
  for (const Prediction& p : preds) {
    if (p.box.degenerate()) ++m.degenerate;
    std::size_t best = img.ground_truth.size();
    double best_iou = 0.0;
    for (std::size_t g = 0; g < img.ground_truth.size(); ++g) {
      if (used[g]) continue;
      const GroundTruth& gt = img.ground_truth[g];
      if (require_text && gt.text != p.text) continue;
      const double v = iou(p.box, gt.box);
      if (!(v > config.iou_threshold)) continue;
      const bool better = best == img.ground_truth.size() || v > best_iou ||
                          (v == best_iou && std::make_tuple(box_key(gt.box), gt.text) <
                                                std::make_tuple(box_key(img.ground_truth[best].box),
                                                                img.ground_truth[best].text));
      if (better) {
        best = g;
        best_iou = v;
      }
    }
    if (best < img.ground_truth.size()) {
      used[best] = true;
      ++m.correct;
    }
  }
  return m;
}

}  // namespace

DetectionMetrics eval_detection(std::span<const ImageEval> images, const EvalConfig& config) {
  config.validate();
  DetectionMetrics r;
  for (const ImageEval& img : images) {
    const MatchCount m = match_image(img, config, false);
    r.predictions += m.predictions;
    r.correct += m.correct;
    r.degenerate_boxes += m.degenerate;
    r.ground_truth += img.ground_truth.size();
  }
  r.precision_defined = r.predictions > 0;
  r.precision = r.precision_defined ? static_cast<double>(r.correct) / static_cast<double>(r.predictions) : 0.0;
  r.recall_defined = r.ground_truth > 0 && !config.one_prediction_per_image;
  r.recall = r.ground_truth > 0 ? static_cast<double>(r.correct) / static_cast<double>(r.ground_truth) : 0.0;
  return r;
}

EndToEndMetrics eval_e2e(std::span<const ImageEval> images, const EvalConfig& config) {
  config.validate();
  EndToEndMetrics r;
  for (const ImageEval& img : images) {
    const MatchCount m = match_image(img, config, true);
    r.predictions += m.predictions;
    r.correct += m.correct;
    r.degenerate_boxes += m.degenerate;
    r.ground_truth += img.ground_truth.size();
  }
  r.accuracy_defined = r.ground_truth > 0;
  r.accuracy = r.accuracy_defined ? static_cast<double>(r.correct) / static_cast<double>(r.ground_truth) : 0.0;
  r.precision = r.predictions > 0 ? static_cast<double>(r.correct) / static_cast<double>(r.predictions) : 0.0;
  return r;
}

}  // namespace lpr::metrics

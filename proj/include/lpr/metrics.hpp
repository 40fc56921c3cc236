#pragma once

#include <span>
#include <string>
#include <vector>

#include "lpr/types.hpp"

namespace lpr::metrics {

/// Intersection over union; 0 when disjoint or when either box is degenerate.
double iou(const Box& a, const Box& b);

/// Aspect-preserving resize anchored top-left with zero padding right/bottom.
struct Letterbox {
  double scale = 1.0;
  std::size_t content_width = 0;
  std::size_t content_height = 0;
  std::size_t pad_right = 0;
  std::size_t pad_bottom = 0;

  Point forward(const Point& p) const { return {p.x * scale, p.y * scale}; }
  Point inverse(const Point& p) const { return {p.x / scale, p.y / scale}; }
  Box forward(const Box& b) const { return {b.x1 * scale, b.y1 * scale, b.x2 * scale, b.y2 * scale}; }
  Box inverse(const Box& b) const { return {b.x1 / scale, b.y1 / scale, b.x2 / scale, b.y2 / scale}; }
};

Letterbox letterbox(std::size_t width_in, std::size_t height_in, std::size_t width_out, std::size_t height_out);

struct EvalConfig {
  double iou_threshold = 0.5;
  bool one_prediction_per_image = false;
  bool e2e = false;
  void validate() const;
};

struct Prediction {
  Box box;
  double score = 1.0;
  std::string text;
};

struct GroundTruth {
  Box box;
  std::string text;
};

struct ImageEval {
  std::string id;
  std::vector<Prediction> predictions;
  std::vector<GroundTruth> ground_truth;
};

struct DetectionMetrics {
  std::size_t predictions = 0;
  std::size_t ground_truth = 0;
  std::size_t correct = 0;
  double precision = 0.0;
  bool precision_defined = false;  // false when there were no predictions
  double recall = 0.0;
  bool recall_defined = false;     // false with no ground truth or in one-per-image mode
  std::size_t degenerate_boxes = 0;
};

/// A prediction is correct when its IoU with a still-unmatched ground truth
/// exceeds the threshold. Predictions are matched in descending score order.
DetectionMetrics eval_detection(std::span<const ImageEval> images, const EvalConfig& config);

struct EndToEndMetrics {
  std::size_t predictions = 0;
  std::size_t ground_truth = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;  // correct / ground-truth plates
  bool accuracy_defined = false;
  double precision = 0.0;  // correct / predictions
  std::size_t degenerate_boxes = 0;
};

/// Correct when IoU exceeds the threshold and the strings match exactly.
EndToEndMetrics eval_e2e(std::span<const ImageEval> images, const EvalConfig& config);

}  // namespace lpr::metrics

#pragma once

// Glue shared by the CLI and the self-test: archive layouts for detection
// maps and logits, oracle logits, and the prediction/ground-truth join.

#include <span>
#include <vector>

#include "lpr/annotations.hpp"
#include "lpr/heatmap.hpp"
#include "lpr/metrics.hpp"
#include "lpr/ptar.hpp"
#include "lpr/recognizer.hpp"

namespace lpr::pipeline {

/// Map tensors stacked along the batch axis under the names center_heat, wh,
/// center_off, corner_heat, corner_rel, corner_off; masks (if present) as
/// center_mask / corner_mask, B x 1 x H x W with values 0 or 1.
PtarArchive targets_to_archive(std::span<const heatmap::DetectionTargets> targets);
PtarArchive maps_to_archive(std::span<const heatmap::DetectionMaps> maps);
std::vector<heatmap::DetectionMaps> maps_from_archive(const PtarArchive& archive);

/// Frame-level one-hot logits (margin on the chosen class, 0 elsewhere) whose
/// greedy path collapses to each label: T x B x K.
Tensor oracle_logits(std::span<const recog::Labels> labels, std::size_t steps, std::size_t classes, int blank,
                     float margin = 8.0f);

/// "logits" (or the archive's only tensor) as T x B x K; rank-2 T x K is
/// promoted to B = 1.
Tensor logits_from_archive(const PtarArchive& archive);

/// Pairs predictions with ground truth by image id; ids present on only one
/// side still contribute (unmatched predictions or missed plates).
std::vector<metrics::ImageEval> join_for_eval(std::span<const ImageDetections> predictions,
                                              std::span<const ImageAnnotations> ground_truth);

}  // namespace lpr::pipeline

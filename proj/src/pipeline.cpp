#include "lpr/pipeline.hpp"

#include <array>
#include <map>
#include <string_view>

#include "lpr/error.hpp"

namespace lpr::pipeline {
namespace {

constexpr std::array<std::string_view, 6> kMapNames{"center_heat", "wh",         "center_off",
                                                    "corner_heat", "corner_rel", "corner_off"};

std::array<const Tensor*, 6> fields(const heatmap::DetectionMaps& m) {
  return {&m.center_heat, &m.wh, &m.center_off, &m.corner_heat, &m.corner_rel, &m.corner_off};
}

std::array<Tensor*, 6> fields(heatmap::DetectionMaps& m) {
  return {&m.center_heat, &m.wh, &m.center_off, &m.corner_heat, &m.corner_rel, &m.corner_off};
}

Tensor stack(std::span<const Tensor* const> items) {
  const Tensor& first = *items.front();
  Tensor out = Tensor::nchw(items.size(), first.channels(), first.height(), first.width());
  const std::size_t item = first.size();
  for (std::size_t b = 0; b < items.size(); ++b) {
    require(items[b]->same_shape(first), "maps: all images must share one map size");
    std::copy(items[b]->storage().begin(), items[b]->storage().end(), out.storage().begin() + b * item);
  }
  return out;
}

Tensor mask_tensor(const std::vector<std::uint8_t>& mask, std::size_t h, std::size_t w) {
  Tensor t = Tensor::nchw(1, 1, h, w);
  for (std::size_t i = 0; i < mask.size(); ++i) t.storage()[i] = mask[i] ? 1.0f : 0.0f;
  return t;
}

}  // namespace

PtarArchive maps_to_archive(std::span<const heatmap::DetectionMaps> maps) {
  require(!maps.empty(), "maps: nothing to write");
  PtarArchive archive;
  for (std::size_t f = 0; f < kMapNames.size(); ++f) {
    std::vector<const Tensor*> items;
    for (const auto& m : maps) {
      m.validate();
      items.push_back(fields(m)[f]);
    }
    archive.add(std::string(kMapNames[f]), stack(items));
  }
  return archive;
}

PtarArchive targets_to_archive(std::span<const heatmap::DetectionTargets> targets) {
  std::vector<heatmap::DetectionMaps> maps;
  std::vector<Tensor> center, corner;
  for (const auto& t : targets) {
    maps.push_back(t.maps);
    center.push_back(mask_tensor(t.center_mask, t.maps.height(), t.maps.width()));
    corner.push_back(mask_tensor(t.corner_mask, t.maps.height(), t.maps.width()));
  }
  PtarArchive archive = maps_to_archive(maps);
  std::vector<const Tensor*> cp, kp;
  for (std::size_t i = 0; i < center.size(); ++i) {
    cp.push_back(&center[i]);
    kp.push_back(&corner[i]);
  }
  archive.add("center_mask", stack(cp));
  archive.add("corner_mask", stack(kp));
  return archive;
}

std::vector<heatmap::DetectionMaps> maps_from_archive(const PtarArchive& archive) {
  std::array<const Tensor*, 6> src{};
  for (std::size_t f = 0; f < kMapNames.size(); ++f) {
    src[f] = &archive.get(kMapNames[f]);
    require(src[f]->rank() == 4, "maps: '" + std::string(kMapNames[f]) + "' must be rank 4");
    require(src[f]->batch() == src[0]->batch(), "maps: batch sizes differ");
  }
  std::vector<heatmap::DetectionMaps> out;
  for (std::size_t b = 0; b < src[0]->batch(); ++b) {
    heatmap::DetectionMaps m;
    auto dst = fields(m);
    for (std::size_t f = 0; f < dst.size(); ++f) *dst[f] = src[f]->slice_batch(b, 1);
    m.validate();
    out.push_back(std::move(m));
  }
  return out;
}

Tensor oracle_logits(std::span<const recog::Labels> labels, std::size_t steps, std::size_t classes, int blank,
                     float margin) {
  require(blank >= 0 && static_cast<std::size_t>(blank) < classes, "oracle: blank outside the class range");
  Tensor out({steps, labels.size(), classes}, 0.0f);
  for (std::size_t b = 0; b < labels.size(); ++b) {
    const recog::Labels& label = labels[b];
    std::vector<int> path;
    // Interleave blanks when there is room; otherwise pack, separating repeats.
    const bool roomy = 2 * label.size() + 1 <= steps;
    for (std::size_t i = 0; i < label.size(); ++i) {
      require(label[i] >= 0 && static_cast<std::size_t>(label[i]) < classes && label[i] != blank,
              "oracle: label index out of range");
      if (roomy || (i > 0 && label[i] == label[i - 1])) path.push_back(blank);
      path.push_back(label[i]);
    }
    require(path.size() <= steps, "oracle: label does not fit in the time steps");
    path.resize(steps, blank);
    for (std::size_t t = 0; t < steps; ++t) {
      out.storage()[(t * labels.size() + b) * classes + static_cast<std::size_t>(path[t])] = margin;
    }
  }
  return out;
}

Tensor logits_from_archive(const PtarArchive& archive) {
  const Tensor* t = archive.find("logits");
  if (t == nullptr) {
    require(archive.size() == 1, "logits: archive needs a tensor named 'logits'");
    t = &archive.entries().front().tensor;
  }
  if (t->rank() == 2) return t->reshaped({t->dim(0), 1, t->dim(1)});
  require(t->rank() == 3, "logits: expected T x B x K, got " + t->shape_string());
  return *t;
}

std::vector<metrics::ImageEval> join_for_eval(std::span<const ImageDetections> predictions,
                                              std::span<const ImageAnnotations> ground_truth) {
  std::vector<metrics::ImageEval> out;
  std::map<std::string, std::size_t> index;
  auto slot = [&](const std::string& id) -> metrics::ImageEval& {
    auto [it, inserted] = index.try_emplace(id, out.size());
    if (inserted) out.push_back({id, {}, {}});
    return out[it->second];
  };
  for (const auto& img : ground_truth) {
    auto& e = slot(img.id);
    for (const auto& p : img.plates) e.ground_truth.push_back({p.box, p.text});
  }
  for (const auto& img : predictions) {
    auto& e = slot(img.id);
    for (const auto& d : img.detections) e.predictions.push_back({d.box, d.score, d.text});
  }
  return out;
}

}  // namespace lpr::pipeline

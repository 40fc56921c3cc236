#include "lpr/fusion.hpp"

#include <string>

#include "lpr/error.hpp"
#include "lpr/random.hpp"
#include "lpr/weights.hpp"

namespace lpr::fusion {

void validate_stages(const BackboneStages& s) {
  const std::array<const Tensor*, 4> levels{&s.c2, &s.c3, &s.c4, &s.c5};
  for (std::size_t i = 0; i < 4; ++i) {
    require(levels[i]->rank() == 4, "backbone: stage c" + std::to_string(i + 2) + " must be rank 4");
  }
  for (std::size_t i = 0; i + 1 < 4; ++i) {
    const Tensor& fine = *levels[i];
    const Tensor& coarse = *levels[i + 1];
    require(fine.batch() == coarse.batch(), "backbone: stages disagree on batch size");
    require(fine.height() == 2 * coarse.height() && fine.width() == 2 * coarse.width(),
            "backbone: inconsistent spatial ratios between c" + std::to_string(i + 2) + " (" +
                fine.shape_string() + ") and c" + std::to_string(i + 3) + " (" + coarse.shape_string() + ")");
  }
}

BackboneStages load_backbone_features(const PtarArchive& archive) {
  const std::array<const char*, 4> names{"c2", "c3", "c4", "c5"};
  std::array<Tensor, 4> t;
  for (std::size_t i = 0; i < 4; ++i) {
    const Tensor* found = archive.find(names[i]);
    if (!found) fail(std::string("backbone: missing stage ") + names[i]);
    t[i] = *found;
  }
  BackboneStages stages{std::move(t[0]), std::move(t[1]), std::move(t[2]), std::move(t[3])};
  validate_stages(stages);
  return stages;
}

StandInBackbone::StandInBackbone(std::uint64_t seed, std::size_t in_channels,
                                 std::array<std::size_t, 4> widths)
    : widths_(widths) {
  constexpr std::size_t kStem = 32;
  stem_ = random_conv(in_channels, kStem, 3, 3, 2, 1, false, seed);
  std::size_t prev = kStem;
  for (std::size_t i = 0; i < 4; ++i) {
    stages_[i] = random_conv(prev, widths[i], 3, 3, 2, 1, false, seed + 1 + i);
    prev = widths[i];
  }
}

BackboneStages StandInBackbone::forward(const Tensor& image) const {
  require(image.rank() == 4, "stand-in backbone: image must be rank 4");
  require(image.height() % 32 == 0 && image.width() % 32 == 0,
          "stand-in backbone: image extents must be divisible by 32");
  Tensor x = conv2d(image, stem_);
  relu_inplace(x);
  std::array<Tensor, 4> out;
  for (std::size_t i = 0; i < 4; ++i) {
    x = conv2d(x, stages_[i]);
    relu_inplace(x);
    out[i] = x;
  }
  return {std::move(out[0]), std::move(out[1]), std::move(out[2]), std::move(out[3])};
}

Tensor random_image(std::uint64_t seed, std::size_t batch, std::size_t height, std::size_t width) {
  Tensor img = Tensor::nchw(batch, 1, height, width);
  Rng rng(seed);
  for (float& v : img.data()) v = static_cast<float>(rng.uniform());
  return img;
}

FusionWeights FusionWeights::from_archive(const PtarArchive& archive) {
  FusionWeights w;
  for (std::size_t i = 0; i < 4; ++i) {
    w.reduce[i] = conv_from_archive(archive, "reduce" + std::to_string(i + 2), 1, 0);
    require(w.reduce[i].kernel_h == 1 && w.reduce[i].kernel_w == 1, "fusion: reduce convs must be 1x1");
    require(w.reduce[i].out_channels == kPyramidChannels, "fusion: reduce convs must output 128 channels");
  }
  w.fuse_conv = conv_from_archive(archive, "fuse_conv", 1, 1);
  require(w.fuse_conv.kernel_h == 3 && w.fuse_conv.kernel_w == 3, "fusion: fuse_conv must be 3x3");
  require(w.fuse_conv.in_channels == 4 * kPyramidChannels && w.fuse_conv.out_channels == kPyramidChannels,
          "fusion: fuse_conv must map 512 -> 128 channels");
  return w;
}

FusionWeights FusionWeights::random(std::uint64_t seed, const std::array<std::size_t, 4>& stage_channels) {
  FusionWeights w;
  for (std::size_t i = 0; i < 4; ++i) {
    w.reduce[i] = random_conv(stage_channels[i], kPyramidChannels, 1, 1, 1, 0, true, seed + i);
  }
  w.fuse_conv = random_conv(4 * kPyramidChannels, kPyramidChannels, 3, 3, 1, 1, true, seed + 4);
  return w;
}

void FusionWeights::to_archive(PtarArchive& archive) const {
  for (std::size_t i = 0; i < 4; ++i) conv_to_archive(archive, "reduce" + std::to_string(i + 2), reduce[i]);
  conv_to_archive(archive, "fuse_conv", fuse_conv);
}

Tensor reduce_stage(const Tensor& stage, const ConvSpec& reduce) {
  Tensor out = conv2d(stage, reduce);
  relu_inplace(out);
  return out;
}

namespace {

Tensor top_down(const Tensor& reduced, const Tensor& coarser) {
  Tensor up = upsample_nearest(coarser, 2);
  require(up.same_shape(reduced), "fusion: shape mismatch after upsampling (" + up.shape_string() + " vs " +
                                      reduced.shape_string() + ")");
  return weighted_sum(reduced, 0.5f, up, 0.5f);
}

}  // namespace

Pyramid build_pyramid(const Tensor& c2r, const Tensor& c3r, const Tensor& c4r, const Tensor& c5r) {
  Pyramid p;
  p.p5 = c5r;
  p.p4 = top_down(c4r, p.p5);
  p.p3 = top_down(c3r, p.p4);
  p.p2 = top_down(c2r, p.p3);
  return p;
}

Tensor concat_pyramid(const Pyramid& pyramid) {
  const std::array<Tensor, 4> parts{pyramid.p2, upsample_nearest(pyramid.p3, 2),
                                    upsample_nearest(pyramid.p4, 4), upsample_nearest(pyramid.p5, 8)};
  for (const Tensor& t : parts) {
    require(t.rank() == 4 && t.height() == pyramid.p2.height() && t.width() == pyramid.p2.width(),
            "fusion: spatial mismatch after upsampling");
  }
  return concat_channels(parts);
}

Tensor fuse(const Pyramid& pyramid, const ConvSpec& fuse_conv) {
  Tensor out = conv2d(concat_pyramid(pyramid), fuse_conv);
  relu_inplace(out);
  return out;
}

PyramidFeatures run_fusion(const BackboneStages& stages, const FusionWeights& weights) {
  validate_stages(stages);
  PyramidFeatures f;
  const std::array<const Tensor*, 4> levels{&stages.c2, &stages.c3, &stages.c4, &stages.c5};
  for (std::size_t i = 0; i < 4; ++i) f.reduced[i] = reduce_stage(*levels[i], weights.reduce[i]);
  f.pyramid = build_pyramid(f.reduced[0], f.reduced[1], f.reduced[2], f.reduced[3]);
  f.shared = fuse(f.pyramid, weights.fuse_conv);
  return f;
}

}  // namespace lpr::fusion

#pragma once

#include <array>
#include <cstdint>

#include "lpr/ops.hpp"
#include "lpr/ptar.hpp"
#include "lpr/tensor.hpp"

namespace lpr::fusion {

inline constexpr std::size_t kPyramidChannels = 128;

/// Backbone stage outputs at strides 4, 8, 16 and 32.
struct BackboneStages {
  Tensor c2, c3, c4, c5;
};

/// Checks rank, shared batch and the 2:1 spatial ratio between levels.
void validate_stages(const BackboneStages& stages);

/// Reads tensors c2..c5 from an archive and validates them.
BackboneStages load_backbone_features(const PtarArchive& archive);

/// Fixed random-weight CNN standing in for the backbone: a stride-2 stem
/// followed by four stride-2 3x3 conv + ReLU stages, so its outputs honour
/// the stride-4..32 contract.
class StandInBackbone {
public:
  explicit StandInBackbone(std::uint64_t seed, std::size_t in_channels = 1,
                           std::array<std::size_t, 4> widths = {64, 128, 256, 512});

  /// image: B x in_channels x H x W with H, W divisible by 32.
  BackboneStages forward(const Tensor& image) const;

  const std::array<std::size_t, 4>& widths() const noexcept { return widths_; }

private:
  std::array<std::size_t, 4> widths_;
  ConvSpec stem_;
  std::array<ConvSpec, 4> stages_;
};

/// Deterministic seeded noise image, B x 1 x H x W in [0, 1).
Tensor random_image(std::uint64_t seed, std::size_t batch, std::size_t height, std::size_t width);

struct FusionWeights {
  std::array<ConvSpec, 4> reduce;  // 1x1, stage channels -> 128, BN + ReLU
  ConvSpec fuse_conv;              // 3x3 pad 1, 512 -> 128, BN + ReLU

  /// Names reduce2..reduce5 and fuse_conv.
  static FusionWeights from_archive(const PtarArchive& archive);
  static FusionWeights random(std::uint64_t seed, const std::array<std::size_t, 4>& stage_channels);
  void to_archive(PtarArchive& archive) const;
};

struct Pyramid {
  Tensor p2, p3, p4, p5;
};

/// Everything the fusion stage computes, kept for inspection.
struct PyramidFeatures {
  std::array<Tensor, 4> reduced;  // c2'..c5'
  Pyramid pyramid;
  Tensor shared;                  // B x 128 x H/4 x W/4
};

/// 1x1 reduction of one stage (conv + fused BN + ReLU).
Tensor reduce_stage(const Tensor& stage, const ConvSpec& reduce);

/// Top-down pass: p5 = c5', p_k = 0.5 c_k' + 0.5 up2(p_{k+1}).
Pyramid build_pyramid(const Tensor& c2r, const Tensor& c3r, const Tensor& c4r, const Tensor& c5r);

/// Concatenation of p2, up2(p3), up4(p4), up8(p5) before the 3x3 reduction.
Tensor concat_pyramid(const Pyramid& pyramid);

/// concat_pyramid followed by the 3x3 conv with BN + ReLU.
Tensor fuse(const Pyramid& pyramid, const ConvSpec& fuse_conv);

PyramidFeatures run_fusion(const BackboneStages& stages, const FusionWeights& weights);

}  // namespace lpr::fusion

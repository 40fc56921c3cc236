#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "lpr/tensor.hpp"

namespace lpr {

/// Inference-folded batch normalization: y = scale * x + shift per channel.
struct FusedBatchNorm {
  std::vector<float> scale;
  std::vector<float> shift;
};

struct ConvSpec {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  Tensor weights;  // out x in x kh x kw
  std::vector<float> bias;
  std::optional<FusedBatchNorm> fused_bn;

  /// Throws ValidationError when weights/bias/bn disagree with the declared shape.
  void validate() const;
  std::size_t fan_in() const noexcept { return in_channels * kernel_h * kernel_w; }
};

/// Zero-initialized spec of the given geometry.
ConvSpec make_conv(std::size_t in, std::size_t out, std::size_t kh, std::size_t kw,
                   std::size_t stride, std::size_t padding, bool with_bn);

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and bias from a seed. BN,
/// when requested, is the identity (scale 1, shift 0).
ConvSpec random_conv(std::size_t in, std::size_t out, std::size_t kh, std::size_t kw,
                     std::size_t stride, std::size_t padding, bool with_bn, std::uint64_t seed);

/// Zero-padded 2D convolution, 64-bit accumulation, followed by bias and the
/// optional fused BN.
Tensor conv2d(const Tensor& x, const ConvSpec& spec);

Tensor maxpool2d(const Tensor& x, std::size_t k, std::size_t stride);

/// Nearest-neighbour upsampling: out(y, x) = in(y / factor, x / factor).
Tensor upsample_nearest(const Tensor& x, std::size_t factor);

Tensor concat_channels(std::span<const Tensor> xs);

/// a * wa + b * wb elementwise (float arithmetic). Shapes must match.
Tensor weighted_sum(const Tensor& a, float wa, const Tensor& b, float wb);

enum class Activation { relu, sigmoid, softmax_over_channels };

Tensor activation(const Tensor& x, Activation kind);
void relu_inplace(Tensor& x);

struct SamplePoint {
  double y = 0.0;
  double x = 0.0;
};

/// Bilinear interpolation on the pixel-centre grid (integer coordinates hit
/// stored values), clamping coordinates to the map border. Returns one value
/// per (point, channel) in point-major order: out[p * C + c].
std::vector<float> bilinear_sample(const Tensor& x, std::size_t batch,
                                   std::span<const SamplePoint> points);

/// Resamples one batch item onto an out_h x out_w grid of points (row-major),
/// returning a 1 x C x out_h x out_w tensor.
Tensor bilinear_resample(const Tensor& x, std::size_t batch, std::span<const SamplePoint> grid,
                         std::size_t out_h, std::size_t out_w);

}  // namespace lpr

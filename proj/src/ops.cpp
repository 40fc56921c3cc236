#include "lpr/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "lpr/error.hpp"
#include "lpr/kernels.hpp"
#include "lpr/random.hpp"

namespace lpr {

void ConvSpec::validate() const {
  require(in_channels >= 1 && out_channels >= 1, "conv: channel counts must be >= 1");
  require(kernel_h >= 1 && kernel_w >= 1 && stride >= 1, "conv: kernel and stride must be >= 1");
  const std::vector<std::size_t> expected{out_channels, in_channels, kernel_h, kernel_w};
  require(weights.dims() == expected,
          "conv: weights shape " + weights.shape_string() + " does not match declared geometry");
  require(bias.size() == out_channels, "conv: bias length must equal out_channels");
  if (fused_bn) {
    require(fused_bn->scale.size() == out_channels && fused_bn->shift.size() == out_channels,
            "conv: fused BN length must equal out_channels");
  }
}

ConvSpec make_conv(std::size_t in, std::size_t out, std::size_t kh, std::size_t kw,
                   std::size_t stride, std::size_t padding, bool with_bn) {
  ConvSpec spec;
  spec.in_channels = in;
  spec.out_channels = out;
  spec.kernel_h = kh;
  spec.kernel_w = kw;
  spec.stride = stride;
  spec.padding = padding;
  spec.weights = Tensor({out, in, kh, kw});
  spec.bias.assign(out, 0.0f);
  if (with_bn) spec.fused_bn = FusedBatchNorm{std::vector<float>(out, 1.0f), std::vector<float>(out, 0.0f)};
  return spec;
}

ConvSpec random_conv(std::size_t in, std::size_t out, std::size_t kh, std::size_t kw,
                     std::size_t stride, std::size_t padding, bool with_bn, std::uint64_t seed) {
  ConvSpec spec = make_conv(in, out, kh, kw, stride, padding, with_bn);
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(spec.fan_in()));
  for (float& w : spec.weights.data()) w = static_cast<float>(rng.uniform(-bound, bound));
  for (float& b : spec.bias) b = static_cast<float>(rng.uniform(-bound, bound));
  return spec;
}

Tensor conv2d(const Tensor& x, const ConvSpec& spec) {
  spec.validate();
  require(x.rank() == 4, "conv: input must be rank 4");
  require(x.channels() == spec.in_channels,
          "conv: input has " + std::to_string(x.channels()) + " channels, spec expects " +
              std::to_string(spec.in_channels));
  const std::size_t ph = x.height() + 2 * spec.padding;
  const std::size_t pw = x.width() + 2 * spec.padding;
  require(spec.kernel_h <= ph && spec.kernel_w <= pw, "conv: kernel larger than padded input");
  const std::size_t out_h = (ph - spec.kernel_h) / spec.stride + 1;
  const std::size_t out_w = (pw - spec.kernel_w) / spec.stride + 1;

  Tensor out = Tensor::nchw(x.batch(), spec.out_channels, out_h, out_w);
  std::vector<float> padded(spec.in_channels * ph * pw, 0.0f);
  std::vector<double> accum(spec.out_channels * out_h * out_w);
  const auto& k = kernels::active();

  for (std::size_t b = 0; b < x.batch(); ++b) {
    for (std::size_t c = 0; c < spec.in_channels; ++c) {
      const auto src = x.plane(b, c);
      float* dst = padded.data() + c * ph * pw;
      for (std::size_t y = 0; y < x.height(); ++y) {
        std::memcpy(dst + (y + spec.padding) * pw + spec.padding, src.data() + y * x.width(),
                    x.width() * sizeof(float));
      }
    }
    kernels::ConvArgs args;
    args.input = padded.data();
    args.in_channels = spec.in_channels;
    args.padded_h = ph;
    args.padded_w = pw;
    args.weights = spec.weights.data().data();
    args.out_channels = spec.out_channels;
    args.kernel_h = spec.kernel_h;
    args.kernel_w = spec.kernel_w;
    args.stride = spec.stride;
    args.out_h = out_h;
    args.out_w = out_w;
    args.accum = accum.data();
    k.conv_accumulate(args);

    for (std::size_t o = 0; o < spec.out_channels; ++o) {
      const double bias = spec.bias[o];
      const double scale = spec.fused_bn ? spec.fused_bn->scale[o] : 1.0;
      const double shift = spec.fused_bn ? spec.fused_bn->shift[o] : 0.0;
      const double* acc = accum.data() + o * out_h * out_w;
      auto dst = out.plane(b, o);
      for (std::size_t i = 0; i < dst.size(); ++i) {
        double v = acc[i] + bias;
        if (spec.fused_bn) v = v * scale + shift;
        dst[i] = static_cast<float>(v);
      }
    }
  }
  return out;
}

Tensor maxpool2d(const Tensor& x, std::size_t k, std::size_t stride) {
  require(x.rank() == 4, "maxpool: input must be rank 4");
  require(k >= 1 && stride >= 1, "maxpool: window and stride must be >= 1");
  require(x.height() >= k && x.width() >= k, "maxpool: window exceeds input");
  const std::size_t out_h = (x.height() - k) / stride + 1;
  const std::size_t out_w = (x.width() - k) / stride + 1;
  Tensor out = Tensor::nchw(x.batch(), x.channels(), out_h, out_w);
  const auto& kt = kernels::active();
  for (std::size_t b = 0; b < x.batch(); ++b) {
    for (std::size_t c = 0; c < x.channels(); ++c) {
      kt.maxpool_plane(x.plane(b, c).data(), x.height(), x.width(), k, stride,
                       out.plane(b, c).data(), out_h, out_w);
    }
  }
  return out;
}

Tensor upsample_nearest(const Tensor& x, std::size_t factor) {
  require(factor >= 1, "upsample: factor must be >= 1");
  require(x.rank() == 4, "upsample: input must be rank 4");
  if (factor == 1) return x;
  const std::size_t h = x.height(), w = x.width();
  Tensor out = Tensor::nchw(x.batch(), x.channels(), h * factor, w * factor);
  for (std::size_t b = 0; b < x.batch(); ++b) {
    for (std::size_t c = 0; c < x.channels(); ++c) {
      const auto src = x.plane(b, c);
      auto dst = out.plane(b, c);
      const std::size_t ow = w * factor;
      for (std::size_t y = 0; y < h; ++y) {
        float* row = dst.data() + y * factor * ow;
        for (std::size_t xx = 0; xx < w; ++xx) {
          std::fill_n(row + xx * factor, factor, src[y * w + xx]);
        }
        for (std::size_t r = 1; r < factor; ++r) std::memcpy(row + r * ow, row, ow * sizeof(float));
      }
    }
  }
  return out;
}

Tensor concat_channels(std::span<const Tensor> xs) {
  require(!xs.empty(), "concat: no inputs");
  const Tensor& first = xs.front();
  std::size_t total = 0;
  for (const Tensor& t : xs) {
    require(t.rank() == 4, "concat: inputs must be rank 4");
    require(t.batch() == first.batch() && t.height() == first.height() && t.width() == first.width(),
            "concat: spatial/batch mismatch (" + t.shape_string() + " vs " + first.shape_string() + ")");
    total += t.channels();
  }
  Tensor out = Tensor::nchw(first.batch(), total, first.height(), first.width());
  const std::size_t hw = first.height() * first.width();
  for (std::size_t b = 0; b < first.batch(); ++b) {
    std::size_t c0 = 0;
    for (const Tensor& t : xs) {
      std::memcpy(out.plane(b, c0).data(), t.plane(b, 0).data(), t.channels() * hw * sizeof(float));
      c0 += t.channels();
    }
  }
  return out;
}

Tensor weighted_sum(const Tensor& a, float wa, const Tensor& b, float wb) {
  require(a.same_shape(b), "weighted_sum: shape mismatch (" + a.shape_string() + " vs " + b.shape_string() + ")");
  Tensor out(a.dims());
  kernels::active().weighted_sum(a.data().data(), wa, b.data().data(), wb, out.data().data(), a.size());
  return out;
}

void relu_inplace(Tensor& x) { kernels::active().relu(x.data().data(), x.size()); }

Tensor activation(const Tensor& x, Activation kind) {
  Tensor out = x;
  switch (kind) {
    case Activation::relu:
      relu_inplace(out);
      break;
    case Activation::sigmoid:
      for (float& v : out.data()) v = static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(v))));
      break;
    case Activation::softmax_over_channels: {
      require(x.rank() == 4, "softmax: input must be rank 4");
      const std::size_t C = x.channels(), hw = x.height() * x.width();
      std::vector<double> e(C);
      for (std::size_t b = 0; b < x.batch(); ++b) {
        for (std::size_t i = 0; i < hw; ++i) {
          double m = -INFINITY;
          for (std::size_t c = 0; c < C; ++c) m = std::max(m, static_cast<double>(x.plane(b, c)[i]));
          double sum = 0.0;
          for (std::size_t c = 0; c < C; ++c) {
            e[c] = std::exp(static_cast<double>(x.plane(b, c)[i]) - m);
            sum += e[c];
          }
          for (std::size_t c = 0; c < C; ++c) out.plane(b, c)[i] = static_cast<float>(e[c] / sum);
        }
      }
      break;
    }
  }
  return out;
}

namespace {

kernels::BilinearTap make_tap(double y, double x, std::size_t h, std::size_t w) {
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  const std::size_t y0 = static_cast<std::size_t>(std::floor(y));
  const std::size_t x0 = static_cast<std::size_t>(std::floor(x));
  const std::size_t y1 = std::min(y0 + 1, h - 1);
  const std::size_t x1 = std::min(x0 + 1, w - 1);
  kernels::BilinearTap t;
  t.i00 = y0 * w + x0;
  t.i01 = y0 * w + x1;
  t.i10 = y1 * w + x0;
  t.i11 = y1 * w + x1;
  t.wy = y - static_cast<double>(y0);
  t.wx = x - static_cast<double>(x0);
  return t;
}

}  // namespace

std::vector<float> bilinear_sample(const Tensor& x, std::size_t batch, std::span<const SamplePoint> points) {
  require(x.rank() == 4 && batch < x.batch(), "bilinear_sample: bad tensor or batch index");
  const std::size_t C = x.channels();
  std::vector<float> out(points.size() * C);
  const auto& k = kernels::active();
  const float* base = x.plane(batch, 0).data();
  for (std::size_t p = 0; p < points.size(); ++p) {
    const auto tap = make_tap(points[p].y, points[p].x, x.height(), x.width());
    k.bilinear_channels(base, C, x.height() * x.width(), tap, out.data() + p * C, 1);
  }
  return out;
}

Tensor bilinear_resample(const Tensor& x, std::size_t batch, std::span<const SamplePoint> grid,
                         std::size_t out_h, std::size_t out_w) {
  require(x.rank() == 4 && batch < x.batch(), "bilinear_resample: bad tensor or batch index");
  require(grid.size() == out_h * out_w, "bilinear_resample: grid size mismatch");
  Tensor out = Tensor::nchw(1, x.channels(), out_h, out_w);
  const auto& k = kernels::active();
  const float* base = x.plane(batch, 0).data();
  float* dst = out.data().data();
  for (std::size_t p = 0; p < grid.size(); ++p) {
    const auto tap = make_tap(grid[p].y, grid[p].x, x.height(), x.width());
    k.bilinear_channels(base, x.channels(), x.height() * x.width(), tap, dst + p, out_h * out_w);
  }
  return out;
}

}  // namespace lpr

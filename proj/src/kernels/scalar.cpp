#include "lpr/kernels.hpp"

namespace lpr::kernels {
namespace {

void conv_accumulate(const ConvArgs& a) {
  const std::size_t plane = a.padded_h * a.padded_w;
  const std::size_t wsize = a.in_channels * a.kernel_h * a.kernel_w;
  for (std::size_t o = 0; o < a.out_channels; ++o) {
    const float* w = a.weights + o * wsize;
    double* acc_plane = a.accum + o * a.out_h * a.out_w;
    for (std::size_t oy = 0; oy < a.out_h; ++oy) {
      for (std::size_t ox = 0; ox < a.out_w; ++ox) {
        double acc = 0.0;
        for (std::size_t c = 0; c < a.in_channels; ++c) {
          const float* in = a.input + c * plane;
          const float* wc = w + c * a.kernel_h * a.kernel_w;
          for (std::size_t ky = 0; ky < a.kernel_h; ++ky) {
            const float* row = in + (oy * a.stride + ky) * a.padded_w + ox * a.stride;
            for (std::size_t kx = 0; kx < a.kernel_w; ++kx) {
              acc += static_cast<double>(wc[ky * a.kernel_w + kx]) * static_cast<double>(row[kx]);
            }
          }
        }
        acc_plane[oy * a.out_w + ox] = acc;
      }
    }
  }
}

void weighted_sum(const float* a, float wa, const float* b, float wb, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * wa + b[i] * wb;
}

void relu(float* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) data[i] = data[i] > 0.0f ? data[i] : 0.0f;
}

void maxpool_plane(const float* in, std::size_t /*h*/, std::size_t w, std::size_t k,
                   std::size_t stride, float* out, std::size_t out_h, std::size_t out_w) {
  for (std::size_t oy = 0; oy < out_h; ++oy) {
    for (std::size_t ox = 0; ox < out_w; ++ox) {
      const float* win = in + oy * stride * w + ox * stride;
      float m = win[0];
      for (std::size_t ky = 0; ky < k; ++ky) {
        for (std::size_t kx = 0; kx < k; ++kx) {
          const float v = win[ky * w + kx];
          m = v > m ? v : m;
        }
      }
      out[oy * out_w + ox] = m;
    }
  }
}

void bilinear_channels(const float* base, std::size_t channels, std::size_t plane_size,
                       const BilinearTap& t, float* out, std::size_t out_stride) {
  const double wy0 = 1.0 - t.wy;
  const double wx0 = 1.0 - t.wx;
  for (std::size_t c = 0; c < channels; ++c) {
    const float* p = base + c * plane_size;
    const double top = wx0 * static_cast<double>(p[t.i00]) + t.wx * static_cast<double>(p[t.i01]);
    const double bot = wx0 * static_cast<double>(p[t.i10]) + t.wx * static_cast<double>(p[t.i11]);
    out[c * out_stride] = static_cast<float>(wy0 * top + t.wy * bot);
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{"scalar", conv_accumulate, weighted_sum, relu, maxpool_plane,
                                 bilinear_channels};
  return table;
}

}  // namespace lpr::kernels

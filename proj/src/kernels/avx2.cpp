// AVX2 variants of the inner-loop kernels. Compiled with -mavx2 but without
// -mfma so each multiply and add rounds exactly like the scalar reference.

#include <immintrin.h>

#include <cstdint>

#include "lpr/kernels.hpp"

namespace lpr::kernels {
namespace {

template <bool UnitStride>
inline __m256d load4(const float* p, std::size_t stride) {
  if constexpr (UnitStride) {
    return _mm256_cvtps_pd(_mm_loadu_ps(p));
  } else {
    return _mm256_cvtps_pd(_mm_set_ps(p[3 * stride], p[2 * stride], p[stride], p[0]));
  }
}

// Same reduction order as the scalar kernel, one output at a time.
inline double conv_single(const ConvArgs& a, std::size_t o, std::size_t oy, std::size_t ox) {
  const std::size_t plane = a.padded_h * a.padded_w;
  const std::size_t khkw = a.kernel_h * a.kernel_w;
  const float* w = a.weights + o * a.in_channels * khkw;
  double acc = 0.0;
  for (std::size_t c = 0; c < a.in_channels; ++c) {
    const float* in = a.input + c * plane;
    for (std::size_t ky = 0; ky < a.kernel_h; ++ky) {
      const float* row = in + (oy * a.stride + ky) * a.padded_w + ox * a.stride;
      for (std::size_t kx = 0; kx < a.kernel_w; ++kx) {
        acc += static_cast<double>(w[c * khkw + ky * a.kernel_w + kx]) * static_cast<double>(row[kx]);
      }
    }
  }
  return acc;
}

constexpr std::size_t kOutBlock = 4;  // output channels per register tile
constexpr std::size_t kXBlock = 8;    // output columns per register tile

template <bool UnitStride>
void conv_tiles(const ConvArgs& a) {
  const std::size_t plane = a.padded_h * a.padded_w;
  const std::size_t khkw = a.kernel_h * a.kernel_w;
  const std::size_t wsize = a.in_channels * khkw;
  const std::size_t out_plane = a.out_h * a.out_w;
  const std::size_t s = a.stride;

  std::size_t o0 = 0;
  for (; o0 + kOutBlock <= a.out_channels; o0 += kOutBlock) {
    const float* w0 = a.weights + o0 * wsize;
    for (std::size_t oy = 0; oy < a.out_h; ++oy) {
      std::size_t ox = 0;
      for (; ox + kXBlock <= a.out_w; ox += kXBlock) {
        __m256d acc[kOutBlock][2];
        for (auto& row : acc) row[0] = row[1] = _mm256_setzero_pd();
        for (std::size_t c = 0; c < a.in_channels; ++c) {
          const float* in = a.input + c * plane;
          for (std::size_t ky = 0; ky < a.kernel_h; ++ky) {
            const float* row = in + (oy * s + ky) * a.padded_w + ox * s;
            const std::size_t wbase = c * khkw + ky * a.kernel_w;
            for (std::size_t kx = 0; kx < a.kernel_w; ++kx) {
              const __m256d x0 = load4<UnitStride>(row + kx, s);
              const __m256d x1 = load4<UnitStride>(row + kx + 4 * s, s);
              for (std::size_t j = 0; j < kOutBlock; ++j) {
                const __m256d wv = _mm256_set1_pd(static_cast<double>(w0[j * wsize + wbase + kx]));
                acc[j][0] = _mm256_add_pd(acc[j][0], _mm256_mul_pd(wv, x0));
                acc[j][1] = _mm256_add_pd(acc[j][1], _mm256_mul_pd(wv, x1));
              }
            }
          }
        }
        for (std::size_t j = 0; j < kOutBlock; ++j) {
          double* dst = a.accum + (o0 + j) * out_plane + oy * a.out_w + ox;
          _mm256_storeu_pd(dst, acc[j][0]);
          _mm256_storeu_pd(dst + 4, acc[j][1]);
        }
      }
      for (; ox < a.out_w; ++ox) {
        for (std::size_t j = 0; j < kOutBlock; ++j) {
          a.accum[(o0 + j) * out_plane + oy * a.out_w + ox] = conv_single(a, o0 + j, oy, ox);
        }
      }
    }
  }
  for (; o0 < a.out_channels; ++o0) {
    for (std::size_t oy = 0; oy < a.out_h; ++oy) {
      for (std::size_t ox = 0; ox < a.out_w; ++ox) {
        a.accum[o0 * out_plane + oy * a.out_w + ox] = conv_single(a, o0, oy, ox);
      }
    }
  }
}

void conv_accumulate(const ConvArgs& a) {
  if (a.stride == 1) {
    conv_tiles<true>(a);
  } else {
    conv_tiles<false>(a);
  }
}

void weighted_sum(const float* a, float wa, const float* b, float wb, float* out, std::size_t n) {
  const __m256 va = _mm256_set1_ps(wa);
  const __m256 vb = _mm256_set1_ps(wb);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 x = _mm256_mul_ps(_mm256_loadu_ps(a + i), va);
    const __m256 y = _mm256_mul_ps(_mm256_loadu_ps(b + i), vb);
    _mm256_storeu_ps(out + i, _mm256_add_ps(x, y));
  }
  for (; i < n; ++i) out[i] = a[i] * wa + b[i] * wb;
}

void relu(float* data, std::size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  // max_ps(v, 0) returns 0 unless v > 0, matching the scalar select for NaN and -0.
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(data + i, _mm256_max_ps(_mm256_loadu_ps(data + i), zero));
  for (; i < n; ++i) data[i] = data[i] > 0.0f ? data[i] : 0.0f;
}

void maxpool_plane(const float* in, std::size_t /*h*/, std::size_t w, std::size_t k,
                   std::size_t stride, float* out, std::size_t out_h, std::size_t out_w) {
  const __m256i lanes = _mm256_mullo_epi32(_mm256_setr_epi32(0, 1, 2, 3, 4, 5, 6, 7),
                                           _mm256_set1_epi32(static_cast<int>(stride)));
  for (std::size_t oy = 0; oy < out_h; ++oy) {
    std::size_t ox = 0;
    for (; ox + 8 <= out_w; ox += 8) {
      const float* win = in + oy * stride * w + ox * stride;
      __m256 m = _mm256_i32gather_ps(win, lanes, 4);
      for (std::size_t ky = 0; ky < k; ++ky) {
        for (std::size_t kx = 0; kx < k; ++kx) {
          const __m256 v = _mm256_i32gather_ps(win + ky * w + kx, lanes, 4);
          m = _mm256_max_ps(v, m);  // v > m ? v : m
        }
      }
      _mm256_storeu_ps(out + oy * out_w + ox, m);
    }
    for (; ox < out_w; ++ox) {
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
  std::size_t c = 0;
  if (channels * plane_size < (std::size_t{1} << 31)) {
    const __m256d vwy0 = _mm256_set1_pd(wy0), vwy = _mm256_set1_pd(t.wy);
    const __m256d vwx0 = _mm256_set1_pd(wx0), vwx = _mm256_set1_pd(t.wx);
    const int ps = static_cast<int>(plane_size);
    for (; c + 4 <= channels; c += 4) {
      const int first = static_cast<int>(c) * ps;
      const __m128i idx = _mm_setr_epi32(first, first + ps, first + 2 * ps, first + 3 * ps);
      const __m256d v00 = _mm256_cvtps_pd(_mm_i32gather_ps(base + t.i00, idx, 4));
      const __m256d v01 = _mm256_cvtps_pd(_mm_i32gather_ps(base + t.i01, idx, 4));
      const __m256d v10 = _mm256_cvtps_pd(_mm_i32gather_ps(base + t.i10, idx, 4));
      const __m256d v11 = _mm256_cvtps_pd(_mm_i32gather_ps(base + t.i11, idx, 4));
      const __m256d top = _mm256_add_pd(_mm256_mul_pd(vwx0, v00), _mm256_mul_pd(vwx, v01));
      const __m256d bot = _mm256_add_pd(_mm256_mul_pd(vwx0, v10), _mm256_mul_pd(vwx, v11));
      const __m128 r = _mm256_cvtpd_ps(_mm256_add_pd(_mm256_mul_pd(vwy0, top), _mm256_mul_pd(vwy, bot)));
      alignas(16) float lanes[4];
      _mm_store_ps(lanes, r);
      for (std::size_t j = 0; j < 4; ++j) out[(c + j) * out_stride] = lanes[j];
    }
  }
  for (; c < channels; ++c) {
    const float* p = base + c * plane_size;
    const double top = wx0 * static_cast<double>(p[t.i00]) + t.wx * static_cast<double>(p[t.i01]);
    const double bot = wx0 * static_cast<double>(p[t.i10]) + t.wx * static_cast<double>(p[t.i11]);
    out[c * out_stride] = static_cast<float>(wy0 * top + t.wy * bot);
  }
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table{"avx2", conv_accumulate, weighted_sum, relu, maxpool_plane,
                                 bilinear_channels};
  return &table;
}

}  // namespace lpr::kernels

#pragma once

// Inner-loop kernels with a scalar reference implementation and optional
// SIMD variants. The variant is chosen once at startup from CPU features and
// can be overridden for equivalence testing. Every variant must produce
// bit-identical output to the scalar reference: vectorization runs across
// independent outputs, never across a reduction.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace lpr::kernels {

enum class Isa { scalar, avx2 };

/// One batch item of a convolution, input already zero padded.
struct ConvArgs {
  const float* input = nullptr;    // in_channels x padded_h x padded_w
  std::size_t in_channels = 0;
  std::size_t padded_h = 0;
  std::size_t padded_w = 0;
  const float* weights = nullptr;  // out x in x kh x kw
  std::size_t out_channels = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t stride = 1;
  std::size_t out_h = 0;
  std::size_t out_w = 0;
  double* accum = nullptr;         // out x out_h x out_w, overwritten
};

/// Bilinear taps shared across channels: four plane offsets and weights.
struct BilinearTap {
  std::size_t i00 = 0, i01 = 0, i10 = 0, i11 = 0;
  double wy = 0.0;  // fractional y
  double wx = 0.0;  // fractional x
};

struct KernelTable {
  std::string_view name;
  /// accum[o, y, x] = sum over (c, ky, kx) in that order of w * in, in double.
  void (*conv_accumulate)(const ConvArgs& args);
  /// out[i] = a[i] * wa + b[i] * wb in float.
  void (*weighted_sum)(const float* a, float wa, const float* b, float wb, float* out, std::size_t n);
  void (*relu)(float* data, std::size_t n);
  /// out[k][c] = max over a k x k window with the given stride, one plane.
  void (*maxpool_plane)(const float* in, std::size_t h, std::size_t w, std::size_t k,
                        std::size_t stride, float* out, std::size_t out_h, std::size_t out_w);
  /// For each channel c: out[c * out_stride] = bilinear(plane c) using the tap.
  void (*bilinear_channels)(const float* base, std::size_t channels, std::size_t plane_size,
                            const BilinearTap& tap, float* out, std::size_t out_stride);
};

const KernelTable& scalar_table();
/// Null when the variant was not compiled in.
const KernelTable* avx2_table();

bool isa_supported(Isa isa);
/// Table currently used by the tensor operations.
const KernelTable& active();
/// Forces a variant; returns false (and changes nothing) if unsupported.
bool select(Isa isa);
Isa selected();
std::string_view isa_name(Isa isa);

/// Restores the previous selection on destruction.
class ScopedIsa {
public:
  explicit ScopedIsa(Isa isa) : previous_(selected()), ok_(select(isa)) {}
  ~ScopedIsa() { select(previous_); }
  ScopedIsa(const ScopedIsa&) = delete;
  ScopedIsa& operator=(const ScopedIsa&) = delete;
  bool ok() const noexcept { return ok_; }

private:
  Isa previous_;
  bool ok_;
};

}  // namespace lpr::kernels

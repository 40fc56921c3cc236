#include "lpr/weights.hpp"

#include <string>

#include "lpr/error.hpp"

namespace lpr {
namespace {

std::vector<float> vector_of(const Tensor& t, std::size_t expected, const std::string& what) {
  require(t.size() == expected, what + " must have " + std::to_string(expected) + " values");
  return t.storage();
}

}  // namespace

ConvSpec conv_from_archive(const PtarArchive& archive, std::string_view name, std::size_t stride,
                           std::size_t padding) {
  const std::string p(name);
  const Tensor* w = archive.find(p + ".weight");
  require(w != nullptr, "weights: missing tensor '" + p + ".weight'");
  require(w->rank() == 4, "weights: '" + p + ".weight' must be rank 4");
  ConvSpec spec;
  spec.out_channels = w->dim(0);
  spec.in_channels = w->dim(1);
  spec.kernel_h = w->dim(2);
  spec.kernel_w = w->dim(3);
  spec.stride = stride;
  spec.padding = padding;
  spec.weights = *w;
  if (const Tensor* b = archive.find(p + ".bias")) {
    spec.bias = vector_of(*b, spec.out_channels, p + ".bias");
  } else {
    spec.bias.assign(spec.out_channels, 0.0f);
  }
  const Tensor* scale = archive.find(p + ".bn_scale");
  const Tensor* shift = archive.find(p + ".bn_shift");
  require((scale == nullptr) == (shift == nullptr), "weights: '" + p + "' needs both bn_scale and bn_shift");
  if (scale) {
    spec.fused_bn = FusedBatchNorm{vector_of(*scale, spec.out_channels, p + ".bn_scale"),
                                   vector_of(*shift, spec.out_channels, p + ".bn_shift")};
  }
  spec.validate();
  return spec;
}

void conv_to_archive(PtarArchive& archive, std::string_view name, const ConvSpec& spec) {
  const std::string p(name);
  archive.set(p + ".weight", spec.weights);
  archive.set(p + ".bias", Tensor({spec.out_channels}, spec.bias));
  if (spec.fused_bn) {
    archive.set(p + ".bn_scale", Tensor({spec.out_channels}, spec.fused_bn->scale));
    archive.set(p + ".bn_shift", Tensor({spec.out_channels}, spec.fused_bn->shift));
  }
}

}  // namespace lpr

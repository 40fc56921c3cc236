#include "lpr/tensor.hpp"

#include <cstring>
#include <functional>
#include <numeric>
#include <sstream>

#include "lpr/error.hpp"

namespace lpr {
namespace {

std::size_t checked_count(const std::vector<std::size_t>& dims) {
  require(!dims.empty() && dims.size() <= 4, "tensor rank must be 1..4");
  std::size_t n = 1;
  for (std::size_t d : dims) {
    require(d >= 1, "tensor extents must be >= 1");
    n *= d;
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> dims, float fill) : dims_(std::move(dims)) {
  data_.assign(checked_count(dims_), fill);
}

Tensor::Tensor(std::vector<std::size_t> dims, std::vector<float> data)
    : dims_(std::move(dims)), data_(std::move(data)) {
  require(checked_count(dims_) == data_.size(), "tensor data length does not match dims");
}

std::size_t Tensor::dim4(std::size_t i) const {
  require(dims_.size() == 4, "expected a rank-4 tensor, got " + shape_string());
  return dims_[i];
}

std::span<float> Tensor::plane(std::size_t b, std::size_t c) {
  const std::size_t hw = height() * width();
  return std::span<float>(data_).subspan((b * channels() + c) * hw, hw);
}

std::span<const float> Tensor::plane(std::size_t b, std::size_t c) const {
  const std::size_t hw = height() * width();
  return std::span<const float>(data_).subspan((b * channels() + c) * hw, hw);
}

Tensor Tensor::slice_channels(std::size_t first, std::size_t count) const {
  require(count >= 1 && first + count <= channels(), "channel slice out of range");
  Tensor out = nchw(batch(), count, height(), width());
  const std::size_t hw = height() * width();
  for (std::size_t b = 0; b < batch(); ++b) {
    std::memcpy(out.plane(b, 0).data(), plane(b, first).data(), count * hw * sizeof(float));
  }
  return out;
}

Tensor Tensor::slice_batch(std::size_t first, std::size_t count) const {
  require(count >= 1 && first + count <= batch(), "batch slice out of range");
  Tensor out = nchw(count, channels(), height(), width());
  const std::size_t item = channels() * height() * width();
  std::memcpy(out.data_.data(), data_.data() + first * item, count * item * sizeof(float));
  return out;
}

Tensor Tensor::reshaped(std::vector<std::size_t> dims) const {
  return Tensor(std::move(dims), data_);
}

std::string Tensor::shape_string() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (i) os << 'x';
    os << dims_[i];
  }
  if (dims_.empty()) os << "<empty>";
  return os.str();
}

bool bit_identical(const Tensor& a, const Tensor& b) {
  return a.dims() == b.dims() &&
         std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(float)) == 0;
}

}  // namespace lpr

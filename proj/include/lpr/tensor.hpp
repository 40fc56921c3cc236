#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace lpr {

/// Dense float tensor, row-major with the last extent fastest.
///
/// Rank is 1..4. Rank-4 tensors use the (batch, channel, height, width)
/// layout; element (b, c, y, x) lives at ((b*C + c)*H + y)*W + x.
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims, float fill = 0.0f);
  Tensor(std::vector<std::size_t> dims, std::vector<float> data);

  static Tensor nchw(std::size_t b, std::size_t c, std::size_t h, std::size_t w, float fill = 0.0f) {
    return Tensor({b, c, h, w}, fill);
  }

  const std::vector<std::size_t>& dims() const noexcept { return dims_; }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t dim(std::size_t i) const { return dims_.at(i); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  // Rank-4 accessors; throw on other ranks.
  std::size_t batch() const { return dim4(0); }
  std::size_t channels() const { return dim4(1); }
  std::size_t height() const { return dim4(2); }
  std::size_t width() const { return dim4(3); }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }
  std::vector<float>& storage() noexcept { return data_; }
  const std::vector<float>& storage() const noexcept { return data_; }

  float& at(std::size_t b, std::size_t c, std::size_t y, std::size_t x) {
    return data_[offset(b, c, y, x)];
  }
  float at(std::size_t b, std::size_t c, std::size_t y, std::size_t x) const {
    return data_[offset(b, c, y, x)];
  }
  std::size_t offset(std::size_t b, std::size_t c, std::size_t y, std::size_t x) const {
    return ((b * dims_[1] + c) * dims_[2] + y) * dims_[3] + x;
  }

  /// Contiguous H*W plane of (b, c).
  std::span<float> plane(std::size_t b, std::size_t c);
  std::span<const float> plane(std::size_t b, std::size_t c) const;

  /// Copy of channels [first, first + count) of a rank-4 tensor.
  Tensor slice_channels(std::size_t first, std::size_t count) const;
  /// Copy of batch items [first, first + count) of a rank-4 tensor.
  Tensor slice_batch(std::size_t first, std::size_t count) const;

  Tensor reshaped(std::vector<std::size_t> dims) const;

  bool same_shape(const Tensor& other) const noexcept { return dims_ == other.dims_; }
  std::string shape_string() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

private:
  std::size_t dim4(std::size_t i) const;

  std::vector<std::size_t> dims_;
  std::vector<float> data_;
};

/// Bitwise equality, distinguishing -0 from +0 and comparing NaN payloads.
bool bit_identical(const Tensor& a, const Tensor& b);

}  // namespace lpr

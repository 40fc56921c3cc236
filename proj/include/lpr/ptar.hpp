#pragma once

// PTAR: a flat archive of named float tensors.
//
//   "PTAR" | u32 version (=1) | u32 count
//   count x { u32 name_len | name bytes (UTF-8) | u8 dtype (0 = f32)
//             | u32 ndim | ndim x u64 dims | raw little-endian payload }
//
// All integers are little-endian.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "lpr/tensor.hpp"

namespace lpr {

inline constexpr std::uint32_t kPtarVersion = 1;
inline constexpr std::uint8_t kPtarFloat32 = 0;

class PtarArchive {
public:
  struct Entry {
    std::string name;
    Tensor tensor;
  };

  /// Throws ValidationError on a duplicate name.
  void add(std::string name, Tensor tensor);
  void set(std::string name, Tensor tensor);
  bool contains(std::string_view name) const noexcept { return find(name) != nullptr; }
  const Tensor* find(std::string_view name) const noexcept;
  /// Throws ValidationError("missing tensor ...") when absent.
  const Tensor& get(std::string_view name) const;

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

private:
  std::vector<Entry> entries_;
};

std::string ptar_encode(const PtarArchive& archive);
PtarArchive ptar_decode(std::string_view bytes);

void ptar_write(const std::filesystem::path& path, const PtarArchive& archive);
PtarArchive ptar_read(const std::filesystem::path& path);

}  // namespace lpr

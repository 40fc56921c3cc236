#include "lpr/ptar.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <unordered_set>

#include "lpr/error.hpp"

namespace lpr {
namespace {

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
  }
}

class Reader {
public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get_le() {
    need(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }

  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool at_end() const noexcept { return pos_ == bytes_.size(); }

private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail("ptar: truncated payload");
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void PtarArchive::add(std::string name, Tensor tensor) {
  require(!contains(name), "ptar: duplicate tensor name '" + name + "'");
  entries_.push_back({std::move(name), std::move(tensor)});
}

void PtarArchive::set(std::string name, Tensor tensor) {
  for (auto& e : entries_) {
    if (e.name == name) {
      e.tensor = std::move(tensor);
      return;
    }
  }
  entries_.push_back({std::move(name), std::move(tensor)});
}

const Tensor* PtarArchive::find(std::string_view name) const noexcept {
  for (const auto& e : entries_) {
    if (e.name == name) return &e.tensor;
  }
  return nullptr;
}

const Tensor& PtarArchive::get(std::string_view name) const {
  const Tensor* t = find(name);
  if (!t) fail("ptar: missing tensor '" + std::string(name) + "'");
  return *t;
}

std::string ptar_encode(const PtarArchive& archive) {
  std::string out = "PTAR";
  put_le<std::uint32_t>(out, kPtarVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(archive.size()));
  for (const auto& e : archive.entries()) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out += e.name;
    put_le<std::uint8_t>(out, kPtarFloat32);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.tensor.rank()));
    for (std::size_t d : e.tensor.dims()) put_le<std::uint64_t>(out, d);
    for (float v : e.tensor.data()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

PtarArchive ptar_decode(std::string_view bytes) {
  Reader in(bytes);
  if (bytes.size() < 4 || bytes.substr(0, 4) != "PTAR") fail("ptar: bad magic");
  in.take(4);
  const auto version = in.get_le<std::uint32_t>();
  require(version == kPtarVersion, "ptar: unsupported version " + std::to_string(version));
  const auto count = in.get_le<std::uint32_t>();
  PtarArchive archive;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = in.get_le<std::uint32_t>();
    std::string name(in.take(name_len));
    const auto dtype = in.get_le<std::uint8_t>();
    require(dtype == kPtarFloat32, "ptar: unknown dtype " + std::to_string(dtype) + " for '" + name + "'");
    const auto ndim = in.get_le<std::uint32_t>();
    require(ndim >= 1 && ndim <= 4, "ptar: unsupported rank " + std::to_string(ndim) + " for '" + name + "'");
    std::vector<std::size_t> dims(ndim);
    std::uint64_t count_elems = 1;
    for (auto& d : dims) {
      const auto v = in.get_le<std::uint64_t>();
      require(v >= 1, "ptar: zero extent in '" + name + "'");
      require(count_elems <= std::numeric_limits<std::uint64_t>::max() / v / 4, "ptar: tensor too large");
      count_elems *= v;
      d = static_cast<std::size_t>(v);
    }
    const auto payload = in.take(static_cast<std::size_t>(count_elems * 4));
    std::vector<float> data(static_cast<std::size_t>(count_elems));
    for (std::size_t k = 0; k < data.size(); ++k) {
      std::uint32_t bits = 0;
      for (std::size_t b = 0; b < 4; ++b) {
        bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(payload[4 * k + b])) << (8 * b);
      }
      data[k] = std::bit_cast<float>(bits);
    }
    archive.add(std::move(name), Tensor(std::move(dims), std::move(data)));
  }
  require(in.at_end(), "ptar: trailing bytes after last tensor");
  return archive;
}

void ptar_write(const std::filesystem::path& path, const PtarArchive& archive) {
  const std::string bytes = ptar_encode(archive);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), "ptar: cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(out.good(), "ptar: write failed for '" + path.string() + "'");
}

PtarArchive ptar_read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "ptar: cannot open '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return ptar_decode(bytes);
}

}  // namespace lpr

#pragma once

#include <string_view>

#include "lpr/ops.hpp"
#include "lpr/ptar.hpp"

namespace lpr {

// A convolution named P is stored as P.weight (out x in x kh x kw), P.bias
// (out, optional, zero when absent) and optionally P.bn_scale / P.bn_shift.

ConvSpec conv_from_archive(const PtarArchive& archive, std::string_view name, std::size_t stride,
                           std::size_t padding);
void conv_to_archive(PtarArchive& archive, std::string_view name, const ConvSpec& spec);

}  // namespace lpr

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "lpr/annotations.hpp"
#include "lpr/homography.hpp"
#include "lpr/tensor.hpp"

namespace lpr::fixtures {

enum class Difficulty { axis_aligned, rotated, tilted };

Difficulty parse_difficulty(std::string_view name);
std::string_view difficulty_name(Difficulty d);

struct FixtureOptions {
  std::size_t width = 192;   // divisible by 32 so the stand-in backbone applies
  std::size_t height = 128;
  std::size_t text_length = 7;
};

/// One synthetic single-plate scene.
struct FixtureScene {
  std::string id;
  Tensor image;  // 1 x 1 x H x W, values in [0, 1]
  std::vector<PlateAnnotation> annotations;
  std::uint64_t seed = 0;
  Homography warp;  // plate-local frame -> image pixels
};

/// Plate-local frame: the plate occupies [0, 96] x [0, 32].
inline constexpr double kPlateWidth = 96.0;
inline constexpr double kPlateHeight = 32.0;

/// The unwarped plate corners (LT, RT, LD, RD) in the plate-local frame.
Quad plate_frame();

/// 5 x 7 bitmap for a digit or upper-case letter: row r, column c is ink when
/// bit (4 - c) of glyph_rows(ch)[r] is set. Throws for unsupported characters.
const std::array<std::uint8_t, 7>& glyph_rows(char ch);

std::vector<FixtureScene> gen_fixtures(std::size_t count, std::uint64_t seed, Difficulty difficulty,
                                       const FixtureOptions& options = {});

/// Annotation JSON with an extra per-plate "warp" (row-major 3x3) entry.
json fixtures_to_json(const std::vector<FixtureScene>& scenes);

/// Writes DIR/annotations.json and DIR/images.ptar (one tensor per scene id).
void write_fixtures(const std::filesystem::path& dir, const std::vector<FixtureScene>& scenes);

std::vector<ImageAnnotations> to_annotations(const std::vector<FixtureScene>& scenes);

}  // namespace lpr::fixtures

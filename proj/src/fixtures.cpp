#include "lpr/fixtures.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "lpr/error.hpp"
#include "lpr/ptar.hpp"
#include "lpr/random.hpp"

namespace lpr::fixtures {
namespace {

using Glyph = std::array<std::uint8_t, 7>;

// Classic 5x7 dot-matrix font, most significant of the low five bits = left column.
constexpr std::array<Glyph, 36> kGlyphs{{
    {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E},  // 0
    {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E},  // 1
    {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F},  // 2
    {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E},  // 3
    {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02},  // 4
    {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E},  // 5
    {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E},  // 6
    {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08},  // 7
    {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E},  // 8
    {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C},  // 9
    {0x0E, 0x11, 0x11, 0x11, 0x1F, 0x11, 0x11},  // A
    {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E},  // B
    {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E},  // C
    {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C},  // D
    {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F},  // E
    {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10},  // F
    {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F},  // G
    {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11},  // H
    {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E},  // I
    {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C},  // J
    {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11},  // K
    {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F},  // L
    {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11},  // M
    {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11},  // N
    {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E},  // O
    {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10},  // P
    {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D},  // Q
    {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11},  // R
    {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E},  // S
    {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04},  // T
    {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E},  // U
    {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04},  // V
    {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A},  // W
    {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11},  // X
    {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04},  // Y
    {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F},  // Z
}};

constexpr std::string_view kDigits = "0123456789";
constexpr std::string_view kLetters = "ABCDEFGHIJKLMNOPQRSTUVWXYZ";

constexpr double kGlyphScale = 2.0;  // image pixels per glyph dot
constexpr double kPlateInk = 0.1;
constexpr double kPlatePaper = 0.9;

// Ink test in the plate-local frame.
bool ink_at(const std::string& text, double u, double v) {
  const double cell = 6.0 * kGlyphScale;
  const double text_width = cell * static_cast<double>(text.size()) - kGlyphScale;
  const double left = (kPlateWidth - text_width) / 2.0;
  const double top = (kPlateHeight - 7.0 * kGlyphScale) / 2.0;
  const double gx = (u - left) / kGlyphScale;
  const double gy = (v - top) / kGlyphScale;
  if (gx < 0.0 || gy < 0.0 || gy >= 7.0) return false;
  const auto col = static_cast<std::size_t>(gx);
  const std::size_t ch = col / 6, dot = col % 6;
  if (ch >= text.size() || dot >= 5) return false;
  const auto row = static_cast<std::size_t>(gy);
  return (glyph_rows(text[ch])[row] >> (4 - dot)) & 1U;
}

Homography plate_warp(Rng& rng, Difficulty d, const FixtureOptions& o) {
  const Quad frame = plate_frame();
  Quad target = frame;
  if (d != Difficulty::axis_aligned) {
    const double max_angle = d == Difficulty::rotated ? 45.0 : 30.0;
    const double angle = rng.uniform(-max_angle, max_angle) * std::numbers::pi / 180.0;
    const double c = std::cos(angle), s = std::sin(angle);
    for (std::size_t k = 0; k < 4; ++k) {
      const double x = frame[k].x - kPlateWidth / 2.0, y = frame[k].y - kPlateHeight / 2.0;
      target[k] = {c * x - s * y, s * x + c * y};
    }
    if (d == Difficulty::tilted) {
      for (Point& p : target) {
        p.x += rng.uniform(-8.0, 8.0);
        p.y += rng.uniform(-5.0, 5.0);
      }
    }
  }
  double minx = target[0].x, maxx = target[0].x, miny = target[0].y, maxy = target[0].y;
  for (const Point& p : target) {
    minx = std::min(minx, p.x);
    maxx = std::max(maxx, p.x);
    miny = std::min(miny, p.y);
    maxy = std::max(maxy, p.y);
  }
  constexpr double kMargin = 4.0;
  const double span_x = static_cast<double>(o.width) - 2.0 * kMargin - (maxx - minx);
  const double span_y = static_cast<double>(o.height) - 2.0 * kMargin - (maxy - miny);
  require(span_x > 0.0 && span_y > 0.0, "fixtures: image too small for the plate");
  // Integer translations keep axis-aligned plates on whole pixels.
  const double tx = kMargin - minx + std::floor(rng.uniform(0.0, span_x));
  const double ty = kMargin - miny + std::floor(rng.uniform(0.0, span_y));
  for (Point& p : target) {
    p.x += tx;
    p.y += ty;
  }
  return solve_homography(std::span<const Point, 4>(frame), std::span<const Point, 4>(target));
}

std::string random_text(Rng& rng, std::size_t length) {
  std::string text;
  text.push_back(kLetters[rng.below(kLetters.size())]);
  for (std::size_t i = 1; i < length; ++i) {
    const bool digit = rng.below(3) != 0;
    text.push_back(digit ? kDigits[rng.below(kDigits.size())] : kLetters[rng.below(kLetters.size())]);
  }
  return text;
}

}  // namespace

Difficulty parse_difficulty(std::string_view name) {
  if (name == "axis-aligned" || name == "axis_aligned") return Difficulty::axis_aligned;
  if (name == "rotated") return Difficulty::rotated;
  if (name == "tilted") return Difficulty::tilted;
  fail("fixtures: unknown difficulty '" + std::string(name) + "' (axis-aligned | rotated | tilted)");
}

std::string_view difficulty_name(Difficulty d) {
  switch (d) {
    case Difficulty::axis_aligned:
      return "axis-aligned";
    case Difficulty::rotated:
      return "rotated";
    case Difficulty::tilted:
      return "tilted";
  }
  return "axis-aligned";
}

Quad plate_frame() {
  return {Point{0.0, 0.0}, Point{kPlateWidth, 0.0}, Point{0.0, kPlateHeight}, Point{kPlateWidth, kPlateHeight}};
}

const std::array<std::uint8_t, 7>& glyph_rows(char ch) {
  if (ch >= '0' && ch <= '9') return kGlyphs[static_cast<std::size_t>(ch - '0')];
  if (ch >= 'A' && ch <= 'Z') return kGlyphs[10 + static_cast<std::size_t>(ch - 'A')];
  fail(std::string("fixtures: no glyph for '") + ch + "'");
}

std::vector<FixtureScene> gen_fixtures(std::size_t count, std::uint64_t seed, Difficulty difficulty,
                                       const FixtureOptions& options) {
  require(count >= 1, "fixtures: count must be >= 1");
  require(options.width % 32 == 0 && options.height % 32 == 0, "fixtures: image extents must be divisible by 32");
  require(options.text_length >= 1 && options.text_length <= 7, "fixtures: text length must be 1..7");
  Rng master(seed);
  std::vector<FixtureScene> scenes;
  scenes.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    FixtureScene scene;
    scene.seed = master.next();
    Rng rng(scene.seed);
    scene.id = std::to_string(i);
    scene.id.insert(0, scene.id.size() < 4 ? 4 - scene.id.size() : 0, '0');

    const std::string text = random_text(rng, options.text_length);
    scene.warp = plate_warp(rng, difficulty, options);
    const Homography to_plate = scene.warp.inverse();

    scene.image = Tensor::nchw(1, 1, options.height, options.width);
    for (std::size_t y = 0; y < options.height; ++y) {
      for (std::size_t x = 0; x < options.width; ++x) {
        float v = static_cast<float>(rng.uniform(0.0, 0.4));
        const Point uv = to_plate.apply({static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5});
        if (uv.x >= 0.0 && uv.y >= 0.0 && uv.x < kPlateWidth && uv.y < kPlateHeight) {
          v = static_cast<float>(ink_at(text, uv.x, uv.y) ? kPlateInk : kPlatePaper);
        }
        scene.image.at(0, 0, y, x) = v;
      }
    }

    PlateAnnotation plate;
    const Quad frame = plate_frame();
    for (std::size_t k = 0; k < 4; ++k) plate.corners[k] = scene.warp.apply(frame[k]);
    if (difficulty == Difficulty::axis_aligned) {
      // Pure translation: snap away solver round-off so corners are exact.
      for (Point& p : plate.corners) p = {std::round(p.x), std::round(p.y)};
    }
    plate.box = {plate.corners[0].x, plate.corners[0].y, plate.corners[0].x, plate.corners[0].y};
    for (const Point& p : plate.corners) {
      plate.box.x1 = std::min(plate.box.x1, p.x);
      plate.box.y1 = std::min(plate.box.y1, p.y);
      plate.box.x2 = std::max(plate.box.x2, p.x);
      plate.box.y2 = std::max(plate.box.y2, p.y);
    }
    plate.text = text;
    scene.annotations.push_back(plate);
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

std::vector<ImageAnnotations> to_annotations(const std::vector<FixtureScene>& scenes) {
  std::vector<ImageAnnotations> out;
  for (const FixtureScene& s : scenes) {
    out.push_back({s.id, s.image.width(), s.image.height(), s.annotations});
  }
  return out;
}

json fixtures_to_json(const std::vector<FixtureScene>& scenes) {
  json doc = annotations_to_json(to_annotations(scenes));
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    doc["images"][i]["seed"] = scenes[i].seed;
    for (auto& plate : doc["images"][i]["plates"]) plate["warp"] = scenes[i].warp.matrix();
  }
  return doc;
}

void write_fixtures(const std::filesystem::path& dir, const std::vector<FixtureScene>& scenes) {
  std::filesystem::create_directories(dir);
  write_json(dir / "annotations.json", fixtures_to_json(scenes));
  PtarArchive images;
  for (const FixtureScene& s : scenes) images.add(s.id, s.image);
  ptar_write(dir / "images.ptar", images);
}

}  // namespace lpr::fixtures

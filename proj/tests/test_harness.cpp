#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "lpr/annotations.hpp"
#include "lpr/error.hpp"
#include "lpr/fixtures.hpp"
#include "lpr/metrics.hpp"
#include "lpr/ptar.hpp"
#include "lpr/random.hpp"

using namespace lpr;

namespace {

std::string le32(std::uint32_t v) {
  std::string s(4, '\0');
  for (int i = 0; i < 4; ++i) s[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  return s;
}

std::string le64(std::uint64_t v) {
  std::string s(8, '\0');
  for (int i = 0; i < 8; ++i) s[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  return s;
}

std::string f32(float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  return le32(u);
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("lpr-tests-" + name);
  std::filesystem::remove_all(p);
  return p;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

metrics::ImageEval image(std::vector<metrics::Prediction> p, std::vector<metrics::GroundTruth> g) {
  return {"img", std::move(p), std::move(g)};
}

}  // namespace

TEST_SUITE("ptar") {
  TEST_CASE("byte layout") {
    PtarArchive a;
    a.add("x", Tensor({2}, std::vector<float>{1.0f, -2.0f}));
    const std::string want = "PTAR" + le32(1) + le32(1) + le32(1) + "x" + std::string(1, '\0') + le32(1) + le64(2) +
                             f32(1.0f) + f32(-2.0f);
    CHECK(ptar_encode(a) == want);
  }

  TEST_CASE("round trips are bit-exact") {
    Rng rng(71);
    PtarArchive a;
    for (int i = 0; i < 6; ++i) {
      std::vector<std::size_t> dims(1 + rng.below(4));
      for (auto& d : dims) d = 1 + rng.below(5);
      Tensor t(dims);
      for (float& v : t.data()) {
        const std::uint32_t bits = static_cast<std::uint32_t>(rng.next());
        std::memcpy(&v, &bits, 4);  // any bit pattern, NaNs included
      }
      a.add("t" + std::to_string(i) + "/ü", t);
    }
    const PtarArchive b = ptar_decode(ptar_encode(a));
    REQUIRE(b.size() == a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(b.entries()[i].name == a.entries()[i].name);
      CHECK(bit_identical(b.entries()[i].tensor, a.entries()[i].tensor));
    }
    const auto dir = scratch("ptar");
    std::filesystem::create_directories(dir);
    ptar_write(dir / "a.ptar", a);
    CHECK(ptar_encode(ptar_read(dir / "a.ptar")) == ptar_encode(a));
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("empty archive") {
    const std::string bytes = ptar_encode(PtarArchive{});
    CHECK(bytes == "PTAR" + le32(1) + le32(0));
    CHECK(ptar_decode(bytes).empty());
  }

  TEST_CASE("malformed archives") {
    PtarArchive a;
    a.add("w", Tensor({3}, 1.0f));
    std::string bytes = ptar_encode(a);
    std::string bad = bytes;
    bad[0] = 'Q';
    CHECK_THROWS_WITH_AS(ptar_decode(bad), doctest::Contains("bad magic"), ValidationError);
    CHECK_THROWS_WITH_AS(ptar_decode(bytes.substr(0, bytes.size() - 1)), doctest::Contains("truncated"),
                         ValidationError);
    std::string dtype = bytes;
    dtype[4 + 4 + 4 + 4 + 1] = 7;
    CHECK_THROWS_WITH_AS(ptar_decode(dtype), doctest::Contains("unknown dtype"), ValidationError);
    CHECK_THROWS_AS(ptar_decode(bytes + "x"), ValidationError);
    CHECK_THROWS_WITH_AS(a.add("w", Tensor({1})), doctest::Contains("duplicate"), ValidationError);
    // Two entries with the same name in the byte stream.
    std::string twice = "PTAR" + le32(1) + le32(2);
    const std::string entry = bytes.substr(12);
    CHECK_THROWS_WITH_AS(ptar_decode(twice + entry + entry), doctest::Contains("duplicate"), ValidationError);
    CHECK_THROWS_WITH_AS(a.get("nope"), doctest::Contains("missing tensor"), ValidationError);
  }
}

TEST_SUITE("metrics") {
  TEST_CASE("iou") {
    const Box a{0, 0, 10, 10};
    CHECK(metrics::iou(a, a) == 1.0);
    CHECK(metrics::iou(a, {5, 0, 15, 10}) == doctest::Approx(50.0 / 150.0));
    CHECK(metrics::iou(a, {20, 20, 30, 30}) == 0.0);
    CHECK(metrics::iou(a, {3, 3, 3, 8}) == 0.0);
    Rng rng(72);
    for (int i = 0; i < 200; ++i) {
      const Box p{rng.uniform(0, 10), rng.uniform(0, 10), rng.uniform(10, 20), rng.uniform(10, 20)};
      const Box q{rng.uniform(0, 10), rng.uniform(0, 10), rng.uniform(10, 20), rng.uniform(10, 20)};
      const double v = metrics::iou(p, q);
      CHECK(v == metrics::iou(q, p));
      CHECK((v >= 0.0 && v <= 1.0));
    }
  }

  TEST_CASE("letterbox") {
    const auto l = metrics::letterbox(720, 1160, 640, 1024);
    CHECK(l.scale == doctest::Approx(0.88276).epsilon(1e-5));
    CHECK(l.content_width == 636);
    CHECK(l.content_height == 1024);
    CHECK(l.pad_right == 4);
    CHECK(l.pad_bottom == 0);
    const auto same = metrics::letterbox(300, 200, 300, 200);
    CHECK(same.scale == 1.0);
    CHECK(same.pad_right + same.pad_bottom == 0);
    Rng rng(73);
    for (int i = 0; i < 100; ++i) {
      const Point p{rng.uniform(0, 720), rng.uniform(0, 1160)};
      const Point q = l.inverse(l.forward(p));
      CHECK(std::abs(q.x - p.x) < 1e-9);
      CHECK(std::abs(q.y - p.y) < 1e-9);
    }
    CHECK_THROWS_AS(metrics::letterbox(0, 10, 10, 10), ValidationError);
  }

  TEST_CASE("detection precision") {
    const metrics::EvalConfig cfg{0.5, false, false};
    const std::vector<metrics::ImageEval> perfect{image({{{0, 0, 10, 10}, 0.9, ""}}, {{{0, 0, 10, 10}, ""}})};
    CHECK(metrics::eval_detection(perfect, cfg).precision == 1.0);

    // Second prediction shifted by a full box width.
    const std::vector<metrics::ImageEval> half{
        image({{{0, 0, 10, 10}, 0.9, ""}, {{30, 0, 40, 10}, 0.8, ""}}, {{{0, 0, 10, 10}, ""}, {{20, 0, 30, 10}, ""}})};
    const auto m = metrics::eval_detection(half, cfg);
    CHECK(m.precision == 0.5);
    CHECK(m.recall == 0.5);

    const std::vector<metrics::ImageEval> empty{image({}, {{{0, 0, 10, 10}, ""}})};
    const auto e = metrics::eval_detection(empty, cfg);
    CHECK_FALSE(e.precision_defined);
    CHECK(e.precision == 0.0);

    const std::vector<metrics::ImageEval> no_gt{image({{{0, 0, 10, 10}, 0.9, ""}}, {})};
    CHECK(metrics::eval_detection(no_gt, cfg).precision == 0.0);

    // A duplicate prediction cannot match the same ground truth twice.
    const std::vector<metrics::ImageEval> dup{
        image({{{0, 0, 10, 10}, 0.9, ""}, {{0, 0, 10, 10}, 0.8, ""}}, {{{0, 0, 10, 10}, ""}})};
    CHECK(metrics::eval_detection(dup, cfg).precision == 0.5);

    metrics::EvalConfig bad = cfg;
    bad.iou_threshold = 1.0;
    CHECK_THROWS_AS(metrics::eval_detection(perfect, bad), ValidationError);
  }

  TEST_CASE("one prediction per image keeps the best, raster-first on ties") {
    const metrics::EvalConfig cfg{0.5, true, false};
    const std::vector<metrics::ImageEval> imgs{
        image({{{50, 0, 60, 10}, 0.9, ""}, {{0, 0, 10, 10}, 0.9, ""}, {{0, 20, 10, 30}, 0.5, ""}},
              {{{0, 0, 10, 10}, ""}})};
    const auto m = metrics::eval_detection(imgs, cfg);
    CHECK(m.predictions == 1);
    CHECK(m.precision == 1.0);
    CHECK_FALSE(m.recall_defined);
  }

  TEST_CASE("end-to-end accuracy") {
    const metrics::EvalConfig cfg{0.7, false, true};
    const std::vector<metrics::ImageEval> wrong_text{image({{{0, 0, 10, 10}, 0.9, "AB1"}}, {{{0, 0, 10, 10}, "AB2"}})};
    CHECK(metrics::eval_e2e(wrong_text, cfg).accuracy == 0.0);
    // IoU 0.69 < 0.7 with the right text.
    const double x2 = 10.0 * 0.69;
    const std::vector<metrics::ImageEval> low{image({{{0, 0, x2, 10}, 0.9, "AB1"}}, {{{0, 0, 10, 10}, "AB1"}})};
    CHECK(metrics::iou({0, 0, x2, 10}, {0, 0, 10, 10}) == doctest::Approx(0.69));
    CHECK(metrics::eval_e2e(low, cfg).accuracy == 0.0);
    const std::vector<metrics::ImageEval> ok{image({{{0, 0, 10, 10}, 0.9, "AB1"}}, {{{0, 0, 10, 10}, "AB1"}})};
    CHECK(metrics::eval_e2e(ok, cfg).accuracy == 1.0);
  }

  TEST_CASE("metrics ignore list order") {
    Rng rng(74);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<metrics::Prediction> preds;
      std::vector<metrics::GroundTruth> gts;
      for (int i = 0; i < 6; ++i) {
        const double x = rng.uniform(0, 50), y = rng.uniform(0, 50);
        gts.push_back({{x, y, x + 10, y + 10}, std::string(1, static_cast<char>('A' + rng.below(2)))});
        const double dx = rng.uniform(-4, 4);
        preds.push_back({{x + dx, y, x + dx + 10, y + 10}, static_cast<double>(rng.below(3)) / 2.0,
                         std::string(1, static_cast<char>('A' + rng.below(2)))});
      }
      const metrics::EvalConfig cfg{0.5, trial % 2 == 0, true};
      const std::vector<metrics::ImageEval> a{image(preds, gts)};
      std::reverse(preds.begin(), preds.end());
      std::rotate(gts.begin(), gts.begin() + 2, gts.end());
      const std::vector<metrics::ImageEval> b{image(preds, gts)};
      CHECK(metrics::eval_detection(a, cfg).correct == metrics::eval_detection(b, cfg).correct);
      CHECK(metrics::eval_e2e(a, cfg).correct == metrics::eval_e2e(b, cfg).correct);
    }
  }
}

TEST_SUITE("fixtures") {
  TEST_CASE("generation is deterministic") {
    for (auto d : {fixtures::Difficulty::axis_aligned, fixtures::Difficulty::rotated, fixtures::Difficulty::tilted}) {
      const auto a = fixtures::gen_fixtures(3, 99, d), b = fixtures::gen_fixtures(3, 99, d);
      for (std::size_t i = 0; i < 3; ++i) {
        CHECK(bit_identical(a[i].image, b[i].image));
        CHECK(a[i].annotations.front().text == b[i].annotations.front().text);
      }
      CHECK(fixtures::fixtures_to_json(a) == fixtures::fixtures_to_json(b));
    }
    const auto da = scratch("fx-a"), db = scratch("fx-b");
    fixtures::write_fixtures(da, fixtures::gen_fixtures(2, 5, fixtures::Difficulty::tilted));
    fixtures::write_fixtures(db, fixtures::gen_fixtures(2, 5, fixtures::Difficulty::tilted));
    CHECK(slurp(da / "images.ptar") == slurp(db / "images.ptar"));
    CHECK(slurp(da / "annotations.json") == slurp(db / "annotations.json"));
    std::filesystem::remove_all(da);
    std::filesystem::remove_all(db);
  }

  TEST_CASE("axis-aligned corners are the box corners") {
    for (const auto& s : fixtures::gen_fixtures(10, 3, fixtures::Difficulty::axis_aligned)) {
      const auto& p = s.annotations.front();
      CHECK(p.corners[0] == Point{p.box.x1, p.box.y1});
      CHECK(p.corners[1] == Point{p.box.x2, p.box.y1});
      CHECK(p.corners[2] == Point{p.box.x1, p.box.y2});
      CHECK(p.corners[3] == Point{p.box.x2, p.box.y2});
      CHECK(p.box.width() == 96.0);
      CHECK(p.box.height() == 32.0);
    }
  }

  TEST_CASE("warped corners are the stored homography applied to the plate frame") {
    for (auto d : {fixtures::Difficulty::rotated, fixtures::Difficulty::tilted}) {
      for (const auto& s : fixtures::gen_fixtures(10, 4, d)) {
        const auto& p = s.annotations.front();
        const Quad frame = fixtures::plate_frame();
        for (std::size_t k = 0; k < 4; ++k) {
          const auto& m = s.warp.matrix();
          const double w = m[6] * frame[k].x + m[7] * frame[k].y + m[8];
          CHECK(p.corners[k].x == doctest::Approx((m[0] * frame[k].x + m[1] * frame[k].y + m[2]) / w).epsilon(1e-12));
          CHECK(p.corners[k].y == doctest::Approx((m[3] * frame[k].x + m[4] * frame[k].y + m[5]) / w).epsilon(1e-12));
          CHECK((p.corners[k].x >= 0 && p.corners[k].x <= 192 && p.corners[k].y >= 0 && p.corners[k].y <= 128));
        }
        CHECK(p.text.size() == 7);
      }
    }
  }

  TEST_CASE("rendering and glyphs") {
    const auto s = fixtures::gen_fixtures(1, 8, fixtures::Difficulty::axis_aligned).front();
    const auto& box = s.annotations.front().box;
    // Plate paper is 0.9, glyph ink 0.1, background noise below 0.4.
    const auto x1 = static_cast<std::size_t>(box.x1), y1 = static_cast<std::size_t>(box.y1);
    CHECK(s.image.at(0, 0, y1 + 1, x1 + 1) == doctest::Approx(0.9f));
    std::size_t ink = 0;
    for (std::size_t y = y1; y < y1 + 32; ++y)
      for (std::size_t x = x1; x < x1 + 96; ++x) ink += s.image.at(0, 0, y, x) == 0.1f;
    CHECK(ink > 50);
    if (y1 > 0) CHECK(s.image.at(0, 0, y1 - 1, x1) < 0.4f);
    CHECK(fixtures::glyph_rows('0')[0] == 0x0E);
    CHECK(fixtures::glyph_rows('Z')[6] == 0x1F);
    CHECK_THROWS_AS(fixtures::glyph_rows('a'), ValidationError);
    CHECK_THROWS_AS(fixtures::gen_fixtures(0, 1, fixtures::Difficulty::rotated), ValidationError);
    CHECK_THROWS_AS(fixtures::parse_difficulty("sideways"), ValidationError);
  }
}

TEST_SUITE("json") {
  TEST_CASE("annotations round trip") {
    const auto scenes = fixtures::gen_fixtures(3, 12, fixtures::Difficulty::tilted);
    const auto ann = fixtures::to_annotations(scenes);
    const auto back = annotations_from_json(json::parse(annotations_to_json(ann).dump()));
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(back[i].id == ann[i].id);
      CHECK(back[i].plates.front().box == ann[i].plates.front().box);
      CHECK(back[i].plates.front().corners == ann[i].plates.front().corners);
      CHECK(back[i].plates.front().text == ann[i].plates.front().text);
    }
  }

  TEST_CASE("detections round trip") {
    Detection d;
    d.box = {1, 2, 3, 4};
    d.score = 0.75;
    d.corners = {Point{1, 2}, Point{3, 2}, Point{1, 4}, Point{3, 4}};
    d.corner_source[2] = CornerSource::peak;
    d.text = "A1";
    const std::vector<ImageDetections> dets{{"7", 16, 16, {d}}};
    const auto back = detections_from_json(json::parse(detections_to_json(dets).dump()));
    REQUIRE(back.size() == 1);
    CHECK(back[0].detections[0].box == d.box);
    CHECK(back[0].detections[0].corner_source[2] == CornerSource::peak);
    CHECK(back[0].detections[0].corner_source[0] == CornerSource::regressed_fallback);
    CHECK(back[0].detections[0].text == "A1");
  }

  TEST_CASE("alphabet and rules documents") {
    const auto a = alphabet_from_json(json::parse(R"({"tokens":["A","B","1"]})"));
    CHECK(a.classes() == 4);
    CHECK(alphabet_from_json(json::parse(R"(["x","y"])")).size() == 2);
    const auto rules = rules_from_json(json::parse(R"({"lengths":[3],"positions":{"0":["A","B"]}})"), a);
    CHECK(rules.allowed_lengths == std::set<std::size_t>{3});
    CHECK(rules.positions.at(0) == std::set<int>{0, 1});
    CHECK_THROWS_AS(rules_from_json(json::parse(R"({"positions":{"0":["Q"]}})"), a), ValidationError);
    CHECK_THROWS_AS(rules_from_json(json::parse(R"({"positions":{"0":[]}})"), a), ValidationError);
    CHECK_THROWS_AS(annotations_from_json(json::parse(R"({"images":[{"id":"a","width":4}]})")), ValidationError);
    CHECK_THROWS_AS(annotations_from_json(json::parse(R"([1,2])")), ValidationError);
  }
}

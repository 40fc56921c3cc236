#include <doctest.h>

#include "lpr/error.hpp"
#include "lpr/fusion.hpp"
#include "lpr/random.hpp"

using namespace lpr;
using namespace lpr::fusion;

namespace {

Tensor constant(std::size_t b, std::size_t c, std::size_t h, std::size_t w, float v) {
  return Tensor::nchw(b, c, h, w, v);
}

}  // namespace

TEST_SUITE("fusion") {
  TEST_CASE("constant pyramid levels follow the closed-form weighted averages") {
    // Dyadic inputs keep every intermediate exactly representable.
    const float a2 = 1.0f, a3 = 2.0f, a4 = 4.0f, a5 = 8.0f;
    const Pyramid p = build_pyramid(constant(2, 3, 16, 24, a2), constant(2, 3, 8, 12, a3),
                                    constant(2, 3, 4, 6, a4), constant(2, 3, 2, 3, a5));
    const float p5 = a5;
    const float p4 = 0.5f * a4 + 0.5f * a5;
    const float p3 = 0.5f * a3 + 0.25f * a4 + 0.25f * a5;
    const float p2 = 0.5f * a2 + 0.25f * a3 + 0.125f * a4 + 0.125f * a5;
    for (float v : p.p5.data()) CHECK(v == p5);
    for (float v : p.p4.data()) CHECK(v == p4);
    for (float v : p.p3.data()) CHECK(v == p3);
    for (float v : p.p2.data()) CHECK(v == p2);
    CHECK(p.p2.shape_string() == "2x3x16x24");
  }

  TEST_CASE("top-down step is an elementwise average with the upsampled coarser level") {
    Rng rng(21);
    Tensor c4 = Tensor::nchw(1, 2, 4, 4), c5 = Tensor::nchw(1, 2, 2, 2);
    for (float& v : c4.data()) v = static_cast<float>(rng.uniform());
    for (float& v : c5.data()) v = static_cast<float>(rng.uniform());
    const Pyramid p = build_pyramid(Tensor::nchw(1, 2, 16, 16), Tensor::nchw(1, 2, 8, 8), c4, c5);
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t x = 0; x < 4; ++x)
          CHECK(p.p4.at(0, c, y, x) == 0.5f * c4.at(0, c, y, x) + 0.5f * c5.at(0, c, y / 2, x / 2));
  }

  TEST_CASE("concatenation layout and fused map shape") {
    const Pyramid p{constant(1, 128, 8, 12, 1), constant(1, 128, 4, 6, 2), constant(1, 128, 2, 3, 3),
                    constant(1, 128, 1, 2, 4)};
    CHECK_THROWS_AS(concat_pyramid(p), ValidationError);  // 1x2 upsampled by 8 is not 8x12

    const Pyramid q{constant(1, 128, 8, 16, 1), constant(1, 128, 4, 8, 2), constant(1, 128, 2, 4, 3),
                    constant(1, 128, 1, 2, 4)};
    const Tensor cat = concat_pyramid(q);
    CHECK(cat.shape_string() == "1x512x8x16");
    CHECK(cat.at(0, 0, 7, 15) == 1.0f);
    CHECK(cat.at(0, 128, 7, 15) == 2.0f);
    CHECK(cat.at(0, 256, 0, 0) == 3.0f);
    CHECK(cat.at(0, 511, 3, 9) == 4.0f);
  }

  TEST_CASE("full fusion yields B x 128 x H/4 x W/4") {
    const StandInBackbone backbone(5, 1, {8, 16, 24, 32});
    const Tensor image = random_image(9, 2, 64, 96);
    const BackboneStages stages = backbone.forward(image);
    CHECK(stages.c2.shape_string() == "2x8x16x24");
    CHECK(stages.c3.shape_string() == "2x16x8x12");
    CHECK(stages.c4.shape_string() == "2x24x4x6");
    CHECK(stages.c5.shape_string() == "2x32x2x3");
    const auto weights = FusionWeights::random(3, backbone.widths());
    const PyramidFeatures f = run_fusion(stages, weights);
    CHECK(f.shared.shape_string() == "2x128x16x24");
    for (float v : f.shared.data()) CHECK(v >= 0.0f);  // ReLU output
    CHECK_THROWS_AS(backbone.forward(random_image(1, 1, 60, 96)), ValidationError);
  }

  TEST_CASE("stage validation and archive loading") {
    BackboneStages s{Tensor::nchw(1, 4, 16, 16), Tensor::nchw(1, 4, 8, 8), Tensor::nchw(1, 4, 4, 4),
                     Tensor::nchw(1, 4, 2, 3)};
    CHECK_THROWS_AS(validate_stages(s), ValidationError);
    s.c5 = Tensor::nchw(2, 4, 2, 2);
    CHECK_THROWS_AS(validate_stages(s), ValidationError);
    s.c5 = Tensor::nchw(1, 4, 2, 2);
    CHECK_NOTHROW(validate_stages(s));

    PtarArchive a;
    a.add("c2", s.c2);
    a.add("c3", s.c3);
    a.add("c5", s.c5);
    CHECK_THROWS_WITH_AS(load_backbone_features(a), "backbone: missing stage c4", ValidationError);
    a.add("c4", s.c4);
    CHECK(load_backbone_features(a).c4.shape_string() == "1x4x4x4");
  }

  TEST_CASE("fusion weights round-trip through an archive") {
    const auto w = FusionWeights::random(17, {8, 16, 24, 32});
    PtarArchive a;
    w.to_archive(a);
    CHECK(a.contains("reduce2.weight"));
    CHECK(a.contains("fuse_conv.bn_scale"));
    const auto back = FusionWeights::from_archive(a);
    for (std::size_t i = 0; i < 4; ++i) CHECK(bit_identical(back.reduce[i].weights, w.reduce[i].weights));
    CHECK(back.fuse_conv.bias == w.fuse_conv.bias);
    CHECK(back.fuse_conv.padding == 1);
  }
}

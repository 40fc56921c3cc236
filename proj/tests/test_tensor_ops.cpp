#include <doctest.h>

#include <cmath>

#include "lpr/error.hpp"
#include "lpr/ops.hpp"
#include "lpr/random.hpp"
#include "lpr/tensor.hpp"
#include "oracles.hpp"

using namespace lpr;

namespace {

Tensor random_tensor(Rng& rng, std::vector<std::size_t> dims, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(dims));
  for (float& v : t.data()) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

// Direct definition: out[o,y,x] = sum_{c,ky,kx} w * in(y*s+ky-p, x*s+kx-p), zero outside.
Tensor naive_conv(const Tensor& x, const ConvSpec& s) {
  const long H = static_cast<long>(x.height()), W = static_cast<long>(x.width());
  const long P = static_cast<long>(s.padding), S = static_cast<long>(s.stride);
  const long OH = (H + 2 * P - static_cast<long>(s.kernel_h)) / S + 1;
  const long OW = (W + 2 * P - static_cast<long>(s.kernel_w)) / S + 1;
  Tensor out = Tensor::nchw(x.batch(), s.out_channels, static_cast<std::size_t>(OH), static_cast<std::size_t>(OW));
  for (std::size_t b = 0; b < x.batch(); ++b)
    for (std::size_t o = 0; o < s.out_channels; ++o)
      for (long oy = 0; oy < OH; ++oy)
        for (long ox = 0; ox < OW; ++ox) {
          double acc = 0.0;
          for (std::size_t c = 0; c < s.in_channels; ++c)
            for (long ky = 0; ky < static_cast<long>(s.kernel_h); ++ky)
              for (long kx = 0; kx < static_cast<long>(s.kernel_w); ++kx) {
                const long iy = oy * S + ky - P, ix = ox * S + kx - P;
                if (iy < 0 || ix < 0 || iy >= H || ix >= W) continue;
                acc += static_cast<double>(s.weights.at(o, c, static_cast<std::size_t>(ky), static_cast<std::size_t>(kx))) *
                       static_cast<double>(x.at(b, c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)));
              }
          double v = acc + s.bias[o];
          if (s.fused_bn) v = v * s.fused_bn->scale[o] + s.fused_bn->shift[o];
          out.at(b, o, static_cast<std::size_t>(oy), static_cast<std::size_t>(ox)) = static_cast<float>(v);
        }
  return out;
}

}  // namespace

TEST_SUITE("tensor") {
  TEST_CASE("construction and indexing") {
    Tensor t = Tensor::nchw(2, 3, 4, 5, 1.5f);
    CHECK(t.size() == 120);
    CHECK(t.shape_string() == "2x3x4x5");
    t.at(1, 2, 3, 4) = 7.0f;
    CHECK(t.data()[119] == 7.0f);
    CHECK(t.offset(1, 0, 0, 0) == 60);
    CHECK(t.plane(1, 2).size() == 20);
    CHECK_THROWS_AS(Tensor({2, 2}, std::vector<float>(3)), ValidationError);
    CHECK_THROWS_AS(Tensor({}, 0.0f), ValidationError);
    CHECK_THROWS_AS(Tensor({1, 1, 1, 1, 1}), ValidationError);
    CHECK_THROWS_AS(Tensor({3}).batch(), ValidationError);
  }

  TEST_CASE("slicing and reshaping copy the right elements") {
    Rng rng(1);
    const Tensor t = random_tensor(rng, {3, 4, 2, 2});
    const Tensor c = t.slice_channels(1, 2);
    CHECK(c.shape_string() == "3x2x2x2");
    CHECK(c.at(2, 1, 1, 0) == t.at(2, 2, 1, 0));
    const Tensor b = t.slice_batch(2, 1);
    CHECK(b.at(0, 3, 1, 1) == t.at(2, 3, 1, 1));
    CHECK_THROWS_AS(t.slice_channels(3, 2), ValidationError);
    CHECK(t.reshaped({48}).data()[47] == t.data()[47]);
    CHECK_THROWS_AS(t.reshaped({47}), ValidationError);
  }

  TEST_CASE("bit_identical distinguishes signed zeros") {
    Tensor a({2}, 0.0f), b({2}, 0.0f);
    CHECK(bit_identical(a, b));
    b.data()[1] = -0.0f;
    CHECK(a == b);
    CHECK_FALSE(bit_identical(a, b));
  }

  TEST_CASE("conv2d matches the direct definition") {
    Rng rng(2);
    for (int trial = 0; trial < 40; ++trial) {
      const std::size_t in = 1 + rng.below(5), out = 1 + rng.below(6);
      const std::size_t kh = 1 + rng.below(3), kw = 1 + rng.below(3);
      const std::size_t stride = 1 + rng.below(2), pad = rng.below(2);
      const std::size_t h = kh + rng.below(9), w = kw + rng.below(13);
      ConvSpec spec = random_conv(in, out, kh, kw, stride, pad, rng.below(2) == 1, rng.next());
      if (spec.fused_bn) {
        for (float& s : spec.fused_bn->scale) s = static_cast<float>(rng.uniform(0.5, 2.0));
        for (float& s : spec.fused_bn->shift) s = static_cast<float>(rng.uniform(-1, 1));
      }
      const Tensor x = random_tensor(rng, {1 + rng.below(2), in, h, w});
      const Tensor got = conv2d(x, spec);
      const Tensor want = naive_conv(x, spec);
      REQUIRE(got.same_shape(want));
      for (std::size_t i = 0; i < got.size(); ++i) CHECK(got.data()[i] == doctest::Approx(want.data()[i]).epsilon(1e-6));
    }
  }

  TEST_CASE("conv2d errors") {
    ConvSpec spec = make_conv(2, 3, 3, 3, 1, 0, false);
    CHECK_THROWS_WITH_AS(conv2d(Tensor::nchw(1, 3, 5, 5), spec), doctest::Contains("channels"), ValidationError);
    CHECK_THROWS_WITH_AS(conv2d(Tensor::nchw(1, 2, 2, 5), spec), doctest::Contains("kernel larger"), ValidationError);
    spec.bias.pop_back();
    CHECK_THROWS_AS(conv2d(Tensor::nchw(1, 2, 5, 5), spec), ValidationError);
  }

  TEST_CASE("maxpool2d matches window maxima") {
    Rng rng(3);
    const Tensor x = random_tensor(rng, {2, 3, 9, 11});
    const Tensor y = maxpool2d(x, 2, 2);
    CHECK(y.shape_string() == "2x3x4x5");
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < 4; ++i)
          for (std::size_t j = 0; j < 5; ++j) {
            const float m = std::max({x.at(b, c, 2 * i, 2 * j), x.at(b, c, 2 * i, 2 * j + 1),
                                      x.at(b, c, 2 * i + 1, 2 * j), x.at(b, c, 2 * i + 1, 2 * j + 1)});
            CHECK(y.at(b, c, i, j) == m);
          }
    CHECK_THROWS_WITH_AS(maxpool2d(Tensor::nchw(1, 1, 1, 4), 2, 2), doctest::Contains("window exceeds"),
                         ValidationError);
  }

  TEST_CASE("upsample then subsample is the identity") {
    Rng rng(4);
    const Tensor x = random_tensor(rng, {1, 2, 3, 4});
    for (std::size_t f : {1u, 2u, 3u, 8u}) {
      const Tensor up = upsample_nearest(x, f);
      CHECK(up.height() == 3 * f);
      CHECK(up.width() == 4 * f);
      for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t y = 0; y < 3 * f; ++y)
          for (std::size_t xx = 0; xx < 4 * f; ++xx) CHECK(up.at(0, c, y, xx) == x.at(0, c, y / f, xx / f));
    }
    CHECK_THROWS_AS(upsample_nearest(x, 0), ValidationError);
  }

  TEST_CASE("concat and weighted sum") {
    Rng rng(5);
    const Tensor a = random_tensor(rng, {2, 2, 3, 3}), b = random_tensor(rng, {2, 3, 3, 3});
    const Tensor ab[] = {a, b};
    const Tensor c = concat_channels(ab);
    CHECK(c.channels() == 5);
    CHECK(c.at(1, 4, 2, 1) == b.at(1, 2, 2, 1));
    CHECK(c.at(1, 1, 0, 2) == a.at(1, 1, 0, 2));
    const Tensor bad[] = {a, Tensor::nchw(2, 1, 4, 3)};
    CHECK_THROWS_AS(concat_channels(bad), ValidationError);

    const Tensor s = weighted_sum(a, 0.25f, a, 0.75f);
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(s.data()[i] == doctest::Approx(a.data()[i]));
    CHECK_THROWS_AS(weighted_sum(a, 1, b, 1), ValidationError);
  }

  TEST_CASE("activations") {
    Rng rng(6);
    const Tensor x = random_tensor(rng, {2, 5, 3, 3}, -4, 4);
    const Tensor r = activation(x, Activation::relu);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(r.data()[i] == std::max(0.0f, x.data()[i]));
    const Tensor sg = activation(x, Activation::sigmoid);
    CHECK(sg.data()[0] == doctest::Approx(1.0 / (1.0 + std::exp(-x.data()[0]))));
    const Tensor sm = activation(x, Activation::softmax_over_channels);
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t i = 0; i < 9; ++i) {
        double s = 0;
        for (std::size_t c = 0; c < 5; ++c) s += sm.plane(b, c)[i];
        CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
      }
  }

  TEST_CASE("bilinear sampling reproduces affine functions and clamps at borders") {
    Tensor x = Tensor::nchw(1, 2, 6, 7);
    for (std::size_t y = 0; y < 6; ++y)
      for (std::size_t xx = 0; xx < 7; ++xx) {
        x.at(0, 0, y, xx) = static_cast<float>(0.5 * y + 0.25 * xx);
        x.at(0, 1, y, xx) = static_cast<float>(y * 7 + xx);
      }
    Rng rng(7);
    std::vector<SamplePoint> pts;
    for (int i = 0; i < 50; ++i) pts.push_back({rng.uniform(0, 5), rng.uniform(0, 6)});
    const auto v = bilinear_sample(x, 0, pts);
    REQUIRE(v.size() == 100);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      CHECK(v[2 * i] == doctest::Approx(0.5 * pts[i].y + 0.25 * pts[i].x).epsilon(1e-6));
      CHECK(v[2 * i + 1] == doctest::Approx(7 * pts[i].y + pts[i].x).epsilon(1e-6));
    }
    // Integer points hit pixels exactly; outside points clamp to the border.
    const SamplePoint edge[] = {{2, 3}, {-5, -5}, {100, 100}};
    const auto e = bilinear_sample(x, 0, edge);
    CHECK(e[1] == x.at(0, 1, 2, 3));
    CHECK(e[3] == x.at(0, 1, 0, 0));
    CHECK(e[5] == x.at(0, 1, 5, 6));
  }
}

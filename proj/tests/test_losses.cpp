#include <doctest.h>

#include <cmath>
#include <limits>

#include "lpr/ctc.hpp"
#include "lpr/error.hpp"
#include "lpr/losses.hpp"
#include "lpr/random.hpp"
#include "oracles.hpp"

using namespace lpr;

namespace {

double norm_relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
}

std::vector<double> log_of(const std::vector<double>& p) {
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = std::log(p[i]);
  return out;
}

}  // namespace

TEST_SUITE("ctc") {
  TEST_CASE("worked examples") {
    // T = 1, p(a) = 0.7: log-probabilities in, loss = -ln 0.7.
    const std::vector<double> one = log_of({0.7, 0.2, 0.1});
    auto r = ctc::ctc_loss<double>(one, 1, 3, std::vector<int>{0}, 2);
    CHECK(r.loss == doctest::Approx(0.3567).epsilon(1e-4));

    const std::vector<double> uniform(6, 0.0);
    r = ctc::ctc_loss<double>(uniform, 2, 3, std::vector<int>{0}, 2);
    CHECK(r.loss == doctest::Approx(std::log(3.0)).epsilon(1e-12));

    r = ctc::ctc_loss<double>(uniform, 2, 3, std::vector<int>{0, 0}, 2);
    CHECK_FALSE(r.feasible);
    CHECK(std::isinf(r.loss));
    for (double g : r.grad) CHECK(g == 0.0);

    CHECK(ctc::required_frames(std::vector<int>{1, 1, 2, 2, 2}) == 8);
    CHECK_THROWS_AS(ctc::ctc_loss<double>(uniform, 2, 3, std::vector<int>{2}, 2), ValidationError);
    CHECK_THROWS_AS(ctc::ctc_loss<double>(uniform, 3, 3, std::vector<int>{0}, 2), ValidationError);
  }

  TEST_CASE("loss equals minus log of the brute-force path sum") {
    Rng rng(61);
    for (int trial = 0; trial < 150; ++trial) {
      const std::size_t steps = 1 + rng.below(5), classes = 2 + rng.below(3);
      const int blank = static_cast<int>(classes) - 1;
      const auto probs = oracle::random_probs(rng, steps, classes);
      const auto label = oracle::random_feasible_label(rng, steps, classes, blank);
      const double want = -std::log(oracle::ctc_path_sum(probs, steps, classes, label, blank));
      const auto got = ctc::ctc_loss<double>(log_of(probs), steps, classes, label, blank);
      CHECK(got.feasible);
      CHECK(std::abs(got.loss - want) < 1e-9);
      const recog::LogProbTable table{steps, classes, log_of(probs)};
      CHECK(std::abs(ctc::ctc_neg_log_likelihood(table, label, blank) - want) < 1e-9);
    }
  }

  TEST_CASE("probabilities of all labelings sum to at most one") {
    Rng rng(62);
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t steps = 1 + rng.below(4), classes = 2 + rng.below(2);
      const int blank = static_cast<int>(classes) - 1;
      const auto probs = oracle::random_probs(rng, steps, classes);
      double total = 0.0;
      for (const auto& [label, mass] : oracle::labeling_masses(probs, steps, classes, blank)) {
        total += std::exp(-ctc::ctc_loss<double>(log_of(probs), steps, classes, label, blank).loss);
      }
      CHECK(total <= 1.0 + 1e-9);
      CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    }
  }

  TEST_CASE("gradient matches central differences (double and float)") {
    Rng rng(63);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t steps = 1 + rng.below(8), classes = 2 + rng.below(5);
      const int blank = static_cast<int>(classes) - 1;
      std::vector<double> logits(steps * classes);
      for (double& v : logits) v = rng.normal();
      const auto label = oracle::random_feasible_label(rng, steps, classes, blank);
      const auto r = ctc::ctc_loss<double>(logits, steps, classes, label, blank);
      std::vector<double> fd(logits.size());
      auto f = [&](const std::vector<double>& x) { return ctc::ctc_loss<double>(x, steps, classes, label, blank).loss; };
      for (std::size_t i = 0; i < logits.size(); ++i) fd[i] = oracle::central_difference(f, logits, i, 1e-5);
      CHECK(norm_relative_error(r.grad, fd) < 1e-6);

      std::vector<float> lf(logits.begin(), logits.end());
      const auto rf = ctc::ctc_loss<float>(lf, steps, classes, label, blank);
      std::vector<double> gf(rf.grad.begin(), rf.grad.end());
      std::vector<double> fdf(lf.size());
      auto ff = [&](const std::vector<double>& x) {
        const std::vector<float> xf(x.begin(), x.end());
        return ctc::ctc_loss<float>(xf, steps, classes, label, blank).loss;
      };
      const std::vector<double> ld(lf.begin(), lf.end());
      for (std::size_t i = 0; i < lf.size(); ++i) fdf[i] = oracle::central_difference(ff, ld, i, 1e-2);
      CHECK(norm_relative_error(gf, fdf) < 1e-3);
    }
  }

  TEST_CASE("gradient rows sum to zero for logits") {
    Rng rng(64);
    std::vector<double> logits(6 * 4);
    for (double& v : logits) v = rng.normal();
    const auto r = ctc::ctc_loss<double>(logits, 6, 4, std::vector<int>{0, 1, 1}, 3);
    for (std::size_t t = 0; t < 6; ++t) {
      double s = 0;
      for (std::size_t k = 0; k < 4; ++k) s += r.grad[t * 4 + k];
      CHECK(std::abs(s) < 1e-12);
    }
  }
}

TEST_SUITE("losses") {
  TEST_CASE("focal loss worked examples") {
    std::vector<double> pred(16, 1e-6), target(16, 0.0);
    target[5] = 1.0;
    pred[5] = 1.0 - 1e-6;
    CHECK(losses::focal_loss<double>(pred, target).value < 1e-4);
    pred[5] = 0.5;
    CHECK(losses::focal_loss<double>(pred, target).value == doctest::Approx(-std::log(0.5) * 0.25).epsilon(1e-6));

    // No positives: the negative branch, unnormalised.
    std::vector<double> p2{0.2, 0.4}, t2{0.5, 0.0};
    const double want = -std::log(0.8) * 0.04 * std::pow(0.5, 4) - std::log(0.6) * 0.16;
    CHECK(losses::focal_loss<double>(p2, t2).value == doctest::Approx(want).epsilon(1e-12));
    CHECK_THROWS_AS(losses::focal_loss<double>(p2, std::vector<double>{1.0}), ValidationError);
  }

  TEST_CASE("focal gradient matches central differences") {
    Rng rng(65);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 4 + rng.below(60);
      std::vector<double> pred(n), target(n);
      for (std::size_t i = 0; i < n; ++i) {
        pred[i] = rng.uniform(0.02, 0.98);
        const auto kind = rng.below(4);
        target[i] = kind == 0 ? 1.0 : (kind == 1 ? 0.0 : rng.uniform(0, 0.99));
      }
      const auto r = losses::focal_loss<double>(pred, target);
      auto f = [&](const std::vector<double>& x) { return losses::focal_loss<double>(x, target).value; };
      std::vector<double> fd(n);
      for (std::size_t i = 0; i < n; ++i) fd[i] = oracle::central_difference(f, pred, i, 1e-6);
      CHECK(norm_relative_error(r.grad, fd) < 1e-6);

      const std::vector<float> pf(pred.begin(), pred.end()), tf(target.begin(), target.end());
      const auto rf = losses::focal_loss<float>(pf, tf);
      CHECK(norm_relative_error(std::vector<double>(rf.grad.begin(), rf.grad.end()), r.grad) < 1e-3);
    }
  }

  TEST_CASE("L1 loss worked examples") {
    const std::vector<double> pred{1, 6}, target{2, 4};
    const std::vector<std::uint8_t> mask{1, 1};
    const auto r = losses::l1_loss<double>(pred, target, mask, 2);
    CHECK(r.value == 1.5);
    CHECK(r.grad == std::vector<double>{-0.5, 0.5});
    const auto tie = losses::l1_loss<double>(target, target, mask, 2);
    CHECK(tie.value == 0.0);
    CHECK(tie.grad == std::vector<double>{0.0, 0.0});
    const std::vector<std::uint8_t> none{0, 0};
    CHECK_THROWS_AS(losses::l1_loss<double>(pred, target, none, 1), ValidationError);
    CHECK_THROWS_AS(losses::l1_loss<double>(pred, target, mask, 0), ValidationError);
    CHECK(losses::l1_loss<double>(pred, target, none, 0).value == 0.0);
  }

  TEST_CASE("L1 gradient matches central differences away from ties") {
    Rng rng(66);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 2 + rng.below(40);
      std::vector<double> pred(n), target(n);
      std::vector<std::uint8_t> mask(n);
      std::size_t count = 0;
      for (std::size_t i = 0; i < n; ++i) {
        target[i] = rng.uniform(-5, 5);
        const double gap = rng.uniform(0.01, 2.0);
        pred[i] = target[i] + (rng.below(2) ? gap : -gap);
        mask[i] = rng.below(3) != 0;
        count += mask[i];
      }
      if (count == 0) mask[0] = 1, count = 1;
      const auto r = losses::l1_loss<double>(pred, target, mask, count);
      auto f = [&](const std::vector<double>& x) { return losses::l1_loss<double>(x, target, mask, count).value; };
      std::vector<double> fd(n);
      for (std::size_t i = 0; i < n; ++i) fd[i] = oracle::central_difference(f, pred, i, 1e-4);
      CHECK(norm_relative_error(r.grad, fd) < 1e-6);
    }
  }

  TEST_CASE("detection loss composition") {
    std::vector<PlateAnnotation> plates{
        {{16, 16, 80, 48}, {Point{16, 16}, Point{80, 16}, Point{16, 48}, Point{80, 48}}, ""}};
    const auto t = heatmap::encode_targets(plates, 128, 96);
    auto ideal = t.maps;
    for (Tensor* heat : {&ideal.center_heat, &ideal.corner_heat})
      for (float& v : heat->data()) v = v == 1.0f ? 1.0f : 0.0f;
    CHECK(losses::detection_loss(ideal, t).total < 1e-3);

    // Centre offsets wrong by 1.0 on both channels of the single masked cell.
    auto off = ideal;
    for (std::size_t i = 0; i < t.center_mask.size(); ++i) {
      if (!t.center_mask[i]) continue;
      off.center_off.data()[i] += 1.0f;
      off.center_off.data()[i + t.center_mask.size()] += 1.0f;
    }
    const auto l = losses::detection_loss(off, t);
    CHECK(l.center_off == doctest::Approx(1.0));
    CHECK(l.total == doctest::Approx(0.05 + losses::detection_loss(ideal, t).total));
    const auto zero_beta = losses::detection_loss(off, t, {10.0, 0.0});
    CHECK(zero_beta.total == doctest::Approx(losses::detection_loss(ideal, t).total));
    CHECK_THROWS_AS(losses::detection_loss(off, t, {10.0, -1.0}), ValidationError);
  }

  TEST_CASE("total loss") {
    losses::DetectionLoss d;
    d.total = 1.0;
    const double half[] = {0.5};
    CHECK(losses::total_loss(d, half).total == doctest::Approx(6.0));
    CHECK(losses::total_loss(d, half, {0.0, 0.05}).total == 1.0);
    CHECK(losses::total_loss(d, {}).total == 1.0);
    const double mixed[] = {0.5, std::numeric_limits<double>::infinity(), 1.5};
    const auto r = losses::total_loss(d, mixed);
    CHECK(r.recognition == doctest::Approx(1.0));
    CHECK(r.infeasible_plates == 1);
    const double infeasible[] = {std::numeric_limits<double>::infinity()};
    const auto none = losses::total_loss(d, infeasible);
    CHECK_FALSE(none.has_recognition);
    CHECK(none.total == 1.0);
  }
}

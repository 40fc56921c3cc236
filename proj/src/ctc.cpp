#include "lpr/ctc.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "lpr/error.hpp"
#include "lpr/logmath.hpp"

namespace lpr::ctc {

std::size_t required_frames(std::span<const int> label) {
  std::size_t n = label.size();
  for (std::size_t i = 1; i < label.size(); ++i) {
    if (label[i] == label[i - 1]) ++n;
  }
  return n;
}

namespace {

void check_label(std::span<const int> label, std::size_t classes, int blank) {
  require(blank >= 0 && static_cast<std::size_t>(blank) < classes, "ctc: blank index out of range");
  for (int l : label) {
    require(l >= 0 && static_cast<std::size_t>(l) < classes && l != blank,
            "ctc: label index " + std::to_string(l) + " out of range or blank");
  }
}

struct Lattice {
  std::vector<int> ext;  // blank-interleaved label, length 2L+1
  std::vector<double> alpha, beta;
  double log_likelihood = kNegInf;
};

// alpha and beta both include the emission at their own frame.
Lattice forward_backward(const std::vector<double>& lp, std::size_t T, std::size_t K, std::span<const int> label,
                         int blank) {
  Lattice g;
  g.ext.reserve(2 * label.size() + 1);
  g.ext.push_back(blank);
  for (int l : label) {
    g.ext.push_back(l);
    g.ext.push_back(blank);
  }
  const std::size_t S = g.ext.size();
  g.alpha.assign(T * S, kNegInf);
  g.beta.assign(T * S, kNegInf);
  const auto emit = [&](std::size_t t, std::size_t s) { return lp[t * K + static_cast<std::size_t>(g.ext[s])]; };
  const auto can_skip = [&](std::size_t s) { return s >= 2 && g.ext[s] != blank && g.ext[s] != g.ext[s - 2]; };

  g.alpha[0] = emit(0, 0);
  if (S > 1) g.alpha[1] = emit(0, 1);
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t s = 0; s < S; ++s) {
      double a = g.alpha[(t - 1) * S + s];
      if (s >= 1) a = log_add(a, g.alpha[(t - 1) * S + s - 1]);
      if (can_skip(s)) a = log_add(a, g.alpha[(t - 1) * S + s - 2]);
      g.alpha[t * S + s] = a == kNegInf ? kNegInf : a + emit(t, s);
    }
  }
  g.beta[(T - 1) * S + S - 1] = emit(T - 1, S - 1);
  if (S > 1) g.beta[(T - 1) * S + S - 2] = emit(T - 1, S - 2);
  for (std::size_t t = T - 1; t-- > 0;) {
    for (std::size_t s = 0; s < S; ++s) {
      double b = g.beta[(t + 1) * S + s];
      if (s + 1 < S) b = log_add(b, g.beta[(t + 1) * S + s + 1]);
      if (s + 2 < S && can_skip(s + 2)) b = log_add(b, g.beta[(t + 1) * S + s + 2]);
      g.beta[t * S + s] = b == kNegInf ? kNegInf : b + emit(t, s);
    }
  }
  g.log_likelihood = g.alpha[(T - 1) * S + S - 1];
  if (S > 1) g.log_likelihood = log_add(g.log_likelihood, g.alpha[(T - 1) * S + S - 2]);
  return g;
}

}  // namespace

template <std::floating_point T>
CtcResult<T> ctc_loss(std::span<const T> logits, std::size_t steps, std::size_t classes, std::span<const int> label,
                      int blank) {
  require(steps >= 1 && classes >= 2, "ctc: needs at least one frame and two classes");
  require(logits.size() == steps * classes, "ctc: logits size does not match steps x classes");
  check_label(label, classes, blank);

  CtcResult<T> r;
  r.grad.assign(steps * classes, T(0));
  if (required_frames(label) > steps) {
    r.loss = std::numeric_limits<double>::infinity();
    r.feasible = false;
    return r;
  }

  std::vector<double> lp(steps * classes);
  for (std::size_t t = 0; t < steps; ++t) {
    double m = kNegInf;
    for (std::size_t k = 0; k < classes; ++k) m = std::max(m, static_cast<double>(logits[t * classes + k]));
    double sum = 0.0;
    for (std::size_t k = 0; k < classes; ++k) sum += std::exp(static_cast<double>(logits[t * classes + k]) - m);
    const double lse = m + std::log(sum);
    for (std::size_t k = 0; k < classes; ++k) lp[t * classes + k] = static_cast<double>(logits[t * classes + k]) - lse;
  }

  const Lattice g = forward_backward(lp, steps, classes, label, blank);
  r.loss = -g.log_likelihood;
  if (g.log_likelihood == kNegInf) {
    r.feasible = false;
    return r;
  }
  const std::size_t S = g.ext.size();
  std::vector<double> occupancy(classes);
  for (std::size_t t = 0; t < steps; ++t) {
    std::fill(occupancy.begin(), occupancy.end(), kNegInf);
    for (std::size_t s = 0; s < S; ++s) {
      const double ab = g.alpha[t * S + s] + g.beta[t * S + s];
      if (ab == kNegInf) continue;
      auto& o = occupancy[static_cast<std::size_t>(g.ext[s])];
      o = log_add(o, ab);
    }
    for (std::size_t k = 0; k < classes; ++k) {
      const double post = occupancy[k] == kNegInf
                              ? 0.0
                              : std::exp(occupancy[k] - lp[t * classes + k] - g.log_likelihood);
      r.grad[t * classes + k] = static_cast<T>(std::exp(lp[t * classes + k]) - post);
    }
  }
  return r;
}

double ctc_neg_log_likelihood(const recog::LogProbTable& table, std::span<const int> label, int blank) {
  check_label(label, table.classes, blank);
  if (required_frames(label) > table.steps) return std::numeric_limits<double>::infinity();
  return -forward_backward(table.values, table.steps, table.classes, label, blank).log_likelihood;
}

template CtcResult<float> ctc_loss(std::span<const float>, std::size_t, std::size_t, std::span<const int>, int);
template CtcResult<double> ctc_loss(std::span<const double>, std::size_t, std::size_t, std::span<const int>, int);

}  // namespace lpr::ctc

#pragma once

#include <concepts>
#include <cstddef>
#include <span>
#include <vector>

#include "lpr/recognizer.hpp"

namespace lpr::ctc {

template <std::floating_point T>
struct CtcResult {
  double loss = 0.0;     // -ln P(label | x); +inf when infeasible
  std::vector<T> grad;   // d loss / d logits, steps x classes; zeros when infeasible
  bool feasible = true;
};

/// Minimum frames needed to emit the label: one per token plus a blank
/// between each pair of equal neighbours.
std::size_t required_frames(std::span<const int> label);

/// CTC negative log-likelihood of one item from unnormalized logits (T x K,
/// row-major), with gradient softmax - posterior occupancy. Probabilities can
/// be passed as their logarithms. Forward-backward runs in log space, double.
template <std::floating_point T>
CtcResult<T> ctc_loss(std::span<const T> logits, std::size_t steps, std::size_t classes, std::span<const int> label,
                      int blank);

/// -ln P(label | x) for a normalized log-probability table; no gradient.
double ctc_neg_log_likelihood(const recog::LogProbTable& table, std::span<const int> label, int blank);

extern template CtcResult<float> ctc_loss(std::span<const float>, std::size_t, std::size_t, std::span<const int>, int);
extern template CtcResult<double> ctc_loss(std::span<const double>, std::size_t, std::size_t, std::span<const int>,
                                           int);

}  // namespace lpr::ctc

#include "lpr/recognizer.hpp"

#include <algorithm>
#include <cmath>

#include "lpr/ctc.hpp"
#include "lpr/error.hpp"
#include "lpr/logmath.hpp"
#include "lpr/weights.hpp"

namespace lpr::recog {

Alphabet::Alphabet(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  require(!tokens_.empty(), "alphabet: needs at least one token");
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    require(!tokens_[i].empty(), "alphabet: empty token");
    require(index_.emplace(tokens_[i], static_cast<int>(i)).second, "alphabet: duplicate token '" + tokens_[i] + "'");
    longest_ = std::max(longest_, tokens_[i].size());
  }
}

Alphabet Alphabet::alphanumeric() {
  std::vector<std::string> t;
  for (char c = '0'; c <= '9'; ++c) t.emplace_back(1, c);
  for (char c = 'A'; c <= 'Z'; ++c) t.emplace_back(1, c);
  return Alphabet(std::move(t));
}

std::optional<int> Alphabet::index_of(std::string_view token) const {
  const auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Labels Alphabet::encode(std::string_view text) const {
  Labels out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    bool matched = false;
    for (std::size_t len = std::min(longest_, text.size() - pos); len >= 1; --len) {
      if (auto idx = index_of(text.substr(pos, len))) {
        out.push_back(*idx);
        pos += len;
        matched = true;
        break;
      }
    }
    if (!matched) fail("alphabet: text '" + std::string(text) + "' has an unknown token at byte " + std::to_string(pos));
  }
  return out;
}

std::string Alphabet::decode(std::span<const int> labels) const {
  std::string out;
  for (int l : labels) {
    require(l >= 0 && static_cast<std::size_t>(l) < tokens_.size(), "alphabet: label out of range");
    out += tokens_[static_cast<std::size_t>(l)];
  }
  return out;
}

LogProbTable LogProbTable::from_probabilities(std::span<const double> probs, std::size_t steps, std::size_t classes) {
  require(probs.size() == steps * classes, "log-prob table: size mismatch");
  LogProbTable t{steps, classes, std::vector<double>(probs.size())};
  for (std::size_t i = 0; i < probs.size(); ++i) t.values[i] = std::log(probs[i]);
  return t;
}

LogProbTable RecognitionOutput::item(std::size_t b) const {
  require(values.rank() == 3, "recognition output must be T x B x K");
  require(b < batch(), "recognition output: batch index out of range");
  const std::size_t T = steps(), B = batch(), K = classes();
  LogProbTable t{T, K, std::vector<double>(T * K)};
  const auto data = values.data();
  for (std::size_t s = 0; s < T; ++s) {
    const float* row = data.data() + (s * B + b) * K;
    double* dst = t.values.data() + s * K;
    if (probabilities) {
      for (std::size_t k = 0; k < K; ++k) dst[k] = std::log(static_cast<double>(row[k]));
    } else {
      double m = kNegInf;
      for (std::size_t k = 0; k < K; ++k) m = std::max(m, static_cast<double>(row[k]));
      double sum = 0.0;
      for (std::size_t k = 0; k < K; ++k) sum += std::exp(static_cast<double>(row[k]) - m);
      const double lse = m + std::log(sum);
      for (std::size_t k = 0; k < K; ++k) dst[k] = static_cast<double>(row[k]) - lse;
    }
  }
  return t;
}

RecognitionOutput softmax_output(const Tensor& logits) {
  require(logits.rank() == 3, "softmax_output: logits must be T x B x K");
  const std::size_t K = logits.dim(2);
  const std::size_t rows = logits.size() / K;
  RecognitionOutput out{Tensor(logits.dims()), true};
  const auto in = logits.data();
  auto dst = out.values.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double m = kNegInf;
    for (std::size_t k = 0; k < K; ++k) m = std::max(m, static_cast<double>(in[r * K + k]));
    double sum = 0.0;
    for (std::size_t k = 0; k < K; ++k) sum += std::exp(static_cast<double>(in[r * K + k]) - m);
    for (std::size_t k = 0; k < K; ++k) {
      dst[r * K + k] = static_cast<float>(std::exp(static_cast<double>(in[r * K + k]) - m) / sum);
    }
  }
  return out;
}

namespace {

std::array<ConvSpec, 5> head_geometry(std::size_t classes, const HeadConfig& c, bool random, std::uint64_t seed) {
  const auto make = [&](std::size_t in, std::size_t out, std::size_t kh, std::size_t kw, std::size_t pad,
                        bool bn, std::uint64_t offset) {
    return random ? random_conv(in, out, kh, kw, 1, pad, bn, seed + offset) : make_conv(in, out, kh, kw, 1, pad, bn);
  };
  return {make(c.in_channels, c.conv1, 3, 3, 1, true, 0), make(c.conv1, c.conv2, 3, 3, 1, true, 1),
          make(c.conv2, c.conv3, 3, 3, 1, true, 2), make(c.conv3, c.conv4, 8, 1, 0, false, 3),
          make(c.conv4, classes, 1, 1, 0, false, 4)};
}

}  // namespace

HeadWeights HeadWeights::random(std::uint64_t seed, std::size_t classes, const HeadConfig& config) {
  return {head_geometry(classes, config, true, seed)};
}

HeadWeights HeadWeights::zeros(std::size_t classes, const HeadConfig& config) {
  return {head_geometry(classes, config, false, 0)};
}

HeadWeights HeadWeights::from_archive(const PtarArchive& archive) {
  HeadWeights w;
  const std::array<std::size_t, 5> padding{1, 1, 1, 0, 0};
  for (std::size_t i = 0; i < 5; ++i) {
    w.convs[i] = conv_from_archive(archive, "conv" + std::to_string(i + 1), 1, padding[i]);
  }
  w.validate();
  return w;
}

void HeadWeights::to_archive(PtarArchive& archive) const {
  for (std::size_t i = 0; i < 5; ++i) conv_to_archive(archive, "conv" + std::to_string(i + 1), convs[i]);
}

void HeadWeights::validate() const {
  const std::array<std::pair<std::size_t, std::size_t>, 5> kernels{{{3, 3}, {3, 3}, {3, 3}, {8, 1}, {1, 1}}};
  for (std::size_t i = 0; i < 5; ++i) {
    convs[i].validate();
    require(convs[i].kernel_h == kernels[i].first && convs[i].kernel_w == kernels[i].second,
            "head: conv" + std::to_string(i + 1) + " has the wrong kernel size");
    if (i > 0) {
      require(convs[i].in_channels == convs[i - 1].out_channels,
              "head: conv" + std::to_string(i + 1) + " input channels do not match conv" + std::to_string(i));
    }
  }
  require(classes() >= 2, "head: needs at least two classes");
}

RecognitionOutput head_forward(const Tensor& crops, const HeadWeights& w) {
  w.validate();
  require(crops.rank() == 4 && crops.height() == 32 && crops.width() == 96,
          "head: crops must be B x C x 32 x 96, got " + crops.shape_string());
  Tensor x = conv2d(crops, w.convs[0]);
  relu_inplace(x);
  x = maxpool2d(x, 2, 2);  // 16 x 48
  x = conv2d(x, w.convs[1]);
  relu_inplace(x);
  x = maxpool2d(x, 2, 2);  // 8 x 24
  x = conv2d(x, w.convs[2]);
  relu_inplace(x);
  x = conv2d(x, w.convs[3]);  // 1 x 24
  relu_inplace(x);
  x = conv2d(x, w.convs[4]);
  const std::size_t B = x.batch(), K = x.channels(), T = x.width();
  Tensor logits({T, B, K});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t t = 0; t < T; ++t) logits.data()[(t * B + b) * K + k] = x.at(b, k, 0, t);
    }
  }
  return softmax_output(logits);
}

Labels greedy_decode(const LogProbTable& table, int blank) {
  Labels out;
  int prev = -1;
  for (std::size_t t = 0; t < table.steps; ++t) {
    const auto f = table.frame(t);
    const int best = static_cast<int>(std::max_element(f.begin(), f.end()) - f.begin());
    if (best != blank && best != prev) out.push_back(best);
    prev = best;
  }
  return out;
}

namespace {

struct Masses {
  double blank = kNegInf;      // paths ending in blank
  double non_blank = kNegInf;  // paths ending in the last label
  double total() const { return log_add(blank, non_blank); }
};

bool ranks_before(const Candidate& a, const Candidate& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  return a.labels < b.labels;
}

std::vector<Candidate> ranked(const std::map<Labels, Masses>& beams) {
  std::vector<Candidate> out;
  out.reserve(beams.size());
  for (const auto& [labels, m] : beams) out.push_back({labels, m.total()});
  std::sort(out.begin(), out.end(), ranks_before);
  return out;
}

}  // namespace

std::vector<Candidate> beam_search_decode(const LogProbTable& table, int blank, std::size_t beam_width,
                                          std::size_t n_best) {
  require(beam_width >= 1, "beam search: beam width must be >= 1");
  require(blank >= 0 && static_cast<std::size_t>(blank) < table.classes, "beam search: blank out of range");
  std::map<Labels, Masses> beams;
  beams[Labels{}] = Masses{0.0, kNegInf};

  for (std::size_t t = 0; t < table.steps; ++t) {
    const auto lp = table.frame(t);
    std::map<Labels, Masses> next;
    for (const auto& [prefix, m] : beams) {
      const double total = m.total();
      Masses& same = next[prefix];
      same.blank = log_add(same.blank, total + lp[static_cast<std::size_t>(blank)]);
      if (!prefix.empty()) {
        same.non_blank = log_add(same.non_blank, m.non_blank + lp[static_cast<std::size_t>(prefix.back())]);
      }
      for (std::size_t k = 0; k < table.classes; ++k) {
        const int c = static_cast<int>(k);
        if (c == blank) continue;
        Labels extended = prefix;
        extended.push_back(c);
        // A repeated label only extends paths that passed through a blank.
        const double source = (!prefix.empty() && prefix.back() == c) ? m.blank : total;
        Masses& e = next[extended];
        e.non_blank = log_add(e.non_blank, source + lp[k]);
      }
    }
    std::vector<Candidate> order = ranked(next);
    if (order.size() > beam_width) order.resize(beam_width);
    beams.clear();
    for (const Candidate& c : order) beams.emplace(c.labels, next[c.labels]);
  }

  // Final ranking uses the exact path sum of each surviving prefix, with the
  // greedy labeling added to the pool so the winner is never less probable.
  std::vector<Candidate> out;
  for (const auto& [labels, m] : beams) out.push_back({labels, -ctc::ctc_neg_log_likelihood(table, labels, blank)});
  Labels greedy = greedy_decode(table, blank);
  if (!beams.contains(greedy)) out.push_back({greedy, -ctc::ctc_neg_log_likelihood(table, greedy, blank)});
  std::sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
    return a.log_prob > b.log_prob || (a.log_prob == b.log_prob && a.labels < b.labels);
  });
  if (out.size() > n_best) out.resize(n_best);
  return out;
}

bool RuleSet::accepts(std::span<const int> labels) const {
  if (!allowed_lengths.empty() && !allowed_lengths.contains(labels.size())) return false;
  for (const auto& [pos, allowed] : positions) {
    if (pos < labels.size() && !allowed.contains(labels[pos])) return false;
  }
  return true;
}

RuleOutcome apply_rules(std::span<const Candidate> candidates, const RuleSet& rules) {
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (rules.accepts(candidates[i].labels)) return {candidates[i].labels, i, true};
  }
  if (candidates.empty()) return {};
  return {candidates.front().labels, 0, false};
}

}  // namespace lpr::recog

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lpr/ops.hpp"
#include "lpr/ptar.hpp"
#include "lpr/tensor.hpp"

namespace lpr::recog {

inline constexpr std::size_t kTimeSteps = 24;

using Labels = std::vector<int>;

/// Ordered character tokens; the CTC blank is the extra last class.
class Alphabet {
public:
  explicit Alphabet(std::vector<std::string> tokens);

  /// Digits then upper-case Latin letters.
  static Alphabet alphanumeric();

  std::size_t size() const noexcept { return tokens_.size(); }
  std::size_t classes() const noexcept { return tokens_.size() + 1; }
  int blank() const noexcept { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  const std::string& token(int index) const { return tokens_.at(static_cast<std::size_t>(index)); }

  std::optional<int> index_of(std::string_view token) const;
  /// Longest-match tokenization; throws ValidationError on an unknown character.
  Labels encode(std::string_view text) const;
  std::string decode(std::span<const int> labels) const;

private:
  std::vector<std::string> tokens_;
  std::map<std::string, int, std::less<>> index_;
  std::size_t longest_ = 0;
};

/// Per-item frame table in natural-log space, T x K row-major, double.
struct LogProbTable {
  std::size_t steps = 0;
  std::size_t classes = 0;
  std::vector<double> values;

  double operator()(std::size_t t, std::size_t k) const { return values[t * classes + k]; }
  std::span<const double> frame(std::size_t t) const {
    return std::span<const double>(values).subspan(t * classes, classes);
  }
  static LogProbTable from_probabilities(std::span<const double> probs, std::size_t steps, std::size_t classes);
};

/// Head output, T x B_r x K.
struct RecognitionOutput {
  Tensor values;
  bool probabilities = false;

  std::size_t steps() const { return values.dim(0); }
  std::size_t batch() const { return values.dim(1); }
  std::size_t classes() const { return values.dim(2); }

  /// Log-probabilities of item b (log-softmax when values are logits).
  LogProbTable item(std::size_t b) const;
};

/// T x B x K logits -> softmax over K.
RecognitionOutput softmax_output(const Tensor& logits);

struct HeadConfig {
  std::size_t in_channels = 128;
  std::size_t conv1 = 128;
  std::size_t conv2 = 128;
  std::size_t conv3 = 256;
  std::size_t conv4 = 256;
};

/// conv1 3x3+BN+ReLU, maxpool 2, conv2 3x3+BN+ReLU, maxpool 2, conv3 3x3+BN+ReLU,
/// conv4 8x1 valid+ReLU, conv5 1x1 -> K. Archive names conv1..conv5.
struct HeadWeights {
  std::array<ConvSpec, 5> convs;

  static HeadWeights random(std::uint64_t seed, std::size_t classes, const HeadConfig& config = {});
  static HeadWeights zeros(std::size_t classes, const HeadConfig& config = {});
  static HeadWeights from_archive(const PtarArchive& archive);
  void to_archive(PtarArchive& archive) const;
  std::size_t classes() const { return convs[4].out_channels; }
  void validate() const;
};

/// crops: B_r x C x 32 x 96 -> 24 x B_r x K probabilities.
RecognitionOutput head_forward(const Tensor& crops, const HeadWeights& weights);

/// Best path: per-frame argmax (lowest index on ties), merge repeats, drop blanks.
Labels greedy_decode(const LogProbTable& table, int blank);

struct Candidate {
  Labels labels;
  double log_prob = 0.0;  // ln P(labels | x), exact CTC path sum
};

/// CTC prefix beam search keeping blank- and non-blank-ending masses per
/// prefix. The surviving prefixes plus the greedy labeling are rescored by
/// their exact path sum; returns up to n_best by descending probability, ties
/// broken by lexicographic label order.
std::vector<Candidate> beam_search_decode(const LogProbTable& table, int blank, std::size_t beam_width = 10,
                                          std::size_t n_best = 5);

/// Length rule plus per-position allowed token subsets. Empty parts are vacuous.
struct RuleSet {
  std::set<std::size_t> allowed_lengths;
  std::map<std::size_t, std::set<int>> positions;

  bool accepts(std::span<const int> labels) const;
};

struct RuleOutcome {
  Labels labels;
  std::size_t candidate = 0;  // index into the candidate list
  bool verified = false;
};

/// First candidate satisfying the rules (verified), else the top candidate
/// (unverified). An empty list yields empty labels, unverified.
RuleOutcome apply_rules(std::span<const Candidate> candidates, const RuleSet& rules);

}  // namespace lpr::recog

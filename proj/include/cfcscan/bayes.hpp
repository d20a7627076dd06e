#pragma once

// Multinomial Naive Bayes over CFC token multisets.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cfcscan/cfc_features.hpp"
#include "cfcscan/stats.hpp"

namespace cfcscan {

// Raw tokens hold one displacement, n-gram tokens n of them, frequency tokens one count.
struct Token {
  std::vector<std::int64_t> values;

  static Token raw(std::int64_t displacement) { return Token{{displacement}}; }
  static Token gram(const NGram& g) { return Token{g.values}; }
  static Token frequency(std::uint64_t count) { return Token{{static_cast<std::int64_t>(count)}}; }

  // Values joined with ','.
  [[nodiscard]] std::string to_string() const;
  static Token parse(std::string_view text);

  auto operator<=>(const Token&) const = default;
};

using TokenBag = std::map<Token, std::uint64_t>;

std::uint64_t feature_count(const TokenBag& bag);

enum class FeatureKind { raw, ngram, frequency };

struct FeatureMode {
  FeatureKind kind = FeatureKind::raw;
  std::size_t n = 2;
  std::uint64_t lo = kDefaultBandLo;
  std::uint64_t hi = kDefaultBandHi;
  Selector selector = Selector::jcc();

  static FeatureMode raw_mode(Selector s = Selector::jcc());
  static FeatureMode ngram_mode(std::size_t n, Selector s = Selector::jcc());
  static FeatureMode frequency_mode(std::size_t n, std::uint64_t lo = kDefaultBandLo,
                                    std::uint64_t hi = kDefaultBandHi, Selector s = Selector::jcc());

  // "raw", "ngram:2", "frequency:2:10:50"; the selector is carried separately.
  [[nodiscard]] std::string to_string() const;
  static FeatureMode parse(std::string_view text, Selector s = Selector::jcc());

  bool operator==(const FeatureMode&) const = default;
};

TokenBag tokenize(const FeatureSet& fs, const FeatureMode& mode);

inline constexpr double kDefaultAlpha = 1.0;
inline constexpr std::uint64_t kDefaultMinFeatures = 5;

struct BayesModel {
  FeatureMode mode;
  double alpha = kDefaultAlpha;
  // Indexed by ClassLabel (goodware = 0, malware = 1).
  std::array<std::uint64_t, 2> sample_counts{};
  std::array<TokenBag, 2> token_counts;
  std::array<std::uint64_t, 2> class_totals{};
  std::uint64_t vocab_size = 0;

  [[nodiscard]] bool trained() const noexcept { return sample_counts[0] > 0 && sample_counts[1] > 0; }
  [[nodiscard]] double prior(ClassLabel c) const;
  // Smoothed (count + alpha) / (total + alpha * vocab).
  [[nodiscard]] double conditional(const Token& t, ClassLabel c) const;
  [[nodiscard]] double log_conditional(const Token& t, ClassLabel c) const;

  bool operator==(const BayesModel&) const = default;
};

// Throws EmptyClass when either list is empty, InvalidArgument unless alpha > 0.
BayesModel train(std::span<const TokenBag> good, std::span<const TokenBag> bad, double alpha = kDefaultAlpha,
                 const FeatureMode& mode = {});

enum class VerdictLabel { good, bad, abstain };

const char* to_string(VerdictLabel label) noexcept;

struct Verdict {
  SampleId sample_id;
  double log_likelihood_good = 0.0;
  double log_likelihood_bad = 0.0;
  double prob_good = 0.5;
  double prob_bad = 0.5;
  std::uint64_t feature_count = 0;
  VerdictLabel label = VerdictLabel::abstain;
};

// Ties go to good. Throws UntrainedModel.
Verdict classify(const BayesModel& model, const TokenBag& tokens, SampleId id = {},
                 std::uint64_t min_features = kDefaultMinFeatures);

struct LabeledSample {
  SampleId id;
  ClassLabel label = ClassLabel::goodware;
  TokenBag tokens;
};

// Malware is the positive class.
struct Evaluation {
  std::vector<Verdict> verdicts;
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;
  std::uint64_t abstained = 0;

  // Over decided samples; 0 when none were decided.
  [[nodiscard]] double accuracy() const;
};

Evaluation evaluate(const BayesModel& model, std::span<const LabeledSample> samples,
                    std::uint64_t min_features = kDefaultMinFeatures);

// exp(log_l) as "%.2E" with a three-digit exponent ("1.85E-028"), or "0" when it underflows.
std::string format_likelihood(double log_l);

enum class ReportFormat { table, csv, records };

ReportFormat parse_report_format(std::string_view text);

// Columns: filename, prob. good, prob. bad, length of data, posterior good, posterior bad, label.
void write_verdicts(std::ostream& out, std::span<const Verdict> verdicts, ReportFormat format);

}  // namespace cfcscan

#pragma once

// Descriptive statistics over displacement lists and Spearman's rank correlation.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cfcscan {

enum class ClassLabel { goodware, malware };

const char* to_string(ClassLabel label) noexcept;
ClassLabel parse_class_label(std::string_view text);

enum class SignMode { magnitude, signed_values };

struct SampleStats {
  double spread = 0.0;
  double variance = 0.0;
  double median = 0.0;
  std::optional<double> median_over_spread;
  std::optional<double> variance_coefficient;
  std::uint64_t frequency = 0;

  // Reported as "Scatter".
  [[nodiscard]] double stddev() const;
};

// Population statistics. Magnitude mode works on |d|. Throws EmptyInput.
SampleStats sample_stats(std::span<const std::int64_t> displacements, SignMode mode = SignMode::magnitude);

struct CorpusSummary {
  ClassLabel label = ClassLabel::goodware;
  std::uint64_t sample_count = 0;
  double spread = 0.0;
  double variance = 0.0;
  double scatter = 0.0;
  double median = 0.0;
  // Absent when every sample had it undefined.
  std::optional<double> median_over_spread;
  std::optional<double> variance_coefficient;
  double frequency = 0.0;
  std::uint64_t median_over_spread_excluded = 0;
  std::uint64_t variance_coefficient_excluded = 0;
};

// Field-wise arithmetic means. Throws EmptyInput.
CorpusSummary corpus_summary(std::span<const SampleStats> samples, ClassLabel label);

struct RhoResult {
  double rho = 0.0;
  std::uint64_t n_pairs = 0;
  std::optional<double> p_value;
};

// Average ranks (1-based) with ties sharing the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);

// Pearson correlation of average ranks; two-sided t-approximation p-value when n >= 10.
// Throws LengthMismatch, or DegenerateInput for n < 2 or an all-tied list.
RhoResult spearman_rho(std::span<const double> x, std::span<const double> y);

// Linear-interpolated quantile of a sorted list at q in [0, 1].
double quantile_sorted(std::span<const double> sorted, double q);

// Sorts both lists, resamples each to K = min(|good|, |bad|) quantile points
// at i / (K - 1), then correlates the pairs.
RhoResult corpus_correlation(std::span<const double> good, std::span<const double> bad);

// Which per-sample statistic a corpus comparison runs over.
enum class StatField { spread, scatter, variance, median, median_over_spread, variance_coefficient, frequency };

const char* to_string(StatField field) noexcept;
StatField parse_stat_field(std::string_view text);
// Missing when the statistic is undefined for that sample.
std::optional<double> stat_value(const SampleStats& s, StatField field);

struct TableRow {
  std::string name;
  std::optional<double> good;
  std::optional<double> bad;
};

// Rows: Spread, Scatter, Medians, Medians/Spread, Variance Coefficient, Frequencies, Variance.
std::vector<TableRow> summary_table(const CorpusSummary& good, const CorpusSummary& bad);

}  // namespace cfcscan

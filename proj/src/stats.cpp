#include "cfcscan/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "cfcscan/error.hpp"

namespace cfcscan {

const char* to_string(ClassLabel label) noexcept {
  return label == ClassLabel::goodware ? "goodware" : "malware";
}

ClassLabel parse_class_label(std::string_view text) {
  if (text == "goodware" || text == "good") return ClassLabel::goodware;
  if (text == "malware" || text == "bad") return ClassLabel::malware;
  throw Error(ErrorCode::InvalidArgument, "unknown class label '" + std::string(text) + "'");
}

double SampleStats::stddev() const { return std::sqrt(variance); }

SampleStats sample_stats(std::span<const std::int64_t> displacements, SignMode mode) {
  if (displacements.empty()) throw Error(ErrorCode::EmptyInput, "no displacements");
  std::vector<double> v;
  v.reserve(displacements.size());
  for (auto d : displacements) {
    const auto x = static_cast<double>(d);
    v.push_back(mode == SignMode::magnitude ? std::fabs(x) : x);
  }
  std::sort(v.begin(), v.end());

  SampleStats s;
  s.frequency = v.size();
  s.spread = v.back() - v.front();
  const std::size_t mid = v.size() / 2;
  s.median = v.size() % 2 ? v[mid] : (v[mid - 1] + v[mid]) / 2.0;

  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  s.variance = ss / static_cast<double>(v.size());

  if (s.spread != 0.0) s.median_over_spread = s.median / s.spread;
  if (mean != 0.0) s.variance_coefficient = std::sqrt(s.variance) / mean;
  return s;
}

CorpusSummary corpus_summary(std::span<const SampleStats> samples, ClassLabel label) {
  if (samples.empty()) throw Error(ErrorCode::EmptyInput, "corpus summary over zero samples");
  CorpusSummary c;
  c.label = label;
  c.sample_count = samples.size();
  double mos = 0.0, vc = 0.0;
  std::uint64_t mos_n = 0, vc_n = 0;
  for (const auto& s : samples) {
    c.spread += s.spread;
    c.variance += s.variance;
    c.scatter += s.stddev();
    c.median += s.median;
    c.frequency += static_cast<double>(s.frequency);
    if (s.median_over_spread) {
      mos += *s.median_over_spread;
      ++mos_n;
    }
    if (s.variance_coefficient) {
      vc += *s.variance_coefficient;
      ++vc_n;
    }
  }
  const auto n = static_cast<double>(samples.size());
  c.spread /= n;
  c.variance /= n;
  c.scatter /= n;
  c.median /= n;
  c.frequency /= n;
  if (mos_n) c.median_over_spread = mos / static_cast<double>(mos_n);
  if (vc_n) c.variance_coefficient = vc / static_cast<double>(vc_n);
  c.median_over_spread_excluded = samples.size() - mos_n;
  c.variance_coefficient_excluded = samples.size() - vc_n;
  return c;
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

RhoResult spearman_rho(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(ErrorCode::LengthMismatch,
                "rank correlation over lists of length " + std::to_string(x.size()) + " and " + std::to_string(y.size()));
  }
  if (x.size() < 2) throw Error(ErrorCode::DegenerateInput, "rank correlation needs at least 2 pairs");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double dx = rx[i] - mean;
    const double dy = ry[i] - mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::DegenerateInput, "all values tied; rank correlation undefined");

  RhoResult r;
  r.n_pairs = x.size();
  r.rho = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  if (x.size() >= 10) {
    const double df = n - 2.0;
    if (std::fabs(r.rho) >= 1.0) {
      r.p_value = 0.0;
    } else {
      const double t = r.rho * std::sqrt(df / (1.0 - r.rho * r.rho));
      boost::math::students_t dist(df);
      r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
    }
  }
  return r;
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw Error(ErrorCode::EmptyInput, "quantile of empty list");
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

namespace {

// Quantile i / (k - 1) of a sorted list, with the position kept as an exact fraction
// so that equal order statistics stay exactly equal after resampling.
double resample_point(const std::vector<double>& sorted, std::size_t i, std::size_t k) {
  const std::size_t num = i * (sorted.size() - 1);
  const std::size_t lo = num / (k - 1);
  const std::size_t rem = num % (k - 1);
  if (rem == 0) return sorted[lo];
  const double frac = static_cast<double>(rem) / static_cast<double>(k - 1);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

RhoResult corpus_correlation(std::span<const double> good, std::span<const double> bad) {
  if (good.empty() || bad.empty()) throw Error(ErrorCode::EmptyInput, "corpus correlation needs both corpora");
  std::vector<double> g(good.begin(), good.end());
  std::vector<double> b(bad.begin(), bad.end());
  std::sort(g.begin(), g.end());
  std::sort(b.begin(), b.end());
  const std::size_t k = std::min(g.size(), b.size());
  if (k < 2) throw Error(ErrorCode::DegenerateInput, "rank correlation needs at least 2 pairs");
  std::vector<double> qg(k), qb(k);
  for (std::size_t i = 0; i < k; ++i) {
    qg[i] = resample_point(g, i, k);
    qb[i] = resample_point(b, i, k);
  }
  return spearman_rho(qg, qb);
}

const char* to_string(StatField field) noexcept {
  switch (field) {
    case StatField::spread: return "spread";
    case StatField::scatter: return "scatter";
    case StatField::variance: return "variance";
    case StatField::median: return "median";
    case StatField::median_over_spread: return "median_over_spread";
    case StatField::variance_coefficient: return "variance_coefficient";
    case StatField::frequency: return "frequency";
  }
  return "?";
}

StatField parse_stat_field(std::string_view text) {
  for (auto f : {StatField::spread, StatField::scatter, StatField::variance, StatField::median,
                 StatField::median_over_spread, StatField::variance_coefficient, StatField::frequency}) {
    if (text == to_string(f)) return f;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown statistic '" + std::string(text) + "'");
}

std::optional<double> stat_value(const SampleStats& s, StatField field) {
  switch (field) {
    case StatField::spread: return s.spread;
    case StatField::scatter: return s.stddev();
    case StatField::variance: return s.variance;
    case StatField::median: return s.median;
    case StatField::median_over_spread: return s.median_over_spread;
    case StatField::variance_coefficient: return s.variance_coefficient;
    case StatField::frequency: return static_cast<double>(s.frequency);
  }
  return std::nullopt;
}

std::vector<TableRow> summary_table(const CorpusSummary& good, const CorpusSummary& bad) {
  return {
      {"Spread", good.spread, bad.spread},
      {"Scatter", good.scatter, bad.scatter},
      {"Medians", good.median, bad.median},
      {"Medians/Spread", good.median_over_spread, bad.median_over_spread},
      {"Variance Coefficient", good.variance_coefficient, bad.variance_coefficient},
      {"Frequencies", good.frequency, bad.frequency},
      {"Variance", good.variance, bad.variance},
  };
}

}  // namespace cfcscan

#include "cfcscan/bayes.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "cfcscan/error.hpp"
#include "json.hpp"

namespace cfcscan {

namespace {

std::size_t idx(ClassLabel c) { return c == ClassLabel::goodware ? 0 : 1; }

std::uint64_t parse_u64(std::string_view s, std::string_view what) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw Error(ErrorCode::InvalidArgument, "bad " + std::string(what) + " '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string fixed10(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10f", v);
  return buf;
}

}  // namespace

std::string Token::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(values[i]);
  }
  return out;
}

Token Token::parse(std::string_view text) {
  Token t;
  for (auto part : split(text, ',')) {
    std::int64_t v = 0;
    const auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (part.empty() || ec != std::errc{} || p != part.data() + part.size()) {
      throw Error(ErrorCode::Malformed, "bad token '" + std::string(text) + "'");
    }
    t.values.push_back(v);
  }
  return t;
}

std::uint64_t feature_count(const TokenBag& bag) {
  std::uint64_t n = 0;
  for (const auto& [t, c] : bag) n += c;
  return n;
}

FeatureMode FeatureMode::raw_mode(Selector s) {
  FeatureMode m;
  m.kind = FeatureKind::raw;
  m.selector = std::move(s);
  return m;
}

FeatureMode FeatureMode::ngram_mode(std::size_t n, Selector s) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "n-gram length must be >= 1");
  FeatureMode m;
  m.kind = FeatureKind::ngram;
  m.n = n;
  m.selector = std::move(s);
  return m;
}

FeatureMode FeatureMode::frequency_mode(std::size_t n, std::uint64_t lo, std::uint64_t hi, Selector s) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "n-gram length must be >= 1");
  if (lo < 1 || lo > hi) throw Error(ErrorCode::InvalidArgument, "frequency band needs 1 <= lo <= hi");
  FeatureMode m;
  m.kind = FeatureKind::frequency;
  m.n = n;
  m.lo = lo;
  m.hi = hi;
  m.selector = std::move(s);
  return m;
}

std::string FeatureMode::to_string() const {
  switch (kind) {
    case FeatureKind::raw: return "raw";
    case FeatureKind::ngram: return "ngram:" + std::to_string(n);
    case FeatureKind::frequency: {
      std::string hi_text = hi == kUnboundedBand ? "inf" : std::to_string(hi);
      return "frequency:" + std::to_string(n) + ":" + std::to_string(lo) + ":" + hi_text;
    }
  }
  return "?";
}

FeatureMode FeatureMode::parse(std::string_view text, Selector s) {
  const auto parts = split(text, ':');
  if (parts[0] == "raw" && parts.size() == 1) return raw_mode(std::move(s));
  if (parts[0] == "ngram" && parts.size() == 2) return ngram_mode(parse_u64(parts[1], "n"), std::move(s));
  if (parts[0] == "frequency" && (parts.size() == 2 || parts.size() == 4)) {
    const auto n = parse_u64(parts[1], "n");
    if (parts.size() == 2) return frequency_mode(n, kDefaultBandLo, kDefaultBandHi, std::move(s));
    const auto hi = parts[3] == "inf" ? kUnboundedBand : parse_u64(parts[3], "band hi");
    return frequency_mode(n, parse_u64(parts[2], "band lo"), hi, std::move(s));
  }
  throw Error(ErrorCode::InvalidArgument, "unknown feature mode '" + std::string(text) + "'");
}

TokenBag tokenize(const FeatureSet& fs, const FeatureMode& mode) {
  TokenBag bag;
  switch (mode.kind) {
    case FeatureKind::raw:
      for (auto d : displacement_sequence(fs, mode.selector)) ++bag[Token::raw(d)];
      break;
    case FeatureKind::ngram:
      for (const auto& [g, c] : sample_histogram(fs, mode.n, mode.selector).counts) bag[Token::gram(g)] += c;
      break;
    case FeatureKind::frequency: {
      const auto band = frequency_band(sample_histogram(fs, mode.n, mode.selector), mode.lo, mode.hi);
      for (const auto& [g, c] : band.counts) ++bag[Token::frequency(c)];
      break;
    }
  }
  return bag;
}

double BayesModel::prior(ClassLabel c) const {
  const auto total = sample_counts[0] + sample_counts[1];
  if (total == 0) throw Error(ErrorCode::UntrainedModel, "model has no training samples");
  return static_cast<double>(sample_counts[idx(c)]) / static_cast<double>(total);
}

double BayesModel::conditional(const Token& t, ClassLabel c) const { return std::exp(log_conditional(t, c)); }

double BayesModel::log_conditional(const Token& t, ClassLabel c) const {
  const auto& counts = token_counts[idx(c)];
  const auto it = counts.find(t);
  const double count = it == counts.end() ? 0.0 : static_cast<double>(it->second);
  const double denom = static_cast<double>(class_totals[idx(c)]) + alpha * static_cast<double>(vocab_size);
  return std::log(count + alpha) - std::log(denom);
}

BayesModel train(std::span<const TokenBag> good, std::span<const TokenBag> bad, double alpha,
                 const FeatureMode& mode) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw Error(ErrorCode::InvalidArgument, "alpha must be > 0");
  if (good.empty()) throw Error(ErrorCode::EmptyClass, "no goodware training samples");
  if (bad.empty()) throw Error(ErrorCode::EmptyClass, "no malware training samples");
  BayesModel m;
  m.mode = mode;
  m.alpha = alpha;
  m.sample_counts = {good.size(), bad.size()};
  for (std::size_t c = 0; c < 2; ++c) {
    for (const auto& bag : c == 0 ? good : bad) {
      for (const auto& [t, n] : bag) {
        if (n == 0) continue;
        m.token_counts[c][t] += n;
        m.class_totals[c] += n;
      }
    }
  }
  std::uint64_t vocab = m.token_counts[0].size();
  for (const auto& [t, n] : m.token_counts[1]) vocab += m.token_counts[0].contains(t) ? 0 : 1;
  m.vocab_size = vocab;
  return m;
}

const char* to_string(VerdictLabel label) noexcept {
  switch (label) {
    case VerdictLabel::good: return "good";
    case VerdictLabel::bad: return "bad";
    case VerdictLabel::abstain: return "abstain";
  }
  return "?";
}

Verdict classify(const BayesModel& model, const TokenBag& tokens, SampleId id, std::uint64_t min_features) {
  if (!model.trained()) throw Error(ErrorCode::UntrainedModel, "classify called on an untrained model");
  Verdict v;
  v.sample_id = std::move(id);
  double lg = std::log(model.prior(ClassLabel::goodware));
  double lb = std::log(model.prior(ClassLabel::malware));
  for (const auto& [t, n] : tokens) {
    const auto k = static_cast<double>(n);
    lg += k * model.log_conditional(t, ClassLabel::goodware);
    lb += k * model.log_conditional(t, ClassLabel::malware);
  }
  v.log_likelihood_good = lg;
  v.log_likelihood_bad = lb;
  const double m = std::max(lg, lb);
  const double log_z = m + std::log(std::exp(lg - m) + std::exp(lb - m));
  v.prob_good = std::exp(lg - log_z);
  v.prob_bad = std::exp(lb - log_z);
  v.feature_count = feature_count(tokens);
  if (v.feature_count < min_features) {
    v.label = VerdictLabel::abstain;
  } else {
    v.label = lb > lg ? VerdictLabel::bad : VerdictLabel::good;
  }
  return v;
}

double Evaluation::accuracy() const {
  const auto decided = tp + fp + tn + fn;
  return decided == 0 ? 0.0 : static_cast<double>(tp + tn) / static_cast<double>(decided);
}

Evaluation evaluate(const BayesModel& model, std::span<const LabeledSample> samples, std::uint64_t min_features) {
  Evaluation e;
  for (const auto& s : samples) {
    auto v = classify(model, s.tokens, s.id, min_features);
    const bool actual_bad = s.label == ClassLabel::malware;
    switch (v.label) {
      case VerdictLabel::abstain: ++e.abstained; break;
      case VerdictLabel::bad: ++(actual_bad ? e.tp : e.fp); break;
      case VerdictLabel::good: ++(actual_bad ? e.fn : e.tn); break;
    }
    e.verdicts.push_back(std::move(v));
  }
  return e;
}

std::string format_likelihood(double log_l) {
  const double v = std::exp(log_l);
  if (v == 0.0 || !std::isnormal(v)) return "0";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2E", v);
  std::string s = buf;
  const auto e = s.find('E');
  std::string digits = s.substr(e + 2);
  while (digits.size() < 3) digits.insert(digits.begin(), '0');
  return s.substr(0, e + 2) + digits;
}

ReportFormat parse_report_format(std::string_view text) {
  if (text == "table") return ReportFormat::table;
  if (text == "csv") return ReportFormat::csv;
  if (text == "records") return ReportFormat::records;
  throw Error(ErrorCode::InvalidArgument, "unknown output format '" + std::string(text) + "'");
}

void write_verdicts(std::ostream& out, std::span<const Verdict> verdicts, ReportFormat format) {
  if (format == ReportFormat::records) {
    for (const auto& v : verdicts) {
      nlohmann::ordered_json j;
      j["filename"] = v.sample_id.name;
      j["sha256"] = v.sample_id.content_hash;
      j["log_likelihood_good"] = v.log_likelihood_good;
      j["log_likelihood_bad"] = v.log_likelihood_bad;
      j["posterior_good"] = v.prob_good;
      j["posterior_bad"] = v.prob_bad;
      j["length_of_data"] = v.feature_count;
      j["label"] = to_string(v.label);
      out << j.dump() << '\n';
    }
    return;
  }
  const char sep = format == ReportFormat::csv ? ',' : '\t';
  auto field = [&](const std::string& s) {
    if (format != ReportFormat::csv || s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  };
  const char* header[] = {"filename", "prob. good", "prob. bad", "length of data", "posterior good", "posterior bad",
                          "label"};
  for (std::size_t i = 0; i < std::size(header); ++i) out << (i ? std::string(1, sep) : "") << header[i];
  out << '\n';
  for (const auto& v : verdicts) {
    out << field(v.sample_id.name) << sep << format_likelihood(v.log_likelihood_good) << sep
        << format_likelihood(v.log_likelihood_bad) << sep << v.feature_count << sep << fixed10(v.prob_good) << sep
        << fixed10(v.prob_bad) << sep << to_string(v.label) << '\n';
  }
}

}  // namespace cfcscan

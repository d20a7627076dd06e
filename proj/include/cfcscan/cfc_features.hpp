#pragma once

// Per-sample CFC feature structure, displacement n-grams and their histograms.

#include <compare>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "cfcscan/disasm_x86.hpp"
#include "cfcscan/pe_loader.hpp"

namespace cfcscan {

struct SampleId {
  std::string name;
  // Lowercase hex SHA-256 of the sample's bytes.
  std::string content_hash;

  // "name@hash"; unique key inside a corpus.
  [[nodiscard]] std::string key() const { return name + "@" + content_hash; }
  auto operator<=>(const SampleId&) const = default;
};

struct CfcEvent {
  // Index into FeatureSet::section_meta.
  std::uint32_t section = 0;
  std::uint32_t address = 0;
  std::int64_t displacement = 0;

  auto operator<=>(const CfcEvent&) const = default;
};

struct OpcodeEvents {
  std::uint64_t frequency = 0;
  std::vector<CfcEvent> events;

  bool operator==(const OpcodeEvents&) const = default;
};

struct SectionMeta {
  SectionTag name{};
  std::uint32_t rva = 0;
  double entropy = 0.0;
  // Decoded instruction count.
  std::uint64_t line_count = 0;

  bool operator==(const SectionMeta&) const = default;
};

struct FeatureSet {
  SampleId sample_id;
  std::map<OpcodeId, OpcodeEvents> per_opcode;
  std::vector<SectionMeta> section_meta;

  [[nodiscard]] std::uint64_t event_count() const;
  bool operator==(const FeatureSet&) const = default;
};

// One decoded section's contribution to a FeatureSet.
struct DecodedSection {
  SectionMeta meta;
  std::vector<CfcRecord> cfcs;
};

// Collects the CFCs attached to a decoded (and filtered) instruction stream.
DecodedSection make_decoded_section(const ExecutableSection& section,
                                    std::span<const Instruction> instructions, double entropy);

// Groups CFC records by opcode; events ordered by (section, address).
// Throws NoCfcFound when the sample has no events at all.
FeatureSet build_feature_set(SampleId sample_id, std::span<const DecodedSection> sections);

// Which opcodes feed a displacement sequence. Text form is a comma list of
// "jcc", "all" or opcode hex ("75", "0F84"), e.g. "jcc,E8".
class Selector {
 public:
  static Selector jcc();
  static Selector all();
  static Selector only(OpcodeId opcode);
  static Selector parse(std::string_view text);

  [[nodiscard]] bool matches(OpcodeId opcode) const;
  [[nodiscard]] std::string to_string() const;

  bool operator==(const Selector&) const = default;

 private:
  bool jcc_ = false;
  bool all_ = false;
  std::set<OpcodeId> opcodes_;
};

// Address-ordered displacements of the selected opcodes, one list per section.
std::vector<std::vector<std::int64_t>> displacement_sequences(const FeatureSet& fs,
                                                              const Selector& selector = Selector::jcc());
// The per-section lists concatenated in section order.
std::vector<std::int64_t> displacement_sequence(const FeatureSet& fs,
                                                const Selector& selector = Selector::jcc());

struct NGram {
  std::vector<std::int64_t> values;

  [[nodiscard]] std::size_t n() const noexcept { return values.size(); }
  auto operator<=>(const NGram&) const = default;
};

// Step-1 sliding windows; max(0, |seq| - n + 1) of them. Throws InvalidArgument for n == 0.
template <class T>
std::vector<std::vector<T>> sliding_windows(std::span<const T> seq, std::size_t n);

std::vector<NGram> ngrams(std::span<const std::int64_t> seq, std::size_t n);

struct NGramHistogram {
  // 0 while empty and unassigned.
  std::size_t n = 0;
  std::map<NGram, std::uint64_t> counts;

  [[nodiscard]] std::uint64_t total() const;
  bool operator==(const NGramHistogram&) const = default;
};

// Throws MismatchedN if the grams have different lengths.
NGramHistogram histogram(std::span<const NGram> grams);

// Count-wise sum; commutative and associative. Throws MismatchedN.
void merge_into(NGramHistogram& into, const NGramHistogram& from);

// n-grams formed per section (never across a section boundary).
NGramHistogram sample_histogram(const FeatureSet& fs, std::size_t n,
                                const Selector& selector = Selector::jcc());

inline constexpr std::uint64_t kDefaultBandLo = 10;
inline constexpr std::uint64_t kDefaultBandHi = 50;
inline constexpr std::uint64_t kUnboundedBand = std::numeric_limits<std::uint64_t>::max();

// Entries with lo <= count <= hi. Throws InvalidArgument unless 1 <= lo <= hi.
NGramHistogram frequency_band(const NGramHistogram& hist, std::uint64_t lo = kDefaultBandLo,
                              std::uint64_t hi = kDefaultBandHi);

struct ExclusivityReport {
  std::uint64_t only_good = 0;
  std::uint64_t only_bad = 0;
  std::uint64_t shared = 0;

  bool operator==(const ExclusivityReport&) const = default;
};

// Set algebra over histogram keys. Throws MismatchedN.
ExclusivityReport exclusivity_report(const NGramHistogram& good, const NGramHistogram& bad);

// --- template definitions ---

template <class T>
std::vector<std::vector<T>> sliding_windows(std::span<const T> seq, std::size_t n) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "n-gram length must be >= 1");
  std::vector<std::vector<T>> out;
  if (seq.size() < n) return out;
  out.reserve(seq.size() - n + 1);
  for (std::size_t i = 0; i + n <= seq.size(); ++i) out.emplace_back(seq.begin() + i, seq.begin() + i + n);
  return out;
}

}  // namespace cfcscan

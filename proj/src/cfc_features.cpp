#include "cfcscan/cfc_features.hpp"

#include <algorithm>
#include <sstream>

#include "cfcscan/error.hpp"

namespace cfcscan {

std::uint64_t FeatureSet::event_count() const {
  std::uint64_t total = 0;
  for (const auto& [op, ev] : per_opcode) total += ev.frequency;
  return total;
}

DecodedSection make_decoded_section(const ExecutableSection& section,
                                    std::span<const Instruction> instructions, double entropy) {
  DecodedSection out;
  out.meta.name = section.name;
  out.meta.rva = section.rva;
  out.meta.entropy = entropy;
  out.meta.line_count = instructions.size();
  for (const auto& ins : instructions) {
    if (ins.cfc) out.cfcs.push_back(*ins.cfc);
  }
  return out;
}

FeatureSet build_feature_set(SampleId sample_id, std::span<const DecodedSection> sections) {
  FeatureSet fs;
  fs.sample_id = std::move(sample_id);
  for (std::size_t s = 0; s < sections.size(); ++s) {
    fs.section_meta.push_back(sections[s].meta);
    for (const auto& rec : sections[s].cfcs) {
      auto& entry = fs.per_opcode[rec.opcode];
      entry.events.push_back({static_cast<std::uint32_t>(s), rec.address, rec.displacement});
    }
  }
  if (fs.per_opcode.empty()) {
    throw Error(ErrorCode::NoCfcFound, "sample '" + fs.sample_id.name + "' has no CFC events");
  }
  for (auto& [op, entry] : fs.per_opcode) {
    std::sort(entry.events.begin(), entry.events.end());
    entry.frequency = entry.events.size();
  }
  return fs;
}

Selector Selector::jcc() {
  Selector s;
  s.jcc_ = true;
  return s;
}

Selector Selector::all() {
  Selector s;
  s.all_ = true;
  return s;
}

Selector Selector::only(OpcodeId opcode) {
  Selector s;
  s.opcodes_.insert(opcode);
  return s;
}

Selector Selector::parse(std::string_view text) {
  Selector s;
  std::string item;
  std::istringstream in{std::string(text)};
  bool any = false;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    any = true;
    if (item == "jcc") {
      s.jcc_ = true;
    } else if (item == "all") {
      s.all_ = true;
    } else if (auto op = OpcodeId::parse(item)) {
      s.opcodes_.insert(*op);
    } else {
      throw Error(ErrorCode::InvalidArgument, "bad selector item '" + item + "'");
    }
  }
  if (!any) throw Error(ErrorCode::InvalidArgument, "empty selector");
  return s;
}

bool Selector::matches(OpcodeId opcode) const {
  return all_ || (jcc_ && opcode.is_jcc()) || opcodes_.contains(opcode);
}

std::string Selector::to_string() const {
  std::string out;
  auto add = [&](const std::string& item) {
    if (!out.empty()) out += ',';
    out += item;
  };
  if (all_) add("all");
  if (jcc_) add("jcc");
  for (const auto& op : opcodes_) add(op.hex());
  return out;
}

std::vector<std::vector<std::int64_t>> displacement_sequences(const FeatureSet& fs,
                                                              const Selector& selector) {
  std::vector<CfcEvent> merged;
  for (const auto& [op, entry] : fs.per_opcode) {
    if (selector.matches(op)) merged.insert(merged.end(), entry.events.begin(), entry.events.end());
  }
  std::sort(merged.begin(), merged.end());

  std::size_t sections = fs.section_meta.size();
  for (const auto& e : merged) sections = std::max<std::size_t>(sections, e.section + 1);
  std::vector<std::vector<std::int64_t>> out(sections);
  for (const auto& e : merged) out[e.section].push_back(e.displacement);
  return out;
}

std::vector<std::int64_t> displacement_sequence(const FeatureSet& fs, const Selector& selector) {
  std::vector<std::int64_t> out;
  for (const auto& seq : displacement_sequences(fs, selector)) out.insert(out.end(), seq.begin(), seq.end());
  return out;
}

std::vector<NGram> ngrams(std::span<const std::int64_t> seq, std::size_t n) {
  std::vector<NGram> out;
  for (auto& w : sliding_windows(seq, n)) out.push_back(NGram{std::move(w)});
  return out;
}

std::uint64_t NGramHistogram::total() const {
  std::uint64_t t = 0;
  for (const auto& [g, c] : counts) t += c;
  return t;
}

NGramHistogram histogram(std::span<const NGram> grams) {
  NGramHistogram h;
  for (const auto& g : grams) {
    if (h.n == 0) h.n = g.n();
    if (g.n() != h.n) throw Error(ErrorCode::MismatchedN, "n-grams of different lengths in one histogram");
    ++h.counts[g];
  }
  return h;
}

void merge_into(NGramHistogram& into, const NGramHistogram& from) {
  if (from.n == 0) return;
  if (into.n == 0) into.n = from.n;
  if (into.n != from.n) {
    throw Error(ErrorCode::MismatchedN,
                "cannot merge " + std::to_string(from.n) + "-grams into " + std::to_string(into.n) + "-grams");
  }
  for (const auto& [g, c] : from.counts) into.counts[g] += c;
}

NGramHistogram sample_histogram(const FeatureSet& fs, std::size_t n, const Selector& selector) {
  NGramHistogram h;
  h.n = n;
  for (const auto& seq : displacement_sequences(fs, selector)) {
    for (auto& g : ngrams(seq, n)) ++h.counts[std::move(g)];
  }
  return h;
}

NGramHistogram frequency_band(const NGramHistogram& hist, std::uint64_t lo, std::uint64_t hi) {
  if (lo < 1 || lo > hi) {
    throw Error(ErrorCode::InvalidArgument, "frequency band needs 1 <= lo <= hi");
  }
  NGramHistogram out;
  out.n = hist.n;
  for (const auto& [g, c] : hist.counts) {
    if (c >= lo && c <= hi) out.counts.emplace_hint(out.counts.end(), g, c);
  }
  return out;
}

ExclusivityReport exclusivity_report(const NGramHistogram& good, const NGramHistogram& bad) {
  if (good.n != 0 && bad.n != 0 && good.n != bad.n) {
    throw Error(ErrorCode::MismatchedN, "exclusivity over histograms of different n");
  }
  ExclusivityReport r;
  auto g = good.counts.begin();
  auto b = bad.counts.begin();
  while (g != good.counts.end() || b != bad.counts.end()) {
    if (b == bad.counts.end() || (g != good.counts.end() && g->first < b->first)) {
      ++r.only_good;
      ++g;
    } else if (g == good.counts.end() || b->first < g->first) {
      ++r.only_bad;
      ++b;
    } else {
      ++r.shared;
      ++g;
      ++b;
    }
  }
  return r;
}

}  // namespace cfcscan

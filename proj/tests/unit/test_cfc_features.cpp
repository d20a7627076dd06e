#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <string>

#include "cfcscan/cfc_features.hpp"
#include "cfcscan/error.hpp"
#include "doctest.h"
#include "support/fixtures.hpp"

using namespace cfcscan;
using cfcscan::testing::data_dir;
using cfcscan::testing::read_bytes;

namespace {

CfcRecord rec(std::uint16_t op, std::uint32_t addr, std::int64_t disp) {
  const auto id = op > 0xFF ? OpcodeId::two_byte(static_cast<std::uint8_t>(op)) : OpcodeId::one_byte(static_cast<std::uint8_t>(op));
  return CfcRecord{id, addr, disp, 1, false};
}

DecodedSection section(std::vector<CfcRecord> cfcs) {
  DecodedSection s;
  s.meta.name = make_section_tag(".text");
  s.cfcs = std::move(cfcs);
  return s;
}

FeatureSet fixture_features(const std::string& file) {
  const auto raw = read_bytes(data_dir() / "pe" / file);
  const auto pe = parse_pe(raw);
  std::vector<DecodedSection> decoded;
  for (const auto& s : executable_sections(pe, file)) {
    if (display_name(s.name) != ".text") continue;
    const auto stream = decode_stream(s);
    const auto filtered = data_in_code_filter(stream.instructions, s.bytes);
    decoded.push_back(make_decoded_section(s, filtered.instructions, 0.0));
  }
  return build_feature_set({file, "0"}, decoded);
}

NGram g(std::vector<std::int64_t> v) { return NGram{std::move(v)}; }

}  // namespace

TEST_CASE("build_feature_set aggregates per opcode") {
  const std::vector<DecodedSection> in{section({rec(0x75, 10, 3), rec(0x75, 20, -2), rec(0xE8, 30, 100)})};
  const auto fs = build_feature_set({"a.exe", "00"}, in);
  REQUIRE(fs.per_opcode.size() == 2);
  const auto& jnz = fs.per_opcode.at(OpcodeId::one_byte(0x75));
  CHECK(jnz.frequency == 2);
  CHECK(jnz.events == std::vector<CfcEvent>{{0, 10, 3}, {0, 20, -2}});
  const auto& call = fs.per_opcode.at(OpcodeId::one_byte(0xE8));
  CHECK(call.frequency == 1);
  CHECK(call.events == std::vector<CfcEvent>{{0, 30, 100}});
  CHECK(fs.event_count() == 3);
  CHECK_FALSE(fs.per_opcode.contains(OpcodeId::one_byte(0x74)));
}

TEST_CASE("empty CFC list is NoCfcFound") {
  const std::vector<DecodedSection> in{section({})};
  try {
    (void)build_feature_set({"empty.exe", "00"}, in);
    FAIL("expected NoCfcFound");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoCfcFound);
  }
  CHECK_THROWS_AS(build_feature_set({"none.exe", "00"}, {}), Error);
}

TEST_CASE("build_feature_set is insensitive to input record order") {
  std::mt19937 rng(3);
  std::vector<CfcRecord> records;
  for (std::uint32_t i = 0; i < 200; ++i) {
    const std::uint16_t op = std::array<std::uint16_t, 5>{0x74, 0x75, 0xEB, 0xE8, 0x0F84}[rng() % 5];
    records.push_back(rec(op, i * 3, static_cast<std::int64_t>(rng() % 255) - 128));
  }
  const auto base = build_feature_set({"s", "h"}, std::vector<DecodedSection>{section(records)});
  for (int iter = 0; iter < 10; ++iter) {
    std::shuffle(records.begin(), records.end(), rng);
    CHECK(build_feature_set({"s", "h"}, std::vector<DecodedSection>{section(records)}) == base);
  }
  for (const auto& [op, ev] : base.per_opcode) {
    CHECK(ev.frequency == ev.events.size());
    CHECK(std::is_sorted(ev.events.begin(), ev.events.end()));
  }
}

TEST_CASE("opcode frequencies on real images match an independent recount") {
  // Recount straight from instruction bytes: skip legacy prefixes, look at the opcode.
  const std::set<std::uint8_t> prefixes{0x26, 0x2E, 0x36, 0x3E, 0x64, 0x65, 0x66, 0x67, 0xF0, 0xF2, 0xF3};
  for (const char* name : {"setuptools_cli32.exe", "distlib_t32.exe", "distlib_w32.exe"}) {
    const std::string file = name;
    CAPTURE(file);
    const auto pe = parse_pe(read_bytes(data_dir() / "pe" / name));
    std::map<std::uint16_t, std::uint64_t> recount;
    std::vector<DecodedSection> decoded;
    for (const auto& s : executable_sections(pe, file)) {
      const auto stream = decode_stream(s);
      for (const auto& ins : stream.instructions) {
        const auto b = ins.bytes();
        std::size_t i = 0;
        while (i < b.size() && prefixes.contains(b[i])) ++i;
        if (i >= b.size()) continue;
        const std::uint8_t op = b[i];
        if ((op >= 0x70 && op <= 0x7F) || op == 0xEB || op == 0xE8 || op == 0xE9) {
          ++recount[op];
        } else if (op == 0x0F && i + 1 < b.size() && b[i + 1] >= 0x80 && b[i + 1] <= 0x8F) {
          ++recount[static_cast<std::uint16_t>(0x0F00 | b[i + 1])];
        }
      }
      decoded.push_back(make_decoded_section(s, stream.instructions, 0.0));
    }
    const auto fs = build_feature_set({file, "0"}, decoded);
    std::map<std::uint16_t, std::uint64_t> ours;
    for (const auto& [op, ev] : fs.per_opcode) ours[op.value()] = ev.frequency;
    CHECK(ours == recount);
    CHECK(fs.event_count() > 100);
  }
}

TEST_CASE("displacement_sequence merges by address and honours the selector") {
  const std::vector<DecodedSection> in{section({rec(0x75, 10, 1), rec(0x75, 20, 3), rec(0x74, 15, 2), rec(0xE8, 12, 99)})};
  const auto fs = build_feature_set({"a", "b"}, in);
  CHECK(displacement_sequence(fs) == std::vector<std::int64_t>{1, 2, 3});
  CHECK(displacement_sequence(fs, Selector::only(OpcodeId::one_byte(0xE8))) == std::vector<std::int64_t>{99});
  CHECK(displacement_sequence(fs, Selector::all()) == std::vector<std::int64_t>{1, 99, 2, 3});
  CHECK(displacement_sequence(fs, Selector::parse("jcc,E8")) == std::vector<std::int64_t>{1, 99, 2, 3});
  CHECK(displacement_sequence(fs, Selector::only(OpcodeId::one_byte(0xEB))).empty());
}

TEST_CASE("default sequence on the crafted fixture matches the hand enumeration") {
  const auto fs = fixture_features("cfc_fixture.exe");
  CHECK(displacement_sequence(fs) == std::vector<std::int64_t>{5, -6, 288, -128, 127, 3, -16, 0});
  CHECK(displacement_sequence(fs, Selector::all()) ==
        std::vector<std::int64_t>{5, 16, -6, 288, 2, -256, -128, 127, 3, -16, 0, -75});
  CHECK(displacement_sequence(fs, Selector::only(OpcodeId::one_byte(0xE8))) == std::vector<std::int64_t>{16, -75});
  CHECK(fs.per_opcode.at(OpcodeId::one_byte(0x74)).frequency == 2);
  CHECK_FALSE(fs.per_opcode.contains(OpcodeId::one_byte(0x70)));
  CHECK_FALSE(fs.per_opcode.contains(OpcodeId::one_byte(0xE2)));
}

TEST_CASE("selector text form") {
  CHECK(Selector::parse("jcc") == Selector::jcc());
  CHECK(Selector::parse("all") == Selector::all());
  CHECK(Selector::parse("0F84").matches(OpcodeId::two_byte(0x84)));
  CHECK_FALSE(Selector::parse("0F84").matches(OpcodeId::two_byte(0x85)));
  CHECK(Selector::parse("E8,jcc").to_string() == "jcc,E8");
  CHECK(Selector::jcc().matches(OpcodeId::two_byte(0x8F)));
  CHECK_FALSE(Selector::jcc().matches(OpcodeId::one_byte(0xEB)));
  CHECK_THROWS_AS(Selector::parse("bogus"), Error);
  CHECK_THROWS_AS(Selector::parse(""), Error);
}

TEST_CASE("ngrams are step-1 sliding windows") {
  const std::string word = "word";
  const auto letters = sliding_windows(std::span<const char>(word.data(), word.size()), 2);
  std::vector<std::string> as_text;
  for (const auto& w : letters) as_text.emplace_back(w.begin(), w.end());
  CHECK(as_text == std::vector<std::string>{"wo", "or", "rd"});

  const std::vector<std::int64_t> s{5, 7, 9};
  CHECK(ngrams(s, 2) == std::vector<NGram>{g({5, 7}), g({7, 9})});
  CHECK(ngrams(std::vector<std::int64_t>{5, 7}, 4).empty());
  CHECK_THROWS_AS(ngrams(s, 0), Error);

  std::mt19937 rng(11);
  for (int iter = 0; iter < 300; ++iter) {
    std::vector<std::int64_t> seq(rng() % 40);
    for (auto& v : seq) v = static_cast<std::int64_t>(rng() % 7) - 3;
    const std::size_t n = 1 + rng() % 8;
    const auto grams = ngrams(seq, n);
    CHECK(grams.size() == (seq.size() >= n ? seq.size() - n + 1 : 0));
    for (std::size_t i = 0; i < grams.size(); ++i) {
      CHECK(grams[i].n() == n);
      CHECK(std::equal(grams[i].values.begin(), grams[i].values.end(), seq.begin() + static_cast<std::ptrdiff_t>(i)));
    }
    const auto h = histogram(grams);
    CHECK(h.total() == grams.size());
    if (!h.counts.empty()) {
      std::uint64_t top = 0;
      for (const auto& [k, c] : h.counts) top = std::max(top, c);
      CHECK(frequency_band(h, 1, top) == h);
    }
  }
}

TEST_CASE("histogram counts multiset cardinalities") {
  const auto h = histogram(std::vector<NGram>{g({1, 2}), g({1, 2}), g({3, 4})});
  CHECK(h.n == 2);
  CHECK(h.counts == std::map<NGram, std::uint64_t>{{g({1, 2}), 2}, {g({3, 4}), 1}});
  CHECK(histogram(std::vector<NGram>{}).counts.empty());
  CHECK_THROWS_AS(histogram(std::vector<NGram>{g({1}), g({1, 2})}), Error);
}

TEST_CASE("sample histogram forms grams per section") {
  DecodedSection a = section({rec(0x75, 0, 1), rec(0x75, 4, 2), rec(0x75, 8, 3)});
  DecodedSection b = section({rec(0x74, 0, 4), rec(0x74, 4, 5)});
  const auto fs = build_feature_set({"x", "y"}, std::vector<DecodedSection>{a, b});
  const auto h = sample_histogram(fs, 2);
  CHECK(h.counts == std::map<NGram, std::uint64_t>{{g({1, 2}), 1}, {g({2, 3}), 1}, {g({4, 5}), 1}});
  // Conservation: sum over sections of (len - n + 1).
  CHECK(h.total() == (3 - 2 + 1) + (2 - 2 + 1));
  CHECK(sample_histogram(fs, 3).total() == 1);
}

TEST_CASE("frequency band has inclusive bounds") {
  NGramHistogram h;
  h.n = 1;
  h.counts = {{g({1}), 5}, {g({2}), 10}, {g({3}), 50}, {g({4}), 51}};
  const auto band = frequency_band(h);
  CHECK(band.counts == std::map<NGram, std::uint64_t>{{g({2}), 10}, {g({3}), 50}});
  CHECK(frequency_band(h, 1, kUnboundedBand) == h);
  CHECK(kDefaultBandLo == 10);
  CHECK(kDefaultBandHi == 50);
  CHECK_THROWS_AS(frequency_band(h, 0, 5), Error);
  CHECK_THROWS_AS(frequency_band(h, 6, 5), Error);
}

TEST_CASE("merge is count addition and order independent") {
  std::mt19937 rng(5);
  std::vector<NGramHistogram> parts;
  NGramHistogram brute;
  brute.n = 2;
  for (int p = 0; p < 6; ++p) {
    std::vector<NGram> grams;
    for (int i = 0; i < 50; ++i) grams.push_back(g({static_cast<std::int64_t>(rng() % 4), static_cast<std::int64_t>(rng() % 4)}));
    for (const auto& gr : grams) ++brute.counts[gr];
    parts.push_back(histogram(grams));
  }
  for (int iter = 0; iter < 5; ++iter) {
    std::shuffle(parts.begin(), parts.end(), rng);
    NGramHistogram merged;
    for (const auto& p : parts) merge_into(merged, p);
    CHECK(merged == brute);
  }
  NGramHistogram three;
  three.n = 3;
  three.counts[g({1, 2, 3})] = 1;
  CHECK_THROWS_AS(merge_into(brute, three), Error);
}

TEST_CASE("exclusivity report is set algebra over keys") {
  auto keys = [](std::initializer_list<std::int64_t> ks) {
    NGramHistogram h;
    h.n = 1;
    for (auto k : ks) h.counts[g({k})] = 1;
    return h;
  };
  CHECK(exclusivity_report(keys({1, 2}), keys({2, 3})) == ExclusivityReport{1, 1, 1});
  CHECK(exclusivity_report(keys({1, 2}), keys({3, 4})).shared == 0);

  std::mt19937 rng(9);
  for (int iter = 0; iter < 100; ++iter) {
    std::set<std::int64_t> gs, bs;
    NGramHistogram good, bad;
    good.n = bad.n = 1;
    for (int i = 0; i < 30; ++i) {
      const auto a = static_cast<std::int64_t>(rng() % 40);
      const auto b = static_cast<std::int64_t>(rng() % 40);
      gs.insert(a);
      bs.insert(b);
      good.counts[g({a})] += 1;
      bad.counts[g({b})] += 1;
    }
    std::vector<std::int64_t> inter, g_only, b_only;
    std::set_intersection(gs.begin(), gs.end(), bs.begin(), bs.end(), std::back_inserter(inter));
    std::set_difference(gs.begin(), gs.end(), bs.begin(), bs.end(), std::back_inserter(g_only));
    std::set_difference(bs.begin(), bs.end(), gs.begin(), gs.end(), std::back_inserter(b_only));
    CHECK(exclusivity_report(good, bad) == ExclusivityReport{g_only.size(), b_only.size(), inter.size()});
  }

  NGramHistogram two;
  two.n = 2;
  two.counts[g({1, 1})] = 1;
  CHECK_THROWS_AS(exclusivity_report(keys({1}), two), Error);
}

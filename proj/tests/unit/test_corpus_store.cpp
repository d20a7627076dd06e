#include <algorithm>
#include <filesystem>
#include <random>

#include <unistd.h>

#include "cfcscan/corpus_store.hpp"
#include "cfcscan/entropy_gate.hpp"
#include "cfcscan/error.hpp"
#include "doctest.h"
#include "support/fixtures.hpp"
#include "support/generators.hpp"

using namespace cfcscan;
using namespace cfcscan::testing;
namespace fs = std::filesystem;

namespace {

ErrorCode error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::EmptyInput;  // sentinel: nothing thrown
}

bool nothing_thrown(ErrorCode c) { return c == ErrorCode::EmptyInput; }

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("cfcscan_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Every single-byte change of a serialized document must be rejected.
template <class Parse>
void check_corruption(const std::string& doc, Parse parse, std::mt19937_64& rng, int flips) {
  for (int i = 0; i < flips; ++i) {
    auto bad = doc;
    const std::size_t at = rng() % bad.size();
    const auto delta = static_cast<char>(1 + rng() % 255);
    bad[at] = static_cast<char>(bad[at] + delta);
    const auto code = error_of([&] { (void)parse(bad); });
    CAPTURE(at);
    CHECK_FALSE(nothing_thrown(code));
  }
}

FeatureSet scan_text_section(const std::vector<ExecutableSection>& sections, const SampleId& id) {
  std::vector<DecodedSection> decoded;
  for (const auto& s : sections) {
    if (display_name(s.name) != ".text") continue;
    const auto stream = decode_stream(s);
    const auto filtered = data_in_code_filter(stream.instructions, s.bytes);
    decoded.push_back(make_decoded_section(s, filtered.instructions, gate(s).average_entropy));
  }
  return build_feature_set(id, decoded);
}

}  // namespace

TEST_CASE("sha256 and escaping") {
  CHECK(sha256_hex(std::string_view("abc")) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(percent_escape("a b\t%c") == "a%20b%09%25c");
  CHECK(percent_unescape("a%20b%09%25c") == "a b\t%c");
  CHECK_THROWS_AS(percent_unescape("%2"), Error);
  CHECK_THROWS_AS(percent_unescape("%41"), Error);
  CHECK_THROWS_AS(percent_unescape("a b"), Error);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 500; ++i) {
    std::string s;
    for (std::size_t k = rng() % 30; k > 0; --k) s += static_cast<char>(rng() % 256);
    CHECK(percent_unescape(percent_escape(s)) == s);
  }
}

TEST_CASE("persisted types round-trip and reject corruption") {
  std::mt19937_64 rng(2024);
  for (int iter = 0; iter < 150; ++iter) {
    const auto fset = random_feature_set(rng);
    const auto text = serialize_feature_set(fset);
    CHECK(parse_feature_set(text) == fset);
    check_corruption(text, parse_feature_set, rng, 5);

    const auto h = random_histogram(rng);
    CHECK(parse_histogram(serialize_histogram(h)) == h);
    check_corruption(serialize_histogram(h), parse_histogram, rng, 5);
    const auto bin = serialize_histogram_binary(h);
    CHECK(parse_histogram_binary(bin) == h);
    for (int f = 0; f < 5; ++f) {
      auto bad = bin;
      bad[rng() % bad.size()] ^= static_cast<std::uint8_t>(1 + rng() % 255);
      CHECK_FALSE(nothing_thrown(error_of([&] { (void)parse_histogram_binary(bad); })));
    }

    const auto m = random_model(rng);
    CHECK(parse_model(serialize_model(m)) == m);
    check_corruption(serialize_model(m), parse_model, rng, 5);

    const auto man = random_manifest(rng);
    CHECK(parse_manifest(serialize_manifest(man)) == man);
    check_corruption(serialize_manifest(man), parse_manifest, rng, 5);
  }
}

TEST_CASE("truncation and version bumps are rejected") {
  std::mt19937_64 rng(5);
  const auto text = serialize_feature_set(random_feature_set(rng));
  for (std::size_t cut = 0; cut < text.size(); cut += 7) {
    CHECK_FALSE(nothing_thrown(error_of([&] { (void)parse_feature_set(text.substr(0, cut)); })));
  }
  auto bumped = text;
  bumped.replace(bumped.find("\t1\n"), 3, "\t2\n");
  CHECK(error_of([&] { (void)parse_feature_set(bumped); }) == ErrorCode::FormatVersionMismatch);

  auto bin = serialize_histogram_binary(random_histogram(rng));
  bin[4] = 2;
  CHECK(error_of([&] { (void)parse_histogram_binary(bin); }) == ErrorCode::FormatVersionMismatch);

  auto tampered = text;
  const auto at = tampered.find("sample\t") + 7;
  tampered[at] = tampered[at] == 'x' ? 'y' : 'x';
  CHECK(error_of([&] { (void)parse_feature_set(tampered); }) == ErrorCode::HashMismatch);
  CHECK(error_of([&] { (void)parse_model(text); }) == ErrorCode::Malformed);
}

TEST_CASE("file wrappers") {
  const auto dir = scratch_dir("files");
  std::mt19937_64 rng(8);
  const auto fset = random_feature_set(rng);
  const auto entry = save_feature_set(fset, dir / "a.fs", ImportSource::listing_import);
  CHECK(load_feature_set(dir / "a.fs") == fset);
  CHECK(entry.sample_id == fset.sample_id);
  CHECK(entry.cfc_count == fset.event_count());
  CHECK(entry.source == ImportSource::listing_import);

  const auto h = random_histogram(rng);
  save_histogram(h, dir / "h.txt");
  CHECK(load_histogram(dir / "h.txt") == h);
  const auto bin = serialize_histogram_binary(h);
  write_file_text(dir / "h.bin", std::string_view(reinterpret_cast<const char*>(bin.data()), bin.size()));
  CHECK(load_histogram(dir / "h.bin") == h);

  CHECK(error_of([&] { (void)load_feature_set(dir / "missing.fs"); }) == ErrorCode::IoError);
  fs::remove_all(dir);
}

TEST_CASE("manifest checks") {
  const auto dir = scratch_dir("manifest");
  std::mt19937_64 rng(9);
  CorpusManifest m;
  m.label = CorpusLabel::malware;
  std::vector<FeatureSet> sets;
  for (int i = 0; i < 3; ++i) {
    sets.push_back(random_feature_set(rng));
    auto e = save_feature_set(sets.back(), dir / ("s" + std::to_string(i) + ".fs"));
    e.path = "s" + std::to_string(i) + ".fs";
    m.entries.push_back(e);
  }
  std::sort(m.entries.begin(), m.entries.end());
  save_manifest(m, dir / "corpus.manifest");
  const auto loaded = load_manifest(dir / "corpus.manifest");
  CHECK(loaded == m);
  CHECK(load_corpus_features(loaded, dir).size() == 3);

  auto wrong = m;
  wrong.entries[0].sample_id.content_hash = random_hash(rng);
  CHECK(error_of([&] { (void)load_corpus_features(wrong, dir); }) == ErrorCode::HashMismatch);

  auto dup = m;
  dup.entries.push_back(m.entries[0]);
  dup.entries.back().path = "other.fs";
  CHECK(error_of([&] { (void)parse_manifest(serialize_manifest(dup)); }) == ErrorCode::DuplicateSample);
  fs::remove_all(dir);
}

TEST_CASE("merge corpus") {
  std::mt19937_64 rng(10);
  auto a = random_manifest(rng);
  auto b = random_manifest(rng);
  a.label = b.label = CorpusLabel::goodware;
  const std::vector<CorpusManifest> ab{a, b}, ba{b, a};
  const auto m1 = merge_corpus(ab);
  CHECK(m1 == merge_corpus(ba));
  CHECK(m1.entries.size() == a.entries.size() + b.entries.size());
  CHECK(std::is_sorted(m1.entries.begin(), m1.entries.end()));

  auto c = random_manifest(rng);
  c.label = CorpusLabel::goodware;
  const std::vector<CorpusManifest> left{merge_corpus(ab), c};
  const std::vector<CorpusManifest> bc{b, c};
  const std::vector<CorpusManifest> right{a, merge_corpus(bc)};
  CHECK(merge_corpus(left) == merge_corpus(right));

  const std::vector<CorpusManifest> twice{a, a};
  if (!a.entries.empty()) CHECK(error_of([&] { (void)merge_corpus(twice); }) == ErrorCode::DuplicateSample);
  auto mal = b;
  mal.label = CorpusLabel::malware;
  const std::vector<CorpusManifest> mixed{a, mal};
  CHECK(error_of([&] { (void)merge_corpus(mixed); }) == ErrorCode::MixedLabels);
}

TEST_CASE("corpus n-gram db is a count sum") {
  std::mt19937_64 rng(11);
  std::vector<FeatureSet> sets;
  for (int i = 0; i < 3; ++i) sets.push_back(random_feature_set(rng));
  CHECK(corpus_ngram_db(std::span(sets).first(1), 2) == sample_histogram(sets[0], 2));

  // Brute force: concatenate every per-section sequence and recount windows.
  std::map<NGram, std::uint64_t> brute;
  std::uint64_t windows = 0;
  for (const auto& s : sets) {
    for (const auto& seq : displacement_sequences(s)) {
      for (std::size_t i = 0; i + 2 <= seq.size(); ++i) {
        ++brute[NGram{{seq[i], seq[i + 1]}}];
        ++windows;
      }
    }
  }
  const auto db = corpus_ngram_db(sets, 2);
  CHECK(db.counts == brute);
  CHECK(db.total() == windows);
}

TEST_CASE("prologue listing import") {
  const auto imp = import_listing(read_text(data_dir() / "adapter_prologue.lst"));
  CHECK(imp.lines.size() == 13);
  CHECK(imp.skipped_lines == 5);
  CHECK(imp.issues.empty());
  REQUIRE(imp.sections.size() == 1);
  CHECK(imp.sections[0].name == ".text");
  CHECK(imp.sections[0].base_address == 0x01001316);
  CHECK(imp.sections[0].gap_bytes == 0);
  CHECK(imp.lines[1].address == 0x01001318);
  CHECK(imp.lines[1].bytes == Bytes{0x55});
  CHECK(imp.lines[1].mnemonic == "push  ebp");
  // The byte column wins over the mnemonic text.
  CHECK(imp.lines[12].bytes == Bytes{0x33, 0x0B});

  const auto secs = listing_sections(imp, 0x01000000, "adapter_prologue.lst");
  REQUIRE(secs.size() == 1);
  CHECK(secs[0].rva == 0x1316);
  const auto stream = decode_stream(ByteView(secs[0].bytes).first(18));
  std::vector<int> lengths;
  for (const auto& ins : stream.instructions) lengths.push_back(ins.length);
  CHECK(lengths == std::vector<int>{2, 1, 2, 6, 5, 2});
  CHECK(stream.resyncs.empty());
}

TEST_CASE("listing importer edge cases") {
  const std::string text =
      "; a comment\n"
      "\n"
      ".text:00401000 55 push ebp\r\n"
      "garbage without address\n"
      ".text:00401004 C3 ret\n"
      ".text:0040zz00 90 nop\n"
      ".data:00402000 41 42 db 'AB'\n"
      ".text:00401002 90 nop\n"
      ".text:00401005 loc_401005:\n"
      ".text:00401005 db 0\n";
  const auto imp = import_listing(text);
  REQUIRE(imp.sections.size() == 2);
  CHECK(imp.sections[0].image == Bytes{0x55, 0, 0, 0, 0xC3});
  CHECK(imp.sections[0].gap_bytes == 3);
  CHECK(imp.sections[1].image == Bytes{0x41, 0x42});
  CHECK(imp.skipped_lines == 3);
  REQUIRE(imp.issues.size() == 3);
  CHECK(imp.issues[0].line_number == 4);
  CHECK(imp.issues[1].line_number == 6);
  CHECK(imp.issues[2].line_number == 8);  // overlaps earlier bytes
  for (const auto& i : imp.issues) CHECK(i.code == ErrorCode::UnparsableLine);

  CHECK(error_of([] { (void)import_listing(".text:00401000 var_4 = dword ptr -4\n"); }) == ErrorCode::EmptyImport);
  CHECK(error_of([] { (void)import_listing(""); }) == ErrorCode::EmptyImport);
  CHECK_THROWS_AS(listing_sections(imp, 0x500000), Error);
}

TEST_CASE("listing import and native scan give identical features") {
  const SampleId id{"cfc_fixture", "0"};
  const auto native = scan_text_section(
      executable_sections(parse_pe(read_bytes(data_dir() / "pe/cfc_fixture.exe")), "cfc_fixture.exe"), id);
  const auto imp = import_listing(read_text(data_dir() / "cfc_fixture.lst"));
  CHECK(imp.issues.empty());
  CHECK(imp.skipped_lines == 1);
  const auto listed = scan_text_section(listing_sections(imp, 0x400000, "cfc_fixture.lst"), id);
  CHECK(listed == native);
  CHECK(native.event_count() == 12);
}

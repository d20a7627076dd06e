#include "cfcscan/corpus_store.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "cfcscan/error.hpp"

namespace cfcscan {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kTrailer = "#sha256\t";
constexpr std::size_t kDigestHexLen = 64;
constexpr std::array<char, 4> kBinaryMagic{'C', 'F', 'C', 'H'};
constexpr std::uint64_t kMaxListingGap = 64ull << 20;

std::array<std::uint8_t, 32> sha256_raw(const void* data, std::size_t size) {
  std::array<std::uint8_t, 32> out{};
  unsigned int len = 0;
  if (EVP_Digest(data, size, out.data(), &len, EVP_sha256(), nullptr) != 1 || len != out.size()) {
    throw Error(ErrorCode::IoError, "SHA-256 computation failed");
  }
  return out;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    s += kDigits[b >> 4];
    s += kDigits[b & 0xF];
  }
  return s;
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

bool is_lower_hex(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); });
}

[[noreturn]] void malformed(const std::string& what) { throw Error(ErrorCode::Malformed, what); }

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

template <class T>
T parse_int(std::string_view s, std::string_view what) {
  T v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || p != s.data() + s.size()) {
    malformed("bad " + std::string(what) + " '" + std::string(s) + "'");
  }
  return v;
}

double parse_double(std::string_view s, std::string_view what) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || p != s.data() + s.size()) {
    malformed("bad " + std::string(what) + " '" + std::string(s) + "'");
  }
  return v;
}

std::string format_double(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

// Header line, body rows, trailer line.
std::string finish_document(std::string_view kind, const std::string& body_rows) {
  std::string doc = "#cfcscan-" + std::string(kind) + "\t" + std::to_string(kFormatVersion) + "\n" + body_rows;
  const auto digest = sha256_hex(std::string_view(doc));
  doc += kTrailer;
  doc += digest;
  doc += '\n';
  return doc;
}

// Checks header, version and digest; returns the body rows split on tabs.
std::vector<std::vector<std::string_view>> open_document(std::string_view text, std::string_view kind) {
  const std::string magic = "#cfcscan-" + std::string(kind) + "\t";
  const auto first_nl = text.find('\n');
  if (text.substr(0, magic.size()) != magic || first_nl == std::string_view::npos) {
    malformed("not a cfcscan " + std::string(kind) + " file");
  }
  const auto version = text.substr(magic.size(), first_nl - magic.size());
  int v = 0;
  const auto [p, ec] = std::from_chars(version.data(), version.data() + version.size(), v);
  if (version.empty() || ec != std::errc{} || p != version.data() + version.size()) malformed("bad format version");
  if (v != kFormatVersion) {
    throw Error(ErrorCode::FormatVersionMismatch,
                "format version " + std::to_string(v) + ", expected " + std::to_string(kFormatVersion));
  }

  if (text.empty() || text.back() != '\n') malformed("missing digest trailer");
  const auto trailer_at = text.rfind('\n', text.size() - 2) + 1;
  const auto trailer = text.substr(trailer_at, text.size() - 1 - trailer_at);
  if (trailer_at <= first_nl || trailer.substr(0, kTrailer.size()) != kTrailer) malformed("missing digest trailer");
  const auto digest = trailer.substr(kTrailer.size());
  if (digest.size() != kDigestHexLen || !is_lower_hex(digest)) malformed("bad digest trailer");
  if (sha256_hex(text.substr(0, trailer_at)) != digest) {
    throw Error(ErrorCode::HashMismatch, std::string(kind) + " content does not match its digest");
  }

  std::vector<std::vector<std::string_view>> rows;
  auto body = text.substr(first_nl + 1, trailer_at - first_nl - 1);
  while (!body.empty()) {
    const auto nl = body.find('\n');
    rows.push_back(split_tabs(body.substr(0, nl)));
    body.remove_prefix(nl + 1);
  }
  return rows;
}

void expect_fields(const std::vector<std::string_view>& row, std::size_t n) {
  if (row.size() != n) malformed("record '" + std::string(row[0]) + "' has " + std::to_string(row.size()) + " fields");
}

std::string tag_hex(const SectionTag& tag) { return to_hex(tag); }

SectionTag parse_tag(std::string_view s) {
  if (s.size() != 16) malformed("bad section tag");
  SectionTag tag{};
  for (std::size_t i = 0; i < 8; ++i) {
    const int hi = hex_value(s[2 * i]);
    const int lo = hex_value(s[2 * i + 1]);
    if (hi < 0 || lo < 0) malformed("bad section tag");
    tag[i] = static_cast<std::uint8_t>(hi << 4 | lo);
  }
  return tag;
}

void check_hash_field(std::string_view s) {
  if (!is_lower_hex(s)) malformed("bad content hash");
}

const char* to_string_verdict(GateVerdict v) { return v == GateVerdict::pass ? "pass" : "packed"; }

GateVerdict parse_verdict(std::string_view s) {
  if (s == "pass") return GateVerdict::pass;
  if (s == "packed") return GateVerdict::packed;
  malformed("bad entropy verdict");
}

ImportSource parse_source(std::string_view s) {
  if (s == "native-scan") return ImportSource::native_scan;
  if (s == "listing-import") return ImportSource::listing_import;
  malformed("bad import source");
}

void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_le(ByteView data, std::size_t at, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(data[at + static_cast<std::size_t>(i)]) << (8 * i);
  return v;
}

}  // namespace

std::string sha256_hex(ByteView data) { return to_hex(sha256_raw(data.data(), data.size())); }
std::string sha256_hex(std::string_view text) { return to_hex(sha256_raw(text.data(), text.size())); }

std::string percent_escape(std::string_view s) {
  static constexpr char kDigits[] = "0123456789ABCDEF";
  std::string out;
  for (char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    if (c <= 0x20 || c >= 0x7F || c == '%') {
      out += '%';
      out += kDigits[c >> 4];
      out += kDigits[c & 0xF];
    } else {
      out += ch;
    }
  }
  return out;
}

std::string percent_unescape(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '%') {
      const auto c = static_cast<unsigned char>(s[i]);
      if (c <= 0x20 || c >= 0x7F) malformed("unescaped byte in string field");
      out += s[i];
      continue;
    }
    if (i + 2 >= s.size()) malformed("truncated escape");
    const int hi = hex_value(s[i + 1]);
    const int lo = hex_value(s[i + 2]);
    if (hi < 0 || lo < 0 || std::islower(static_cast<unsigned char>(s[i + 1])) ||
        std::islower(static_cast<unsigned char>(s[i + 2]))) {
      malformed("bad escape");
    }
    const auto c = static_cast<unsigned char>(hi << 4 | lo);
    if (c > 0x20 && c < 0x7F && c != '%') malformed("needlessly escaped byte");
    out += static_cast<char>(c);
    i += 2;
  }
  return out;
}

// --- feature set ---

std::string serialize_feature_set(const FeatureSet& fs) {
  std::ostringstream body;
  body << "sample\t" << percent_escape(fs.sample_id.name) << '\t' << fs.sample_id.content_hash << '\n';
  for (const auto& s : fs.section_meta) {
    body << "section\t" << tag_hex(s.name) << '\t' << s.rva << '\t' << format_double(s.entropy) << '\t' << s.line_count
         << '\n';
  }
  for (const auto& [op, entry] : fs.per_opcode) {
    for (const auto& e : entry.events) {
      body << "event\t" << op.hex() << '\t' << e.section << '\t' << e.address << '\t' << e.displacement << '\n';
    }
  }
  return finish_document("featureset", body.str());
}

FeatureSet parse_feature_set(std::string_view text) {
  const auto rows = open_document(text, "featureset");
  FeatureSet fs;
  bool have_sample = false;
  for (const auto& row : rows) {
    if (row[0] == "sample") {
      expect_fields(row, 3);
      if (have_sample) malformed("duplicate sample record");
      check_hash_field(row[2]);
      fs.sample_id = {percent_unescape(row[1]), std::string(row[2])};
      have_sample = true;
    } else if (row[0] == "section") {
      expect_fields(row, 5);
      fs.section_meta.push_back({parse_tag(row[1]), parse_int<std::uint32_t>(row[2], "rva"),
                                 parse_double(row[3], "entropy"), parse_int<std::uint64_t>(row[4], "line count")});
    } else if (row[0] == "event") {
      expect_fields(row, 5);
      const auto op = OpcodeId::parse(row[1]);
      if (!op || op->hex() != row[1]) malformed("bad opcode '" + std::string(row[1]) + "'");
      const auto section = parse_int<std::uint32_t>(row[2], "section index");
      if (section >= fs.section_meta.size()) malformed("event refers to an unknown section");
      fs.per_opcode[*op].events.push_back(
          {section, parse_int<std::uint32_t>(row[3], "address"), parse_int<std::int64_t>(row[4], "displacement")});
    } else {
      malformed("unknown record '" + std::string(row[0]) + "'");
    }
  }
  if (!have_sample) malformed("missing sample record");
  for (auto& [op, entry] : fs.per_opcode) {
    if (!std::is_sorted(entry.events.begin(), entry.events.end())) malformed("events out of order");
    entry.frequency = entry.events.size();
  }
  return fs;
}

// --- histogram ---

std::string serialize_histogram(const NGramHistogram& h) {
  std::ostringstream body;
  body << "n\t" << h.n << '\n';
  for (const auto& [g, c] : h.counts) body << "gram\t" << Token::gram(g).to_string() << '\t' << c << '\n';
  return finish_document("histogram", body.str());
}

NGramHistogram parse_histogram(std::string_view text) {
  const auto rows = open_document(text, "histogram");
  if (rows.empty() || rows[0][0] != "n") malformed("missing n record");
  expect_fields(rows[0], 2);
  NGramHistogram h;
  h.n = parse_int<std::size_t>(rows[0][1], "n");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row[0] != "gram") malformed("unknown record '" + std::string(row[0]) + "'");
    expect_fields(row, 3);
    NGram g;
    try {
      g.values = Token::parse(row[1]).values;
    } catch (const Error&) {
      malformed("bad gram");
    }
    if (g.n() != h.n) malformed("gram length differs from n");
    const auto c = parse_int<std::uint64_t>(row[2], "count");
    if (c == 0) malformed("zero count");
    if (!h.counts.empty() && !(h.counts.rbegin()->first < g)) malformed("grams out of order");
    h.counts.emplace_hint(h.counts.end(), std::move(g), c);
  }
  return h;
}

std::vector<std::uint8_t> serialize_histogram_binary(const NGramHistogram& h) {
  std::vector<std::uint8_t> out(kBinaryMagic.begin(), kBinaryMagic.end());
  put_le(out, static_cast<std::uint32_t>(kFormatVersion), 4);
  put_le(out, h.n, 4);
  put_le(out, h.counts.size(), 8);
  for (const auto& [g, c] : h.counts) {
    for (auto v : g.values) put_le(out, static_cast<std::uint64_t>(v), 8);
    put_le(out, c, 8);
  }
  const auto digest = sha256_raw(out.data(), out.size());
  out.insert(out.end(), digest.begin(), digest.end());
  return out;
}

NGramHistogram parse_histogram_binary(ByteView data) {
  constexpr std::size_t kHeader = 20;
  if (data.size() < kHeader + 32 || !std::equal(kBinaryMagic.begin(), kBinaryMagic.end(), data.begin())) {
    malformed("not a binary histogram");
  }
  const auto version = get_le(data, 4, 4);
  if (version != kFormatVersion) {
    throw Error(ErrorCode::FormatVersionMismatch,
                "format version " + std::to_string(version) + ", expected " + std::to_string(kFormatVersion));
  }
  NGramHistogram h;
  h.n = get_le(data, 8, 4);
  const auto entries = get_le(data, 12, 8);
  const std::uint64_t entry_size = 8 * (h.n + 1);
  const std::uint64_t body = data.size() - kHeader - 32;
  if (h.n > 0xFFFF || body % entry_size != 0 || body / entry_size != entries || (h.n == 0 && entries != 0)) {
    malformed("binary histogram length does not match its header");
  }
  const auto digest = sha256_raw(data.data(), data.size() - 32);
  if (!std::equal(digest.begin(), digest.end(), data.end() - 32)) {
    throw Error(ErrorCode::HashMismatch, "histogram content does not match its digest");
  }
  std::size_t at = kHeader;
  for (std::uint64_t i = 0; i < entries; ++i) {
    NGram g;
    for (std::size_t k = 0; k < h.n; ++k, at += 8) g.values.push_back(static_cast<std::int64_t>(get_le(data, at, 8)));
    const auto c = get_le(data, at, 8);
    at += 8;
    if (c == 0) malformed("zero count");
    if (!h.counts.empty() && !(h.counts.rbegin()->first < g)) malformed("grams out of order");
    h.counts.emplace_hint(h.counts.end(), std::move(g), c);
  }
  return h;
}

// --- model ---

std::string serialize_model(const BayesModel& m) {
  std::ostringstream body;
  body << "mode\t" << m.mode.to_string() << '\n';
  body << "selector\t" << m.mode.selector.to_string() << '\n';
  body << "alpha\t" << format_double(m.alpha) << '\n';
  body << "samples\t" << m.sample_counts[0] << '\t' << m.sample_counts[1] << '\n';
  body << "vocab\t" << m.vocab_size << '\n';
  for (std::size_t c = 0; c < 2; ++c) {
    const char* label = to_string(c == 0 ? ClassLabel::goodware : ClassLabel::malware);
    for (const auto& [t, n] : m.token_counts[c]) body << "token\t" << label << '\t' << t.to_string() << '\t' << n << '\n';
  }
  return finish_document("model", body.str());
}

BayesModel parse_model(std::string_view text) {
  const auto rows = open_document(text, "model");
  const char* order[] = {"mode", "selector", "alpha", "samples", "vocab"};
  if (rows.size() < std::size(order)) malformed("model header records missing");
  for (std::size_t i = 0; i < std::size(order); ++i) {
    if (rows[i][0] != order[i]) malformed(std::string("expected '") + order[i] + "' record");
  }
  BayesModel m;
  try {
    expect_fields(rows[0], 2);
    expect_fields(rows[1], 2);
    m.mode = FeatureMode::parse(rows[0][1], Selector::parse(rows[1][1]));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Malformed) throw;
    malformed("bad feature mode");
  }
  expect_fields(rows[2], 2);
  m.alpha = parse_double(rows[2][1], "alpha");
  if (!(m.alpha > 0.0)) malformed("alpha must be > 0");
  expect_fields(rows[3], 3);
  m.sample_counts = {parse_int<std::uint64_t>(rows[3][1], "sample count"),
                     parse_int<std::uint64_t>(rows[3][2], "sample count")};
  expect_fields(rows[4], 2);
  m.vocab_size = parse_int<std::uint64_t>(rows[4][1], "vocab size");
  for (std::size_t i = std::size(order); i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row[0] != "token") malformed("unknown record '" + std::string(row[0]) + "'");
    expect_fields(row, 4);
    std::size_t c = 0;
    if (row[1] == "goodware") {
      c = 0;
    } else if (row[1] == "malware") {
      c = 1;
    } else {
      malformed("bad class label");
    }
    Token t;
    try {
      t = Token::parse(row[2]);
    } catch (const Error&) {
      malformed("bad token");
    }
    const auto n = parse_int<std::uint64_t>(row[3], "token count");
    if (n == 0) malformed("zero token count");
    auto& counts = m.token_counts[c];
    if (!counts.empty() && !(counts.rbegin()->first < t)) malformed("tokens out of order");
    counts.emplace_hint(counts.end(), std::move(t), n);
    m.class_totals[c] += n;
  }
  std::set<Token> vocab;
  for (const auto& counts : m.token_counts)
    for (const auto& [t, n] : counts) vocab.insert(t);
  if (vocab.size() != m.vocab_size) malformed("vocab size does not match the token records");
  return m;
}

// --- manifest ---

const char* to_string(CorpusLabel label) noexcept {
  switch (label) {
    case CorpusLabel::goodware: return "goodware";
    case CorpusLabel::malware: return "malware";
    case CorpusLabel::test: return "test";
  }
  return "?";
}

CorpusLabel parse_corpus_label(std::string_view text) {
  for (auto l : {CorpusLabel::goodware, CorpusLabel::malware, CorpusLabel::test}) {
    if (text == to_string(l)) return l;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown corpus label '" + std::string(text) + "'");
}

const char* to_string(ImportSource source) noexcept {
  return source == ImportSource::native_scan ? "native-scan" : "listing-import";
}

std::string serialize_manifest(const CorpusManifest& m) {
  auto entries = m.entries;
  std::sort(entries.begin(), entries.end());
  std::ostringstream body;
  body << "label\t" << to_string(m.label) << '\n';
  for (const auto& e : entries) {
    body << "entry\t" << percent_escape(e.sample_id.name) << '\t' << e.sample_id.content_hash << '\t'
         << percent_escape(e.path) << '\t' << to_string_verdict(e.verdict) << '\t' << e.cfc_count << '\t'
         << to_string(e.source) << '\n';
  }
  return finish_document("manifest", body.str());
}

CorpusManifest parse_manifest(std::string_view text) {
  const auto rows = open_document(text, "manifest");
  if (rows.empty() || rows[0][0] != "label") malformed("missing label record");
  expect_fields(rows[0], 2);
  CorpusManifest m;
  try {
    m.label = parse_corpus_label(rows[0][1]);
  } catch (const Error&) {
    malformed("bad corpus label");
  }
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row[0] != "entry") malformed("unknown record '" + std::string(row[0]) + "'");
    expect_fields(row, 7);
    check_hash_field(row[2]);
    ManifestEntry e;
    e.sample_id = {percent_unescape(row[1]), std::string(row[2])};
    e.path = percent_unescape(row[3]);
    e.verdict = parse_verdict(row[4]);
    e.cfc_count = parse_int<std::uint64_t>(row[5], "cfc count");
    e.source = parse_source(row[6]);
    if (!m.entries.empty()) {
      if (m.entries.back().sample_id == e.sample_id) {
        throw Error(ErrorCode::DuplicateSample, "duplicate sample " + e.sample_id.key());
      }
      if (!(m.entries.back() < e)) malformed("entries out of order");
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

// --- files ---

std::string read_file_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  return ss.str();
}

void write_file_text(const fs::path& path, std::string_view text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot replace " + path.string() + ": " + ec.message());
}

ManifestEntry save_feature_set(const FeatureSet& fset, const fs::path& path, ImportSource source,
                               GateVerdict verdict) {
  write_file_text(path, serialize_feature_set(fset));
  return {fset.sample_id, path.generic_string(), verdict, fset.event_count(), source};
}

FeatureSet load_feature_set(const fs::path& path) { return parse_feature_set(read_file_text(path)); }

void save_histogram(const NGramHistogram& h, const fs::path& path) { write_file_text(path, serialize_histogram(h)); }

NGramHistogram load_histogram(const fs::path& path) {
  const auto text = read_file_text(path);
  if (text.size() >= 4 && std::equal(kBinaryMagic.begin(), kBinaryMagic.end(), text.begin())) {
    return parse_histogram_binary(
        ByteView(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  }
  return parse_histogram(text);
}

void save_model(const BayesModel& m, const fs::path& path) { write_file_text(path, serialize_model(m)); }
BayesModel load_model(const fs::path& path) { return parse_model(read_file_text(path)); }

void save_manifest(const CorpusManifest& m, const fs::path& path) { write_file_text(path, serialize_manifest(m)); }
CorpusManifest load_manifest(const fs::path& path) { return parse_manifest(read_file_text(path)); }

std::vector<FeatureSet> load_corpus_features(const CorpusManifest& m, const fs::path& manifest_dir) {
  std::vector<FeatureSet> out;
  out.reserve(m.entries.size());
  for (const auto& e : m.entries) {
    fs::path p = e.path;
    if (p.is_relative()) p = manifest_dir / p;
    auto fset = load_feature_set(p);
    if (fset.sample_id != e.sample_id) {
      throw Error(ErrorCode::HashMismatch, "feature file " + p.string() + " holds " + fset.sample_id.key() +
                                               ", manifest expects " + e.sample_id.key());
    }
    out.push_back(std::move(fset));
  }
  return out;
}

CorpusManifest merge_corpus(std::span<const CorpusManifest> manifests) {
  CorpusManifest out;
  if (manifests.empty()) return out;
  out.label = manifests[0].label;
  for (const auto& m : manifests) {
    if (m.label != out.label) {
      throw Error(ErrorCode::MixedLabels, std::string("cannot merge ") + to_string(m.label) + " into " +
                                              to_string(out.label));
    }
    out.entries.insert(out.entries.end(), m.entries.begin(), m.entries.end());
  }
  std::sort(out.entries.begin(), out.entries.end());
  for (std::size_t i = 1; i < out.entries.size(); ++i) {
    if (out.entries[i].sample_id == out.entries[i - 1].sample_id) {
      throw Error(ErrorCode::DuplicateSample, "duplicate sample " + out.entries[i].sample_id.key());
    }
  }
  return out;
}

NGramHistogram corpus_ngram_db(std::span<const FeatureSet> samples, std::size_t n, const Selector& selector) {
  NGramHistogram out;
  out.n = n;
  for (const auto& s : samples) merge_into(out, sample_histogram(s, n, selector));
  return out;
}

NGramHistogram corpus_ngram_db(const CorpusManifest& m, const fs::path& manifest_dir, std::size_t n,
                               const Selector& selector) {
  const auto features = load_corpus_features(m, manifest_dir);
  return corpus_ngram_db(features, n, selector);
}

// --- listing import ---

ListingImport import_listing(std::string_view text) {
  ListingImport imp;
  std::size_t line_number = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    auto is_space = [](char c) { return c == ' ' || c == '\t'; };
    std::size_t i = 0;
    while (i < line.size() && is_space(line[i])) ++i;
    if (i == line.size()) continue;
    if (line[i] == ';') {
      ++imp.skipped_lines;
      continue;
    }

    const auto colon = line.find(':', i);
    const auto word_end = std::find_if(line.begin() + static_cast<std::ptrdiff_t>(i), line.end(), is_space) - line.begin();
    if (colon == std::string_view::npos || colon == i || static_cast<std::ptrdiff_t>(colon) > word_end) {
      imp.issues.push_back({line_number, ErrorCode::UnparsableLine, std::string(line)});
      continue;
    }
    const std::string section(line.substr(i, colon - i));
    const auto addr_text = line.substr(colon + 1, static_cast<std::size_t>(word_end) - colon - 1);
    std::uint64_t address = 0;
    const auto [p, ec] = std::from_chars(addr_text.data(), addr_text.data() + addr_text.size(), address, 16);
    if (addr_text.empty() || ec != std::errc{} || p != addr_text.data() + addr_text.size()) {
      imp.issues.push_back({line_number, ErrorCode::UnparsableLine, std::string(line)});
      continue;
    }

    ListingLine ll;
    ll.line_number = line_number;
    ll.section = section;
    ll.address = address;
    std::size_t pos = static_cast<std::size_t>(word_end);
    while (true) {
      while (pos < line.size() && is_space(line[pos])) ++pos;
      std::size_t end = pos;
      while (end < line.size() && !is_space(line[end])) ++end;
      const auto tok = line.substr(pos, end - pos);
      const bool byte_token = tok.size() == 2 && std::all_of(tok.begin(), tok.end(), [](char c) {
                                return (c >= '0' && c <= '9') || (c >= 'A' && c <= 'F');
                              });
      if (!byte_token) break;
      ll.bytes.push_back(static_cast<std::uint8_t>(hex_value(tok[0]) << 4 | hex_value(tok[1])));
      pos = end;
    }
    if (ll.bytes.empty()) {
      ++imp.skipped_lines;
      continue;
    }
    ll.mnemonic = std::string(line.substr(pos));
    imp.lines.push_back(std::move(ll));
  }
  if (imp.lines.empty()) throw Error(ErrorCode::EmptyImport, "listing has no lines with a byte column");

  std::map<std::string, std::size_t> index;
  std::vector<ListingLine> kept;
  for (auto& ll : imp.lines) {
    auto [it, fresh] = index.try_emplace(ll.section, imp.sections.size());
    if (fresh) imp.sections.push_back({ll.section, ll.address, {}, 0});
    auto& sec = imp.sections[it->second];
    const std::uint64_t cursor = sec.base_address + sec.image.size();
    if (ll.address < cursor) {
      imp.issues.push_back({ll.line_number, ErrorCode::UnparsableLine, "address overlaps the previous line"});
      continue;
    }
    const std::uint64_t gap = ll.address - cursor;
    if (gap > kMaxListingGap) {
      imp.issues.push_back({ll.line_number, ErrorCode::UnparsableLine, "address gap too large"});
      continue;
    }
    sec.image.insert(sec.image.end(), gap, 0);
    sec.gap_bytes += gap;
    sec.image.insert(sec.image.end(), ll.bytes.begin(), ll.bytes.end());
    kept.push_back(std::move(ll));
  }
  imp.lines = std::move(kept);
  return imp;
}

std::vector<ExecutableSection> listing_sections(const ListingImport& imp, std::uint32_t image_base,
                                                const std::string& source_file) {
  std::vector<ExecutableSection> out;
  for (const auto& s : imp.sections) {
    if (s.base_address < image_base || s.base_address - image_base > 0xFFFFFFFFull) {
      throw Error(ErrorCode::InvalidArgument, "section " + s.name + " lies below the image base");
    }
    ExecutableSection es;
    es.name = make_section_tag(s.name);
    es.rva = static_cast<std::uint32_t>(s.base_address - image_base);
    es.raw_offset = 0;
    es.bytes = s.image;
    es.source_file = source_file;
    out.push_back(std::move(es));
  }
  return out;
}

}  // namespace cfcscan

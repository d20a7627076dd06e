#pragma once

// Versioned on-disk formats for feature sets, histograms, models and manifests,
// plus the disassembly listing importer. Layouts are documented in docs/formats.md.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cfcscan/bayes.hpp"
#include "cfcscan/cfc_features.hpp"
#include "cfcscan/entropy_gate.hpp"
#include "cfcscan/pe_loader.hpp"

namespace cfcscan {

inline constexpr int kFormatVersion = 1;

// Lowercase hex SHA-256.
std::string sha256_hex(ByteView data);
std::string sha256_hex(std::string_view text);

// '%', control bytes, space and bytes >= 0x7F become %XX.
std::string percent_escape(std::string_view s);
// Throws Malformed on a bad escape.
std::string percent_unescape(std::string_view s);

// --- text formats; each parse_* verifies version, then the trailer digest ---

std::string serialize_feature_set(const FeatureSet& fs);
FeatureSet parse_feature_set(std::string_view text);

std::string serialize_histogram(const NGramHistogram& h);
NGramHistogram parse_histogram(std::string_view text);

// Compact binary histogram ("CFCH").
std::vector<std::uint8_t> serialize_histogram_binary(const NGramHistogram& h);
NGramHistogram parse_histogram_binary(ByteView data);

std::string serialize_model(const BayesModel& m);
BayesModel parse_model(std::string_view text);

enum class CorpusLabel { goodware, malware, test };

const char* to_string(CorpusLabel label) noexcept;
CorpusLabel parse_corpus_label(std::string_view text);

enum class ImportSource { native_scan, listing_import };

const char* to_string(ImportSource source) noexcept;

struct ManifestEntry {
  SampleId sample_id;
  // Feature file, relative to the manifest's directory when not absolute.
  std::string path;
  GateVerdict verdict = GateVerdict::pass;
  std::uint64_t cfc_count = 0;
  ImportSource source = ImportSource::native_scan;

  auto operator<=>(const ManifestEntry&) const = default;
};

struct CorpusManifest {
  CorpusLabel label = CorpusLabel::goodware;
  // Kept sorted by sample id.
  std::vector<ManifestEntry> entries;

  bool operator==(const CorpusManifest&) const = default;
};

std::string serialize_manifest(const CorpusManifest& m);
// Also rejects duplicate sample ids (DuplicateSample).
CorpusManifest parse_manifest(std::string_view text);

// --- file wrappers; IoError on filesystem failures ---

std::string read_file_text(const std::filesystem::path& path);
void write_file_text(const std::filesystem::path& path, std::string_view text);

ManifestEntry save_feature_set(const FeatureSet& fs, const std::filesystem::path& path,
                               ImportSource source = ImportSource::native_scan,
                               GateVerdict verdict = GateVerdict::pass);
FeatureSet load_feature_set(const std::filesystem::path& path);

void save_histogram(const NGramHistogram& h, const std::filesystem::path& path);
// Text or binary, detected from the first bytes.
NGramHistogram load_histogram(const std::filesystem::path& path);

void save_model(const BayesModel& m, const std::filesystem::path& path);
BayesModel load_model(const std::filesystem::path& path);

void save_manifest(const CorpusManifest& m, const std::filesystem::path& path);
CorpusManifest load_manifest(const std::filesystem::path& path);

// Loads every entry's feature file and checks its sample id (HashMismatch otherwise).
std::vector<FeatureSet> load_corpus_features(const CorpusManifest& m, const std::filesystem::path& manifest_dir);

// Union of entries, sorted by id. Throws DuplicateSample or MixedLabels.
CorpusManifest merge_corpus(std::span<const CorpusManifest> manifests);

// Count-sum of the member samples' n-gram histograms.
NGramHistogram corpus_ngram_db(std::span<const FeatureSet> samples, std::size_t n,
                               const Selector& selector = Selector::jcc());
NGramHistogram corpus_ngram_db(const CorpusManifest& m, const std::filesystem::path& manifest_dir, std::size_t n,
                               const Selector& selector = Selector::jcc());

// --- listing import ---

struct ListingLine {
  std::size_t line_number = 0;
  std::string section;
  std::uint64_t address = 0;
  Bytes bytes;
  std::string mnemonic;
};

struct ListingIssue {
  std::size_t line_number = 0;
  ErrorCode code = ErrorCode::UnparsableLine;
  std::string text;
};

struct ListingSection {
  std::string name;
  std::uint64_t base_address = 0;
  Bytes image;
  // Zero-filled bytes between non-contiguous lines.
  std::uint64_t gap_bytes = 0;
};

struct ListingImport {
  std::vector<ListingLine> lines;
  std::vector<ListingSection> sections;
  // Lines with an address but no byte column (labels, declarations).
  std::size_t skipped_lines = 0;
  std::vector<ListingIssue> issues;
};

// Byte tokens are exactly two uppercase hex digits; the mnemonic column is never read.
// Throws EmptyImport when no line carries bytes.
ListingImport import_listing(std::string_view text);

// Sections as if loaded from a PE mapped at image_base (rva = base - image_base).
std::vector<ExecutableSection> listing_sections(const ListingImport& imp, std::uint32_t image_base,
                                                const std::string& source_file = {});

}  // namespace cfcscan

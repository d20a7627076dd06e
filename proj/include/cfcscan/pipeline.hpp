#pragma once

// File-level scan: load, gate, decode, filter, extract.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cfcscan/cfc_features.hpp"
#include "cfcscan/corpus_store.hpp"
#include "cfcscan/disasm_x86.hpp"
#include "cfcscan/entropy_gate.hpp"

namespace cfcscan {

inline constexpr std::uint64_t kDefaultMaxSize = 1u << 20;
inline constexpr std::uint32_t kDefaultListingImageBase = 0x400000;

struct ScanConfig {
  GateConfig gate;
  CfcSet cfc_set = CfcSet::all;
  DataFilterPolicy data_filter;
  // Native PE files larger than this are skipped.
  std::uint64_t max_size = kDefaultMaxSize;
  // fnmatch patterns matched against the file name.
  std::vector<std::string> exclude;
  std::uint32_t listing_image_base = kDefaultListingImageBase;
  // Treat every input as a listing.
  bool force_listing = false;
};

enum class ScanStatus {
  ok,
  name_excluded,
  too_large,
  io_error,
  not_pe,
  truncated,
  unsupported_machine,
  no_code,
  packed,
  no_cfc,
  listing_error,
  // Same sample id as an earlier file in the batch.
  duplicate,
};

const char* to_string(ScanStatus status) noexcept;

struct SectionReport {
  std::string name;
  std::uint32_t rva = 0;
  std::uint64_t size = 0;
  EntropyReport entropy;
  // False when the entropy gate excluded the section.
  bool included = false;
  std::uint64_t instructions = 0;
  std::uint64_t resyncs = 0;
  std::uint64_t cfc_count = 0;
  std::uint64_t flagged = 0;
};

struct ScanResult {
  std::string path;
  SampleId sample_id;
  ScanStatus status = ScanStatus::ok;
  std::string reason;
  ImportSource source = ImportSource::native_scan;
  std::vector<SectionReport> sections;
  // Listing lines that could not be parsed.
  std::uint64_t listing_issues = 0;
  std::optional<FeatureSet> features;

  [[nodiscard]] bool produced() const noexcept { return features.has_value(); }
  // pass unless the gate excluded at least one executable section.
  [[nodiscard]] GateVerdict verdict() const noexcept;
};

bool is_excluded(const std::string& file_name, const std::vector<std::string>& patterns);

// Sections are gated one by one; a sample is packed only if every section is.
ScanResult scan_executable_sections(const std::vector<ExecutableSection>& sections, SampleId id,
                                    const ScanConfig& config);
ScanResult scan_pe_bytes(const std::string& name, ByteView raw, const ScanConfig& config);
ScanResult scan_listing_text(const std::string& name, std::string_view text, const ScanConfig& config);

// Listings are recognised by the absence of an MZ header (or force_listing).
ScanResult scan_file(const std::filesystem::path& path, const ScanConfig& config);

// Directories are walked recursively. Results are sorted by sample id then path,
// independent of jobs (0 = hardware concurrency).
std::vector<std::filesystem::path> expand_inputs(const std::vector<std::filesystem::path>& inputs);
std::vector<ScanResult> scan_paths(const std::vector<std::filesystem::path>& inputs, const ScanConfig& config,
                                   unsigned jobs = 1);

}  // namespace cfcscan

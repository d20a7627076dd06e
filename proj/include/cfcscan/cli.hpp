#pragma once

// Subcommand front end. run_cli is what the cfcscan executable calls.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cfcscan/bayes.hpp"
#include "cfcscan/corpus_store.hpp"
#include "cfcscan/pipeline.hpp"
#include "cfcscan/stats.hpp"

namespace cfcscan {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNoFeatures = 2;

inline constexpr const char* kManifestFileName = "manifest.tsv";
inline constexpr const char* kCorpusRootEnv = "CFCSCAN_CORPUS_ROOT";

struct RunConfig {
  std::string command;
  std::vector<std::string> inputs;
  ScanConfig scan;
  unsigned jobs = 0;
  std::size_t n = 2;
  std::uint64_t band_lo = kDefaultBandLo;
  std::uint64_t band_hi = kDefaultBandHi;
  bool band_set = false;
  double alpha = kDefaultAlpha;
  std::uint64_t min_features = kDefaultMinFeatures;
  ReportFormat format = ReportFormat::table;
  CorpusLabel label = CorpusLabel::test;
  // "raw", "ngram" or "frequency"; n and the band come from the fields above.
  std::string mode = "raw";
  std::string selector = "jcc";
  SignMode sign = SignMode::magnitude;
  std::vector<std::string> good;
  std::vector<std::string> bad;
  std::string out;
  bool binary = false;
  // Relative corpus paths resolve against this (flag, then CFCSCAN_CORPUS_ROOT).
  std::string corpus_root;
};

// Corpus arguments name a manifest file or a directory holding kManifestFileName.
std::filesystem::path resolve_corpus(const std::string& arg, const std::string& corpus_root);

// Manifests merged into one; entry paths made absolute.
CorpusManifest load_corpora(const std::vector<std::string>& args, const std::string& corpus_root);

void write_scan_report(std::ostream& out, const std::vector<ScanResult>& results, ReportFormat format);

// args excludes the program name. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cfcscan

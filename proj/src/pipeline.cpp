#include "cfcscan/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <fnmatch.h>
#include <thread>

#include "cfcscan/error.hpp"

namespace cfcscan {

namespace fs = std::filesystem;

namespace {

ScanStatus status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotPe: return ScanStatus::not_pe;
    case ErrorCode::Truncated: return ScanStatus::truncated;
    case ErrorCode::UnsupportedMachine: return ScanStatus::unsupported_machine;
    case ErrorCode::IoError: return ScanStatus::io_error;
    case ErrorCode::EmptyImport:
    case ErrorCode::UnparsableLine:
    case ErrorCode::InvalidArgument: return ScanStatus::listing_error;
    default: return ScanStatus::io_error;
  }
}

ScanResult skipped(ScanResult r, ScanStatus status, std::string reason) {
  r.status = status;
  r.reason = std::move(reason);
  return r;
}

}  // namespace

const char* to_string(ScanStatus status) noexcept {
  switch (status) {
    case ScanStatus::ok: return "ok";
    case ScanStatus::name_excluded: return "name-excluded";
    case ScanStatus::too_large: return "too-large";
    case ScanStatus::io_error: return "io-error";
    case ScanStatus::not_pe: return "not-pe";
    case ScanStatus::truncated: return "truncated";
    case ScanStatus::unsupported_machine: return "unsupported-machine";
    case ScanStatus::no_code: return "no-code";
    case ScanStatus::packed: return "packed";
    case ScanStatus::no_cfc: return "no-cfc";
    case ScanStatus::listing_error: return "listing-error";
    case ScanStatus::duplicate: return "duplicate";
  }
  return "?";
}

GateVerdict ScanResult::verdict() const noexcept {
  for (const auto& s : sections) {
    if (!s.included) return GateVerdict::packed;
  }
  return GateVerdict::pass;
}

bool is_excluded(const std::string& file_name, const std::vector<std::string>& patterns) {
  return std::any_of(patterns.begin(), patterns.end(),
                     [&](const std::string& p) { return ::fnmatch(p.c_str(), file_name.c_str(), 0) == 0; });
}

ScanResult scan_executable_sections(const std::vector<ExecutableSection>& sections, SampleId id,
                                    const ScanConfig& config) {
  ScanResult r;
  r.sample_id = std::move(id);
  if (sections.empty()) return skipped(std::move(r), ScanStatus::no_code, "no executable sections");

  std::vector<DecodedSection> decoded;
  for (const auto& s : sections) {
    SectionReport rep;
    rep.name = display_name(s.name);
    rep.rva = s.rva;
    rep.size = s.bytes.size();
    if (s.bytes.empty()) {
      r.sections.push_back(rep);
      continue;
    }
    rep.entropy = gate(s, config.gate);
    rep.included = rep.entropy.verdict == GateVerdict::pass;
    if (rep.included) {
      const auto stream = decode_stream(s, config.cfc_set);
      auto filtered = data_in_code_filter(stream.instructions, s.bytes, config.data_filter);
      rep.instructions = filtered.instructions.size();
      rep.resyncs = stream.resyncs.size();
      rep.flagged = filtered.report.flagged.size();
      decoded.push_back(make_decoded_section(s, filtered.instructions, rep.entropy.average_entropy));
      rep.cfc_count = decoded.back().cfcs.size();
    }
    r.sections.push_back(rep);
  }
  if (decoded.empty()) {
    const bool any_code = std::any_of(r.sections.begin(), r.sections.end(), [](const auto& s) { return s.size > 0; });
    if (!any_code) return skipped(std::move(r), ScanStatus::no_code, "executable sections are empty");
    return skipped(std::move(r), ScanStatus::packed, "every executable section failed the entropy gate");
  }
  try {
    r.features = build_feature_set(r.sample_id, decoded);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoCfcFound) throw;
    return skipped(std::move(r), ScanStatus::no_cfc, "no control flow changes found");
  }
  return r;
}

ScanResult scan_pe_bytes(const std::string& name, ByteView raw, const ScanConfig& config) {
  SampleId id{name, sha256_hex(raw)};
  try {
    const auto pe = parse_pe(raw);
    auto r = scan_executable_sections(executable_sections(pe, name), id, config);
    r.source = ImportSource::native_scan;
    return r;
  } catch (const Error& e) {
    ScanResult r;
    r.sample_id = std::move(id);
    return skipped(std::move(r), status_for(e.code()), e.what());
  }
}

ScanResult scan_listing_text(const std::string& name, std::string_view text, const ScanConfig& config) {
  SampleId id{name, sha256_hex(text)};
  try {
    const auto imp = import_listing(text);
    auto r = scan_executable_sections(listing_sections(imp, config.listing_image_base, name), id, config);
    r.source = ImportSource::listing_import;
    r.listing_issues = imp.issues.size();
    return r;
  } catch (const Error& e) {
    ScanResult r;
    r.sample_id = std::move(id);
    r.source = ImportSource::listing_import;
    return skipped(std::move(r), status_for(e.code()), e.what());
  }
}

ScanResult scan_file(const fs::path& path, const ScanConfig& config) {
  const std::string name = path.filename().string();
  ScanResult r;
  r.path = path.generic_string();
  r.sample_id.name = name;
  if (is_excluded(name, config.exclude)) {
    return skipped(std::move(r), ScanStatus::name_excluded, "file name matches an exclude pattern");
  }
  std::string data;
  try {
    data = read_file_text(path);
  } catch (const Error& e) {
    return skipped(std::move(r), ScanStatus::io_error, e.what());
  }
  const bool listing = config.force_listing || !(data.size() >= 2 && data[0] == 'M' && data[1] == 'Z');
  ScanResult out;
  if (listing) {
    out = scan_listing_text(name, data, config);
    if (!config.force_listing && out.status == ScanStatus::listing_error &&
        out.reason.rfind(to_string(ErrorCode::EmptyImport), 0) == 0) {
      out.status = ScanStatus::not_pe;
      out.reason = "no MZ header and no listing byte lines";
    }
  } else {
    if (data.size() > config.max_size) {
      r.sample_id.content_hash = sha256_hex(std::string_view(data));
      return skipped(std::move(r), ScanStatus::too_large,
                     std::to_string(data.size()) + " bytes exceeds the size ceiling of " +
                         std::to_string(config.max_size));
    }
    out = scan_pe_bytes(name, ByteView(reinterpret_cast<const std::uint8_t*>(data.data()), data.size()), config);
  }
  out.path = r.path;
  return out;
}

std::vector<fs::path> expand_inputs(const std::vector<fs::path>& inputs) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    std::error_code ec;
    if (fs::is_directory(in, ec)) {
      for (auto it = fs::recursive_directory_iterator(in, fs::directory_options::skip_permission_denied, ec);
           it != fs::recursive_directory_iterator(); it.increment(ec)) {
        if (ec) break;
        if (it->is_regular_file(ec)) files.push_back(it->path());
      }
    } else {
      files.push_back(in);
    }
  }
  std::sort(files.begin(), files.end());
  files.erase(std::unique(files.begin(), files.end()), files.end());
  return files;
}

std::vector<ScanResult> scan_paths(const std::vector<fs::path>& inputs, const ScanConfig& config, unsigned jobs) {
  const auto files = expand_inputs(inputs);
  std::vector<ScanResult> results(files.size());
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, std::max<std::size_t>(files.size(), 1)));

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < files.size(); i = next++) results[i] = scan_file(files[i], config);
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  std::sort(results.begin(), results.end(), [](const ScanResult& a, const ScanResult& b) {
    return std::tie(a.sample_id, a.path) < std::tie(b.sample_id, b.path);
  });
  for (std::size_t i = 1; i < results.size(); ++i) {
    auto& r = results[i];
    if (r.produced() && results[i - 1].sample_id == r.sample_id) {
      r.features.reset();
      r.status = ScanStatus::duplicate;
      r.reason = "same name and content as " + results[i - 1].path;
    }
  }
  return results;
}

}  // namespace cfcscan

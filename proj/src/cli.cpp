#include "cfcscan/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <ostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "cfcscan/error.hpp"

namespace cfcscan {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

// --- generic tabular output ---

std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string text_cell(const Json& v) {
  if (v.is_null()) return "-";
  if (v.is_string()) {
    std::string s;
    for (char c : v.get<std::string>()) {
      if (c == '\t') s += "%09";
      else if (c == '\n') s += "%0A";
      else if (c == '\r') s += "%0D";
      else s += c;
    }
    return s;
  }
  if (v.is_number_float()) return fixed(v.get<double>());
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  return v.dump();
}

std::string csv_cell(const Json& v) {
  if (v.is_null()) return "";
  std::string s = v.is_string() ? v.get<std::string>() : text_cell(v);
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Json>> rows;
  // Emitted after the rows: "# k v k v ..." in table/csv mode, an object in records mode.
  Json footer;

  void write(std::ostream& out, ReportFormat format) const {
    if (format == ReportFormat::records) {
      for (const auto& row : rows) {
        Json obj = Json::object();
        for (std::size_t i = 0; i < columns.size(); ++i) obj[columns[i]] = row[i];
        out << obj.dump() << '\n';
      }
      if (!footer.is_null()) out << Json{{"summary", footer}}.dump() << '\n';
      return;
    }
    const bool csv = format == ReportFormat::csv;
    const char sep = csv ? ',' : '\t';
    for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? std::string(1, sep) : "") << columns[i];
    out << '\n';
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out << sep;
        out << (csv ? csv_cell(row[i]) : text_cell(row[i]));
      }
      out << '\n';
    }
    if (!footer.is_null()) {
      out << '#';
      for (const auto& [k, v] : footer.items()) out << ' ' << k << ' ' << text_cell(v);
      out << '\n';
    }
  }
};

std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08X", v);
  return buf;
}

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

// --- helpers ---

std::string sanitize_file_name(const std::string& name) {
  std::string s;
  for (unsigned char c : name) {
    const bool keep = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '.' ||
                      c == '_' || c == '-';
    s += keep ? static_cast<char>(c) : '_';
    if (s.size() == 64) break;
  }
  return s;
}

std::uint32_t parse_u32(const std::string& text) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(text, &used, 0);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || v > 0xFFFFFFFFull) throw CLI::ValidationError("--image-base", "not a 32-bit number: " + text);
  return static_cast<std::uint32_t>(v);
}

FeatureMode build_mode(const RunConfig& cfg) {
  const auto sel = Selector::parse(cfg.selector);
  if (cfg.mode == "raw") return FeatureMode::raw_mode(sel);
  if (cfg.mode == "ngram") return FeatureMode::ngram_mode(cfg.n, sel);
  return FeatureMode::frequency_mode(cfg.n, cfg.band_lo, cfg.band_hi, sel);
}

std::vector<FeatureSet> corpus_features(const std::vector<std::string>& args, const RunConfig& cfg,
                                        CorpusLabel* label = nullptr) {
  const auto m = load_corpora(args, cfg.corpus_root);
  if (label) *label = m.label;
  return load_corpus_features(m, {});
}

bool starts_with(const std::string& s, std::string_view prefix) {
  return s.size() >= prefix.size() && std::equal(prefix.begin(), prefix.end(), s.begin());
}

// Feature files and manifests are loaded; anything else is scanned.
std::vector<FeatureSet> gather_samples(const RunConfig& cfg, std::ostream& err, std::uint64_t& skipped) {
  std::vector<FeatureSet> samples;
  // A directory holding a manifest is a corpus, not a tree of files.
  std::vector<fs::path> inputs;
  for (const auto& arg : cfg.inputs) {
    std::error_code ec;
    if (fs::is_regular_file(fs::path(arg) / kManifestFileName, ec)) {
      for (auto& fs : corpus_features({arg}, cfg)) samples.push_back(std::move(fs));
    } else {
      inputs.emplace_back(arg);
    }
  }
  for (const auto& path : expand_inputs(inputs)) {
    std::string head;
    try {
      head = read_file_text(path).substr(0, 32);
    } catch (const Error& e) {
      err << "skipped " << path.generic_string() << ": " << e.what() << '\n';
      ++skipped;
      continue;
    }
    if (starts_with(head, "#cfcscan-featureset\t")) {
      samples.push_back(load_feature_set(path));
    } else if (starts_with(head, "#cfcscan-manifest\t")) {
      for (auto& fs : corpus_features({path.string()}, cfg)) samples.push_back(std::move(fs));
    } else {
      auto r = scan_file(path, cfg.scan);
      if (r.produced()) {
        samples.push_back(std::move(*r.features));
      } else {
        err << "skipped " << r.path << ": " << to_string(r.status) << ": " << r.reason << '\n';
        ++skipped;
      }
    }
  }
  std::sort(samples.begin(), samples.end(),
            [](const FeatureSet& a, const FeatureSet& b) { return a.sample_id < b.sample_id; });
  return samples;
}

struct StatsInput {
  std::vector<SampleStats> stats;
  std::uint64_t without_selected = 0;
};

StatsInput per_sample_stats(const std::vector<FeatureSet>& samples, const RunConfig& cfg) {
  StatsInput in;
  const auto sel = Selector::parse(cfg.selector);
  for (const auto& fs : samples) {
    const auto seq = displacement_sequence(fs, sel);
    if (seq.empty()) {
      ++in.without_selected;
      continue;
    }
    in.stats.push_back(sample_stats(seq, cfg.sign));
  }
  return in;
}

// --- commands ---

int cmd_scan(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  std::vector<fs::path> inputs(cfg.inputs.begin(), cfg.inputs.end());
  const auto results = scan_paths(inputs, cfg.scan, cfg.jobs);
  write_scan_report(out, results, cfg.format);

  const auto produced = std::count_if(results.begin(), results.end(), [](const auto& r) { return r.produced(); });
  if (!cfg.out.empty() && produced > 0) {
    const fs::path dir = cfg.out;
    CorpusManifest m;
    m.label = cfg.label;
    for (const auto& r : results) {
      if (!r.produced()) continue;
      const auto rel = fs::path("features") /
                       (r.sample_id.content_hash.substr(0, 16) + "_" + sanitize_file_name(r.sample_id.name) + ".fs");
      auto entry = save_feature_set(*r.features, dir / rel, r.source, r.verdict());
      entry.path = rel.generic_string();
      m.entries.push_back(std::move(entry));
    }
    std::sort(m.entries.begin(), m.entries.end());
    save_manifest(m, dir / kManifestFileName);
    err << "wrote " << m.entries.size() << " feature sets to " << dir.generic_string() << '\n';
  }
  if (produced == 0) {
    err << "no file produced features\n";
    return kExitNoFeatures;
  }
  return kExitOk;
}

int cmd_stats(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  // One column per corpus label, in label order.
  std::map<CorpusLabel, std::vector<FeatureSet>> groups;
  for (const auto& arg : cfg.inputs) {
    CorpusLabel label{};
    auto fsets = corpus_features({arg}, cfg, &label);
    auto& g = groups[label];
    for (auto& f : fsets) g.push_back(std::move(f));
  }
  Table t;
  t.columns = {"statistic"};
  std::vector<std::vector<TableRow>> columns;
  Json footer = Json::object();
  for (auto& [label, samples] : groups) {
    std::sort(samples.begin(), samples.end(), [](const auto& a, const auto& b) { return a.sample_id < b.sample_id; });
    for (std::size_t i = 1; i < samples.size(); ++i) {
      if (samples[i].sample_id == samples[i - 1].sample_id)
        throw Error(ErrorCode::DuplicateSample, samples[i].sample_id.key());
    }
    const auto in = per_sample_stats(samples, cfg);
    if (in.without_selected) {
      err << in.without_selected << ' ' << to_string(label) << " samples have no selected control flow changes\n";
    }
    if (in.stats.empty()) throw Error(ErrorCode::EmptyCorpus, std::string(to_string(label)) + " corpus has no usable samples");
    const auto summary = corpus_summary(in.stats, label == CorpusLabel::malware ? ClassLabel::malware
                                                                                 : ClassLabel::goodware);
    t.columns.push_back(to_string(label));
    columns.push_back(summary_table(summary, summary));
    const std::string prefix = to_string(label);
    footer[prefix + "_samples"] = summary.sample_count;
    footer[prefix + "_median_over_spread_undefined"] = summary.median_over_spread_excluded;
    footer[prefix + "_variance_coefficient_undefined"] = summary.variance_coefficient_excluded;
  }
  if (columns.empty()) throw Error(ErrorCode::EmptyCorpus, "no corpus given");
  for (std::size_t r = 0; r < columns.front().size(); ++r) {
    std::vector<Json> row{columns.front()[r].name};
    for (const auto& col : columns) row.push_back(optional_number(col[r].good));
    t.rows.push_back(std::move(row));
  }
  t.footer = std::move(footer);
  t.write(out, cfg.format);
  return kExitOk;
}

int cmd_compare(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (cfg.inputs.size() != 2) throw CLI::ValidationError("compare", "expects exactly two corpora");
  const auto a = per_sample_stats(corpus_features({cfg.inputs[0]}, cfg), cfg);
  const auto b = per_sample_stats(corpus_features({cfg.inputs[1]}, cfg), cfg);
  if (a.stats.empty() || b.stats.empty()) throw Error(ErrorCode::EmptyCorpus, "a corpus has no usable samples");

  Table t;
  t.columns = {"statistic", "rho", "n_pairs", "p_value"};
  for (auto field : {StatField::spread, StatField::scatter, StatField::median, StatField::median_over_spread,
                     StatField::variance_coefficient, StatField::frequency, StatField::variance}) {
    auto values = [&](const StatsInput& in) {
      std::vector<double> v;
      for (const auto& s : in.stats) {
        if (auto x = stat_value(s, field)) v.push_back(*x);
      }
      return v;
    };
    const auto va = values(a);
    const auto vb = values(b);
    try {
      const auto rho = corpus_correlation(va, vb);
      t.rows.push_back({to_string(field), rho.rho, rho.n_pairs, optional_number(rho.p_value)});
    } catch (const Error& e) {
      err << to_string(field) << ": " << e.what() << '\n';
      t.rows.push_back({to_string(field), nullptr, std::min(va.size(), vb.size()), nullptr});
    }
  }
  t.write(out, cfg.format);
  return kExitOk;
}

int cmd_ngrams(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  auto h = corpus_ngram_db(corpus_features(cfg.inputs, cfg), cfg.n, Selector::parse(cfg.selector));
  if (cfg.band_set) h = frequency_band(h, cfg.band_lo, cfg.band_hi);
  if (!cfg.out.empty()) {
    if (cfg.binary) {
      const auto bytes = serialize_histogram_binary(h);
      write_file_text(cfg.out, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    } else {
      save_histogram(h, cfg.out);
    }
    err << "wrote " << h.counts.size() << " n-grams to " << cfg.out << '\n';
  }
  Table t;
  t.columns = {"gram", "count"};
  if (cfg.out.empty()) {
    for (const auto& [g, c] : h.counts) {
      std::string key;
      for (std::size_t i = 0; i < g.values.size(); ++i) key += (i ? "," : "") + std::to_string(g.values[i]);
      t.rows.push_back({key, c});
    }
  }
  t.footer = Json{{"n", h.n}, {"distinct", h.counts.size()}, {"total", h.total()}};
  t.write(out, cfg.format);
  return kExitOk;
}

int cmd_exclusive(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  const auto sel = Selector::parse(cfg.selector);
  auto good = corpus_ngram_db(corpus_features(cfg.good, cfg), cfg.n, sel);
  auto bad = corpus_ngram_db(corpus_features(cfg.bad, cfg), cfg.n, sel);
  if (cfg.band_set) {
    good = frequency_band(good, cfg.band_lo, cfg.band_hi);
    bad = frequency_band(bad, cfg.band_lo, cfg.band_hi);
  }
  const auto rep = exclusivity_report(good, bad);
  Table t;
  t.columns = {"n", "only_good", "only_bad", "shared"};
  t.rows.push_back({cfg.n, rep.only_good, rep.only_bad, rep.shared});
  t.write(out, cfg.format);
  return kExitOk;
}

std::vector<TokenBag> bags_of(const std::vector<FeatureSet>& samples, const FeatureMode& mode) {
  std::vector<TokenBag> bags;
  for (const auto& fs : samples) bags.push_back(tokenize(fs, mode));
  return bags;
}

int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  const auto mode = build_mode(cfg);
  const auto model = train(bags_of(corpus_features(cfg.good, cfg), mode),
                           bags_of(corpus_features(cfg.bad, cfg), mode), cfg.alpha, mode);
  save_model(model, cfg.out);
  Table t;
  t.columns = {"mode", "selector", "alpha", "good_samples", "bad_samples", "vocab"};
  t.rows.push_back({mode.to_string(), mode.selector.to_string(), model.alpha, model.sample_counts[0],
                    model.sample_counts[1], model.vocab_size});
  t.write(out, cfg.format);
  return kExitOk;
}

int cmd_classify(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto model = load_model(cfg.out);
  std::uint64_t skipped = 0;
  const auto samples = gather_samples(cfg, err, skipped);
  std::vector<Verdict> verdicts;
  for (const auto& fs : samples) verdicts.push_back(classify(model, tokenize(fs, model.mode), fs.sample_id, cfg.min_features));
  write_verdicts(out, verdicts, cfg.format);
  return kExitOk;
}

int cmd_evaluate(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  const auto model = load_model(cfg.out);
  std::vector<LabeledSample> samples;
  for (const auto& fs : corpus_features(cfg.good, cfg)) samples.push_back({fs.sample_id, ClassLabel::goodware, tokenize(fs, model.mode)});
  for (const auto& fs : corpus_features(cfg.bad, cfg)) samples.push_back({fs.sample_id, ClassLabel::malware, tokenize(fs, model.mode)});
  std::sort(samples.begin(), samples.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  const auto ev = evaluate(model, samples, cfg.min_features);
  write_verdicts(out, ev.verdicts, cfg.format);
  Table t;
  t.footer = Json{{"tp", ev.tp}, {"fp", ev.fp}, {"tn", ev.tn}, {"fn", ev.fn}, {"abstained", ev.abstained},
                  {"accuracy", ev.accuracy()}};
  if (cfg.format == ReportFormat::records) {
    out << Json{{"summary", t.footer}}.dump() << '\n';
  } else {
    out << '#';
    for (const auto& [k, v] : t.footer.items()) out << ' ' << k << ' ' << text_cell(v);
    out << '\n';
  }
  return kExitOk;
}

// --- option wiring ---

template <class E>
CLI::Option* add_enum(CLI::App* app, const std::string& name, E& target, const std::map<std::string, E>& choices,
                      const std::string& help) {
  auto* opt = app->add_option(name, target, help)->transform(CLI::CheckedTransformer(choices));
  for (const auto& [text, value] : choices) {
    if (value == target) opt->default_str(text);
  }
  return opt;
}

void add_scan_options(CLI::App* sub, RunConfig& cfg) {
  auto& s = cfg.scan;
  sub->add_option("--entropy-avg", s.gate.avg_threshold, "average entropy threshold (bits/byte)")
      ->capture_default_str();
  sub->add_option("--entropy-block", s.gate.block_threshold, "block entropy threshold")->capture_default_str();
  sub->add_option("--entropy-block-size", s.gate.block_size, "entropy block size in bytes")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  add_enum(sub, "--entropy-mode", s.gate.mode,
           std::map<std::string, GateMode>{{"either", GateMode::either}, {"average-only", GateMode::average_only}},
           "packed if either test fails, or on the average alone");
  add_enum(sub, "--cfc-set", s.cfc_set, std::map<std::string, CfcSet>{{"rel8", CfcSet::rel8}, {"all", CfcSet::all}},
           "rel8 forms only, or rel8 and rel32");
  add_enum(sub, "--data-filter", s.data_filter.action,
           std::map<std::string, DataFilterAction>{
               {"off", DataFilterAction::off}, {"flag", DataFilterAction::flag}, {"drop", DataFilterAction::drop}},
           "handling of CFCs inside UTF-16 text runs");
  sub->add_option("--utf16-min-pairs", s.data_filter.min_pairs, "shortest UTF-16 run treated as text")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--exclude", s.exclude, "skip files whose name matches this glob (repeatable)");
  sub->add_option("--max-size", s.max_size, "skip PE files larger than this many bytes")->capture_default_str();
  sub->add_option_function<std::string>(
         "--image-base", [&s](const std::string& v) { s.listing_image_base = parse_u32(v); },
         "image base subtracted from listing addresses (default 0x400000)");
  sub->add_flag("--listing", s.force_listing, "treat every input as a disassembly listing");
}

void add_format(CLI::App* sub, RunConfig& cfg) {
  add_enum(sub, "--format", cfg.format,
           std::map<std::string, ReportFormat>{
               {"table", ReportFormat::table}, {"csv", ReportFormat::csv}, {"records", ReportFormat::records}},
           "output format");
}

void add_selector(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--selector", cfg.selector, "opcodes whose displacements are used: jcc, all, or hex opcodes")
      ->capture_default_str();
}

void add_band(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--n", cfg.n, "n-gram length")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--band-lo", cfg.band_lo, "lowest kept n-gram count")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option_function<std::string>(
      "--band-hi",
      [&cfg](const std::string& v) {
        if (v == "inf") {
          cfg.band_hi = kUnboundedBand;
        } else {
          try {
            std::size_t used = 0;
            cfg.band_hi = std::stoull(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
          } catch (const std::exception&) {
            throw CLI::ValidationError("--band-hi", "expects a count or inf");
          }
        }
      },
      "highest kept n-gram count, or inf (default 50)");
}

}  // namespace

fs::path resolve_corpus(const std::string& arg, const std::string& corpus_root) {
  fs::path p = arg;
  if (p.is_relative() && !corpus_root.empty()) p = fs::path(corpus_root) / p;
  std::error_code ec;
  if (fs::is_directory(p, ec)) p /= kManifestFileName;
  return p;
}

CorpusManifest load_corpora(const std::vector<std::string>& args, const std::string& corpus_root) {
  if (args.empty()) throw Error(ErrorCode::EmptyCorpus, "no corpus given");
  std::vector<CorpusManifest> ms;
  for (const auto& arg : args) {
    const auto path = resolve_corpus(arg, corpus_root);
    auto m = load_manifest(path);
    const auto dir = fs::absolute(path).parent_path();
    for (auto& e : m.entries) {
      if (fs::path(e.path).is_relative()) e.path = (dir / e.path).lexically_normal().generic_string();
    }
    ms.push_back(std::move(m));
  }
  auto merged = merge_corpus(ms);
  if (merged.entries.empty()) throw Error(ErrorCode::EmptyCorpus, "corpus has no samples");
  return merged;
}

void write_scan_report(std::ostream& out, const std::vector<ScanResult>& results, ReportFormat format) {
  Table t;
  t.columns = {"file",    "sha256",       "status",      "section", "rva",     "size",     "avg_entropy",
               "max_block_entropy", "gate", "instructions", "cfc", "resyncs", "flagged", "reason"};
  std::uint64_t produced = 0;
  for (const auto& r : results) {
    if (r.produced()) ++produced;
    const Json reason = r.reason.empty() ? Json(nullptr) : Json(r.reason);
    const Json hash = r.sample_id.content_hash.empty() ? Json(nullptr) : Json(r.sample_id.content_hash);
    if (r.sections.empty()) {
      t.rows.push_back({r.path, hash, to_string(r.status), nullptr, nullptr, nullptr, nullptr, nullptr, nullptr,
                        nullptr, nullptr, nullptr, nullptr, reason});
      continue;
    }
    for (const auto& s : r.sections) {
      const bool has_bytes = s.size > 0;
      t.rows.push_back({r.path, hash, to_string(r.status), s.name, hex32(s.rva), s.size,
                        has_bytes ? Json(s.entropy.average_entropy) : Json(nullptr),
                        has_bytes ? Json(s.entropy.max_block_entropy) : Json(nullptr),
                        has_bytes ? Json(s.included ? "pass" : "packed") : Json(nullptr), s.instructions, s.cfc_count,
                        s.resyncs, s.flagged, reason});
    }
  }
  t.footer = Json{{"files", results.size()}, {"produced", produced}, {"skipped", results.size() - produced}};
  t.write(out, format);
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"Control-flow-change feature extraction and classification for IA-32 PE files", "cfcscan"};
  app.require_subcommand(1, 1);
  app.add_option("--corpus-root", cfg.corpus_root, "base directory for relative corpus paths");

  auto* scan = app.add_subcommand("scan", "scan PE files or listings and extract features");
  scan->add_option("paths", cfg.inputs, "files or directories")->required();
  add_scan_options(scan, cfg);
  add_format(scan, cfg);
  scan->add_option("--jobs", cfg.jobs, "worker threads, 0 for one per core")->capture_default_str();
  scan->add_option("--out", cfg.out, "write feature files and a manifest into this directory");
  add_enum(scan, "--label", cfg.label,
           std::map<std::string, CorpusLabel>{
               {"goodware", CorpusLabel::goodware}, {"malware", CorpusLabel::malware}, {"test", CorpusLabel::test}},
           "corpus label recorded in the manifest");

  auto* import = app.add_subcommand("import-listing", "scan disassembly listings into features");
  import->add_option("paths", cfg.inputs, "listing files or directories")->required();
  add_scan_options(import, cfg);
  add_format(import, cfg);
  import->add_option("--out", cfg.out, "write feature files and a manifest into this directory");
  add_enum(import, "--label", cfg.label,
           std::map<std::string, CorpusLabel>{
               {"goodware", CorpusLabel::goodware}, {"malware", CorpusLabel::malware}, {"test", CorpusLabel::test}},
           "corpus label recorded in the manifest");

  const std::map<std::string, SignMode> signs{{"magnitude", SignMode::magnitude}, {"signed", SignMode::signed_values}};

  auto* stats = app.add_subcommand("stats", "per-class displacement statistics");
  stats->add_option("corpora", cfg.inputs, "corpus manifests or directories")->required();
  add_selector(stats, cfg);
  add_enum(stats, "--sign", cfg.sign, signs, "statistics over |d| or signed d");
  add_format(stats, cfg);

  auto* compare = app.add_subcommand("compare", "rank correlation of two corpora per statistic");
  compare->add_option("corpora", cfg.inputs, "two corpus manifests or directories")->required()->expected(2);
  add_selector(compare, cfg);
  add_enum(compare, "--sign", cfg.sign, signs, "statistics over |d| or signed d");
  add_format(compare, cfg);

  auto* ngrams = app.add_subcommand("ngrams", "corpus n-gram histogram");
  ngrams->add_option("corpora", cfg.inputs, "corpus manifests or directories")->required();
  add_selector(ngrams, cfg);
  add_band(ngrams, cfg);
  ngrams->add_option("--out", cfg.out, "save the histogram instead of printing it");
  ngrams->add_flag("--binary", cfg.binary, "save in the binary histogram format");
  add_format(ngrams, cfg);

  auto* exclusive = app.add_subcommand("exclusive", "n-grams unique to each class");
  exclusive->add_option("--good", cfg.good, "goodware corpora")->required();
  exclusive->add_option("--bad", cfg.bad, "malware corpora")->required();
  add_selector(exclusive, cfg);
  add_band(exclusive, cfg);
  add_format(exclusive, cfg);

  auto* trainc = app.add_subcommand("train", "train a Naive Bayes model");
  trainc->add_option("--good", cfg.good, "goodware corpora")->required();
  trainc->add_option("--bad", cfg.bad, "malware corpora")->required();
  trainc->add_option("--out", cfg.out, "model file")->required();
  trainc->add_option("--mode", cfg.mode, "feature mode")
      ->check(CLI::IsMember({"raw", "ngram", "frequency"}))
      ->capture_default_str();
  trainc->add_option("--alpha", cfg.alpha, "Laplace smoothing")->check(CLI::PositiveNumber)->capture_default_str();
  add_selector(trainc, cfg);
  add_band(trainc, cfg);
  add_format(trainc, cfg);

  auto* classifyc = app.add_subcommand("classify", "classify samples with a trained model");
  classifyc->add_option("model", cfg.out, "model file")->required();
  classifyc->add_option("samples", cfg.inputs, "PE files, listings, feature files or manifests");
  classifyc->add_option("--min-features", cfg.min_features, "abstain below this many features")
      ->capture_default_str();
  add_scan_options(classifyc, cfg);
  add_format(classifyc, cfg);

  auto* evaluatec = app.add_subcommand("evaluate", "classify labelled corpora and count errors");
  evaluatec->add_option("model", cfg.out, "model file")->required();
  evaluatec->add_option("--good", cfg.good, "goodware test corpora")->required();
  evaluatec->add_option("--bad", cfg.bad, "malware test corpora")->required();
  evaluatec->add_option("--min-features", cfg.min_features, "abstain below this many features")
      ->capture_default_str();
  add_format(evaluatec, cfg);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (cfg.corpus_root.empty()) {
    if (const char* env = std::getenv(kCorpusRootEnv)) cfg.corpus_root = env;
  }
  cfg.band_set = ngrams->count("--band-lo") + ngrams->count("--band-hi") + exclusive->count("--band-lo") +
                     exclusive->count("--band-hi") >
                 0;

  try {
    if (*scan) return cmd_scan(cfg, out, err);
    if (*import) {
      cfg.scan.force_listing = true;
      return cmd_scan(cfg, out, err);
    }
    if (*stats) return cmd_stats(cfg, out, err);
    if (*compare) return cmd_compare(cfg, out, err);
    if (*ngrams) return cmd_ngrams(cfg, out, err);
    if (*exclusive) return cmd_exclusive(cfg, out, err);
    if (*trainc) return cmd_train(cfg, out, err);
    if (*classifyc) return cmd_classify(cfg, out, err);
    if (*evaluatec) return cmd_evaluate(cfg, out, err);
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    switch (e.code()) {
      case ErrorCode::EmptyCorpus:
      case ErrorCode::EmptyClass:
      case ErrorCode::NoCfcFound: return kExitNoFeatures;
      default: return kExitUsage;
    }
  }
  return kExitUsage;
}

}  // namespace cfcscan

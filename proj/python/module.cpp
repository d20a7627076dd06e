#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "cfcscan/bayes.hpp"
#include "cfcscan/cfc_features.hpp"
#include "cfcscan/cli.hpp"
#include "cfcscan/corpus_store.hpp"
#include "cfcscan/disasm_x86.hpp"
#include "cfcscan/entropy_gate.hpp"
#include "cfcscan/error.hpp"
#include "cfcscan/pipeline.hpp"
#include "cfcscan/stats.hpp"

namespace py = pybind11;
using namespace pybind11::literals;
using namespace cfcscan;

namespace {

Bytes to_bytes(const py::bytes& b) {
  const std::string_view s = b;
  return Bytes(s.begin(), s.end());
}

TokenBag to_bag(const std::map<std::int64_t, std::uint64_t>& counts) {
  TokenBag bag;
  for (const auto& [v, c] : counts) bag[Token::raw(v)] = c;
  return bag;
}

py::dict feature_dict(const FeatureSet& fs) {
  py::dict events;
  for (const auto& [op, ev] : fs.per_opcode) {
    py::list rows;
    for (const auto& e : ev.events) rows.append(py::make_tuple(e.section, e.address, e.displacement));
    events[py::str(op.hex())] = rows;
  }
  return py::dict("name"_a = fs.sample_id.name, "sha256"_a = fs.sample_id.content_hash, "events"_a = events);
}

py::dict scan_dict(const ScanResult& r) {
  py::list sections;
  for (const auto& s : r.sections) {
    sections.append(py::dict("name"_a = s.name, "rva"_a = s.rva, "size"_a = s.size,
                             "avg_entropy"_a = s.entropy.average_entropy,
                             "max_block_entropy"_a = s.entropy.max_block_entropy, "included"_a = s.included,
                             "instructions"_a = s.instructions, "cfc"_a = s.cfc_count, "resyncs"_a = s.resyncs,
                             "flagged"_a = s.flagged));
  }
  py::object features = py::none();
  if (r.features) features = feature_dict(*r.features);
  return py::dict("path"_a = r.path, "status"_a = to_string(r.status), "reason"_a = r.reason,
                  "sections"_a = sections, "features"_a = features);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Control-flow-change features from IA-32 PE files";
  py::register_exception<Error>(m, "CfcscanError", PyExc_RuntimeError);

  m.def("shannon_entropy", [](const py::bytes& b) { return shannon_entropy(to_bytes(b)); }, "data"_a);
  m.def(
      "gate",
      [](const py::bytes& b, double avg, double block, std::size_t block_size) {
        const auto r = gate(to_bytes(b), GateConfig{avg, block, block_size, GateMode::either});
        return py::dict("average_entropy"_a = r.average_entropy, "max_block_entropy"_a = r.max_block_entropy,
                        "packed"_a = r.verdict == GateVerdict::packed);
      },
      "data"_a, "avg_threshold"_a = kDefaultAverageThreshold, "block_threshold"_a = kDefaultBlockThreshold,
      "block_size"_a = kDefaultEntropyBlockSize);

  m.def(
      "decode",
      [](const py::bytes& b, bool rel8_only) {
        const auto s = decode_stream(to_bytes(b), rel8_only ? CfcSet::rel8 : CfcSet::all);
        py::list out;
        for (const auto& i : s.instructions) {
          py::object cfc = py::none();
          if (i.cfc) cfc = py::make_tuple(i.cfc->opcode.hex(), i.cfc->displacement);
          out.append(py::make_tuple(i.offset, i.length, cfc));
        }
        return out;
      },
      "code"_a, "rel8_only"_a = false, "Linear sweep: [(offset, length, (opcode, displacement) | None)].");

  m.def(
      "scan_file", [](const std::filesystem::path& p) { return scan_dict(scan_file(p, {})); }, "path"_a);
  m.def(
      "displacements",
      [](const std::filesystem::path& feature_file, const std::string& selector) {
        return displacement_sequence(load_feature_set(feature_file), Selector::parse(selector));
      },
      "feature_file"_a, "selector"_a = "jcc");

  m.def(
      "ngram_histogram",
      [](const std::vector<std::int64_t>& seq, std::size_t n) {
        py::dict out;
        for (const auto& [g, c] : histogram(ngrams(seq, n)).counts) out[py::tuple(py::cast(g.values))] = c;
        return out;
      },
      "seq"_a, "n"_a);

  m.def(
      "sample_stats",
      [](const std::vector<std::int64_t>& d, bool signed_values) {
        const auto s = sample_stats(d, signed_values ? SignMode::signed_values : SignMode::magnitude);
        return py::dict("spread"_a = s.spread, "variance"_a = s.variance, "scatter"_a = s.stddev(),
                        "median"_a = s.median, "median_over_spread"_a = s.median_over_spread,
                        "variance_coefficient"_a = s.variance_coefficient, "frequency"_a = s.frequency);
      },
      "displacements"_a, "signed"_a = false);
  m.def(
      "spearman_rho",
      [](const std::vector<double>& x, const std::vector<double>& y) {
        const auto r = spearman_rho(x, y);
        return py::make_tuple(r.rho, r.n_pairs, r.p_value);
      },
      "x"_a, "y"_a, "Returns (rho, n_pairs, p_value or None).");

  py::class_<BayesModel>(m, "RawModel")
      .def_property_readonly("vocab_size", [](const BayesModel& b) { return b.vocab_size; })
      .def(
          "classify",
          [](const BayesModel& b, const std::map<std::int64_t, std::uint64_t>& counts, std::uint64_t min_features) {
            const auto v = classify(b, to_bag(counts), {}, min_features);
            return py::dict("posterior_good"_a = v.prob_good, "posterior_bad"_a = v.prob_bad,
                            "log_likelihood_good"_a = v.log_likelihood_good,
                            "log_likelihood_bad"_a = v.log_likelihood_bad, "label"_a = to_string(v.label));
          },
          "counts"_a, "min_features"_a = kDefaultMinFeatures)
      .def("save", [](const BayesModel& b, const std::filesystem::path& p) { save_model(b, p); })
      .def("__eq__", [](const BayesModel& a, const BayesModel& b) { return a == b; });
  m.def(
      "train_raw",
      [](const std::vector<std::map<std::int64_t, std::uint64_t>>& good,
         const std::vector<std::map<std::int64_t, std::uint64_t>>& bad, double alpha) {
        std::vector<TokenBag> g, b;
        for (const auto& c : good) g.push_back(to_bag(c));
        for (const auto& c : bad) b.push_back(to_bag(c));
        return train(g, b, alpha, FeatureMode::raw_mode());
      },
      "good"_a, "bad"_a, "alpha"_a = kDefaultAlpha, "Trains on {displacement: count} bags.");
  m.def("load_model", [](const std::filesystem::path& p) { return load_model(p); }, "path"_a);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      "args"_a, "Runs a subcommand in-process; returns (exit_code, stdout, stderr).");

  m.def("sha256_hex", [](const py::bytes& b) { return sha256_hex(std::string_view(b)); }, "data"_a);
}

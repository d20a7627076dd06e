#include "cfcscan/entropy_gate.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "cfcscan/error.hpp"

namespace cfcscan {

const char* to_string(GateVerdict verdict) noexcept {
  return verdict == GateVerdict::pass ? "pass" : "packed";
}

double shannon_entropy(ByteView data) {
  if (data.empty()) throw Error(ErrorCode::EmptyInput, "entropy of empty byte sequence");

  std::array<std::size_t, 256> histogram{};
  for (auto b : data) ++histogram[b];

  const double total = static_cast<double>(data.size());
  double h = 0.0;
  for (auto count : histogram) {
    if (count == 0) continue;
    const double p = static_cast<double>(count) / total;
    h -= p * std::log2(p);
  }
  return std::clamp(h, 0.0, 8.0);
}

std::vector<double> block_entropies(ByteView data, std::size_t block_size) {
  if (block_size == 0) throw Error(ErrorCode::InvalidArgument, "block size must be >= 1");
  if (data.empty()) throw Error(ErrorCode::EmptyInput, "block entropy of empty byte sequence");

  std::vector<double> out;
  out.reserve(data.size() / block_size + 1);
  std::size_t off = 0;
  for (; data.size() - off >= block_size; off += block_size) {
    out.push_back(shannon_entropy(data.subspan(off, block_size)));
  }
  const std::size_t tail = data.size() - off;
  if (tail > 0 && tail * 2 >= block_size) out.push_back(shannon_entropy(data.subspan(off)));
  return out;
}

EntropyReport gate(ByteView data, const GateConfig& config) {
  EntropyReport report;
  report.block_size = config.block_size;
  report.average_entropy = shannon_entropy(data);

  const auto blocks = block_entropies(data, config.block_size);
  // Sections shorter than half a block have no measurable block; the whole
  // section stands in for its single block.
  report.max_block_entropy =
      blocks.empty() ? report.average_entropy : *std::max_element(blocks.begin(), blocks.end());

  bool packed = report.average_entropy > config.avg_threshold;
  if (config.mode == GateMode::either) packed = packed || report.max_block_entropy > config.block_threshold;
  report.verdict = packed ? GateVerdict::packed : GateVerdict::pass;
  return report;
}

}  // namespace cfcscan

#pragma once

// Shannon entropy of section bytes and the packed/encrypted gate.

#include <cstddef>
#include <vector>

#include "cfcscan/pe_loader.hpp"

namespace cfcscan {

inline constexpr double kDefaultAverageThreshold = 6.677;
inline constexpr double kDefaultBlockThreshold = 7.199;
inline constexpr std::size_t kDefaultEntropyBlockSize = 256;

enum class GateVerdict { pass, packed };
enum class GateMode {
  either,        // packed if the average OR the highest block exceeds its threshold
  average_only,  // packed only if the average exceeds its threshold
};

struct GateConfig {
  double avg_threshold = kDefaultAverageThreshold;
  double block_threshold = kDefaultBlockThreshold;
  std::size_t block_size = kDefaultEntropyBlockSize;
  GateMode mode = GateMode::either;
};

struct EntropyReport {
  double average_entropy = 0.0;
  double max_block_entropy = 0.0;
  std::size_t block_size = kDefaultEntropyBlockSize;
  GateVerdict verdict = GateVerdict::pass;
};

const char* to_string(GateVerdict verdict) noexcept;

// Bits per byte in [0, 8]. Throws EmptyInput.
double shannon_entropy(ByteView data);

// One entropy per non-overlapping block. A trailing partial block is measured
// only when it holds at least block_size / 2 bytes.
std::vector<double> block_entropies(ByteView data, std::size_t block_size);

EntropyReport gate(ByteView data, const GateConfig& config = {});
inline EntropyReport gate(const ExecutableSection& section, const GateConfig& config = {}) {
  return gate(ByteView(section.bytes), config);
}

}  // namespace cfcscan

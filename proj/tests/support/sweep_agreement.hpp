#pragma once

// Byte-level agreement between our linear sweep and a reference sweep.

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "cfcscan/disasm_x86.hpp"

namespace cfcscan::testing {

struct Agreement {
  std::size_t agreeing_bytes = 0;
  std::size_t total_bytes = 0;
  [[nodiscard]] double ratio() const {
    return total_bytes == 0 ? 1.0 : static_cast<double>(agreeing_bytes) / static_cast<double>(total_bytes);
  }
};

// A byte agrees when the instruction covering it starts at the same offset and
// has the same length in both sweeps. Resync skips count as 1-byte units, the
// way the reference tool reports undecodable bytes.
inline Agreement sweep_agreement(const DecodedStream& ours,
                                 const std::vector<std::pair<std::uint32_t, std::uint32_t>>& reference,
                                 std::size_t section_size) {
  std::vector<std::uint64_t> mine(section_size, 0);
  std::vector<std::uint64_t> theirs(section_size, 0);
  auto key = [](std::uint64_t off, std::uint64_t len) { return (off << 8) | len | (1ull << 63); };
  for (const auto& ins : ours.instructions) {
    for (std::size_t i = 0; i < ins.length && ins.offset + i < section_size; ++i) {
      mine[ins.offset + i] = key(ins.offset, ins.length);
    }
  }
  for (const auto& r : ours.resyncs) {
    if (r.offset < section_size) mine[r.offset] = key(r.offset, 1);
  }
  for (const auto& [off, len] : reference) {
    for (std::size_t i = 0; i < len && off + i < section_size; ++i) theirs[off + i] = key(off, len);
  }
  Agreement a;
  a.total_bytes = section_size;
  for (std::size_t i = 0; i < section_size; ++i) {
    if (mine[i] != 0 && mine[i] == theirs[i]) ++a.agreeing_bytes;
  }
  return a;
}

}  // namespace cfcscan::testing

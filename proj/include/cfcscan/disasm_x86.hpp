#pragma once

// Linear-sweep IA-32 length decoding and recognition of relative
// control-flow-change (CFC) instructions.

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cfcscan/error.hpp"
#include "cfcscan/pe_loader.hpp"

namespace cfcscan {

inline constexpr std::size_t kMaxInstructionLength = 15;

// Canonical opcode identity: one-byte opcodes are stored as 0x00XX, two-byte
// (0x0F-escaped) opcodes as 0x0FXX.
class OpcodeId {
 public:
  constexpr OpcodeId() = default;
  static constexpr OpcodeId one_byte(std::uint8_t op) { return OpcodeId(op); }
  static constexpr OpcodeId two_byte(std::uint8_t op) {
    return OpcodeId(static_cast<std::uint16_t>(0x0F00 | op));
  }
  // Accepts "75", "0x75", "0F84", "0f 84". Returns nullopt for anything else.
  static std::optional<OpcodeId> parse(std::string_view text);

  [[nodiscard]] constexpr std::uint16_t value() const noexcept { return value_; }
  [[nodiscard]] constexpr bool is_two_byte() const noexcept { return (value_ & 0xFF00) == 0x0F00; }
  [[nodiscard]] constexpr std::uint8_t last_byte() const noexcept {
    return static_cast<std::uint8_t>(value_);
  }
  // jcc family: 0x70-0x7F and 0x0F 0x80-0x8F.
  [[nodiscard]] constexpr bool is_jcc() const noexcept {
    return is_two_byte() ? (last_byte() & 0xF0) == 0x80 : (value_ & 0xF0) == 0x70;
  }
  // "75" or "0F84".
  [[nodiscard]] std::string hex() const;

  constexpr auto operator<=>(const OpcodeId&) const = default;

 private:
  constexpr explicit OpcodeId(std::uint16_t v) : value_(v) {}
  std::uint16_t value_ = 0;
};

// rel8 keeps the short forms (0x70-0x7F, 0xEB) only; all adds the near jcc,
// near jmp and relative call.
enum class CfcSet { rel8, all };

const char* to_string(CfcSet set) noexcept;
bool in_cfc_set(OpcodeId opcode, CfcSet set) noexcept;

struct CfcRecord {
  OpcodeId opcode;
  // Section-relative offset of the instruction.
  std::uint32_t address = 0;
  // Raw signed immediate. The target is address + length + displacement.
  std::int64_t displacement = 0;
  // Immediate width in bytes: 1, 2 or 4.
  std::uint8_t width = 0;
  // Set by the data-in-code filter under the flag policy.
  bool suspected_data = false;

  bool operator==(const CfcRecord&) const = default;
};

struct Instruction {
  std::uint32_t offset = 0;
  std::uint8_t length = 0;
  std::array<std::uint8_t, kMaxInstructionLength> raw{};
  std::optional<CfcRecord> cfc;

  [[nodiscard]] std::span<const std::uint8_t> bytes() const noexcept { return {raw.data(), length}; }
};

enum class DecodeStatus { ok, invalid_opcode, truncated };

struct LengthResult {
  DecodeStatus status = DecodeStatus::ok;
  std::uint8_t length = 0;
};

// Non-throwing core of instruction_length.
LengthResult decode_length(ByteView code, std::size_t offset) noexcept;

// Throws InvalidOpcode or TruncatedInstruction.
std::size_t instruction_length(ByteView code, std::size_t offset);

// Relative jcc/jmp/call with its sign-extended immediate, otherwise nullopt.
// Pure function of the instruction bytes.
std::optional<CfcRecord> classify_cfc(const Instruction& instr);

struct ResyncEvent {
  std::uint32_t offset = 0;
  ErrorCode reason = ErrorCode::InvalidOpcode;
};

struct DecodedStream {
  std::vector<Instruction> instructions;
  std::vector<ResyncEvent> resyncs;

  [[nodiscard]] std::size_t cfc_count() const noexcept;
};

// Linear sweep from offset 0. An undecodable byte becomes a resync event and
// the sweep resumes one byte later. CFCs outside `set` are not attached.
DecodedStream decode_stream(ByteView code, CfcSet set = CfcSet::all);
inline DecodedStream decode_stream(const ExecutableSection& section, CfcSet set = CfcSet::all) {
  return decode_stream(ByteView(section.bytes), set);
}

// --- data-in-code (UTF-16 text) filter ---

enum class DataFilterAction { off, flag, drop };

const char* to_string(DataFilterAction action) noexcept;

struct DataFilterPolicy {
  // Minimum run of (printable, 0x00) byte pairs treated as UTF-16 text.
  std::size_t min_pairs = 4;
  DataFilterAction action = DataFilterAction::drop;
};

// Half-open byte range [begin, end) within a section.
struct ByteSpan {
  std::uint32_t begin = 0;
  std::uint32_t end = 0;

  bool operator==(const ByteSpan&) const = default;
};

struct DataFilterReport {
  std::vector<ByteSpan> text_spans;
  std::vector<CfcRecord> flagged;
};

struct FilteredStream {
  std::vector<Instruction> instructions;
  DataFilterReport report;
};

// Runs of at least min_pairs consecutive (printable ASCII, 0x00) pairs at
// either byte parity, merged and sorted.
std::vector<ByteSpan> find_utf16_runs(ByteView code, std::size_t min_pairs);

// CFCs whose instruction starts inside a UTF-16 run are flagged (kept, marked
// suspected_data) or dropped (the instruction stays, its CFC is removed).
FilteredStream data_in_code_filter(std::span<const Instruction> instructions, ByteView code,
                                   const DataFilterPolicy& policy = {});

}  // namespace cfcscan

#include "cfcscan/disasm_x86.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>

namespace cfcscan {

namespace {

// Operand-shape flags for one opcode byte.
enum : std::uint8_t {
  kNone = 0,
  kModRm = 1 << 0,
  kImm8 = 1 << 1,
  kImm16 = 1 << 2,
  kImmZ = 1 << 3,    // 4 bytes, 2 under the operand-size prefix
  kMoffs = 1 << 4,   // 4 bytes, 2 under the address-size prefix
  kFarPtr = 1 << 5,  // ImmZ + 2-byte selector
  kInvalid = 1 << 6,
  kPrefix = 1 << 7,
};

struct OpcodeTables {
  std::array<std::uint8_t, 256> one{};
  std::array<std::uint8_t, 256> two{};
};

constexpr OpcodeTables build_tables() {
  OpcodeTables t{};
  auto& one = t.one;

  // ALU blocks 00-3F: op r/m,r (x4), op al,ib, op eax,iz, then misc.
  for (int base = 0x00; base < 0x40; base += 8) {
    for (int i = 0; i < 4; ++i) one[base + i] = kModRm;
    one[base + 4] = kImm8;
    one[base + 5] = kImmZ;
    one[base + 6] = kNone;
    one[base + 7] = kNone;
  }
  one[0x0F] = kNone;  // escape, handled separately
  for (int p : {0x26, 0x2E, 0x36, 0x3E}) one[p] = kPrefix;

  for (int i = 0x40; i < 0x60; ++i) one[i] = kNone;
  one[0x60] = one[0x61] = kNone;
  one[0x62] = kModRm;  // BOUND
  one[0x63] = kModRm;  // ARPL
  for (int p : {0x64, 0x65, 0x66, 0x67}) one[p] = kPrefix;
  one[0x68] = kImmZ;
  one[0x69] = kModRm | kImmZ;
  one[0x6A] = kImm8;
  one[0x6B] = kModRm | kImm8;
  for (int i = 0x6C; i < 0x70; ++i) one[i] = kNone;
  for (int i = 0x70; i < 0x80; ++i) one[i] = kImm8;

  one[0x80] = kModRm | kImm8;
  one[0x81] = kModRm | kImmZ;
  one[0x82] = kModRm | kImm8;
  one[0x83] = kModRm | kImm8;
  for (int i = 0x84; i < 0x90; ++i) one[i] = kModRm;

  for (int i = 0x90; i < 0xA0; ++i) one[i] = kNone;
  one[0x9A] = kFarPtr;
  for (int i = 0xA0; i < 0xA4; ++i) one[i] = kMoffs;
  for (int i = 0xA4; i < 0xB0; ++i) one[i] = kNone;
  one[0xA8] = kImm8;
  one[0xA9] = kImmZ;
  for (int i = 0xB0; i < 0xB8; ++i) one[i] = kImm8;
  for (int i = 0xB8; i < 0xC0; ++i) one[i] = kImmZ;

  one[0xC0] = one[0xC1] = kModRm | kImm8;
  one[0xC2] = kImm16;
  one[0xC3] = kNone;
  one[0xC4] = one[0xC5] = kModRm;  // LES/LDS; register forms are VEX
  one[0xC6] = kModRm | kImm8;
  one[0xC7] = kModRm | kImmZ;
  one[0xC8] = kImm16 | kImm8;
  one[0xC9] = kNone;
  one[0xCA] = kImm16;
  one[0xCB] = one[0xCC] = kNone;
  one[0xCD] = kImm8;
  one[0xCE] = one[0xCF] = kNone;

  for (int i = 0xD0; i < 0xD4; ++i) one[i] = kModRm;
  one[0xD4] = one[0xD5] = kImm8;
  one[0xD6] = kInvalid;
  one[0xD7] = kNone;
  for (int i = 0xD8; i < 0xE0; ++i) one[i] = kModRm;  // x87

  for (int i = 0xE0; i < 0xE8; ++i) one[i] = kImm8;  // loop/jcxz/in/out
  one[0xE8] = one[0xE9] = kImmZ;
  one[0xEA] = kFarPtr;
  one[0xEB] = kImm8;
  for (int i = 0xEC; i < 0xF0; ++i) one[i] = kNone;

  one[0xF0] = one[0xF2] = one[0xF3] = kPrefix;
  one[0xF1] = one[0xF4] = one[0xF5] = kNone;
  one[0xF6] = one[0xF7] = kModRm;  // immediate depends on ModRM.reg
  for (int i = 0xF8; i < 0xFE; ++i) one[i] = kNone;
  one[0xFE] = one[0xFF] = kModRm;

  auto& two = t.two;
  for (auto& v : two) v = kModRm;  // most of the 0F map carries ModRM
  for (int i : {0x04, 0x0A, 0x0C, 0x24, 0x25, 0x26, 0x27, 0x36, 0x39, 0x3B, 0x3C, 0x3D, 0x3E,
                0x3F, 0x7A, 0x7B, 0xA6, 0xA7}) {
    two[i] = kInvalid;
  }
  for (int i : {0x05, 0x06, 0x07, 0x08, 0x09, 0x0B, 0x0E, 0x30, 0x31, 0x32, 0x33, 0x34, 0x35,
                0x37, 0x77, 0xA0, 0xA1, 0xA2, 0xA8, 0xA9, 0xAA}) {
    two[i] = kNone;
  }
  two[0x0F] = kModRm | kImm8;  // 3DNow!, suffix byte
  for (int i = 0x70; i < 0x74; ++i) two[i] = kModRm | kImm8;
  for (int i = 0x80; i < 0x90; ++i) two[i] = kImmZ;  // jcc rel32
  two[0xA4] = two[0xAC] = kModRm | kImm8;
  two[0xBA] = kModRm | kImm8;
  two[0xC2] = two[0xC4] = two[0xC5] = two[0xC6] = kModRm | kImm8;
  for (int i = 0xC8; i < 0xD0; ++i) two[i] = kNone;  // bswap
  two[0x38] = two[0x3A] = kNone;                      // three-byte escapes
  return t;
}

constexpr OpcodeTables kTables = build_tables();

class Cursor {
 public:
  Cursor(ByteView code, std::size_t offset) : code_(code), start_(offset) {}

  // Makes sure `n` more bytes are available; records why not otherwise.
  bool need(std::size_t n) {
    if (pos_ + n > kMaxInstructionLength) {
      status_ = DecodeStatus::invalid_opcode;
      return false;
    }
    if (start_ + pos_ + n > code_.size()) {
      status_ = DecodeStatus::truncated;
      return false;
    }
    return true;
  }
  std::uint8_t peek(std::size_t ahead = 0) const { return code_[start_ + pos_ + ahead]; }
  std::uint8_t take() { return code_[start_ + pos_++]; }
  void skip(std::size_t n) { pos_ += n; }
  std::size_t pos() const { return pos_; }
  DecodeStatus status() const { return status_; }

 private:
  ByteView code_;
  std::size_t start_;
  std::size_t pos_ = 0;
  DecodeStatus status_ = DecodeStatus::ok;
};

LengthResult fail(const Cursor& c) { return {c.status(), 0}; }
LengthResult invalid() { return {DecodeStatus::invalid_opcode, 0}; }

// Bytes following ModRM: SIB and displacement.
bool skip_memory_operand(Cursor& c, std::uint8_t modrm, bool addr16) {
  const int mod = modrm >> 6;
  const int rm = modrm & 7;
  if (mod == 3) return true;
  std::size_t extra = 0;
  if (addr16) {
    if (mod == 0 && rm == 6) extra = 2;
    else if (mod == 1) extra = 1;
    else if (mod == 2) extra = 2;
  } else {
    if (rm == 4) {
      if (!c.need(1)) return false;
      const std::uint8_t sib = c.take();
      if (mod == 0 && (sib & 7) == 5) extra = 4;
    } else if (mod == 0 && rm == 5) {
      extra = 4;
    }
    if (mod == 1) extra += 1;
    else if (mod == 2) extra += 4;
  }
  if (!c.need(extra)) return false;
  c.skip(extra);
  return true;
}

bool skip_immediates(Cursor& c, std::uint8_t flags, bool op16, bool addr16) {
  std::size_t n = 0;
  if (flags & kImm8) n += 1;
  if (flags & kImm16) n += 2;
  if (flags & kImmZ) n += op16 ? 2 : 4;
  if (flags & kMoffs) n += addr16 ? 2 : 4;
  if (flags & kFarPtr) n += (op16 ? 2 : 4) + 2;
  if (!c.need(n)) return false;
  c.skip(n);
  return true;
}

bool is_prefix(std::uint8_t b) { return (kTables.one[b] & kPrefix) != 0; }

std::int64_t read_signed(std::span<const std::uint8_t> bytes, std::size_t at, std::size_t width) {
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < width; ++i) v |= static_cast<std::uint32_t>(bytes[at + i]) << (8 * i);
  switch (width) {
    case 1: return static_cast<std::int8_t>(v);
    case 2: return static_cast<std::int16_t>(v);
    default: return static_cast<std::int32_t>(v);
  }
}

bool printable(std::uint8_t b) { return (b >= 0x20 && b <= 0x7E) || b == '\t' || b == '\n' || b == '\r'; }

}  // namespace

std::optional<OpcodeId> OpcodeId::parse(std::string_view text) {
  std::string digits;
  if (text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) text.remove_prefix(2);
  for (char ch : text) {
    if (ch == ' ') continue;
    if (!std::isxdigit(static_cast<unsigned char>(ch))) return std::nullopt;
    digits.push_back(ch);
  }
  if (digits.size() == 2) {
    const auto v = static_cast<std::uint8_t>(std::stoul(digits, nullptr, 16));
    if (v == 0x0F) return std::nullopt;
    return one_byte(v);
  }
  if (digits.size() == 4) {
    const auto v = static_cast<std::uint16_t>(std::stoul(digits, nullptr, 16));
    if ((v & 0xFF00) != 0x0F00) return std::nullopt;
    return two_byte(static_cast<std::uint8_t>(v));
  }
  return std::nullopt;
}

std::string OpcodeId::hex() const {
  char buf[8];
  if (is_two_byte()) std::snprintf(buf, sizeof buf, "0F%02X", last_byte());
  else std::snprintf(buf, sizeof buf, "%02X", last_byte());
  return buf;
}

const char* to_string(CfcSet set) noexcept { return set == CfcSet::rel8 ? "rel8" : "all"; }

bool in_cfc_set(OpcodeId opcode, CfcSet set) noexcept {
  if (opcode.is_two_byte()) return set == CfcSet::all && opcode.is_jcc();
  const auto op = opcode.last_byte();
  if ((op & 0xF0) == 0x70 || op == 0xEB) return true;
  return set == CfcSet::all && (op == 0xE8 || op == 0xE9);
}

LengthResult decode_length(ByteView code, std::size_t offset) noexcept {
  if (offset >= code.size()) return {DecodeStatus::truncated, 0};
  Cursor c(code, offset);
  bool op16 = false;
  bool addr16 = false;

  for (;;) {
    if (!c.need(1)) return fail(c);
    const std::uint8_t b = c.peek();
    if (!is_prefix(b)) break;
    if (b == 0x66) op16 = true;
    if (b == 0x67) addr16 = true;
    c.skip(1);
  }

  const std::uint8_t op = c.take();
  std::uint8_t flags = 0;

  if (op == 0x0F) {
    if (!c.need(1)) return fail(c);
    const std::uint8_t op2 = c.take();
    if (op2 == 0x38 || op2 == 0x3A) {
      if (!c.need(2)) return fail(c);
      c.skip(1);  // third opcode byte
      const std::uint8_t modrm = c.take();
      if (!skip_memory_operand(c, modrm, addr16)) return fail(c);
      if (op2 == 0x3A && !skip_immediates(c, kImm8, op16, addr16)) return fail(c);
      return {DecodeStatus::ok, static_cast<std::uint8_t>(c.pos())};
    }
    flags = kTables.two[op2];
    if (flags & kInvalid) return invalid();
  } else {
    flags = kTables.one[op];
    if (flags & kInvalid) return invalid();
  }

  if (flags & kModRm) {
    if (!c.need(1)) return fail(c);
    const std::uint8_t modrm = c.take();
    const int mod = modrm >> 6;
    const int reg = (modrm >> 3) & 7;
    if (op != 0x0F) {
      switch (op) {
        case 0xF6:
          if (reg < 2) flags |= kImm8;
          break;
        case 0xF7:
          if (reg < 2) flags |= kImmZ;
          break;
        case 0xC6:
        case 0xC7:
          // Only /0 (mov) and the F8 form (xabort/xbegin) are defined.
          if (reg != 0 && modrm != 0xF8) return invalid();
          break;
        case 0x8F:
          if (reg != 0) return invalid();  // XOP space
          break;
        case 0xC4:
        case 0xC5:
        case 0x62:
          if (mod == 3) return invalid();  // VEX / EVEX
          break;
        case 0xFE:
          if (reg >= 2) return invalid();
          break;
        case 0xFF:
          if (reg == 7) return invalid();
          break;
        default:
          break;
      }
    }
    if (!skip_memory_operand(c, modrm, addr16)) return fail(c);
  }

  if (!skip_immediates(c, flags, op16, addr16)) return fail(c);
  return {DecodeStatus::ok, static_cast<std::uint8_t>(c.pos())};
}

std::size_t instruction_length(ByteView code, std::size_t offset) {
  const auto r = decode_length(code, offset);
  switch (r.status) {
    case DecodeStatus::ok: return r.length;
    case DecodeStatus::invalid_opcode:
      throw Error(ErrorCode::InvalidOpcode, "undefined encoding at offset " + std::to_string(offset));
    case DecodeStatus::truncated:
      throw Error(ErrorCode::TruncatedInstruction,
                  "instruction at offset " + std::to_string(offset) + " runs past the end");
  }
  return 0;
}

std::optional<CfcRecord> classify_cfc(const Instruction& instr) {
  const auto bytes = instr.bytes();
  std::size_t i = 0;
  bool op16 = false;
  while (i < bytes.size() && is_prefix(bytes[i])) {
    if (bytes[i] == 0x66) op16 = true;
    ++i;
  }
  if (i >= bytes.size()) return std::nullopt;

  CfcRecord rec;
  rec.address = instr.offset;
  std::size_t imm_at = 0;
  const std::uint8_t op = bytes[i];
  if ((op & 0xF0) == 0x70 || op == 0xEB) {
    rec.opcode = OpcodeId::one_byte(op);
    rec.width = 1;
    imm_at = i + 1;
  } else if (op == 0xE8 || op == 0xE9) {
    rec.opcode = OpcodeId::one_byte(op);
    rec.width = op16 ? 2 : 4;
    imm_at = i + 1;
  } else if (op == 0x0F && i + 1 < bytes.size() && (bytes[i + 1] & 0xF0) == 0x80) {
    rec.opcode = OpcodeId::two_byte(bytes[i + 1]);
    rec.width = op16 ? 2 : 4;
    imm_at = i + 2;
  } else {
    return std::nullopt;
  }
  if (imm_at + rec.width != bytes.size()) return std::nullopt;
  rec.displacement = read_signed(bytes, imm_at, rec.width);
  return rec;
}

std::size_t DecodedStream::cfc_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(instructions.begin(), instructions.end(),
                                                [](const Instruction& i) { return i.cfc.has_value(); }));
}

DecodedStream decode_stream(ByteView code, CfcSet set) {
  DecodedStream out;
  out.instructions.reserve(code.size() / 3);
  std::size_t off = 0;
  while (off < code.size()) {
    const auto r = decode_length(code, off);
    if (r.status != DecodeStatus::ok) {
      out.resyncs.push_back({static_cast<std::uint32_t>(off), r.status == DecodeStatus::truncated
                                                                    ? ErrorCode::TruncatedInstruction
                                                                    : ErrorCode::InvalidOpcode});
      ++off;
      continue;
    }
    Instruction ins;
    ins.offset = static_cast<std::uint32_t>(off);
    ins.length = r.length;
    std::copy_n(code.begin() + static_cast<std::ptrdiff_t>(off), r.length, ins.raw.begin());
    if (auto cfc = classify_cfc(ins); cfc && in_cfc_set(cfc->opcode, set)) ins.cfc = cfc;
    out.instructions.push_back(ins);
    off += r.length;
  }
  return out;
}

const char* to_string(DataFilterAction action) noexcept {
  switch (action) {
    case DataFilterAction::off: return "off";
    case DataFilterAction::flag: return "flag";
    case DataFilterAction::drop: return "drop";
  }
  return "?";
}

std::vector<ByteSpan> find_utf16_runs(ByteView code, std::size_t min_pairs) {
  std::vector<ByteSpan> spans;
  if (min_pairs == 0) min_pairs = 1;
  for (std::size_t parity = 0; parity < 2; ++parity) {
    std::size_t run_start = parity;
    std::size_t pairs = 0;
    auto close = [&](std::size_t end) {
      if (pairs >= min_pairs) {
        spans.push_back({static_cast<std::uint32_t>(run_start), static_cast<std::uint32_t>(end)});
      }
      pairs = 0;
    };
    std::size_t i = parity;
    for (; i + 1 < code.size(); i += 2) {
      if (printable(code[i]) && code[i + 1] == 0x00) {
        if (pairs == 0) run_start = i;
        ++pairs;
      } else {
        close(i);
      }
    }
    close(i);
  }

  std::sort(spans.begin(), spans.end(),
            [](const ByteSpan& a, const ByteSpan& b) { return a.begin < b.begin; });
  std::vector<ByteSpan> merged;
  for (const auto& s : spans) {
    if (!merged.empty() && s.begin <= merged.back().end) {
      merged.back().end = std::max(merged.back().end, s.end);
    } else {
      merged.push_back(s);
    }
  }
  return merged;
}

FilteredStream data_in_code_filter(std::span<const Instruction> instructions, ByteView code,
                                   const DataFilterPolicy& policy) {
  FilteredStream out;
  out.instructions.assign(instructions.begin(), instructions.end());
  if (policy.action == DataFilterAction::off) return out;

  out.report.text_spans = find_utf16_runs(code, policy.min_pairs);
  const auto& spans = out.report.text_spans;
  for (auto& ins : out.instructions) {
    if (!ins.cfc) continue;
    // First span ending after the instruction start.
    auto it = std::upper_bound(spans.begin(), spans.end(), ins.offset,
                               [](std::uint32_t off, const ByteSpan& s) { return off < s.end; });
    if (it == spans.end() || ins.offset < it->begin) continue;
    ins.cfc->suspected_data = true;
    out.report.flagged.push_back(*ins.cfc);
    if (policy.action == DataFilterAction::drop) ins.cfc.reset();
  }
  return out;
}

}  // namespace cfcscan

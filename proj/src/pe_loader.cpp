#include "cfcscan/pe_loader.hpp"

#include <algorithm>
#include <cstdio>

#include "cfcscan/error.hpp"

namespace cfcscan {

namespace {

constexpr std::size_t kDosHeaderSize = 0x40;
constexpr std::size_t kLfanewOffset = 0x3C;
constexpr std::size_t kCoffHeaderSize = 20;
constexpr std::size_t kSectionHeaderSize = 40;
constexpr std::size_t kImageBaseOffset = 28;

std::uint16_t read_u16(ByteView data, std::size_t off) {
  return static_cast<std::uint16_t>(data[off] | (data[off + 1] << 8));
}

std::uint32_t read_u32(ByteView data, std::size_t off) {
  return static_cast<std::uint32_t>(data[off]) | (static_cast<std::uint32_t>(data[off + 1]) << 8) |
         (static_cast<std::uint32_t>(data[off + 2]) << 16) |
         (static_cast<std::uint32_t>(data[off + 3]) << 24);
}

void put_u16(std::uint8_t* out, std::uint16_t v) {
  out[0] = static_cast<std::uint8_t>(v);
  out[1] = static_cast<std::uint8_t>(v >> 8);
}

void put_u32(std::uint8_t* out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

}  // namespace

SectionTag make_section_tag(std::string_view name) {
  SectionTag tag{};
  std::copy_n(name.begin(), std::min(name.size(), tag.size()), tag.begin());
  return tag;
}

std::string display_name(const SectionTag& tag) {
  std::string out;
  for (auto b : tag) {
    if (b == 0) break;
    if (b >= 0x21 && b <= 0x7E && b != '\\') {
      out.push_back(static_cast<char>(b));
    } else {
      char buf[5];
      std::snprintf(buf, sizeof buf, "\\x%02X", b);
      out += buf;
    }
  }
  return out;
}

PeFile parse_pe(ByteView raw) {
  if (raw.size() < 2 || raw[0] != 'M' || raw[1] != 'Z') {
    throw Error(ErrorCode::NotPe, "missing MZ signature");
  }
  if (raw.size() < kDosHeaderSize) {
    throw Error(ErrorCode::Truncated, "DOS header shorter than 64 bytes");
  }

  PeFile pe;
  pe.dos_magic = {raw[0], raw[1]};
  pe.lfanew = read_u32(raw, kLfanewOffset);

  const std::size_t size = raw.size();
  const std::size_t pe_off = pe.lfanew;
  if (pe_off > size || size - pe_off < 4) {
    throw Error(ErrorCode::Truncated, "e_lfanew points past end of file");
  }
  if (raw[pe_off] != 'P' || raw[pe_off + 1] != 'E' || raw[pe_off + 2] != 0 ||
      raw[pe_off + 3] != 0) {
    throw Error(ErrorCode::NotPe, "missing PE signature");
  }

  const std::size_t coff_off = pe_off + 4;
  if (size - coff_off < kCoffHeaderSize) {
    throw Error(ErrorCode::Truncated, "COFF header runs past end of file");
  }
  auto& coff = pe.coff;
  coff.machine = read_u16(raw, coff_off);
  coff.number_of_sections = read_u16(raw, coff_off + 2);
  coff.time_date_stamp = read_u32(raw, coff_off + 4);
  coff.pointer_to_symbol_table = read_u32(raw, coff_off + 8);
  coff.number_of_symbols = read_u32(raw, coff_off + 12);
  coff.size_of_optional_header = read_u16(raw, coff_off + 16);
  coff.characteristics = read_u16(raw, coff_off + 18);

  if (coff.machine != kMachineI386) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "machine 0x%04X is not IA-32", coff.machine);
    throw Error(ErrorCode::UnsupportedMachine, buf);
  }

  const std::size_t opt_off = coff_off + kCoffHeaderSize;
  const std::size_t opt_size = coff.size_of_optional_header;
  if (size - opt_off < opt_size) {
    throw Error(ErrorCode::Truncated, "optional header runs past end of file");
  }
  if (opt_size >= 2) pe.optional_magic = read_u16(raw, opt_off);
  if (opt_size >= kImageBaseOffset + 4) pe.image_base = read_u32(raw, opt_off + kImageBaseOffset);

  const std::size_t table_off = opt_off + opt_size;
  const std::size_t count = coff.number_of_sections;
  if ((size - table_off) / kSectionHeaderSize < count) {
    throw Error(ErrorCode::Truncated, "section table runs past end of file");
  }

  pe.section_headers.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t off = table_off + i * kSectionHeaderSize;
    SectionHeader h;
    std::copy_n(raw.begin() + static_cast<std::ptrdiff_t>(off), 8, h.name.begin());
    h.virtual_size = read_u32(raw, off + 8);
    h.virtual_address = read_u32(raw, off + 12);
    h.raw_size = read_u32(raw, off + 16);
    h.raw_offset = read_u32(raw, off + 20);
    h.pointer_to_relocations = read_u32(raw, off + 24);
    h.pointer_to_linenumbers = read_u32(raw, off + 28);
    h.number_of_relocations = read_u16(raw, off + 32);
    h.number_of_linenumbers = read_u16(raw, off + 34);
    h.characteristics = read_u32(raw, off + 36);
    h.truncated = static_cast<std::uint64_t>(h.raw_offset) + h.raw_size > size;
    pe.section_headers.push_back(h);
  }

  pe.raw.assign(raw.begin(), raw.end());
  return pe;
}

std::vector<ExecutableSection> executable_sections(const PeFile& pe,
                                                   const std::string& source_file) {
  std::vector<ExecutableSection> out;
  const std::uint64_t file_size = pe.raw.size();
  for (const auto& h : pe.section_headers) {
    if (!h.is_executable()) continue;
    std::uint64_t len = h.virtual_size == 0 ? h.raw_size : std::min(h.raw_size, h.virtual_size);
    const std::uint64_t start = std::min<std::uint64_t>(h.raw_offset, file_size);
    len = std::min(len, file_size - start);

    ExecutableSection s;
    s.name = h.name;
    s.rva = h.virtual_address;
    s.raw_offset = h.raw_offset;
    s.source_file = source_file;
    s.bytes.assign(pe.raw.begin() + static_cast<std::ptrdiff_t>(start),
                   pe.raw.begin() + static_cast<std::ptrdiff_t>(start + len));
    out.push_back(std::move(s));
  }
  return out;
}

std::array<std::uint8_t, 20> serialize_coff_header(const CoffHeader& h) {
  std::array<std::uint8_t, 20> out{};
  put_u16(&out[0], h.machine);
  put_u16(&out[2], h.number_of_sections);
  put_u32(&out[4], h.time_date_stamp);
  put_u32(&out[8], h.pointer_to_symbol_table);
  put_u32(&out[12], h.number_of_symbols);
  put_u16(&out[16], h.size_of_optional_header);
  put_u16(&out[18], h.characteristics);
  return out;
}

std::array<std::uint8_t, 40> serialize_section_header(const SectionHeader& h) {
  std::array<std::uint8_t, 40> out{};
  std::copy(h.name.begin(), h.name.end(), out.begin());
  put_u32(&out[8], h.virtual_size);
  put_u32(&out[12], h.virtual_address);
  put_u32(&out[16], h.raw_size);
  put_u32(&out[20], h.raw_offset);
  put_u32(&out[24], h.pointer_to_relocations);
  put_u32(&out[28], h.pointer_to_linenumbers);
  put_u16(&out[32], h.number_of_relocations);
  put_u16(&out[34], h.number_of_linenumbers);
  put_u32(&out[36], h.characteristics);
  return out;
}

}  // namespace cfcscan

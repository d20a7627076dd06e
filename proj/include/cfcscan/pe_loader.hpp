#pragma once

// PE/COFF container parsing for IA-32 images.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cfcscan {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

// Eight raw bytes from the section table. Never interpreted as text.
using SectionTag = std::array<std::uint8_t, 8>;

SectionTag make_section_tag(std::string_view name);
// Printable rendering for reports: bytes up to the first NUL, non-printables as \xNN.
std::string display_name(const SectionTag& tag);

inline constexpr std::uint16_t kMachineI386 = 0x014C;

inline constexpr std::uint32_t kScnCntCode = 0x00000020;
inline constexpr std::uint32_t kScnMemExecute = 0x20000000;

struct CoffHeader {
  std::uint16_t machine = 0;
  std::uint16_t number_of_sections = 0;
  std::uint32_t time_date_stamp = 0;
  std::uint32_t pointer_to_symbol_table = 0;
  std::uint32_t number_of_symbols = 0;
  std::uint16_t size_of_optional_header = 0;
  std::uint16_t characteristics = 0;

  bool operator==(const CoffHeader&) const = default;
};

struct SectionHeader {
  SectionTag name{};
  std::uint32_t virtual_size = 0;
  std::uint32_t virtual_address = 0;
  std::uint32_t raw_size = 0;
  std::uint32_t raw_offset = 0;
  std::uint32_t pointer_to_relocations = 0;
  std::uint32_t pointer_to_linenumbers = 0;
  std::uint16_t number_of_relocations = 0;
  std::uint16_t number_of_linenumbers = 0;
  std::uint32_t characteristics = 0;
  // raw_offset + raw_size runs past the end of the file.
  bool truncated = false;

  [[nodiscard]] bool is_executable() const noexcept {
    return (characteristics & (kScnMemExecute | kScnCntCode)) != 0;
  }

  bool operator==(const SectionHeader&) const = default;
};

struct PeFile {
  std::array<std::uint8_t, 2> dos_magic{};
  std::uint32_t lfanew = 0;
  CoffHeader coff;
  std::uint16_t optional_magic = 0;
  std::uint32_t image_base = 0;
  std::vector<SectionHeader> section_headers;
  Bytes raw;

  [[nodiscard]] std::uint16_t machine() const noexcept { return coff.machine; }
};

struct ExecutableSection {
  SectionTag name{};
  std::uint32_t rva = 0;
  std::uint32_t raw_offset = 0;
  Bytes bytes;
  std::string source_file;
};

// Throws Error{NotPe | Truncated | UnsupportedMachine}. Total over arbitrary input.
PeFile parse_pe(ByteView raw);

// Sections carrying the execute or contains-code bit, in file order. The byte
// length is min(raw_size, virtual_size), virtual_size 0 meaning raw_size, and
// never extends past the end of the file.
std::vector<ExecutableSection> executable_sections(const PeFile& pe,
                                                   const std::string& source_file = {});

// Re-encodes parsed headers to their on-disk little-endian layout.
std::array<std::uint8_t, 20> serialize_coff_header(const CoffHeader& header);
std::array<std::uint8_t, 40> serialize_section_header(const SectionHeader& header);

}  // namespace cfcscan

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace drvsynth {

enum class BinaryFormat { Elf64 };
enum class Machine { Amd64, Other };

enum class SymbolType { NoType, Object, Func, Section, File, Common, Tls, GnuIfunc, Other };
enum class SymbolBinding { Local, Global, Weak, Other };
enum class SymbolVisibility { Default, Internal, Hidden, Protected };

struct Section {
    std::string name;
    uint32_t type = 0;
    uint64_t flags = 0;
    uint64_t address = 0;
    uint64_t offset = 0;
    uint64_t size = 0;

    bool executable() const noexcept;
    bool allocated() const noexcept;
    bool has_file_data() const noexcept;
    bool contains(uint64_t addr) const noexcept { return addr >= address && addr < address + size; }

    bool operator==(const Section&) const = default;
};

struct RawSymbol {
    std::string name;
    uint64_t value = 0;
    uint64_t size = 0;
    SymbolType type = SymbolType::NoType;
    SymbolBinding binding = SymbolBinding::Local;
    SymbolVisibility visibility = SymbolVisibility::Default;
    uint16_t section_index = 0;

    bool defined() const noexcept;

    bool operator==(const RawSymbol&) const = default;
};

/// Immutable parsed view of an ELF64 shared object. Holds the file bytes so
/// disassembly can be served without reopening the file.
class BinaryImage {
public:
    std::filesystem::path path;
    BinaryFormat format = BinaryFormat::Elf64;
    Machine machine = Machine::Other;
    std::vector<Section> sections;
    std::vector<RawSymbol> dynamic_symbols;
    /// `.symtab` entries when present; empty on stripped objects.
    std::vector<RawSymbol> static_symbols;

    std::span<const uint8_t> bytes() const noexcept;
    const Section* find_section(std::string_view name) const noexcept;
    const Section* section_containing(uint64_t address) const noexcept;
    /// File bytes of a section; empty for SHT_NOBITS.
    std::span<const uint8_t> section_data(const Section& section) const;
    /// Bytes backing [address, address+length) inside a single section.
    std::optional<std::span<const uint8_t>> read_virtual(uint64_t address, uint64_t length) const;

    bool operator==(const BinaryImage& other) const;

private:
    friend BinaryImage load_binary(const std::filesystem::path& path);
    std::shared_ptr<const std::vector<uint8_t>> data_;
};

/// Parses `path` read-only. Throws Error with NotElf, UnsupportedClass,
/// NoDynsym, Truncated or IoFailure.
BinaryImage load_binary(const std::filesystem::path& path);

std::string_view to_string(SymbolType type) noexcept;
std::string_view to_string(SymbolBinding binding) noexcept;

} // namespace drvsynth

#include "drvsynth/elf_image.hpp"

#include "drvsynth/error.hpp"

#include <elf.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>

namespace drvsynth {

namespace {

template <typename T>
T read_struct(std::span<const uint8_t> data, uint64_t offset, const char* what)
{
    if (offset > data.size() || data.size() - offset < sizeof(T)) {
        throw Error(ErrorCode::Truncated, std::string(what) + " extends past end of file");
    }
    T value;
    std::memcpy(&value, data.data() + offset, sizeof(T));
    return value;
}

bool range_in_file(uint64_t offset, uint64_t size, uint64_t file_size)
{
    return offset <= file_size && size <= file_size - offset;
}

SymbolType decode_type(unsigned char info)
{
    switch (ELF64_ST_TYPE(info)) {
    case STT_NOTYPE: return SymbolType::NoType;
    case STT_OBJECT: return SymbolType::Object;
    case STT_FUNC: return SymbolType::Func;
    case STT_SECTION: return SymbolType::Section;
    case STT_FILE: return SymbolType::File;
    case STT_COMMON: return SymbolType::Common;
    case STT_TLS: return SymbolType::Tls;
    case STT_GNU_IFUNC: return SymbolType::GnuIfunc;
    default: return SymbolType::Other;
    }
}

SymbolBinding decode_binding(unsigned char info)
{
    switch (ELF64_ST_BIND(info)) {
    case STB_LOCAL: return SymbolBinding::Local;
    case STB_GLOBAL: return SymbolBinding::Global;
    case STB_WEAK: return SymbolBinding::Weak;
    default: return SymbolBinding::Other;
    }
}

SymbolVisibility decode_visibility(unsigned char other)
{
    switch (ELF64_ST_VISIBILITY(other)) {
    case STV_INTERNAL: return SymbolVisibility::Internal;
    case STV_HIDDEN: return SymbolVisibility::Hidden;
    case STV_PROTECTED: return SymbolVisibility::Protected;
    default: return SymbolVisibility::Default;
    }
}

std::string read_cstring(std::span<const uint8_t> table, uint64_t offset, const char* what)
{
    if (offset >= table.size()) {
        throw Error(ErrorCode::Truncated, std::string(what) + " name offset outside string table");
    }
    auto begin = table.begin() + static_cast<std::ptrdiff_t>(offset);
    auto end = std::find(begin, table.end(), uint8_t{0});
    if (end == table.end()) {
        throw Error(ErrorCode::Truncated, std::string(what) + " name is not NUL-terminated");
    }
    return std::string(begin, end);
}

std::vector<RawSymbol> read_symbols(const BinaryImage& image, const Section& symtab, const Section& strtab,
                                    std::span<const uint8_t> file, const char* what)
{
    const uint64_t entry_size = sizeof(Elf64_Sym);
    if (!range_in_file(symtab.offset, symtab.size, file.size())) {
        throw Error(ErrorCode::Truncated, std::string(what) + " section points past end of file");
    }
    if (!range_in_file(strtab.offset, strtab.size, file.size())) {
        throw Error(ErrorCode::Truncated, std::string(what) + " string table points past end of file");
    }
    auto strings = image.section_data(strtab);

    std::vector<RawSymbol> out;
    const uint64_t count = symtab.size / entry_size;
    out.reserve(count);
    for (uint64_t i = 0; i < count; ++i) {
        auto sym = read_struct<Elf64_Sym>(file, symtab.offset + i * entry_size, what);
        RawSymbol raw;
        raw.name = read_cstring(strings, sym.st_name, what);
        raw.value = sym.st_value;
        raw.size = sym.st_size;
        raw.type = decode_type(sym.st_info);
        raw.binding = decode_binding(sym.st_info);
        raw.visibility = decode_visibility(sym.st_other);
        raw.section_index = sym.st_shndx;
        if (raw.defined() && raw.section_index < SHN_LORESERVE && raw.section_index >= image.sections.size()) {
            throw Error(ErrorCode::Truncated, std::string(what) + " symbol '" + raw.name +
                                                  "' references a missing section");
        }
        out.push_back(std::move(raw));
    }
    return out;
}

} // namespace

bool Section::executable() const noexcept { return (flags & SHF_EXECINSTR) != 0; }
bool Section::allocated() const noexcept { return (flags & SHF_ALLOC) != 0; }
bool Section::has_file_data() const noexcept { return type != SHT_NOBITS; }

bool RawSymbol::defined() const noexcept
{
    return section_index != SHN_UNDEF;
}

std::span<const uint8_t> BinaryImage::bytes() const noexcept
{
    if (!data_) {
        return {};
    }
    return {data_->data(), data_->size()};
}

const Section* BinaryImage::find_section(std::string_view name) const noexcept
{
    auto it = std::find_if(sections.begin(), sections.end(), [&](const Section& s) { return s.name == name; });
    return it == sections.end() ? nullptr : &*it;
}

const Section* BinaryImage::section_containing(uint64_t address) const noexcept
{
    for (const auto& s : sections) {
        if (s.allocated() && s.contains(address)) {
            return &s;
        }
    }
    return nullptr;
}

std::span<const uint8_t> BinaryImage::section_data(const Section& section) const
{
    if (!section.has_file_data()) {
        return {};
    }
    auto all = bytes();
    if (!range_in_file(section.offset, section.size, all.size())) {
        throw Error(ErrorCode::Truncated, "section " + section.name + " points past end of file");
    }
    return all.subspan(section.offset, section.size);
}

std::optional<std::span<const uint8_t>> BinaryImage::read_virtual(uint64_t address, uint64_t length) const
{
    const Section* s = section_containing(address);
    if (s == nullptr || !s->has_file_data()) {
        return std::nullopt;
    }
    const uint64_t rel = address - s->address;
    if (length > s->size - rel) {
        return std::nullopt;
    }
    return section_data(*s).subspan(rel, length);
}

bool BinaryImage::operator==(const BinaryImage& other) const
{
    return path == other.path && format == other.format && machine == other.machine && sections == other.sections &&
           dynamic_symbols == other.dynamic_symbols && static_symbols == other.static_symbols &&
           std::ranges::equal(bytes(), other.bytes());
}

BinaryImage load_binary(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    }
    auto data = std::make_shared<std::vector<uint8_t>>(std::istreambuf_iterator<char>(in),
                                                       std::istreambuf_iterator<char>());
    if (in.bad()) {
        throw Error(ErrorCode::IoFailure, "read error on " + path.string());
    }
    std::span<const uint8_t> file(*data);

    if (file.size() < EI_NIDENT || std::memcmp(file.data(), ELFMAG, SELFMAG) != 0) {
        throw Error(ErrorCode::NotElf, path.string() + ": bad magic");
    }
    if (file[EI_CLASS] != ELFCLASS64) {
        throw Error(ErrorCode::UnsupportedClass, path.string() + ": only ELF64 is supported");
    }
    if (file[EI_DATA] != ELFDATA2LSB) {
        throw Error(ErrorCode::UnsupportedClass, path.string() + ": only little-endian objects are supported");
    }

    auto header = read_struct<Elf64_Ehdr>(file, 0, "ELF header");

    BinaryImage image;
    image.path = path;
    image.format = BinaryFormat::Elf64;
    image.machine = header.e_machine == EM_X86_64 ? Machine::Amd64 : Machine::Other;
    image.data_ = data;

    if (header.e_shoff == 0 || header.e_shnum == 0) {
        throw Error(ErrorCode::NoDynsym, path.string() + ": no section header table");
    }
    if (header.e_shentsize != sizeof(Elf64_Shdr) ||
        !range_in_file(header.e_shoff, uint64_t{header.e_shnum} * sizeof(Elf64_Shdr), file.size())) {
        throw Error(ErrorCode::Truncated, path.string() + ": section header table outside file");
    }

    std::vector<Elf64_Shdr> raw_headers;
    raw_headers.reserve(header.e_shnum);
    for (uint16_t i = 0; i < header.e_shnum; ++i) {
        raw_headers.push_back(read_struct<Elf64_Shdr>(file, header.e_shoff + uint64_t{i} * sizeof(Elf64_Shdr),
                                                      "section header"));
    }
    if (header.e_shstrndx >= raw_headers.size()) {
        throw Error(ErrorCode::Truncated, path.string() + ": section name table index out of range");
    }
    const auto& shstr = raw_headers[header.e_shstrndx];
    if (!range_in_file(shstr.sh_offset, shstr.sh_size, file.size())) {
        throw Error(ErrorCode::Truncated, path.string() + ": section name table outside file");
    }
    auto names = file.subspan(shstr.sh_offset, shstr.sh_size);

    for (const auto& sh : raw_headers) {
        Section s;
        s.name = sh.sh_name == 0 && sh.sh_type == SHT_NULL ? std::string() : read_cstring(names, sh.sh_name, "section");
        s.type = sh.sh_type;
        s.flags = sh.sh_flags;
        s.address = sh.sh_addr;
        s.offset = sh.sh_offset;
        s.size = sh.sh_size;
        if (s.has_file_data() && s.type != SHT_NULL && !range_in_file(s.offset, s.size, file.size())) {
            throw Error(ErrorCode::Truncated, path.string() + ": section " + s.name + " points past end of file");
        }
        image.sections.push_back(std::move(s));
    }

    auto find_typed = [&](uint32_t type) -> std::optional<size_t> {
        for (size_t i = 0; i < image.sections.size(); ++i) {
            if (image.sections[i].type == type) {
                return i;
            }
        }
        return std::nullopt;
    };

    auto dynsym_index = find_typed(SHT_DYNSYM);
    if (!dynsym_index) {
        throw Error(ErrorCode::NoDynsym, path.string() + ": no .dynsym section");
    }
    const auto& dynsym_header = raw_headers[*dynsym_index];
    if (dynsym_header.sh_entsize != 0 && dynsym_header.sh_entsize != sizeof(Elf64_Sym)) {
        throw Error(ErrorCode::Truncated, path.string() + ": unexpected .dynsym entry size");
    }
    if (dynsym_header.sh_link >= image.sections.size()) {
        throw Error(ErrorCode::Truncated, path.string() + ": .dynsym string table link out of range");
    }
    image.dynamic_symbols = read_symbols(image, image.sections[*dynsym_index],
                                         image.sections[dynsym_header.sh_link], file, ".dynsym");

    if (auto symtab_index = find_typed(SHT_SYMTAB)) {
        const auto& symtab_header = raw_headers[*symtab_index];
        if (symtab_header.sh_link < image.sections.size()) {
            image.static_symbols = read_symbols(image, image.sections[*symtab_index],
                                                image.sections[symtab_header.sh_link], file, ".symtab");
        }
    }
    return image;
}

std::string_view to_string(SymbolType type) noexcept
{
    switch (type) {
    case SymbolType::NoType: return "NOTYPE";
    case SymbolType::Object: return "OBJECT";
    case SymbolType::Func: return "FUNC";
    case SymbolType::Section: return "SECTION";
    case SymbolType::File: return "FILE";
    case SymbolType::Common: return "COMMON";
    case SymbolType::Tls: return "TLS";
    case SymbolType::GnuIfunc: return "IFUNC";
    case SymbolType::Other: return "OTHER";
    }
    return "OTHER";
}

std::string_view to_string(SymbolBinding binding) noexcept
{
    switch (binding) {
    case SymbolBinding::Local: return "LOCAL";
    case SymbolBinding::Global: return "GLOBAL";
    case SymbolBinding::Weak: return "WEAK";
    case SymbolBinding::Other: return "OTHER";
    }
    return "OTHER";
}

} // namespace drvsynth

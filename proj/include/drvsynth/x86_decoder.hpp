#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>

namespace drvsynth::x86 {

/// One decoded AMD64 instruction rendered in Intel syntax, with operand
/// text laid out the way GNU objdump prints it (`dst,src`, `QWORD PTR [...]`,
/// branch targets as `1139 <sym+0x9>`).
struct Instruction {
    uint64_t address = 0;
    uint32_t length = 0;
    std::string mnemonic;
    std::string operands;

    bool operator==(const Instruction&) const = default;
};

/// Maps an address to a label such as `strlen@plt` or `add+0x9`.
using SymbolLookup = std::function<std::optional<std::string>(uint64_t)>;

/// Decodes the instruction at the start of `code`, which lives at virtual
/// `address`. Returns nullopt for byte sequences outside the supported subset.
std::optional<Instruction> decode(std::span<const uint8_t> code, uint64_t address, const SymbolLookup& lookup = {});

} // namespace drvsynth::x86

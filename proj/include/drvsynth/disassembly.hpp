#pragma once

#include "drvsynth/elf_image.hpp"
#include "drvsynth/exports.hpp"

#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace drvsynth {

class LineChannel;

struct DisasmLine {
    uint64_t address = 0;
    std::string mnemonic;
    std::string operands;

    bool operator==(const DisasmLine&) const = default;
};

struct Disassembly {
    std::string function_name;
    std::vector<DisasmLine> instructions;
    uint64_t byte_length = 0;

    /// One `address:\tmnemonic\toperands` line per instruction.
    std::string text() const;
    static std::vector<DisasmLine> parse_text(std::string_view text);
};

/// Byte range analysed for one export.
struct FunctionExtent {
    uint64_t start = 0;
    uint64_t length = 0;
    /// Set when no size or following symbol bounds the function; decoding then
    /// ends at the first return.
    bool stop_at_return = false;
};

/// Uses st_size when present, otherwise the next symbol address (or the
/// section end). Throws DecodeFailure when the address is not executable.
FunctionExtent function_extent(const BinaryImage& image, const ExportedFunction& function);

class DisassemblyProvider {
public:
    virtual ~DisassemblyProvider() = default;

    virtual std::string id() const = 0;
    virtual Disassembly disassemble(const BinaryImage& image, const ExportedFunction& function) = 0;
    /// Disassembles an explicit range; the range must lie in one executable section.
    virtual Disassembly disassemble_range(const BinaryImage& image, const std::string& name, uint64_t address,
                                          uint64_t length, bool stop_at_return) = 0;
};

/// In-process AMD64 linear sweep. Undecodable bytes become `(bad)` entries.
class BuiltinDisassembler final : public DisassemblyProvider {
public:
    std::string id() const override { return "builtin"; }
    Disassembly disassemble(const BinaryImage& image, const ExportedFunction& function) override;
    Disassembly disassemble_range(const BinaryImage& image, const std::string& name, uint64_t address,
                                  uint64_t length, bool stop_at_return) override;
};

/// Talks to an external disassembler over a line protocol:
///
///   request:  `disasm <path> 0x<address> <length>`
///   response: `{"instructions":[{"address":N,"mnemonic":"..","operands":".."}]}`
///             or `{"error":"..."}`
///
/// The child is started lazily and shared; requests are serialized.
class ExternalDisassembler final : public DisassemblyProvider {
public:
    explicit ExternalDisassembler(std::vector<std::string> command);
    ~ExternalDisassembler() override;

    std::string id() const override;
    Disassembly disassemble(const BinaryImage& image, const ExportedFunction& function) override;
    Disassembly disassemble_range(const BinaryImage& image, const std::string& name, uint64_t address,
                                  uint64_t length, bool stop_at_return) override;

private:
    std::vector<std::string> command_;
    std::mutex mutex_;
    std::unique_ptr<LineChannel> channel_;
};

/// Maps PLT stub addresses to `name@plt` using .rela.plt / .rela.dyn.
std::vector<std::pair<uint64_t, std::string>> plt_stub_names(const BinaryImage& image);

} // namespace drvsynth

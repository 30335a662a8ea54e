#pragma once

#include "drvsynth/elf_image.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace drvsynth {

enum class ExclusionReason { ZeroArity, DenylistPattern, NotFunction, Undefined };

std::string_view to_string(ExclusionReason reason) noexcept;
std::optional<ExclusionReason> exclusion_reason_from_string(std::string_view text) noexcept;

struct ExportedFunction {
    std::string name;
    uint64_t address = 0;
    /// st_size from the dynamic symbol; 0 when the producer left it unset.
    uint64_t size = 0;
    SymbolBinding binding = SymbolBinding::Global;
    bool fuzzable = false;
    std::optional<ExclusionReason> exclusion_reason;

    bool operator==(const ExportedFunction&) const = default;
};

/// Defined GLOBAL/WEAK FUNC symbols of the dynamic table, ascending by
/// address then name. Repeated names keep their first definition only.
std::vector<ExportedFunction> list_exports(const BinaryImage& image);

} // namespace drvsynth

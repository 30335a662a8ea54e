#include "drvsynth/exports.hpp"

#include <algorithm>
#include <unordered_set>

namespace drvsynth {

std::string_view to_string(ExclusionReason reason) noexcept
{
    switch (reason) {
    case ExclusionReason::ZeroArity: return "ZERO_ARITY";
    case ExclusionReason::DenylistPattern: return "DENYLIST_PATTERN";
    case ExclusionReason::NotFunction: return "NOT_FUNCTION";
    case ExclusionReason::Undefined: return "UNDEFINED";
    }
    return "NOT_FUNCTION";
}

std::optional<ExclusionReason> exclusion_reason_from_string(std::string_view text) noexcept
{
    for (auto r : {ExclusionReason::ZeroArity, ExclusionReason::DenylistPattern, ExclusionReason::NotFunction,
                   ExclusionReason::Undefined}) {
        if (to_string(r) == text) {
            return r;
        }
    }
    return std::nullopt;
}

std::vector<ExportedFunction> list_exports(const BinaryImage& image)
{
    // Symbol-table order decides which duplicate is "first"; sorting happens after.
    std::vector<ExportedFunction> out;
    std::unordered_set<std::string> seen;
    for (const auto& sym : image.dynamic_symbols) {
        if (sym.type != SymbolType::Func || !sym.defined() || sym.name.empty()) {
            continue;
        }
        if (sym.binding != SymbolBinding::Global && sym.binding != SymbolBinding::Weak) {
            continue;
        }
        if (!seen.insert(sym.name).second) {
            continue;
        }
        ExportedFunction fn;
        fn.name = sym.name;
        fn.address = sym.value;
        fn.size = sym.size;
        fn.binding = sym.binding;
        out.push_back(std::move(fn));
    }
    std::ranges::sort(out, [](const ExportedFunction& a, const ExportedFunction& b) {
        return a.address != b.address ? a.address < b.address : a.name < b.name;
    });
    return out;
}

} // namespace drvsynth

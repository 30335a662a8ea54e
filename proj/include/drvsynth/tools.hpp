#pragma once

#include "drvsynth/chat.hpp"
#include "drvsynth/disassembly.hpp"
#include "drvsynth/exports.hpp"
#include "drvsynth/signature.hpp"

#include <string>
#include <vector>

namespace drvsynth {

inline constexpr std::string_view kGetSignature = "get_signature";
inline constexpr std::string_view kGetDisassembly = "get_disassembly";

/// Prefix of every tool reply that reports a failure instead of a result.
inline constexpr std::string_view kToolErrorPrefix = "error: ";

bool is_analysis_tool(std::string_view name) noexcept;

/// The analysis tools offered during one function session. Only the function
/// under analysis can be queried.
class AnalysisTools {
public:
    AnalysisTools(const BinaryImage& image, DisassemblyProvider& provider, ExportedFunction function,
                  InferredSignature signature);

    static std::vector<ToolSpec> specs();

    /// Never throws for bad calls; failures come back as `error: ...` text so
    /// the model can react to them.
    std::string invoke(const ToolInvocation& call);

private:
    const BinaryImage& image_;
    DisassemblyProvider& provider_;
    ExportedFunction function_;
    InferredSignature signature_;
};

} // namespace drvsynth

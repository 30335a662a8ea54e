#include "drvsynth/tools.hpp"

#include "drvsynth/error.hpp"

namespace drvsynth {

bool is_analysis_tool(std::string_view name) noexcept
{
    return name == kGetSignature || name == kGetDisassembly;
}

AnalysisTools::AnalysisTools(const BinaryImage& image, DisassemblyProvider& provider, ExportedFunction function,
                             InferredSignature signature)
    : image_(image), provider_(provider), function_(std::move(function)), signature_(std::move(signature))
{
}

std::vector<ToolSpec> AnalysisTools::specs()
{
    ToolParameter name{"function_name", "string", false, "Exported function to inspect; defaults to the current one"};
    return {
        {std::string(kGetSignature), "Heuristic C signature derived from the function's register usage", {name}},
        {std::string(kGetDisassembly), "AMD64 disassembly of the function, one instruction per line", {name}},
    };
}

std::string AnalysisTools::invoke(const ToolInvocation& call)
{
    std::string error(kToolErrorPrefix);
    if (!is_analysis_tool(call.tool_name)) {
        return error + "unknown tool '" + call.tool_name + "'";
    }
    if (auto it = call.arguments.find("function_name"); it != call.arguments.end() && it->second != function_.name) {
        return error + "'" + it->second + "' is not available; only " + function_.name + " can be inspected";
    }
    if (call.tool_name == kGetSignature) {
        return signature_.render();
    }
    try {
        return provider_.disassemble(image_, function_).text();
    }
    catch (const Error& e) {
        return error + e.what();
    }
}

} // namespace drvsynth

#include "drvsynth/prompts.hpp"

#include "drvsynth/error.hpp"

#include <fmt/format.h>

#include <cctype>
#include <fstream>
#include <sstream>

namespace drvsynth {

namespace {

constexpr std::string_view kSystem =
    R"(Please act as a security researcher with a focus on fuzzing.
You are writing a libFuzzer fuzz driver for one function exported by the closed-source shared library {{library_name}}.
No source code, headers or debug information exist for this library. Everything you know about it comes from the tools offered to you.
)";

constexpr std::string_view kAnalysis =
    R"(Analyze the exported function {{function_name}}.
Heuristic signature from the disassembler:
{{signature}}

Use the get_signature and get_disassembly tools to study how the function uses its arguments and what it returns.
Call the tools as often as you need. When you have gathered enough information, reply with a short summary of your findings and do not call any tool.
)";

constexpr std::string_view kGeneration =
    R"(Generate a libFuzzer fuzz driver for {{function_name}}.

Inferred signature:
{{signature}}

The driver is compiled with this exact command:
{{compile_cmd}}

Requirements:
- Define extern "C" int LLVMFuzzerTestOneInput(const uint8_t *data, size_t size) and return 0 from it.
- Declare {{function_name}} yourself with extern "C"; no header for the library exists.
- Do not assume information about the function signature beyond the binary analysis above.
- Please avoid data structures not found in the binary analysis.
- Make sure only source code is output, as a single C++ code block.
)";

constexpr std::string_view kCompileRepair =
    R"(The fuzz driver for {{function_name}} (attempt {{attempt}}) failed to build.
Compiler output:
{{stderr}}

Fix the driver. The requirements from before still apply. Make sure only source code is output.
)";

constexpr std::string_view kRuntimeRepair =
    R"(The fuzz driver for {{function_name}} (attempt {{attempt}}) compiled but failed its {{window}} second validation run with verdict {{verdict}}.
Fuzzer output:
{{output}}

Fix the driver so it fuzzes {{function_name}} without crashing at startup. The requirements from before still apply. Make sure only source code is output.
)";

} // namespace

std::string_view to_string(TemplateId id) noexcept
{
    switch (id) {
    case TemplateId::System: return "SYSTEM";
    case TemplateId::Analysis: return "ANALYSIS";
    case TemplateId::Generation: return "GENERATION";
    case TemplateId::CompileRepair: return "COMPILE_REPAIR";
    case TemplateId::RuntimeRepair: return "RUNTIME_REPAIR";
    }
    return "UNKNOWN";
}

std::string template_file_name(TemplateId id)
{
    std::string name(to_string(id));
    for (char& c : name) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return name + ".txt";
}

std::string_view default_template(TemplateId id) noexcept
{
    switch (id) {
    case TemplateId::System: return kSystem;
    case TemplateId::Analysis: return kAnalysis;
    case TemplateId::Generation: return kGeneration;
    case TemplateId::CompileRepair: return kCompileRepair;
    case TemplateId::RuntimeRepair: return kRuntimeRepair;
    }
    return {};
}

std::string render_template(std::string_view text, const PromptContext& context)
{
    std::string out;
    out.reserve(text.size());
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto open = text.find("{{", pos);
        if (open == std::string_view::npos) {
            out.append(text.substr(pos));
            break;
        }
        auto close = text.find("}}", open + 2);
        if (close == std::string_view::npos) {
            out.append(text.substr(pos));
            break;
        }
        out.append(text.substr(pos, open - pos));
        std::string name(text.substr(open + 2, close - open - 2));
        auto it = context.find(name);
        if (it == context.end()) {
            throw Error(ErrorCode::MissingPlaceholder, "no binding for {{" + name + "}}");
        }
        out.append(it->second);
        pos = close + 2;
    }
    return out;
}

std::string truncation_marker(std::size_t dropped)
{
    return fmt::format("\n[... {} bytes truncated ...]\n", dropped);
}

std::string cap_output(std::string_view text, std::size_t cap)
{
    if (text.size() <= cap) {
        return std::string(text);
    }
    return std::string(text.substr(0, cap)) + truncation_marker(text.size() - cap);
}

PromptSet PromptSet::from_directory(const std::filesystem::path& directory)
{
    PromptSet set;
    if (!std::filesystem::is_directory(directory)) {
        throw Error(ErrorCode::FatalConfig, "prompt directory not found: " + directory.string());
    }
    for (TemplateId id : kAllTemplates) {
        auto path = directory / template_file_name(id);
        if (!std::filesystem::exists(path)) {
            continue;
        }
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            throw Error(ErrorCode::FatalConfig, "cannot read prompt template " + path.string());
        }
        std::ostringstream ss;
        ss << in.rdbuf();
        set.overrides_[id] = ss.str();
    }
    return set;
}

std::string_view PromptSet::text(TemplateId id) const
{
    auto it = overrides_.find(id);
    return it != overrides_.end() ? std::string_view(it->second) : default_template(id);
}

std::string PromptSet::render(TemplateId id, const PromptContext& context) const
{
    return render_template(text(id), context);
}

} // namespace drvsynth

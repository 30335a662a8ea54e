#include "drvsynth/forge.hpp"

#include "drvsynth/error.hpp"
#include "drvsynth/subprocess.hpp"

#include <fmt/format.h>

#include <array>
#include <cerrno>
#include <csignal>
#include <cstdlib>
#include <cstring>
#include <map>
#include <sstream>

namespace drvsynth {

namespace fs = std::filesystem;

std::string_view to_string(SourceOrigin origin) noexcept
{
    return origin == SourceOrigin::FencedBlock ? "FENCED_BLOCK" : "RAW_BODY";
}

std::string_view to_string(Verdict verdict) noexcept
{
    switch (verdict) {
    case Verdict::Nominal: return "NOMINAL";
    case Verdict::EarlyExitFailure: return "EARLY_EXIT_FAILURE";
    case Verdict::Crash: return "CRASH";
    case Verdict::SetupFailure: return "SETUP_FAILURE";
    }
    return "UNKNOWN";
}

std::optional<Verdict> verdict_from_string(std::string_view text) noexcept
{
    for (Verdict v : {Verdict::Nominal, Verdict::EarlyExitFailure, Verdict::Crash, Verdict::SetupFailure}) {
        if (to_string(v) == text) {
            return v;
        }
    }
    return std::nullopt;
}

namespace {

bool is_code_tag(std::string_view tag)
{
    static constexpr std::array<std::string_view, 9> tags = {"", "c", "cpp", "c++", "cc", "cxx", "h", "hpp", "C"};
    auto end = tag.find_first_of(" \t{");
    tag = tag.substr(0, end);
    for (auto t : tags) {
        if (tag == t) {
            return true;
        }
    }
    return false;
}

std::string_view trim(std::string_view s)
{
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

} // namespace

DriverSource extract_source(std::string_view text)
{
    std::string code;
    bool saw_fence = false;
    bool in_block = false;
    bool keep = false;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto eol = text.find('\n', pos);
        auto line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
        auto stripped = trim(line);
        if (stripped.starts_with("```")) {
            saw_fence = true;
            if (in_block) {
                in_block = false;
            }
            else {
                in_block = true;
                keep = is_code_tag(trim(stripped.substr(3)));
                if (keep && !code.empty() && code.back() != '\n') {
                    code += '\n';
                }
            }
        }
        else if (in_block && keep) {
            code.append(line);
            code += '\n';
        }
        if (eol == std::string_view::npos) {
            break;
        }
        pos = eol + 1;
    }

    DriverSource source;
    if (saw_fence) {
        source.extracted_from = SourceOrigin::FencedBlock;
        source.code = std::move(code);
    }
    else {
        source.extracted_from = SourceOrigin::RawBody;
        source.code = std::string(text);
        if (!source.code.empty() && source.code.back() != '\n') {
            source.code += '\n';
        }
    }
    if (source.code.find(kFuzzEntrypoint) == std::string::npos) {
        throw Error(ErrorCode::NoCodeFound,
                    fmt::format("the reply contains no definition of {}", kFuzzEntrypoint));
    }
    return source;
}

std::vector<std::string> compile_command(std::string_view command_template, const fs::path& source,
                                         const fs::path& output, const fs::path& library)
{
    std::map<std::string, std::string> bindings = {
        {"source", source.string()},
        {"output", output.string()},
        {"library_dir", library.parent_path().empty() ? std::string(".") : library.parent_path().string()},
        {"library_name", library.filename().string()},
    };
    std::vector<std::string> argv;
    std::istringstream words{std::string(command_template)};
    std::string word;
    while (words >> word) {
        std::string expanded;
        std::size_t pos = 0;
        while (pos < word.size()) {
            auto open = word.find('{', pos);
            if (open == std::string::npos) {
                expanded.append(word, pos);
                break;
            }
            auto close = word.find('}', open);
            if (close == std::string::npos) {
                throw Error(ErrorCode::FatalConfig, "unterminated placeholder in compile template: " + word);
            }
            auto name = word.substr(open + 1, close - open - 1);
            auto it = bindings.find(name);
            if (it == bindings.end()) {
                throw Error(ErrorCode::FatalConfig, "unknown compile template placeholder {" + name + "}");
            }
            expanded.append(word, pos, open - pos);
            expanded += it->second;
            pos = close + 1;
        }
        argv.push_back(std::move(expanded));
    }
    if (argv.empty()) {
        throw Error(ErrorCode::FatalConfig, "empty compile template");
    }
    return argv;
}

CompileResult compile(const fs::path& source_file, const fs::path& output, const fs::path& library,
                      const CompileConfig& config)
{
    ProcessOptions options;
    // Diagnostics name files relative to the attempt directory so they do not
    // depend on where the workspace lives.
    auto source_abs = fs::absolute(source_file);
    auto output_abs = fs::absolute(output);
    if (source_abs.parent_path() == output_abs.parent_path()) {
        options.cwd = source_abs.parent_path();
        options.argv = compile_command(config.command_template, source_abs.filename(), output_abs.filename(),
                                       fs::absolute(library));
        if (options.argv.front().find('/') != std::string::npos) {
            options.argv.front() = fs::absolute(options.argv.front()).string();
        }
    }
    else {
        options.argv = compile_command(config.command_template, source_abs, output_abs, fs::absolute(library));
    }
    options.timeout = std::chrono::duration_cast<std::chrono::milliseconds>(config.timeout);
    options.output_cap = 16 * 1024 * 1024;
    std::error_code ec;
    fs::remove(output, ec);

    auto proc = run_process(options);
    if (proc.exec_failed) {
        throw Error(ErrorCode::CompilerNotFound,
                    fmt::format("cannot run '{}': {}", options.argv.front(), std::strerror(proc.exec_errno)));
    }
    CompileResult result;
    result.duration = proc.seconds;
    result.stderr_text = std::move(proc.err);
    result.timed_out = proc.timed_out;
    if (proc.timed_out) {
        result.stderr_text += fmt::format("\ncompilation timed out after {} seconds\n", config.timeout.count());
    }
    if (proc.exit_code == 0 && !proc.timed_out && fs::exists(output)) {
        result.success = true;
        result.artifact_path = output;
    }
    return result;
}

namespace {

constexpr std::array<std::string_view, 8> kCrashMarkers = {
    "==ERROR: AddressSanitizer",
    "==ERROR: LeakSanitizer",
    "==ERROR: UndefinedBehaviorSanitizer",
    "==ERROR: libFuzzer",
    "deadly signal",
    "SUMMARY: AddressSanitizer",
    "SUMMARY: libFuzzer",
    "Test unit written to",
};

constexpr std::array<std::string_view, 3> kLoaderMarkers = {
    "error while loading shared libraries",
    "cannot open shared object file",
    "undefined symbol:",
};

bool contains_any(const std::string& text, auto const& needles)
{
    for (auto n : needles) {
        if (text.find(n) != std::string::npos) {
            return true;
        }
    }
    return false;
}

} // namespace

ExecResult smoke_run(const fs::path& artifact, const fs::path& run_dir, const RunConfig& config)
{
    std::error_code ec;
    fs::remove_all(run_dir, ec);
    fs::create_directories(run_dir / "corpus");

    ProcessOptions options;
    options.argv = {fs::absolute(artifact).string(), fmt::format("-rss_limit_mb={}", config.rss_limit_mb), "corpus"};
    options.cwd = run_dir;
    options.merge_stderr = true;
    options.output_cap = config.output_cap;
    options.timeout = std::chrono::duration_cast<std::chrono::milliseconds>(config.window);
    if (config.library_dir.empty()) {
        options.env["LD_LIBRARY_PATH"] = std::nullopt;
    }
    else {
        std::string value = fs::absolute(config.library_dir).string();
        if (const char* old = std::getenv("LD_LIBRARY_PATH"); old != nullptr && *old != '\0') {
            value += ':';
            value += old;
        }
        options.env["LD_LIBRARY_PATH"] = value;
    }

    auto proc = run_process(options);
    ExecResult result;
    result.wall_time = proc.seconds;
    if (proc.exec_failed) {
        result.verdict = Verdict::SetupFailure;
        result.captured_output = fmt::format("SPAWN_FAILURE: cannot execute {}: {}\n", artifact.string(),
                                             std::strerror(proc.exec_errno));
        return result;
    }
    result.exit_code = proc.exit_code;
    result.signal = proc.timed_out ? std::nullopt : proc.signal;
    result.captured_output = std::move(proc.out);
    if (proc.out_dropped > 0) {
        result.captured_output += fmt::format("\n[... {} bytes truncated ...]\n", proc.out_dropped);
    }

    const auto& out = result.captured_output;
    if (contains_any(out, kLoaderMarkers) && !proc.timed_out) {
        result.verdict = Verdict::SetupFailure;
    }
    else if (contains_any(out, kCrashMarkers) || result.signal) {
        result.verdict = Verdict::Crash;
    }
    else if (proc.timed_out) {
        result.verdict = Verdict::Nominal;
    }
    else if (proc.exit_code == 0) {
        result.verdict = proc.seconds >= config.window.count() ? Verdict::Nominal : Verdict::EarlyExitFailure;
    }
    else if (proc.seconds < 1.0) {
        result.verdict = Verdict::SetupFailure;
    }
    else {
        result.verdict = Verdict::EarlyExitFailure;
    }
    return result;
}

AttemptPaths::AttemptPaths(const fs::path& root, const std::string& function, int attempt)
    : dir(root / function / std::to_string(attempt)),
      source(dir / "driver.cc"),
      binary(dir / "driver.bin"),
      compile_stderr(dir / "compile.stderr"),
      run_log(dir / "run.log"),
      run_dir(dir / "run")
{
}

} // namespace drvsynth

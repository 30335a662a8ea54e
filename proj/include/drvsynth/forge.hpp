#pragma once

#include "drvsynth/clock.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace drvsynth {

/// C-ABI symbol every generated driver must define.
inline constexpr std::string_view kFuzzEntrypoint = "LLVMFuzzerTestOneInput";

enum class SourceOrigin { FencedBlock, RawBody };
enum class Verdict { Nominal, EarlyExitFailure, Crash, SetupFailure };

std::string_view to_string(SourceOrigin origin) noexcept;
std::string_view to_string(Verdict verdict) noexcept;
std::optional<Verdict> verdict_from_string(std::string_view text) noexcept;

struct DriverSource {
    std::string function_name;
    int attempt_index = 1;
    std::string code;
    SourceOrigin extracted_from = SourceOrigin::FencedBlock;
    /// Relative to the run workspace.
    std::filesystem::path path;
};

/// Pulls driver code out of an assistant reply. Fenced blocks tagged C/C++ or
/// untagged are concatenated in order; a reply without fences is taken whole.
/// Throws NO_CODE_FOUND when the result lacks the fuzz entrypoint.
DriverSource extract_source(std::string_view assistant_text);

inline constexpr std::string_view kDefaultCompileTemplate =
    "clang++ -g -O1 -fsanitize=fuzzer,address {source} -o {output} -L{library_dir} -l:{library_name} "
    "-Wl,-rpath-link,{library_dir}";

struct CompileConfig {
    /// Split on whitespace into argv, then each word has {source}, {output},
    /// {library_dir} and {library_name} substituted. No shell is involved.
    std::string command_template{kDefaultCompileTemplate};
    Seconds timeout{120};
};

struct CompileResult {
    bool success = false;
    std::string stderr_text;
    std::optional<std::filesystem::path> artifact_path;
    double duration = 0.0;
    bool timed_out = false;
};

/// Expands the template; throws FATAL_CONFIG for unknown placeholders.
std::vector<std::string> compile_command(std::string_view command_template, const std::filesystem::path& source,
                                         const std::filesystem::path& output, const std::filesystem::path& library);

/// Compiles `source_file` into `output`. When both share a directory the
/// compiler runs there with bare file names. Throws COMPILER_NOT_FOUND when
/// the compiler cannot be started.
CompileResult compile(const std::filesystem::path& source_file, const std::filesystem::path& output,
                      const std::filesystem::path& library, const CompileConfig& config);

struct RunConfig {
    Seconds window{10};
    /// Directory prepended to LD_LIBRARY_PATH; empty leaves the variable unset.
    std::filesystem::path library_dir;
    int rss_limit_mb = 2048;
    std::size_t output_cap = 32 * 1024;
};

struct ExecResult {
    Verdict verdict = Verdict::SetupFailure;
    std::optional<int> exit_code;
    std::optional<int> signal;
    /// Merged stdout and stderr, capped.
    std::string captured_output;
    double wall_time = 0.0;
};

/// Starts the fuzzer inside `run_dir` (created fresh, with an empty corpus
/// directory) and kills it when the window closes. Verdicts, first match wins:
/// loader failure → SETUP_FAILURE; sanitizer/libFuzzer crash report or fatal
/// signal → CRASH; still running at the deadline → NOMINAL; clean exit
/// after the window → NOMINAL; nonzero exit within one second → SETUP_FAILURE;
/// anything else → EARLY_EXIT_FAILURE.
ExecResult smoke_run(const std::filesystem::path& artifact, const std::filesystem::path& run_dir,
                     const RunConfig& config);

/// `<root>/<function>/<attempt>/...`
struct AttemptPaths {
    std::filesystem::path dir;
    std::filesystem::path source;
    std::filesystem::path binary;
    std::filesystem::path compile_stderr;
    std::filesystem::path run_log;
    std::filesystem::path run_dir;

    AttemptPaths(const std::filesystem::path& root, const std::string& function, int attempt);
};

} // namespace drvsynth

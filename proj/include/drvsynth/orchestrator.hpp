#pragma once

#include "drvsynth/backend.hpp"
#include "drvsynth/clock.hpp"
#include "drvsynth/disassembly.hpp"
#include "drvsynth/exports.hpp"
#include "drvsynth/forge.hpp"
#include "drvsynth/ledger.hpp"
#include "drvsynth/prompts.hpp"
#include "drvsynth/session.hpp"
#include "drvsynth/signature.hpp"

#include <atomic>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace drvsynth {

enum class Phase { Analysis, Generation, Done, Failed };

std::string_view to_string(Phase phase) noexcept;

struct Budgets {
    int max_analysis_turns = 6;
    int max_generation_attempts = 10;
    Seconds smoke_run_seconds{10};
    /// Requests per minute across all sessions; 0 disables throttling.
    int rate_budget = 0;

    /// Throws FATAL_CONFIG.
    void validate() const;
};

struct PhaseState {
    Phase phase = Phase::Analysis;
    /// ANALYSIS replies that requested at least one tool.
    int analysis_turns_used = 0;
    int generation_attempts_used = 0;
};

struct FunctionSession {
    ExportedFunction function;
    InferredSignature signature;
    SessionTranscript transcript;
    PhaseState state;
    std::vector<Phase> phase_history;
    std::vector<DriverAttempt> attempts;
    std::optional<std::string> failure_reason;
};

/// Text of the refusal returned for an analysis tool call after the phase
/// transition.
std::string phase_violation_message(const std::string& tool_name);

struct SessionDeps {
    const BinaryImage& image;
    std::filesystem::path library;
    DisassemblyProvider& disassembler;
    Backend& backend;
    Clock& clock;
    RateLimiter* limiter = nullptr;
    const PromptSet& prompts;
    CompileConfig compile;
    Budgets budgets;
    /// Run workspace; attempts go under `<workspace>/<function>/<attempt>/`.
    std::filesystem::path workspace;
    LedgerWriter* ledger = nullptr;
    RetryPolicy retry;
    std::size_t context_ceiling = 0;
    const std::atomic<bool>* stop = nullptr;
};

/// Drives one function through ANALYSIS → GENERATION → DONE|FAILED. The
/// transcript is written to `<workspace>/<function>/transcript.json` before
/// returning, also when an error escapes. BACKEND_UNREACHABLE and
/// configuration errors propagate; other model failures end the session as
/// FAILED with the error code as reason.
FunctionSession run_function_session(const ExportedFunction& function, const InferredSignature& signature,
                                     SessionDeps& deps);

struct PipelineConfig;

struct PipelineDeps {
    const BinaryImage& image;
    std::filesystem::path library;
    std::vector<ExportedFunction> fuzzable;
    std::map<std::string, InferredSignature> signatures;
    DisassemblyProvider& disassembler;
    BackendFactory backends;
    Clock& clock;
    const PromptSet& prompts;
    CompileConfig compile;
    Budgets budgets;
    int parallelism = 2;
    std::filesystem::path workspace;
    std::string run_id;
    std::string config_snapshot;
    RetryPolicy retry;
    std::size_t context_ceiling = 0;
    const std::atomic<bool>* stop = nullptr;
};

struct PipelineResult {
    RunLedger ledger;
    std::filesystem::path ledger_path;
    std::vector<FunctionSession> sessions;
};

/// Runs every fuzzable function, `parallelism` sessions at a time, appending to
/// `<workspace>/run.ldjson`. When the stop flag is raised, in-flight sessions
/// end after their current attempt and unstarted ones are recorded FAILED
/// with reason INTERRUPTED. BACKEND_UNREACHABLE stops new sessions and is
/// rethrown once the ledger is flushed.
PipelineResult run_pipeline(PipelineDeps& deps);

} // namespace drvsynth

#include "drvsynth/orchestrator.hpp"

#include "drvsynth/error.hpp"
#include "drvsynth/tools.hpp"

#include <fmt/format.h>

#include <fstream>
#include <mutex>
#include <thread>

namespace drvsynth {

namespace fs = std::filesystem;

std::string_view to_string(Phase phase) noexcept
{
    switch (phase) {
    case Phase::Analysis: return "ANALYSIS";
    case Phase::Generation: return "GENERATION";
    case Phase::Done: return "DONE";
    case Phase::Failed: return "FAILED";
    }
    return "UNKNOWN";
}

void Budgets::validate() const
{
    if (max_analysis_turns < 1 || max_generation_attempts < 1 || smoke_run_seconds.count() <= 0 || rate_budget < 0) {
        throw Error(ErrorCode::FatalConfig, "budgets must be positive");
    }
}

std::string phase_violation_message(const std::string& tool_name)
{
    return fmt::format("{}phase violation: {} is not available during GENERATION. The analysis loop cannot be "
                       "re-entered; reply with the driver source code.",
                       kToolErrorPrefix, tool_name);
}

namespace {

void write_file(const fs::path& path, std::string_view text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) {
        throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    }
}

std::string join(const std::vector<std::string>& words)
{
    std::string out;
    for (const auto& w : words) {
        if (!out.empty()) {
            out += ' ';
        }
        out += w;
    }
    return out;
}

class SessionRunner {
public:
    SessionRunner(const ExportedFunction& function, const InferredSignature& signature, SessionDeps& deps)
        : deps_(deps),
          llm_(deps.backend, deps.clock, deps.limiter, deps.retry, deps.context_ceiling),
          tools_(deps.image, deps.disassembler, function, signature)
    {
        s_.function = function;
        s_.signature = signature;
        s_.transcript.set_backend_id(deps.backend.id());
        s_.transcript.metadata["function_name"] = function.name;
        s_.transcript.metadata["library_name"] = deps.library.filename().string();

        auto library_dir = deps.library.parent_path();
        context_ = {
            {"library_name", deps.library.filename().string()},
            {"function_name", function.name},
            {"signature", signature.render()},
            {"compile_cmd", join(compile_command(deps.compile.command_template, "driver.cc", "driver.bin",
                                                 deps.library))},
            {"window", fmt::format("{}", deps.budgets.smoke_run_seconds.count())},
        };
    }

    FunctionSession run()
    {
        try {
            analysis();
            generation();
        }
        catch (const Error& e) {
            if (e.code() == ErrorCode::BackendUnreachable || e.code() == ErrorCode::FatalConfig ||
                e.code() == ErrorCode::CompilerNotFound || e.code() == ErrorCode::IoFailure) {
                finish(Phase::Failed, std::string(to_string(e.code())));
                throw;
            }
            finish(Phase::Failed, std::string(to_string(e.code())));
        }
        return std::move(s_);
    }

private:
    void enter(Phase phase)
    {
        s_.state.phase = phase;
        s_.phase_history.push_back(phase);
    }

    void append(ChatTurn turn)
    {
        turn.phase = std::string(to_string(s_.state.phase));
        s_.transcript.append(std::move(turn));
    }

    ChatTurn ask(const std::vector<ToolSpec>& tools)
    {
        context_["phase"] = std::string(to_string(s_.state.phase));
        auto reply = llm_.send(s_.transcript, tools, context_);
        append(reply);
        return reply;
    }

    void analysis()
    {
        enter(Phase::Analysis);
        append(ChatTurn::system(deps_.prompts.render(TemplateId::System, context_)));
        append(ChatTurn::user(deps_.prompts.render(TemplateId::Analysis, context_)));
        auto specs = AnalysisTools::specs();
        while (s_.state.analysis_turns_used < deps_.budgets.max_analysis_turns) {
            auto reply = ask(specs);
            if (reply.tool_calls.empty()) {
                break;
            }
            ++s_.state.analysis_turns_used;
            for (const auto& call : reply.tool_calls) {
                append(ChatTurn::tool_result(call.id, tools_.invoke(call)));
            }
        }
    }

    void generation()
    {
        enter(Phase::Generation);
        append(ChatTurn::user(deps_.prompts.render(TemplateId::Generation, context_)));
        for (int index = 1; index <= deps_.budgets.max_generation_attempts; ++index) {
            if (deps_.stop != nullptr && deps_.stop->load()) {
                finish(Phase::Failed, "INTERRUPTED");
                return;
            }
            context_["attempt"] = std::to_string(index);
            auto reply = ask({});
            for (const auto& call : reply.tool_calls) {
                append(ChatTurn::tool_result(call.id, phase_violation_message(call.tool_name)));
            }
            ++s_.state.generation_attempts_used;
            auto repair = attempt(index, reply.content);
            if (!repair) {
                finish(Phase::Done, std::nullopt);
                return;
            }
            if (index < deps_.budgets.max_generation_attempts) {
                append(ChatTurn::user(*repair));
            }
        }
        finish(Phase::Failed, "BUDGET_EXHAUSTED");
    }

    /// Returns the repair prompt, or nullopt for a NOMINAL attempt.
    std::optional<std::string> attempt(int index, const std::string& reply_text)
    {
        AttemptPaths paths(deps_.workspace, s_.function.name, index);
        std::error_code ec;
        fs::remove_all(paths.dir, ec);
        fs::create_directories(paths.dir);
        write_file(paths.dir / "response.txt", reply_text);

        DriverAttempt record;
        record.function_name = s_.function.name;
        record.attempt_index = index;
        record.timestamp = utc_timestamp();
        auto relative = [&](const fs::path& p) { return fs::relative(p, deps_.workspace).generic_string(); };

        std::optional<std::string> repair;
        auto ctx = context_;
        try {
            auto source = extract_source(reply_text);
            write_file(paths.source, source.code);
            record.source_path = relative(paths.source);
            auto built = compile(paths.source, paths.binary, deps_.library, deps_.compile);
            write_file(paths.compile_stderr, built.stderr_text);
            record.compile.success = built.success;
            record.compile.duration = built.duration;
            record.compile.timed_out = built.timed_out;
            record.compile.stderr_bytes = built.stderr_text.size();
            if (!built.success) {
                ctx["stderr"] = cap_output(built.stderr_text);
                repair = deps_.prompts.render(TemplateId::CompileRepair, ctx);
            }
            else {
                RunConfig run;
                run.window = deps_.budgets.smoke_run_seconds;
                run.library_dir = deps_.library.parent_path();
                auto exec = smoke_run(paths.binary, paths.run_dir, run);
                write_file(paths.run_log, exec.captured_output);
                record.exec = ExecSummary{exec.verdict, exec.exit_code, exec.signal, exec.wall_time};
                if (exec.verdict != Verdict::Nominal) {
                    ctx["verdict"] = std::string(to_string(exec.verdict));
                    ctx["output"] = cap_output(exec.captured_output);
                    repair = deps_.prompts.render(TemplateId::RuntimeRepair, ctx);
                }
            }
        }
        catch (const Error& e) {
            if (e.code() != ErrorCode::NoCodeFound) {
                throw;
            }
            record.source_path = relative(paths.dir / "response.txt");
            record.compile.error = std::string(to_string(e.code()));
            std::string message = std::string(e.what()) + "\n";
            write_file(paths.compile_stderr, message);
            record.compile.stderr_bytes = message.size();
            ctx["stderr"] = message;
            repair = deps_.prompts.render(TemplateId::CompileRepair, ctx);
        }

        if (deps_.ledger != nullptr) {
            deps_.ledger->record_attempt(record);
        }
        s_.attempts.push_back(std::move(record));
        return repair;
    }

    void finish(Phase phase, std::optional<std::string> reason)
    {
        if (s_.state.phase == Phase::Done || s_.state.phase == Phase::Failed) {
            return;
        }
        enter(phase);
        s_.failure_reason = reason;
        s_.transcript.metadata["final_state"] = std::string(to_string(phase));
        auto dir = deps_.workspace / s_.function.name;
        std::error_code ec;
        fs::create_directories(dir, ec);
        record_transcript(s_.transcript, dir / "transcript.json");
        if (deps_.ledger != nullptr) {
            deps_.ledger->record_outcome(s_.function.name,
                                         phase == Phase::Done ? SessionState::Done : SessionState::Failed,
                                         std::move(reason), s_.state.analysis_turns_used);
        }
    }

    SessionDeps& deps_;
    LlmSession llm_;
    AnalysisTools tools_;
    FunctionSession s_;
    std::map<std::string, std::string> context_;
};

} // namespace

FunctionSession run_function_session(const ExportedFunction& function, const InferredSignature& signature,
                                     SessionDeps& deps)
{
    deps.budgets.validate();
    if (!function.fuzzable) {
        throw std::invalid_argument(function.name + " is not fuzzable");
    }
    return SessionRunner(function, signature, deps).run();
}

PipelineResult run_pipeline(PipelineDeps& deps)
{
    deps.budgets.validate();
    if (deps.parallelism < 1) {
        throw Error(ErrorCode::FatalConfig, "parallelism must be at least 1");
    }
    fs::create_directories(deps.workspace);
    std::vector<std::string> names;
    for (const auto& f : deps.fuzzable) {
        names.push_back(f.name);
    }
    PipelineResult result;
    result.ledger_path = deps.workspace / std::string(kLedgerFileName);
    LedgerWriter ledger(result.ledger_path,
                        make_ledger(deps.library.filename().string(), deps.run_id, names, deps.config_snapshot));

    std::optional<RateLimiter> limiter;
    if (deps.budgets.rate_budget > 0) {
        limiter.emplace(deps.clock, deps.budgets.rate_budget);
    }

    std::vector<std::optional<FunctionSession>> sessions(deps.fuzzable.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> abort{false};
    std::mutex error_mutex;
    std::exception_ptr fatal;

    auto worker = [&] {
        for (;;) {
            if (abort.load() || (deps.stop != nullptr && deps.stop->load())) {
                return;
            }
            std::size_t i = next.fetch_add(1);
            if (i >= deps.fuzzable.size()) {
                return;
            }
            const auto& fn = deps.fuzzable[i];
            try {
                auto backend = deps.backends(fn.name);
                SessionDeps sd{deps.image,     deps.library,  deps.disassembler,
                               *backend,       deps.clock,    limiter ? &*limiter : nullptr,
                               deps.prompts,   deps.compile,  deps.budgets,
                               deps.workspace, &ledger,       deps.retry,
                               deps.context_ceiling, deps.stop};
                sessions[i] = run_function_session(fn, deps.signatures.at(fn.name), sd);
            }
            catch (const Error& e) {
                if (e.code() == ErrorCode::TranscriptMissing) {
                    ledger.record_outcome(fn.name, SessionState::Failed, std::string(to_string(e.code())), 0);
                    continue;
                }
                std::lock_guard lock(error_mutex);
                if (!fatal) {
                    fatal = std::current_exception();
                }
                abort = true;
                return;
            }
            catch (...) {
                std::lock_guard lock(error_mutex);
                if (!fatal) {
                    fatal = std::current_exception();
                }
                abort = true;
                return;
            }
        }
    };

    std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(deps.parallelism), deps.fuzzable.size());
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < workers; ++t) {
        threads.emplace_back(worker);
    }
    for (auto& t : threads) {
        t.join();
    }
    if (fatal) {
        std::rethrow_exception(fatal);
    }
    if (deps.stop != nullptr && deps.stop->load()) {
        auto snapshot = ledger.snapshot();
        for (const auto& [name, outcome] : snapshot.functions) {
            if (outcome.state == SessionState::Pending) {
                ledger.record_outcome(name, SessionState::Failed, "INTERRUPTED", 0);
            }
        }
    }
    for (auto& s : sessions) {
        if (s) {
            result.sessions.push_back(std::move(*s));
        }
    }
    result.ledger = ledger.snapshot();
    return result;
}

} // namespace drvsynth

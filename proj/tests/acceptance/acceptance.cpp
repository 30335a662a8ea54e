// Acceptance suite: one PASS/FAIL/SKIP line per criterion, nonzero exit on any FAIL.
#include "drvsynth/chat.hpp"
#include "drvsynth/config.hpp"
#include "drvsynth/elf_image.hpp"
#include "drvsynth/error.hpp"
#include "drvsynth/forge.hpp"
#include "drvsynth/orchestrator.hpp"
#include "drvsynth/session.hpp"
#include "drvsynth/subprocess.hpp"
#include "scenarios.hpp"
#include "support.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <future>
#include <set>
#include <tuple>

using namespace drvsynth;
using namespace testing_support;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum class Status { Pass, Fail, Skip };

struct Outcome {
    Status status = Status::Pass;
    std::string detail;
};

/// Collects failed checks; the first one becomes the detail line.
class Checks {
public:
    void expect(bool ok, const std::string& what)
    {
        if (!ok && failure_.empty()) {
            failure_ = what;
        }
    }
    bool ok() const { return failure_.empty(); }

    Outcome outcome(std::string pass_detail) const
    {
        return ok() ? Outcome{Status::Pass, std::move(pass_detail)} : Outcome{Status::Fail, failure_};
    }

private:
    std::string failure_;
};

/// Every transcript produced by the suite, for the phase-gating sweep.
std::vector<std::pair<std::string, SessionTranscript>> g_transcripts;

void collect(const std::string& label, const PipelineResult& result)
{
    for (const auto& s : result.sessions) {
        g_transcripts.emplace_back(label + "/" + s.function.name, s.transcript);
    }
}

void collect_workspace(const std::string& label, const fs::path& workspace)
{
    for (const auto& entry : fs::recursive_directory_iterator(workspace)) {
        if (entry.path().filename() == "transcript.json") {
            g_transcripts.emplace_back(label + "/" + entry.path().parent_path().filename().string(),
                                       load_transcript(entry.path()));
        }
    }
}

ProcessResult cli(std::vector<std::string> args, std::map<std::string, std::optional<std::string>> env = {})
{
    ProcessOptions o;
    o.argv = {DRVSYNTH_CLI_PATH};
    o.argv.insert(o.argv.end(), args.begin(), args.end());
    o.env = std::move(env);
    o.timeout = std::chrono::minutes(10);
    o.output_cap = 1 << 20;
    return run_process(o);
}

fs::path basic()
{
    return fixture("libfixture_basic.so");
}

/// Defined GLOBAL/WEAK FUNC symbols as (address, name, binding) from readelf.
std::set<std::tuple<uint64_t, std::string, std::string>> readelf_functions(const fs::path& lib)
{
    std::set<std::tuple<uint64_t, std::string, std::string>> out;
    for (const auto& line : lines(capture("readelf -W --dyn-syms '" + lib.string() + "'"))) {
        std::istringstream in(line);
        std::string num, value, size, type, bind, vis, ndx, name;
        if (!(in >> num >> value >> size >> type >> bind >> vis >> ndx >> name)) {
            continue;
        }
        if (type == "FUNC" && (bind == "GLOBAL" || bind == "WEAK") && ndx != "UND") {
            out.emplace(std::stoull(value, nullptr, 16), name.substr(0, name.find('@')), bind);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

Outcome report_arithmetic()
{
    auto start = std::chrono::steady_clock::now();
    TempDir dir;
    std::vector<CoverageReport> reports;
    for (const auto& row : published_rows()) {
        auto path = dir.path() / (row.library + ".ldjson");
        write_ledger(path, synthetic_ledger(row.library, row.fuzzable, row.sources, row.nominal));
        reports.push_back(compute_report(load_ledger(path)));
    }
    auto total = total_report(reports);
    auto text = render_report(reports, ReportFormat::TableText);
    double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    Checks c;
    c.expect(total.fuzzable_exports == 558 && total.source_targets == 1601 && total.nominal_targets == 1209,
             fmt::format("totals {}/{}/{}", total.fuzzable_exports, total.source_targets, total.nominal_targets));
    c.expect(total.api_coverage_pct == 100.0, fmt::format("coverage {}", total.api_coverage_pct));
    c.expect(std::abs(total.nominal_ratio_pct - 75.52) <= 0.005, fmt::format("nominal {}", total.nominal_ratio_pct));
    c.expect(std::abs(total.mean_sources_per_function - 2.87) <= 0.005,
             fmt::format("sources/function {}", total.mean_sources_per_function));
    c.expect(text.find("Nominally valid: 75.52%") != std::string::npos, "rendered table lacks 75.52%");
    c.expect(elapsed < 1.0, fmt::format("took {:.3f}s", elapsed));
    return c.outcome(fmt::format("coverage {:.2f}%, nominal {:.2f}%, {:.2f} sources/function, {:.3f}s",
                                 total.api_coverage_pct, total.nominal_ratio_pct, total.mean_sources_per_function,
                                 elapsed));
}

Outcome elf_oracle()
{
    auto start = std::chrono::steady_clock::now();
    Checks c;
    int libraries = 0;
    std::size_t symbols = 0;
    for (const auto& entry : fs::directory_iterator(DRVSYNTH_FIXTURE_DIR)) {
        if (entry.path().extension() != ".so") {
            continue;
        }
        ++libraries;
        auto oracle = readelf_functions(entry.path());
        std::set<std::tuple<uint64_t, std::string, std::string>> ours;
        for (const auto& f : list_exports(load_binary(entry.path()))) {
            ours.emplace(f.address, f.name, std::string(to_string(f.binding)));
        }
        symbols += ours.size();
        c.expect(!oracle.empty(), entry.path().filename().string() + ": empty oracle");
        c.expect(ours == oracle, entry.path().filename().string() + ": export set differs from readelf");
    }
    double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    c.expect(libraries == 6, fmt::format("expected 6 fixture libraries, found {}", libraries));
    c.expect(elapsed < 5.0, fmt::format("took {:.2f}s", elapsed));
    return c.outcome(fmt::format("{} libraries, {} symbols, {:.2f}s", libraries, symbols, elapsed));
}

/// Shared between the repair-loop and replay criteria.
TempDir g_recording;

Outcome repair_loop()
{
    auto start = std::chrono::steady_clock::now();
    TempDir dir;
    write_text(dir.path() / "script.json", scenario_script(Scenario::Repair).dump(2));
    auto config = config_from_json({{"library", basic().string()},
                                    {"backend", "scripted"},
                                    {"backend_params", {{"script", "script.json"}}},
                                    {"budgets", {{"smoke_run_seconds", 2}}}},
                                   dir.path());
    const double window = config.budgets.smoke_run_seconds.count();

    auto run = run_fixture_pipeline(basic(), g_recording.path(), scripted_factory(scenario_script(Scenario::Repair)),
                                    config.budgets);
    collect("repair", run.result);
    auto report = compute_report(run.result.ledger);

    Checks c;
    c.expect(window == 2.0, fmt::format("configured window {}", window));
    c.expect(report.fuzzable_exports == 5, fmt::format("fuzzable {}", report.fuzzable_exports));
    c.expect(report.source_targets == 10, fmt::format("sources {}", report.source_targets));
    c.expect(report.nominal_targets == 5, fmt::format("nominal {}", report.nominal_targets));
    c.expect(report.api_coverage_pct == 100.0, fmt::format("coverage {}", report.api_coverage_pct));

    double min_wall = 1e9, max_wall = 0;
    for (const auto& s : run.result.sessions) {
        const auto& name = s.function.name;
        c.expect(s.attempts.size() == 2, name + ": expected two attempts");
        auto stderr_text = read_text(g_recording.path() / name / "1" / "compile.stderr");
        c.expect(!stderr_text.empty(), name + ": first attempt has no stderr");
        bool found = false;
        for (const auto& t : s.transcript.turns()) {
            if (t.role == Role::User && t.content.find("failed to build") != std::string::npos) {
                found = t.content.find(stderr_text) != std::string::npos;
                break;
            }
        }
        c.expect(found, name + ": repair prompt lacks the compiler stderr verbatim");
        for (const auto& a : s.attempts) {
            if (a.exec) {
                min_wall = std::min(min_wall, a.exec->wall_time);
                max_wall = std::max(max_wall, a.exec->wall_time);
            }
        }
    }
    c.expect(min_wall >= window && max_wall < window + 1.5,
             fmt::format("smoke wall times {:.2f}..{:.2f}s for a {}s window", min_wall, max_wall, window));
    double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    c.expect(elapsed < 120.0, fmt::format("took {:.1f}s", elapsed));
    return c.outcome(fmt::format("sources {}, nominal {}, coverage {:.2f}%, smoke {:.2f}..{:.2f}s of {}s, {:.1f}s",
                                 report.source_targets, report.nominal_targets, report.api_coverage_pct, min_wall,
                                 max_wall, window, elapsed));
}

Outcome replay_determinism()
{
    Budgets budgets;
    budgets.smoke_run_seconds = Seconds(2);
    auto recorded = load_ledger(g_recording.path() / "run.ldjson");
    TempDir r1, r2;
    auto a = run_fixture_pipeline(basic(), r1.path(), replay_factory(g_recording.path()), budgets);
    auto b = run_fixture_pipeline(basic(), r2.path(), replay_factory(g_recording.path()), budgets);
    collect("replay-1", a.result);
    collect("replay-2", b.result);

    Checks c;
    c.expect(!recorded.functions.empty(), "nothing recorded");
    c.expect(normalize_ledger(a.result.ledger) == normalize_ledger(recorded), "replay differs from recording");
    c.expect(normalize_ledger(a.result.ledger) == normalize_ledger(b.result.ledger), "two replays differ");
    // Turns must match exactly; only the backend label differs.
    for (const auto& s : a.result.sessions) {
        auto replayed = load_transcript(r1.path() / s.function.name / "transcript.json");
        auto original = load_transcript(g_recording.path() / s.function.name / "transcript.json");
        c.expect(replayed.turns() == original.turns(), s.function.name + ": replayed turns differ");
        for (const auto& t : original.turns()) {
            c.expect(t.content.find(g_recording.path().string()) == std::string::npos,
                     s.function.name + ": prompt embeds the workspace path");
        }
    }
    return c.outcome(fmt::format("{} functions, recording == replay 1 == replay 2", recorded.functions.size()));
}

Outcome smoke_classification()
{
    TempDir dir;
    Checks c;
    for (const char* name : {"add", "process_blob_degraded"}) {
        auto r = compile(driver(std::string(name) + ".cc"), dir.path() / (std::string(name) + ".bin"), basic(), {});
        c.expect(r.success, std::string(name) + " did not compile");
    }
    if (!c.ok()) {
        return c.outcome("");
    }
    RunConfig cfg;
    cfg.library_dir = basic().parent_path();
    const double window = cfg.window.count();
    constexpr int kRuns = 10;

    // The looping runs are wall-clock bound, so they share the window.
    std::vector<std::future<ExecResult>> looping;
    for (int i = 0; i < kRuns; ++i) {
        looping.push_back(std::async(std::launch::async, [&, i] {
            return smoke_run(dir.path() / "add.bin", dir.path() / fmt::format("nominal-{}", i), cfg);
        }));
    }
    int crash = 0, setup = 0;
    for (int i = 0; i < kRuns; ++i) {
        auto r = smoke_run(dir.path() / "process_blob_degraded.bin", dir.path() / fmt::format("crash-{}", i), cfg);
        crash += r.verdict == Verdict::Crash ? 1 : 0;
        RunConfig missing = cfg;
        missing.library_dir.clear();
        auto s = smoke_run(dir.path() / "add.bin", dir.path() / fmt::format("setup-{}", i), missing);
        setup += s.verdict == Verdict::SetupFailure ? 1 : 0;
    }
    int nominal = 0;
    double min_wall = 1e9, max_wall = 0;
    for (auto& f : looping) {
        auto r = f.get();
        nominal += r.verdict == Verdict::Nominal ? 1 : 0;
        min_wall = std::min(min_wall, r.wall_time);
        max_wall = std::max(max_wall, r.wall_time);
    }
    c.expect(nominal == kRuns, fmt::format("NOMINAL {}/{}", nominal, kRuns));
    c.expect(crash == kRuns, fmt::format("CRASH {}/{}", crash, kRuns));
    c.expect(setup == kRuns, fmt::format("SETUP_FAILURE {}/{}", setup, kRuns));
    c.expect(min_wall >= window && max_wall < window + 2.0,
             fmt::format("looping wall times {:.2f}..{:.2f}s for a {}s window", min_wall, max_wall, window));
    return c.outcome(fmt::format("NOMINAL {}/{} at {:.2f}..{:.2f}s, CRASH {}/{}, SETUP_FAILURE {}/{}", nominal, kRuns,
                                 min_wall, max_wall, crash, kRuns, setup, kRuns));
}

Outcome budget_termination()
{
    TempDir dir;
    write_text(dir.path() / "script.json", scenario_script(Scenario::AlwaysBroken).dump(2));
    write_text(dir.path() / "config.json", json{{"library", basic().string()},
                                                {"backend", "scripted"},
                                                {"backend_params", {{"script", "script.json"}}},
                                                {"workspace", "work"}}
                                               .dump(2));
    auto r = cli({"--config", (dir.path() / "config.json").string(), "run"});
    Checks c;
    c.expect(r.exit_code == 1, fmt::format("exit code {}: {}", r.exit_code.value_or(-1), r.err));
    auto ledger = load_ledger(dir.path() / "work" / "run.ldjson");
    Budgets defaults;
    c.expect(ledger.functions.size() == 5, fmt::format("{} functions", ledger.functions.size()));
    for (const auto& [name, o] : ledger.functions) {
        c.expect(o.attempts.size() == static_cast<std::size_t>(defaults.max_generation_attempts),
                 fmt::format("{}: {} attempts", name, o.attempts.size()));
        c.expect(o.state == SessionState::Failed && o.reason == "BUDGET_EXHAUSTED", name + ": not FAILED/BUDGET_EXHAUSTED");
    }
    collect_workspace("budget", dir.path() / "work");
    return c.outcome(fmt::format("{} functions x {} attempts, all FAILED, exit code {}", ledger.functions.size(),
                                 defaults.max_generation_attempts, r.exit_code.value_or(-1)));
}

Outcome phase_gating()
{
    TempDir ws;
    Budgets budgets;
    budgets.smoke_run_seconds = Seconds(2);
    auto run = run_fixture_pipeline(basic(), ws.path(), scripted_factory(scenario_script(Scenario::GenerationToolCall)),
                                    budgets);
    collect("gating", run.result);

    Checks c;
    int refusals = 0;
    for (const auto& s : run.result.sessions) {
        for (const auto& t : s.transcript.turns()) {
            if (t.role == Role::ToolResult && t.phase == "GENERATION") {
                c.expect(t.content == phase_violation_message("get_disassembly"),
                         s.function.name + ": generation-phase tool call was answered");
                ++refusals;
            }
        }
    }
    c.expect(refusals == 5, fmt::format("{} refusals, expected 5", refusals));
    for (const auto& [label, transcript] : g_transcripts) {
        c.expect(!has_gated_tool_leak(transcript), label + ": analysis tool satisfied after the phase switch");
    }
    return c.outcome(fmt::format("{} refusals, {} transcripts swept, no leak", refusals, g_transcripts.size()));
}

Outcome rate_limiter()
{
    VirtualClock clock;
    RateLimiter limiter(clock, 10);
    ScriptedBackend backend({{{ScriptMatcher::Kind::Substring, ""}, {ChatTurn::assistant("OK")}}});
    LlmSession session(backend, clock, &limiter);
    SessionTranscript transcript("rate");
    transcript.append(ChatTurn::system("s"));
    transcript.append(ChatTurn::user("go"));

    std::vector<double> dispatched;
    for (int i = 0; i < 25; ++i) {
        session.send(transcript, {});
        dispatched.push_back(clock.now().count());
    }
    // A window holding the most dispatches can always be slid to start at one.
    long worst = 0;
    for (double start : dispatched) {
        worst = std::max<long>(worst, std::count_if(dispatched.begin(), dispatched.end(),
                                                    [&](double d) { return d >= start && d < start + 60.0; }));
    }
    Checks c;
    c.expect(dispatched.size() == 25, "not all sends dispatched");
    c.expect(worst <= 10, fmt::format("{} dispatches in one 60s window", worst));
    return c.outcome(fmt::format("25 sends over {:.0f} virtual s, at most {} per 60s window", dispatched.back(), worst));
}

Outcome live_cjson()
{
    const char* key = std::getenv("DRVSYNTH_API_KEY");
    const char* endpoint = std::getenv("DRVSYNTH_ENDPOINT");
    const char* model = std::getenv("DRVSYNTH_MODEL");
    const char* library = std::getenv("DRVSYNTH_LIVE_LIBRARY");
    if (!key || !endpoint || !model || !library) {
        return {Status::Skip,
                "set DRVSYNTH_API_KEY, DRVSYNTH_ENDPOINT, DRVSYNTH_MODEL and DRVSYNTH_LIVE_LIBRARY (a cJSON .so)"};
    }
    TempDir ws;
    auto r = cli({"--workspace", ws.path().string(), "--json", "run", library, "--limit", "10"});
    if (r.exit_code != 0 && r.exit_code != 1) {
        return {Status::Fail, fmt::format("exit code {}: {}", r.exit_code.value_or(-1), r.err)};
    }
    double coverage = json::parse(r.out).at("api_coverage_pct").get<double>();
    collect_workspace("live", ws.path());
    return {coverage >= 50.0 ? Status::Pass : Status::Fail, fmt::format("coverage {:.2f}%", coverage)};
}

} // namespace

int main()
{
    // Order matters: replay consumes the repair recording, gating sweeps every
    // transcript collected before it.
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"report-arithmetic", report_arithmetic},
        {"elf-oracle-equivalence", elf_oracle},
        {"repair-loop-end-to-end", repair_loop},
        {"record-replay-determinism", replay_determinism},
        {"smoke-run-classification", smoke_classification},
        {"budget-termination", budget_termination},
        {"rate-limiter", rate_limiter},
        {"phase-gating", phase_gating},
        {"live-cjson", live_cjson},
    };
    int failures = 0;
    for (const auto& [name, run] : criteria) {
        Outcome o;
        try {
            o = run();
        }
        catch (const std::exception& e) {
            o = {Status::Fail, std::string("exception: ") + e.what()};
        }
        const char* tag = o.status == Status::Pass ? "PASS" : o.status == Status::Skip ? "SKIP" : "FAIL";
        failures += o.status == Status::Fail ? 1 : 0;
        fmt::print("{} {}: {}\n", tag, name, o.detail);
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}

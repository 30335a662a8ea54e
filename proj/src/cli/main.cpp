#include "drvsynth/config.hpp"
#include "drvsynth/elf_image.hpp"
#include "drvsynth/error.hpp"
#include "drvsynth/fuzzable.hpp"
#include "drvsynth/ledger.hpp"
#include "drvsynth/orchestrator.hpp"
#include "drvsynth/prompts.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>

using namespace drvsynth;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int)
{
    g_stop.store(true);
}

struct GlobalOptions {
    std::string config;
    std::string workspace;
    bool json = false;
};

PipelineConfig assemble_config(const GlobalOptions& g, const std::string& library)
{
    PipelineConfig c = g.config.empty() ? PipelineConfig{} : load_config(g.config);
    apply_environment(c, process_environment());
    if (!g.workspace.empty()) {
        c.workspace = g.workspace;
    }
    if (!library.empty()) {
        c.library_path = library;
    }
    if (c.library_path.empty()) {
        throw Error(ErrorCode::FatalConfig, "no library given (argument or config key 'library')");
    }
    return c;
}

FuzzableSelection analyse(const PipelineConfig& c, const BinaryImage& image, DisassemblyProvider& disasm)
{
    DisassemblySignatureProvider sigs(image, disasm);
    return filter_fuzzable(list_exports(image), sigs, c.denylist_patterns);
}

int cmd_analyze(const GlobalOptions& g, const std::string& library)
{
    auto c = assemble_config(g, library);
    auto image = load_binary(c.library_path);
    auto disasm = make_disassembler(c);
    auto selection = analyse(c, image, *disasm);

    if (g.json) {
        json exports = json::array();
        for (const auto& f : selection.functions) {
            json entry = {{"name", f.name},
                          {"address", f.address},
                          {"binding", std::string(to_string(f.binding))},
                          {"fuzzable", f.fuzzable},
                          {"exclusion_reason",
                           f.exclusion_reason ? json(std::string(to_string(*f.exclusion_reason))) : json(nullptr)},
                          {"signature", nullptr}};
            if (auto it = selection.signatures.find(f.name); it != selection.signatures.end()) {
                json params = json::array();
                for (auto p : it->second.params) {
                    params.push_back(std::string(to_string(p)));
                }
                entry["signature"] = {{"text", it->second.render()},
                                      {"return", std::string(to_string(it->second.return_class))},
                                      {"params", params},
                                      {"confidence", std::string(to_string(it->second.confidence))}};
            }
            exports.push_back(std::move(entry));
        }
        json out = {{"library", c.library_path.filename().string()},
                    {"disassembler", disasm->id()},
                    {"fuzzable_count", selection.fuzzable_names().size()},
                    {"exports", exports}};
        std::cout << out.dump(2) << "\n";
        return 0;
    }

    std::cout << fmt::format("{:<28} {:<18} {:<7} {:<17} {}\n", "NAME", "ADDRESS", "BINDING", "VERDICT", "SIGNATURE");
    for (const auto& f : selection.functions) {
        std::string verdict = f.fuzzable ? "fuzzable" : std::string(to_string(*f.exclusion_reason));
        auto it = selection.signatures.find(f.name);
        std::cout << fmt::format("{:<28} {:#018x} {:<7} {:<17} {}\n", f.name, f.address, to_string(f.binding),
                                 verdict, it != selection.signatures.end() ? it->second.render() : "-");
    }
    std::cout << fmt::format("{} exports, {} fuzzable\n", selection.functions.size(),
                             selection.fuzzable_names().size());
    return 0;
}

std::string run_id()
{
    auto ts = utc_timestamp();
    std::string id;
    for (char ch : ts) {
        if (std::isalnum(static_cast<unsigned char>(ch))) {
            id += ch;
        }
    }
    return id;
}

int execute(const GlobalOptions& g, PipelineConfig c, const std::vector<std::string>& only, int limit)
{
    c.validate();
    auto image = load_binary(c.library_path);
    auto disasm = make_disassembler(c);
    auto selection = analyse(c, image, *disasm);
    auto backends = make_backend_factory(c, process_environment());
    PromptSet prompts = c.prompts_dir ? PromptSet::from_directory(*c.prompts_dir) : PromptSet{};

    std::vector<ExportedFunction> fuzzable;
    for (const auto& f : selection.functions) {
        if (!f.fuzzable) {
            continue;
        }
        if (!only.empty() && std::find(only.begin(), only.end(), f.name) == only.end()) {
            continue;
        }
        if (limit > 0 && static_cast<int>(fuzzable.size()) >= limit) {
            break;
        }
        fuzzable.push_back(f);
    }

    SystemClock clock;
    CompileConfig compile;
    compile.command_template = c.compiler_template;
    PipelineDeps deps{image,
                      fs::absolute(c.library_path),
                      fuzzable,
                      selection.signatures,
                      *disasm,
                      backends,
                      clock,
                      prompts,
                      compile,
                      c.budgets,
                      c.parallelism,
                      c.workspace,
                      run_id(),
                      config_snapshot(c).dump(),
                      RetryPolicy{},
                      c.context_ceiling_tokens,
                      &g_stop};

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    auto result = run_pipeline(deps);

    auto report = compute_report(result.ledger);
    std::ofstream(c.workspace / "report.txt") << render_report(report, ReportFormat::TableText);
    std::ofstream(c.workspace / "report.json") << render_report(report, ReportFormat::Json);
    std::cout << render_report(report, g.json ? ReportFormat::Json : ReportFormat::TableText);
    if (!g.json) {
        std::cout << "ledger: " << result.ledger_path.string() << "\n";
    }
    if (g_stop.load()) {
        return 1;
    }
    return report.api_coverage_pct >= 100.0 ? 0 : 1;
}

int cmd_run(const GlobalOptions& g, const std::string& library, const std::vector<std::string>& only, int limit)
{
    return execute(g, assemble_config(g, library), only, limit);
}

int cmd_replay(const GlobalOptions& g, const std::string& dir, std::string library)
{
    if (!fs::is_directory(dir)) {
        throw Error(ErrorCode::IoFailure, "transcript directory not found: " + dir);
    }
    if (library.empty() && g.config.empty() && fs::exists(fs::path(dir) / kLedgerFileName)) {
        auto recorded = load_ledger(fs::path(dir) / kLedgerFileName);
        library = json::parse(recorded.config_snapshot).value("library", "");
    }
    auto c = assemble_config(g, library);
    c.backend = BackendKind::Replay;
    c.backend_params = {{"transcripts", dir}};
    if (g.workspace.empty() && g.config.empty()) {
        c.workspace = fs::path(dir).lexically_normal().string() + "-replay";
    }
    std::error_code ec;
    if (fs::equivalent(c.workspace, dir, ec)) {
        throw Error(ErrorCode::FatalConfig, "replay workspace must differ from the transcript directory");
    }
    return execute(g, c, {}, 0);
}

int cmd_report(const GlobalOptions& g, const std::vector<std::string>& ledgers, const std::string& format,
               const std::string& out)
{
    auto fmt_kind = report_format_from_string(g.json ? "json" : format);
    if (!fmt_kind) {
        throw Error(ErrorCode::FatalConfig, "unknown report format " + format);
    }
    std::vector<CoverageReport> reports;
    for (const auto& path : ledgers) {
        reports.push_back(compute_report(load_ledger(path)));
    }
    auto text = reports.size() == 1 && *fmt_kind == ReportFormat::Json ? render_report(reports[0], *fmt_kind)
                                                                        : render_report(reports, *fmt_kind);
    if (out.empty()) {
        std::cout << text;
    }
    else {
        std::ofstream file(out, std::ios::binary | std::ios::trunc);
        file << text;
        if (!file) {
            throw Error(ErrorCode::IoFailure, "cannot write " + out);
        }
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Synthesizes and validates libFuzzer drivers for the exported functions of a shared library."};
    app.name("drvsynth");
    GlobalOptions g;
    app.add_option("--config", g.config, "JSON configuration file");
    app.add_option("--workspace", g.workspace, "Directory for attempts, transcripts and the ledger");
    app.add_flag("--json", g.json, "Machine-readable output");
    app.require_subcommand(1);

    std::string library;
    auto* analyze = app.add_subcommand("analyze", "List exports with fuzzability and inferred signatures");
    analyze->add_option("library", library, "Shared object to analyse");

    std::vector<std::string> only;
    int limit = 0;
    auto* run = app.add_subcommand("run", "Generate, compile and smoke-run drivers for every fuzzable export");
    run->add_option("library", library, "Shared object to fuzz");
    run->add_option("--function", only, "Restrict the run to these exports");
    run->add_option("--limit", limit, "Only the first N fuzzable exports")->check(CLI::NonNegativeNumber);

    std::vector<std::string> ledgers;
    std::string format = "text";
    std::string out;
    auto* report = app.add_subcommand("report", "Render coverage tables from run ledgers");
    report->add_option("ledger", ledgers, "run.ldjson files")->required();
    report->add_option("--format", format, "text, json or csv")->check(CLI::IsMember({"text", "json", "csv"}));
    report->add_option("--out", out, "Write to this file instead of standard output");

    std::string transcripts;
    auto* replay = app.add_subcommand("replay", "Re-run a recorded session set from its transcripts");
    replay->add_option("transcripts", transcripts, "Workspace of the recorded run")->required();
    replay->add_option("library", library, "Shared object; defaults to the one recorded in the ledger");

    try {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*analyze) {
            return cmd_analyze(g, library);
        }
        if (*run) {
            return cmd_run(g, library, only, limit);
        }
        if (*report) {
            return cmd_report(g, ledgers, format, out);
        }
        return cmd_replay(g, transcripts, library);
    }
    catch (const Error& e) {
        std::cerr << "drvsynth: " << e.what() << "\n";
        return exit_code_for(e.code());
    }
    catch (const std::exception& e) {
        std::cerr << "drvsynth: " << e.what() << "\n";
        return 2;
    }
}

#pragma once

#include "drvsynth/forge.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace drvsynth {

inline constexpr int kLedgerSchemaVersion = 1;
inline constexpr std::string_view kLedgerFileName = "run.ldjson";

struct CompileSummary {
    bool success = false;
    double duration = 0.0;
    bool timed_out = false;
    /// Set when no compile ran, e.g. NO_CODE_FOUND.
    std::optional<std::string> error;
    std::size_t stderr_bytes = 0;

    bool operator==(const CompileSummary&) const = default;
};

struct ExecSummary {
    Verdict verdict = Verdict::SetupFailure;
    std::optional<int> exit_code;
    std::optional<int> signal;
    double wall_time = 0.0;

    bool operator==(const ExecSummary&) const = default;
};

struct DriverAttempt {
    std::string function_name;
    int attempt_index = 1;
    /// Relative to the run workspace.
    std::string source_path;
    CompileSummary compile;
    std::optional<ExecSummary> exec;
    /// UTC, ISO-8601 with a trailing Z.
    std::string timestamp;

    bool nominal() const noexcept { return exec && exec->verdict == Verdict::Nominal; }
    bool operator==(const DriverAttempt&) const = default;
};

enum class SessionState { Pending, Done, Failed };

std::string_view to_string(SessionState state) noexcept;

struct FunctionOutcome {
    SessionState state = SessionState::Pending;
    std::optional<std::string> reason;
    int analysis_turns_used = 0;
    std::vector<DriverAttempt> attempts;

    bool operator==(const FunctionOutcome&) const = default;
};

struct RunLedger {
    int schema_version = kLedgerSchemaVersion;
    std::string library_name;
    std::string run_id;
    /// Fuzzable export names in export order.
    std::vector<std::string> fuzzable;
    std::map<std::string, FunctionOutcome> functions;
    std::string config_snapshot;

    bool operator==(const RunLedger&) const = default;
};

RunLedger make_ledger(std::string library_name, std::string run_id, std::vector<std::string> fuzzable,
                      std::string config_snapshot = {});

/// In-memory append; throws UNKNOWN_FUNCTION.
void record_attempt(RunLedger& ledger, DriverAttempt attempt);
void record_outcome(RunLedger& ledger, const std::string& function, SessionState state,
                    std::optional<std::string> reason, int analysis_turns_used);

std::string utc_timestamp();

nlohmann::json to_json(const DriverAttempt& attempt);
DriverAttempt attempt_from_json(const nlohmann::json& j);

/// Line-delimited JSON file: one header record, then attempt and outcome
/// records. Every append is flushed and fsynced before returning; appends are
/// serialized.
class LedgerWriter {
public:
    /// Creates (truncating) the file and writes the header. Throws IO_FAILURE.
    LedgerWriter(std::filesystem::path path, RunLedger header);

    void record_attempt(DriverAttempt attempt);
    void record_outcome(const std::string& function, SessionState state, std::optional<std::string> reason,
                        int analysis_turns_used);

    RunLedger snapshot() const;
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    void append_line(const nlohmann::json& record);

    std::filesystem::path path_;
    mutable std::mutex mutex_;
    RunLedger state_;
};

/// Replays a ledger file. A torn final line (no trailing newline) is ignored;
/// any other unparsable record throws MALFORMED_LEDGER. IO_FAILURE when
/// unreadable.
RunLedger load_ledger(const std::filesystem::path& path);

/// Drops timestamps, durations and wall times so two runs can be compared.
nlohmann::json normalize_ledger(const RunLedger& ledger);

struct CoverageReport {
    std::string library_name;
    std::size_t fuzzable_exports = 0;
    std::size_t source_targets = 0;
    /// Attempts whose build succeeded, regardless of the smoke run.
    std::size_t built_targets = 0;
    /// Attempts that built and passed the smoke run; the table's
    /// "Compiled Targets" column.
    std::size_t nominal_targets = 0;
    std::size_t covered_functions = 0;
    double api_coverage_pct = 100.0;
    double nominal_ratio_pct = 100.0;
    double mean_sources_per_function = 0.0;
    /// Zero fuzzable exports; coverage reads 100 by convention.
    bool vacuous = false;

    bool operator==(const CoverageReport&) const = default;
};

/// 100 × num / den rounded half-up to two decimals; exact integer arithmetic.
double percent_2dp(std::size_t num, std::size_t den);
double ratio_2dp(std::size_t num, std::size_t den);

CoverageReport compute_report(const RunLedger& ledger);
/// Sums counts and recomputes the derived figures; library_name = "Total".
CoverageReport total_report(const std::vector<CoverageReport>& reports);

enum class ReportFormat { TableText, Json, Csv };

std::optional<ReportFormat> report_format_from_string(std::string_view text) noexcept;

/// One row per report plus a Total row when given more than one report.
std::string render_report(const std::vector<CoverageReport>& reports, ReportFormat format);
std::string render_report(const CoverageReport& report, ReportFormat format);

nlohmann::json to_json(const CoverageReport& report);
CoverageReport report_from_json(const nlohmann::json& j);

} // namespace drvsynth

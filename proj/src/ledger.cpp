#include "drvsynth/ledger.hpp"

#include "drvsynth/error.hpp"

#include <fmt/format.h>

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace drvsynth {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(SessionState state) noexcept
{
    switch (state) {
    case SessionState::Pending: return "PENDING";
    case SessionState::Done: return "DONE";
    case SessionState::Failed: return "FAILED";
    }
    return "UNKNOWN";
}

namespace {

SessionState state_from_string(const std::string& text)
{
    for (auto s : {SessionState::Pending, SessionState::Done, SessionState::Failed}) {
        if (to_string(s) == text) {
            return s;
        }
    }
    throw Error(ErrorCode::MalformedLedger, "unknown session state " + text);
}

template <typename T>
json optional_json(const std::optional<T>& v)
{
    return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> optional_from(const json& j, const char* key)
{
    if (!j.contains(key) || j.at(key).is_null()) {
        return std::nullopt;
    }
    return j.at(key).get<T>();
}

FunctionOutcome& outcome_for(RunLedger& ledger, const std::string& function)
{
    auto it = ledger.functions.find(function);
    if (it == ledger.functions.end()) {
        throw Error(ErrorCode::UnknownFunction, "'" + function + "' is not a fuzzable export of this run");
    }
    return it->second;
}

json header_json(const RunLedger& ledger)
{
    return {{"type", "header"},
            {"schema_version", ledger.schema_version},
            {"library", ledger.library_name},
            {"run_id", ledger.run_id},
            {"fuzzable", ledger.fuzzable},
            {"config", ledger.config_snapshot}};
}

json outcome_json(const std::string& function, const FunctionOutcome& o)
{
    return {{"type", "outcome"},
            {"function", function},
            {"state", std::string(to_string(o.state))},
            {"reason", optional_json(o.reason)},
            {"analysis_turns_used", o.analysis_turns_used},
            {"generation_attempts_used", o.attempts.size()}};
}

} // namespace

RunLedger make_ledger(std::string library_name, std::string run_id, std::vector<std::string> fuzzable,
                      std::string config_snapshot)
{
    RunLedger ledger;
    ledger.library_name = std::move(library_name);
    ledger.run_id = std::move(run_id);
    ledger.config_snapshot = std::move(config_snapshot);
    for (const auto& name : fuzzable) {
        ledger.functions.emplace(name, FunctionOutcome{});
    }
    ledger.fuzzable = std::move(fuzzable);
    return ledger;
}

void record_attempt(RunLedger& ledger, DriverAttempt attempt)
{
    if (attempt.exec && !attempt.compile.success) {
        throw std::invalid_argument("exec summary without a successful compile");
    }
    outcome_for(ledger, attempt.function_name).attempts.push_back(std::move(attempt));
}

void record_outcome(RunLedger& ledger, const std::string& function, SessionState state,
                    std::optional<std::string> reason, int analysis_turns_used)
{
    auto& o = outcome_for(ledger, function);
    o.state = state;
    o.reason = std::move(reason);
    o.analysis_turns_used = analysis_turns_used;
}

std::string utc_timestamp()
{
    auto now = std::chrono::system_clock::now();
    auto secs = std::chrono::time_point_cast<std::chrono::seconds>(now);
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now - secs).count();
    std::time_t t = std::chrono::system_clock::to_time_t(secs);
    std::tm tm{};
    gmtime_r(&t, &tm);
    return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}.{:03}Z", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                       tm.tm_hour, tm.tm_min, tm.tm_sec, ms);
}

json to_json(const DriverAttempt& a)
{
    json compile = {{"success", a.compile.success},
                    {"duration", a.compile.duration},
                    {"timed_out", a.compile.timed_out},
                    {"error", optional_json(a.compile.error)},
                    {"stderr_bytes", a.compile.stderr_bytes}};
    json exec = nullptr;
    if (a.exec) {
        exec = {{"verdict", std::string(to_string(a.exec->verdict))},
                {"exit_code", optional_json(a.exec->exit_code)},
                {"signal", optional_json(a.exec->signal)},
                {"wall_time", a.exec->wall_time}};
    }
    return {{"type", "attempt"},       {"function", a.function_name}, {"attempt", a.attempt_index},
            {"source", a.source_path}, {"compile", compile},          {"exec", exec},
            {"timestamp", a.timestamp}};
}

DriverAttempt attempt_from_json(const json& j)
{
    DriverAttempt a;
    a.function_name = j.at("function").get<std::string>();
    a.attempt_index = j.at("attempt").get<int>();
    a.source_path = j.at("source").get<std::string>();
    const auto& c = j.at("compile");
    a.compile.success = c.at("success").get<bool>();
    a.compile.duration = c.at("duration").get<double>();
    a.compile.timed_out = c.at("timed_out").get<bool>();
    a.compile.error = optional_from<std::string>(c, "error");
    a.compile.stderr_bytes = c.at("stderr_bytes").get<std::size_t>();
    if (const auto& e = j.at("exec"); !e.is_null()) {
        ExecSummary x;
        auto v = verdict_from_string(e.at("verdict").get<std::string>());
        if (!v) {
            throw Error(ErrorCode::MalformedLedger, "unknown verdict");
        }
        x.verdict = *v;
        x.exit_code = optional_from<int>(e, "exit_code");
        x.signal = optional_from<int>(e, "signal");
        x.wall_time = e.at("wall_time").get<double>();
        a.exec = x;
    }
    a.timestamp = j.at("timestamp").get<std::string>();
    return a;
}

LedgerWriter::LedgerWriter(fs::path path, RunLedger header) : path_(std::move(path)), state_(std::move(header))
{
    std::error_code ec;
    if (path_.has_parent_path()) {
        fs::create_directories(path_.parent_path(), ec);
    }
    int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) {
        throw Error(ErrorCode::IoFailure, "cannot create ledger " + path_.string() + ": " + std::strerror(errno));
    }
    ::close(fd);
    append_line(header_json(state_));
}

void LedgerWriter::append_line(const json& record)
{
    std::string line = record.dump() + "\n";
    int fd = ::open(path_.c_str(), O_WRONLY | O_APPEND | O_CLOEXEC);
    if (fd < 0) {
        throw Error(ErrorCode::IoFailure, "cannot open ledger " + path_.string() + ": " + std::strerror(errno));
    }
    std::size_t done = 0;
    while (done < line.size()) {
        ssize_t n = ::write(fd, line.data() + done, line.size() - done);
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            int e = errno;
            ::close(fd);
            throw Error(ErrorCode::IoFailure, "ledger write failed: " + std::string(std::strerror(e)));
        }
        done += static_cast<std::size_t>(n);
    }
    bool synced = ::fsync(fd) == 0;
    ::close(fd);
    if (!synced) {
        throw Error(ErrorCode::IoFailure, "ledger fsync failed");
    }
}

void LedgerWriter::record_attempt(DriverAttempt attempt)
{
    std::lock_guard lock(mutex_);
    auto record = to_json(attempt);
    RunLedger next = state_;
    drvsynth::record_attempt(next, std::move(attempt));
    append_line(record);
    state_ = std::move(next);
}

void LedgerWriter::record_outcome(const std::string& function, SessionState state, std::optional<std::string> reason,
                                  int analysis_turns_used)
{
    std::lock_guard lock(mutex_);
    RunLedger next = state_;
    drvsynth::record_outcome(next, function, state, std::move(reason), analysis_turns_used);
    append_line(outcome_json(function, next.functions.at(function)));
    state_ = std::move(next);
}

RunLedger LedgerWriter::snapshot() const
{
    std::lock_guard lock(mutex_);
    return state_;
}

RunLedger load_ledger(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoFailure, "cannot read ledger " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();

    RunLedger ledger;
    bool have_header = false;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        auto eol = text.find('\n', pos);
        if (eol == std::string::npos) {
            break; // torn final append
        }
        std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (line.empty()) {
            continue;
        }
        try {
            json record = json::parse(line);
            auto type = record.at("type").get<std::string>();
            if (!have_header) {
                if (type != "header") {
                    throw Error(ErrorCode::MalformedLedger, "first record is not a header");
                }
                if (record.at("schema_version").get<int>() != kLedgerSchemaVersion) {
                    throw Error(ErrorCode::MalformedLedger, "unsupported schema version");
                }
                ledger = make_ledger(record.at("library").get<std::string>(), record.at("run_id").get<std::string>(),
                                     record.at("fuzzable").get<std::vector<std::string>>(),
                                     record.at("config").get<std::string>());
                have_header = true;
            }
            else if (type == "attempt") {
                record_attempt(ledger, attempt_from_json(record));
            }
            else if (type == "outcome") {
                record_outcome(ledger, record.at("function").get<std::string>(),
                               state_from_string(record.at("state").get<std::string>()),
                               optional_from<std::string>(record, "reason"),
                               record.at("analysis_turns_used").get<int>());
            }
            else {
                throw Error(ErrorCode::MalformedLedger, "unknown record type " + type);
            }
        }
        catch (const Error& e) {
            throw Error(ErrorCode::MalformedLedger, fmt::format("{} line {}: {}", path.string(), line_no, e.what()));
        }
        catch (const std::exception& e) {
            throw Error(ErrorCode::MalformedLedger, fmt::format("{} line {}: {}", path.string(), line_no, e.what()));
        }
    }
    if (!have_header) {
        throw Error(ErrorCode::MalformedLedger, path.string() + ": no header record");
    }
    return ledger;
}

json normalize_ledger(const RunLedger& ledger)
{
    json functions = json::object();
    for (const auto& [name, o] : ledger.functions) {
        json attempts = json::array();
        for (const auto& a : o.attempts) {
            json j = to_json(a);
            j.erase("timestamp");
            j["compile"].erase("duration");
            if (!j["exec"].is_null()) {
                j["exec"].erase("wall_time");
            }
            attempts.push_back(std::move(j));
        }
        functions[name] = {{"state", std::string(to_string(o.state))},
                           {"reason", optional_json(o.reason)},
                           {"analysis_turns_used", o.analysis_turns_used},
                           {"attempts", std::move(attempts)}};
    }
    return {{"schema_version", ledger.schema_version},
            {"library", ledger.library_name},
            {"fuzzable", ledger.fuzzable},
            {"functions", std::move(functions)}};
}

double percent_2dp(std::size_t num, std::size_t den)
{
    return ratio_2dp(100 * num, den);
}

double ratio_2dp(std::size_t num, std::size_t den)
{
    if (den == 0) {
        return 0.0;
    }
    // hundredths = floor(100·num/den + 1/2)
    auto hundredths = (200 * static_cast<unsigned long long>(num) + den) / (2 * static_cast<unsigned long long>(den));
    return static_cast<double>(hundredths) / 100.0;
}

namespace {

void derive(CoverageReport& r)
{
    r.vacuous = r.fuzzable_exports == 0;
    r.api_coverage_pct = r.vacuous ? 100.0 : percent_2dp(r.covered_functions, r.fuzzable_exports);
    r.nominal_ratio_pct = r.source_targets == 0 ? 100.0 : percent_2dp(r.nominal_targets, r.source_targets);
    r.mean_sources_per_function = ratio_2dp(r.source_targets, r.fuzzable_exports);
}

} // namespace

CoverageReport compute_report(const RunLedger& ledger)
{
    CoverageReport r;
    r.library_name = ledger.library_name;
    r.fuzzable_exports = ledger.fuzzable.size();
    for (const auto& [name, o] : ledger.functions) {
        bool covered = false;
        for (const auto& a : o.attempts) {
            ++r.source_targets;
            r.built_targets += a.compile.success ? 1 : 0;
            if (a.nominal()) {
                ++r.nominal_targets;
                covered = true;
            }
        }
        r.covered_functions += covered ? 1 : 0;
    }
    derive(r);
    return r;
}

CoverageReport total_report(const std::vector<CoverageReport>& reports)
{
    CoverageReport t;
    t.library_name = "Total";
    for (const auto& r : reports) {
        t.fuzzable_exports += r.fuzzable_exports;
        t.source_targets += r.source_targets;
        t.built_targets += r.built_targets;
        t.nominal_targets += r.nominal_targets;
        t.covered_functions += r.covered_functions;
    }
    derive(t);
    return t;
}

std::optional<ReportFormat> report_format_from_string(std::string_view text) noexcept
{
    if (text == "text" || text == "table") {
        return ReportFormat::TableText;
    }
    if (text == "json") {
        return ReportFormat::Json;
    }
    if (text == "csv") {
        return ReportFormat::Csv;
    }
    return std::nullopt;
}

json to_json(const CoverageReport& r)
{
    return {{"library", r.library_name},
            {"fuzzable_exports", r.fuzzable_exports},
            {"source_targets", r.source_targets},
            {"compiled_targets", r.nominal_targets},
            {"built_targets", r.built_targets},
            {"nominal_targets", r.nominal_targets},
            {"covered_functions", r.covered_functions},
            {"api_coverage_pct", r.api_coverage_pct},
            {"nominal_ratio_pct", r.nominal_ratio_pct},
            {"mean_sources_per_function", r.mean_sources_per_function},
            {"vacuous", r.vacuous}};
}

CoverageReport report_from_json(const json& j)
{
    CoverageReport r;
    r.library_name = j.at("library").get<std::string>();
    r.fuzzable_exports = j.at("fuzzable_exports").get<std::size_t>();
    r.source_targets = j.at("source_targets").get<std::size_t>();
    r.built_targets = j.at("built_targets").get<std::size_t>();
    r.nominal_targets = j.at("nominal_targets").get<std::size_t>();
    r.covered_functions = j.at("covered_functions").get<std::size_t>();
    r.api_coverage_pct = j.at("api_coverage_pct").get<double>();
    r.nominal_ratio_pct = j.at("nominal_ratio_pct").get<double>();
    r.mean_sources_per_function = j.at("mean_sources_per_function").get<double>();
    r.vacuous = j.at("vacuous").get<bool>();
    return r;
}

namespace {

std::string number(double v)
{
    if (v == std::floor(v)) {
        return fmt::format("{}", static_cast<long long>(v));
    }
    return fmt::format("{:.2f}", v);
}

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\r\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    return out + "\"";
}

} // namespace

std::string render_report(const std::vector<CoverageReport>& reports, ReportFormat format)
{
    auto total = total_report(reports);
    std::vector<const CoverageReport*> rows;
    for (const auto& r : reports) {
        rows.push_back(&r);
    }
    rows.push_back(&total);

    std::string out;
    switch (format) {
    case ReportFormat::TableText: {
        out += "Library | Fuzzable Exports | Target Source Code | Compiled Targets | API Coverage %\n";
        for (const auto* r : rows) {
            out += fmt::format("{} | {} | {} | {} | {}\n", r->library_name, r->fuzzable_exports, r->source_targets,
                               r->nominal_targets, number(r->api_coverage_pct));
        }
        out += fmt::format("Nominally valid: {}%\n", number(total.nominal_ratio_pct));
        out += fmt::format("Sources per fuzzable function: {}\n", number(total.mean_sources_per_function));
        out += fmt::format("Built (before smoke run): {}\n", total.built_targets);
        if (total.vacuous) {
            out += "Note: no fuzzable exports; API coverage is vacuously 100%\n";
        }
        break;
    }
    case ReportFormat::Json: {
        json libs = json::array();
        for (const auto& r : reports) {
            libs.push_back(to_json(r));
        }
        out = json{{"libraries", libs}, {"total", to_json(total)}}.dump(2) + "\n";
        break;
    }
    case ReportFormat::Csv: {
        out += "library,fuzzable_exports,source_targets,compiled_targets,built_targets,api_coverage_pct,"
               "nominal_ratio_pct,mean_sources_per_function,vacuous\r\n";
        for (const auto* r : rows) {
            out += fmt::format("{},{},{},{},{},{:.2f},{:.2f},{:.2f},{}\r\n", csv_field(r->library_name),
                               r->fuzzable_exports, r->source_targets, r->nominal_targets, r->built_targets,
                               r->api_coverage_pct, r->nominal_ratio_pct, r->mean_sources_per_function,
                               r->vacuous ? "true" : "false");
        }
        break;
    }
    }
    return out;
}

std::string render_report(const CoverageReport& report, ReportFormat format)
{
    if (format == ReportFormat::Json) {
        return to_json(report).dump(2) + "\n";
    }
    return render_report(std::vector<CoverageReport>{report}, format);
}

} // namespace drvsynth

#include "drvsynth/error.hpp"
#include "drvsynth/ledger.hpp"
#include "scenarios.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <csignal>
#include <fstream>
#include <sys/wait.h>
#include <unistd.h>

using namespace drvsynth;
namespace fs = std::filesystem;

namespace {

DriverAttempt attempt(const std::string& fn, int index, bool compiled, std::optional<Verdict> verdict)
{
    DriverAttempt a;
    a.function_name = fn;
    a.attempt_index = index;
    a.source_path = fn + "/" + std::to_string(index) + "/driver.cc";
    a.compile.success = compiled;
    a.compile.duration = 0.25 * index;
    a.compile.stderr_bytes = compiled ? 0 : 120;
    if (verdict) {
        a.exec = ExecSummary{*verdict, std::nullopt, 9, 10.0};
    }
    a.timestamp = utc_timestamp();
    return a;
}

template <typename F>
ErrorCode error_of(F&& f)
{
    try {
        f();
    }
    catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error";
    return ErrorCode::IoFailure;
}

RunLedger three_function_ledger()
{
    auto ledger = make_ledger("libx.so", "r1", {"a", "b", "c"});
    record_attempt(ledger, attempt("a", 1, true, Verdict::Nominal));
    record_attempt(ledger, attempt("b", 1, false, std::nullopt));
    record_attempt(ledger, attempt("b", 2, true, Verdict::Crash));
    record_attempt(ledger, attempt("b", 3, true, Verdict::Nominal));
    record_attempt(ledger, attempt("c", 1, false, std::nullopt));
    record_attempt(ledger, attempt("c", 2, false, std::nullopt));
    record_outcome(ledger, "a", SessionState::Done, std::nullopt, 1);
    record_outcome(ledger, "b", SessionState::Done, std::nullopt, 2);
    record_outcome(ledger, "c", SessionState::Failed, "BUDGET_EXHAUSTED", 0);
    return ledger;
}

} // namespace

TEST(Ledger, RecordAttempt)
{
    auto ledger = make_ledger("libx.so", "r1", {"add", "concat"});
    record_attempt(ledger, attempt("add", 1, true, Verdict::Nominal));
    EXPECT_EQ(ledger.functions.at("add").attempts.size(), 1u);
    EXPECT_TRUE(ledger.functions.at("concat").attempts.empty());
    EXPECT_EQ(error_of([&] { record_attempt(ledger, attempt("nope", 1, true, std::nullopt)); }),
              ErrorCode::UnknownFunction);
    EXPECT_THROW(record_attempt(ledger, attempt("add", 2, false, Verdict::Crash)), std::invalid_argument);
}

TEST(Ledger, WriterAndLoaderAgree)
{
    testing_support::TempDir dir;
    auto expected = three_function_ledger();
    testing_support::write_ledger(dir.path() / "run.ldjson", expected);
    EXPECT_EQ(load_ledger(dir.path() / "run.ldjson"), expected);
}

TEST(Ledger, WriterRejectsUnknownFunctionWithoutWriting)
{
    testing_support::TempDir dir;
    LedgerWriter writer(dir.path() / "run.ldjson", make_ledger("l", "r", {"a"}));
    auto before = testing_support::read_text(dir.path() / "run.ldjson");
    EXPECT_EQ(error_of([&] { writer.record_attempt(attempt("zzz", 1, false, std::nullopt)); }),
              ErrorCode::UnknownFunction);
    EXPECT_EQ(testing_support::read_text(dir.path() / "run.ldjson"), before);
}

TEST(Ledger, SurvivesKillBetweenAppends)
{
    testing_support::TempDir dir;
    auto path = dir.path() / "run.ldjson";
    auto expected = make_ledger("libx.so", "r1", {"a", "b"});
    record_attempt(expected, attempt("a", 1, false, std::nullopt));
    record_attempt(expected, attempt("a", 2, true, Verdict::Nominal));
    record_outcome(expected, "a", SessionState::Done, std::nullopt, 1);

    pid_t pid = ::fork();
    ASSERT_GE(pid, 0);
    if (pid == 0) {
        LedgerWriter writer(path, make_ledger("libx.so", "r1", {"a", "b"}));
        for (const auto& a : expected.functions.at("a").attempts) {
            writer.record_attempt(a);
        }
        writer.record_outcome("a", SessionState::Done, std::nullopt, 1);
        ::raise(SIGKILL);
        ::_exit(0);
    }
    int status = 0;
    ::waitpid(pid, &status, 0);
    ASSERT_TRUE(WIFSIGNALED(status));
    EXPECT_EQ(load_ledger(path), expected);
}

TEST(Ledger, TornFinalLineIgnored)
{
    testing_support::TempDir dir;
    auto path = dir.path() / "run.ldjson";
    auto expected = three_function_ledger();
    testing_support::write_ledger(path, expected);
    {
        std::ofstream out(path, std::ios::app);
        out << R"({"type":"attempt","function":"a","att)";
    }
    EXPECT_EQ(load_ledger(path), expected);
}

TEST(Ledger, MalformedRecords)
{
    testing_support::TempDir dir;
    auto path = dir.path() / "run.ldjson";
    testing_support::write_text(path, "not json\n");
    EXPECT_EQ(error_of([&] { load_ledger(path); }), ErrorCode::MalformedLedger);
    testing_support::write_text(path, "");
    EXPECT_EQ(error_of([&] { load_ledger(path); }), ErrorCode::MalformedLedger);
    testing_support::write_ledger(path, three_function_ledger());
    {
        std::ofstream out(path, std::ios::app);
        out << R"({"type":"attempt","function":"ghost","attempt":1})" << "\n";
    }
    EXPECT_EQ(error_of([&] { load_ledger(path); }), ErrorCode::MalformedLedger);
    EXPECT_EQ(error_of([&] { load_ledger(dir.path() / "absent.ldjson"); }), ErrorCode::IoFailure);
    EXPECT_EQ(error_of([] { LedgerWriter("/proc/no/such/run.ldjson", make_ledger("l", "r", {})); }),
              ErrorCode::IoFailure);
}

TEST(Report, RoundingIsHalfUp)
{
    EXPECT_DOUBLE_EQ(percent_2dp(1, 3), 33.33);
    EXPECT_DOUBLE_EQ(percent_2dp(2, 3), 66.67);
    EXPECT_DOUBLE_EQ(ratio_2dp(1, 8), 0.13);
    EXPECT_DOUBLE_EQ(ratio_2dp(1601, 558), 2.87);
    EXPECT_DOUBLE_EQ(percent_2dp(1209, 1601), 75.52);
    EXPECT_DOUBLE_EQ(percent_2dp(5, 5), 100.0);
}

TEST(Report, PublishedTotals)
{
    std::vector<CoverageReport> reports;
    for (const auto& row : testing_support::published_rows()) {
        auto r = compute_report(testing_support::synthetic_ledger(row.library, row.fuzzable, row.sources, row.nominal));
        EXPECT_EQ(r.fuzzable_exports, row.fuzzable);
        EXPECT_EQ(r.source_targets, row.sources);
        EXPECT_EQ(r.nominal_targets, row.nominal);
        EXPECT_DOUBLE_EQ(r.api_coverage_pct, 100.0);
        reports.push_back(r);
    }
    auto total = total_report(reports);
    EXPECT_EQ(total.fuzzable_exports, 558u);
    EXPECT_EQ(total.source_targets, 1601u);
    EXPECT_EQ(total.nominal_targets, 1209u);
    EXPECT_DOUBLE_EQ(total.api_coverage_pct, 100.0);
    EXPECT_NEAR(total.nominal_ratio_pct, 75.52, 0.005);
    EXPECT_NEAR(total.mean_sources_per_function, 2.87, 0.005);

    auto text = render_report(reports, ReportFormat::TableText);
    EXPECT_NE(text.find("Total | 558 | 1601 | 1209 | 100\n"), std::string::npos) << text;
    EXPECT_NE(text.find("cJSON | 144 | 274 | 170 | 100\n"), std::string::npos);
    EXPECT_NE(text.find("libplist | 182 | 621 | 538 | 100\n"), std::string::npos);
    EXPECT_NE(text.find("Nominally valid: 75.52%"), std::string::npos);
    EXPECT_NE(text.find("Sources per fuzzable function: 2.87"), std::string::npos);
}

TEST(Report, ThreeFunctionExample)
{
    auto ledger = three_function_ledger();
    auto before = ledger;
    auto r = compute_report(ledger);
    EXPECT_EQ(r.source_targets, 6u);
    EXPECT_EQ(r.built_targets, 3u);
    EXPECT_EQ(r.nominal_targets, 2u);
    EXPECT_EQ(r.covered_functions, 2u);
    EXPECT_DOUBLE_EQ(r.api_coverage_pct, 66.67);
    EXPECT_DOUBLE_EQ(r.mean_sources_per_function, 2.0);
    EXPECT_GE(r.source_targets, r.built_targets);
    EXPECT_GE(r.built_targets, r.nominal_targets);
    EXPECT_EQ(compute_report(ledger), r);
    EXPECT_EQ(ledger, before);
}

TEST(Report, EmptyLedgerIsVacuous)
{
    auto r = compute_report(make_ledger("libnone.so", "r", {}));
    EXPECT_TRUE(r.vacuous);
    EXPECT_EQ(r.source_targets, 0u);
    EXPECT_DOUBLE_EQ(r.api_coverage_pct, 100.0);
    auto text = render_report(r, ReportFormat::TableText);
    EXPECT_TRUE(text.starts_with("Library | Fuzzable Exports | Target Source Code | Compiled Targets | API Coverage %\n"));
    EXPECT_NE(text.find("vacuously 100%"), std::string::npos);
}

TEST(Report, JsonRoundTrip)
{
    auto r = compute_report(three_function_ledger());
    EXPECT_EQ(report_from_json(nlohmann::json::parse(render_report(r, ReportFormat::Json))), r);
    auto cjson = compute_report(testing_support::synthetic_ledger("cJSON", 144, 274, 170));
    EXPECT_EQ(report_from_json(nlohmann::json::parse(render_report(cjson, ReportFormat::Json))), cjson);
}

TEST(Report, CsvQuoting)
{
    auto r = compute_report(three_function_ledger());
    r.library_name = "lib \"odd\", name";
    auto csv = render_report(r, ReportFormat::Csv);
    auto rows = testing_support::lines(csv);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[1], "\"lib \"\"odd\"\", name\",3,6,2,3,66.67,33.33,2.00,false\r");
    EXPECT_TRUE(rows[2].starts_with("Total,3,6,2,3,66.67"));
}

TEST(Report, NormalizedLedgerIgnoresTimings)
{
    auto a = three_function_ledger();
    auto b = a;
    for (auto& [name, o] : b.functions) {
        for (auto& att : o.attempts) {
            att.timestamp = "1999-01-01T00:00:00.000Z";
            att.compile.duration += 3;
            if (att.exec) {
                att.exec->wall_time = 1;
            }
        }
    }
    EXPECT_NE(a, b);
    EXPECT_EQ(normalize_ledger(a), normalize_ledger(b));
    b.functions.at("c").state = SessionState::Done;
    EXPECT_NE(normalize_ledger(a), normalize_ledger(b));
}

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace drvsynth {

enum class ErrorCode {
    // binary analysis
    NotElf,
    UnsupportedClass,
    NoDynsym,
    Truncated,
    IoFailure,
    // disassembly
    AdapterUnavailable,
    DecodeFailure,
    // model session
    BackendUnreachable,
    RateLimitedExhausted,
    MalformedResponse,
    NoRuleMatched,
    TranscriptExhausted,
    TranscriptMissing,
    // orchestration
    MissingPlaceholder,
    FatalConfig,
    // driver forge
    NoCodeFound,
    CompilerNotFound,
    SpawnFailure,
    // ledger
    UnknownFunction,
    MalformedLedger,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code)
    {
    }

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace drvsynth

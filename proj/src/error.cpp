#include "drvsynth/error.hpp"

namespace drvsynth {

std::string_view to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::NotElf: return "NOT_ELF";
    case ErrorCode::UnsupportedClass: return "UNSUPPORTED_CLASS";
    case ErrorCode::NoDynsym: return "NO_DYNSYM";
    case ErrorCode::Truncated: return "TRUNCATED";
    case ErrorCode::IoFailure: return "IO_FAILURE";
    case ErrorCode::AdapterUnavailable: return "ADAPTER_UNAVAILABLE";
    case ErrorCode::DecodeFailure: return "DECODE_FAILURE";
    case ErrorCode::BackendUnreachable: return "BACKEND_UNREACHABLE";
    case ErrorCode::RateLimitedExhausted: return "RATE_LIMITED_EXHAUSTED";
    case ErrorCode::MalformedResponse: return "MALFORMED_RESPONSE";
    case ErrorCode::NoRuleMatched: return "NO_RULE_MATCHED";
    case ErrorCode::TranscriptExhausted: return "TRANSCRIPT_EXHAUSTED";
    case ErrorCode::TranscriptMissing: return "TRANSCRIPT_MISSING";
    case ErrorCode::MissingPlaceholder: return "MISSING_PLACEHOLDER";
    case ErrorCode::FatalConfig: return "FATAL_CONFIG";
    case ErrorCode::NoCodeFound: return "NO_CODE_FOUND";
    case ErrorCode::CompilerNotFound: return "COMPILER_NOT_FOUND";
    case ErrorCode::SpawnFailure: return "SPAWN_FAILURE";
    case ErrorCode::UnknownFunction: return "UNKNOWN_FUNCTION";
    case ErrorCode::MalformedLedger: return "MALFORMED_LEDGER";
    }
    return "UNKNOWN";
}

} // namespace drvsynth

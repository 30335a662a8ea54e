#pragma once

#include "drvsynth/backend.hpp"
#include "drvsynth/clock.hpp"

#include <cstddef>

namespace drvsynth {

struct RetryPolicy {
    int max_attempts = 5;
    Seconds base_delay{2.0};
    double factor = 2.0;
};

struct SessionStats {
    int requests = 0;
    /// Throttled responses that were followed by another attempt.
    int retries = 0;
    int compactions = 0;
    Seconds slept{0};
};

/// Request view with the oldest non-SYSTEM turns folded into one USER recap
/// when the estimate exceeds `ceiling` tokens. The recent tail is kept intact
/// and never starts with an orphaned TOOL_RESULT. ceiling 0 disables folding.
std::vector<ChatTurn> compact_for_request(const std::vector<ChatTurn>& turns, std::size_t ceiling);

class LlmSession {
public:
    LlmSession(Backend& backend, Clock& clock, RateLimiter* limiter = nullptr, RetryPolicy policy = {},
               std::size_t context_ceiling = 0);

    /// One model round-trip. Throttled replies (429/503) are retried with
    /// exponential backoff, preferring the server's Retry-After; the transcript
    /// itself is never modified.
    ChatTurn send(const SessionTranscript& transcript, const std::vector<ToolSpec>& tools,
                  const std::map<std::string, std::string>& context = {});

    const SessionStats& stats() const noexcept { return stats_; }
    const Backend& backend() const noexcept { return backend_; }

private:
    Backend& backend_;
    Clock& clock_;
    RateLimiter* limiter_;
    RetryPolicy policy_;
    std::size_t ceiling_;
    SessionStats stats_;
};

} // namespace drvsynth

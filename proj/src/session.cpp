#include "drvsynth/session.hpp"

#include "drvsynth/error.hpp"

#include <fmt/format.h>

#include <cmath>

namespace drvsynth {

namespace {

constexpr std::size_t kRecapExcerpt = 240;

std::string excerpt(const ChatTurn& turn)
{
    std::string text = turn.content.substr(0, kRecapExcerpt);
    if (turn.content.size() > kRecapExcerpt) {
        text += " [...]";
    }
    for (const auto& call : turn.tool_calls) {
        text += fmt::format(" [called {}]", call.tool_name);
    }
    return fmt::format("- {}: {}\n", to_string(turn.role), text);
}

} // namespace

std::vector<ChatTurn> compact_for_request(const std::vector<ChatTurn>& turns, std::size_t ceiling)
{
    std::size_t total = 0;
    for (const auto& t : turns) {
        total += estimate_tokens(t);
    }
    if (ceiling == 0 || total <= ceiling || turns.size() < 3) {
        return turns;
    }
    // Keep the longest tail that fits in half the ceiling, at least the last turn.
    std::size_t keep_from = turns.size() - 1;
    std::size_t tail = estimate_tokens(turns.back());
    while (keep_from > 1 && tail + estimate_tokens(turns[keep_from - 1]) <= ceiling / 2) {
        --keep_from;
        tail += estimate_tokens(turns[keep_from]);
    }
    // A TOOL_RESULT must follow the ASSISTANT turn that issued its call.
    while (keep_from > 1 && turns[keep_from].role == Role::ToolResult) {
        --keep_from;
    }
    if (keep_from <= 1) {
        return turns;
    }
    std::vector<ChatTurn> out;
    out.push_back(turns.front());
    std::string recap = "Summary of earlier conversation (older turns were condensed):\n";
    for (std::size_t i = 1; i < keep_from; ++i) {
        recap += excerpt(turns[i]);
    }
    out.push_back(ChatTurn::user(std::move(recap)));
    out.insert(out.end(), turns.begin() + static_cast<std::ptrdiff_t>(keep_from), turns.end());
    return out;
}

LlmSession::LlmSession(Backend& backend, Clock& clock, RateLimiter* limiter, RetryPolicy policy,
                       std::size_t context_ceiling)
    : backend_(backend), clock_(clock), limiter_(limiter), policy_(policy), ceiling_(context_ceiling)
{
}

ChatTurn LlmSession::send(const SessionTranscript& transcript, const std::vector<ToolSpec>& tools,
                          const std::map<std::string, std::string>& context)
{
    auto view = compact_for_request(transcript.turns(), ceiling_);
    if (view.size() != transcript.turns().size()) {
        ++stats_.compactions;
    }
    BackendRequest request{view, tools, context};
    for (int attempt = 1;; ++attempt) {
        if (limiter_ != nullptr) {
            limiter_->acquire();
        }
        ++stats_.requests;
        BackendResponse response = backend_.complete(request);
        if (!response.throttled()) {
            if (response.status < 200 || response.status >= 300) {
                throw Error(ErrorCode::BackendUnreachable, fmt::format("backend status {}", response.status));
            }
            if (response.turn.role != Role::Assistant) {
                throw Error(ErrorCode::MalformedResponse, "backend reply is not an ASSISTANT turn");
            }
            return response.turn;
        }
        if (attempt >= policy_.max_attempts) {
            throw Error(ErrorCode::RateLimitedExhausted,
                        fmt::format("still throttled after {} attempts", policy_.max_attempts));
        }
        Seconds delay = response.retry_after ? Seconds(*response.retry_after)
                                             : policy_.base_delay * std::pow(policy_.factor, attempt - 1);
        ++stats_.retries;
        stats_.slept += delay;
        clock_.sleep_for(delay);
    }
}

} // namespace drvsynth

#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace drvsynth {

enum class Role { System, User, Assistant, ToolResult };

std::string_view to_string(Role role) noexcept;
std::optional<Role> role_from_string(std::string_view text) noexcept;

struct ToolInvocation {
    std::string id;
    std::string tool_name;
    std::map<std::string, std::string> arguments;

    bool operator==(const ToolInvocation&) const = default;
};

struct ChatTurn {
    Role role = Role::User;
    std::string content;
    std::vector<ToolInvocation> tool_calls;
    std::optional<std::string> tool_call_id;
    /// Orchestrator phase when the turn was appended; empty outside sessions.
    std::string phase;

    bool operator==(const ChatTurn&) const = default;

    static ChatTurn system(std::string text) { return {Role::System, std::move(text), {}, {}, {}}; }
    static ChatTurn user(std::string text) { return {Role::User, std::move(text), {}, {}, {}}; }
    static ChatTurn assistant(std::string text, std::vector<ToolInvocation> calls = {})
    {
        return {Role::Assistant, std::move(text), std::move(calls), {}, {}};
    }
    static ChatTurn tool_result(std::string id, std::string text)
    {
        return {Role::ToolResult, std::move(text), {}, std::move(id), {}};
    }
};

struct ToolParameter {
    std::string name;
    std::string type_hint = "string";
    bool required = true;
    std::string description;

    bool operator==(const ToolParameter&) const = default;
};

struct ToolSpec {
    std::string name;
    std::string description;
    std::vector<ToolParameter> parameters;

    bool operator==(const ToolSpec&) const = default;
};

/// Append-only conversation log for one function session.
class SessionTranscript {
public:
    SessionTranscript() = default;
    explicit SessionTranscript(std::string backend_id) : backend_id_(std::move(backend_id)) {}

    /// Validates the protocol invariants: one leading SYSTEM turn, tool calls only
    /// on ASSISTANT turns, and TOOL_RESULT ids issued by an earlier ASSISTANT turn.
    /// Throws std::invalid_argument on violation.
    void append(ChatTurn turn);

    const std::vector<ChatTurn>& turns() const noexcept { return turns_; }
    const std::string& backend_id() const noexcept { return backend_id_; }
    void set_backend_id(std::string id) { backend_id_ = std::move(id); }

    /// Rough token count, about four characters per token.
    std::size_t token_estimate() const noexcept { return chars_ / 4; }

    std::map<std::string, std::string> metadata;

    bool operator==(const SessionTranscript&) const = default;

private:
    std::vector<ChatTurn> turns_;
    std::string backend_id_;
    std::size_t chars_ = 0;
};

std::size_t estimate_tokens(const ChatTurn& turn) noexcept;

inline constexpr int kTranscriptVersion = 1;

nlohmann::json to_json(const ChatTurn& turn);
ChatTurn chat_turn_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SessionTranscript& transcript);
SessionTranscript transcript_from_json(const nlohmann::json& j);

/// Writes the transcript as one JSON file. Throws IO_FAILURE.
void record_transcript(const SessionTranscript& transcript, const std::filesystem::path& sink);
/// Throws IO_FAILURE or MALFORMED_RESPONSE for unreadable or invalid files.
SessionTranscript load_transcript(const std::filesystem::path& source);

} // namespace drvsynth

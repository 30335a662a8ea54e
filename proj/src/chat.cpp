#include "drvsynth/chat.hpp"

#include "drvsynth/error.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

namespace drvsynth {

std::string_view to_string(Role role) noexcept
{
    switch (role) {
    case Role::System: return "SYSTEM";
    case Role::User: return "USER";
    case Role::Assistant: return "ASSISTANT";
    case Role::ToolResult: return "TOOL_RESULT";
    }
    return "USER";
}

std::optional<Role> role_from_string(std::string_view text) noexcept
{
    for (auto r : {Role::System, Role::User, Role::Assistant, Role::ToolResult}) {
        if (to_string(r) == text) {
            return r;
        }
    }
    return std::nullopt;
}

std::size_t estimate_tokens(const ChatTurn& turn) noexcept
{
    std::size_t chars = turn.content.size();
    for (const auto& call : turn.tool_calls) {
        chars += call.tool_name.size();
        for (const auto& [k, v] : call.arguments) {
            chars += k.size() + v.size();
        }
    }
    return chars / 4;
}

void SessionTranscript::append(ChatTurn turn)
{
    if (turns_.empty() != (turn.role == Role::System)) {
        throw std::invalid_argument("a transcript starts with exactly one SYSTEM turn");
    }
    if (!turn.tool_calls.empty() && turn.role != Role::Assistant) {
        throw std::invalid_argument("only ASSISTANT turns carry tool calls");
    }
    if (turn.role == Role::ToolResult) {
        if (!turn.tool_call_id) {
            throw std::invalid_argument("TOOL_RESULT without tool_call_id");
        }
        bool issued = false;
        for (const auto& prior : turns_) {
            for (const auto& call : prior.tool_calls) {
                issued = issued || call.id == *turn.tool_call_id;
            }
        }
        if (!issued) {
            throw std::invalid_argument("TOOL_RESULT references unknown call id " + *turn.tool_call_id);
        }
    }
    else if (turn.tool_call_id) {
        throw std::invalid_argument("tool_call_id only belongs on TOOL_RESULT turns");
    }
    chars_ += turn.content.size();
    for (const auto& call : turn.tool_calls) {
        chars_ += call.tool_name.size();
        for (const auto& [k, v] : call.arguments) {
            chars_ += k.size() + v.size();
        }
    }
    turns_.push_back(std::move(turn));
}

nlohmann::json to_json(const ChatTurn& turn)
{
    nlohmann::json j;
    j["role"] = std::string(to_string(turn.role));
    j["content"] = turn.content;
    if (!turn.tool_calls.empty()) {
        auto& calls = j["tool_calls"] = nlohmann::json::array();
        for (const auto& c : turn.tool_calls) {
            calls.push_back({{"id", c.id}, {"name", c.tool_name}, {"arguments", c.arguments}});
        }
    }
    if (turn.tool_call_id) {
        j["tool_call_id"] = *turn.tool_call_id;
    }
    if (!turn.phase.empty()) {
        j["phase"] = turn.phase;
    }
    return j;
}

ChatTurn chat_turn_from_json(const nlohmann::json& j)
{
    ChatTurn turn;
    auto role = role_from_string(j.at("role").get<std::string>());
    if (!role) {
        throw Error(ErrorCode::MalformedResponse, "unknown role " + j.at("role").dump());
    }
    turn.role = *role;
    turn.content = j.value("content", std::string());
    if (j.contains("tool_calls")) {
        for (const auto& c : j.at("tool_calls")) {
            ToolInvocation call;
            call.id = c.value("id", std::string());
            call.tool_name = c.at("name").get<std::string>();
            if (c.contains("arguments")) {
                call.arguments = c.at("arguments").get<std::map<std::string, std::string>>();
            }
            turn.tool_calls.push_back(std::move(call));
        }
    }
    if (j.contains("tool_call_id")) {
        turn.tool_call_id = j.at("tool_call_id").get<std::string>();
    }
    turn.phase = j.value("phase", std::string());
    return turn;
}

nlohmann::json to_json(const SessionTranscript& transcript)
{
    nlohmann::json j;
    j["format"] = "drvsynth-transcript";
    j["version"] = kTranscriptVersion;
    j["backend_id"] = transcript.backend_id();
    j["metadata"] = transcript.metadata;
    auto& turns = j["turns"] = nlohmann::json::array();
    for (const auto& t : transcript.turns()) {
        turns.push_back(to_json(t));
    }
    return j;
}

SessionTranscript transcript_from_json(const nlohmann::json& j)
{
    try {
        if (j.value("version", 0) != kTranscriptVersion) {
            throw Error(ErrorCode::MalformedResponse, "unsupported transcript version");
        }
        SessionTranscript t(j.value("backend_id", std::string()));
        if (j.contains("metadata")) {
            t.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
        }
        for (const auto& turn : j.at("turns")) {
            t.append(chat_turn_from_json(turn));
        }
        return t;
    }
    catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedResponse, std::string("transcript: ") + e.what());
    }
    catch (const std::invalid_argument& e) {
        throw Error(ErrorCode::MalformedResponse, std::string("transcript: ") + e.what());
    }
}

void record_transcript(const SessionTranscript& transcript, const std::filesystem::path& sink)
{
    std::error_code ec;
    if (sink.has_parent_path()) {
        std::filesystem::create_directories(sink.parent_path(), ec);
    }
    std::ofstream out(sink, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::IoFailure, "cannot write " + sink.string());
    }
    out << to_json(transcript).dump(2) << '\n';
    out.flush();
    if (!out) {
        throw Error(ErrorCode::IoFailure, "short write to " + sink.string());
    }
}

SessionTranscript load_transcript(const std::filesystem::path& source)
{
    std::ifstream in(source, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoFailure, "cannot read " + source.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    }
    catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedResponse, source.string() + ": " + e.what());
    }
    return transcript_from_json(j);
}

} // namespace drvsynth

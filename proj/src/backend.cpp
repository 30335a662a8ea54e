#include "drvsynth/backend.hpp"

#include "drvsynth/error.hpp"

#include <fstream>

namespace drvsynth {

namespace {

std::string fill_context(std::string text, const std::map<std::string, std::string>& context)
{
    for (const auto& [key, value] : context) {
        const std::string token = "{{" + key + "}}";
        for (auto at = text.find(token); at != std::string::npos; at = text.find(token, at + value.size())) {
            text.replace(at, token.size(), value);
        }
    }
    return text;
}

} // namespace

ReplayBackend::ReplayBackend(const SessionTranscript& recorded)
{
    for (const auto& turn : recorded.turns()) {
        if (turn.role == Role::Assistant) {
            ChatTurn copy = turn;
            copy.phase.clear();
            replies_.push_back(std::move(copy));
        }
    }
}

BackendResponse ReplayBackend::complete(const BackendRequest&)
{
    if (next_ >= replies_.size()) {
        throw Error(ErrorCode::TranscriptExhausted, "recorded transcript has no further assistant turns");
    }
    BackendResponse r;
    r.turn = replies_[next_++];
    return r;
}

bool ScriptMatcher::matches(const std::string& text) const
{
    if (kind == Kind::Substring) {
        return text.find(pattern) != std::string::npos;
    }
    return std::regex_search(text, std::regex(pattern));
}

ScriptedBackend::ScriptedBackend(std::vector<ScriptRule> rules) : rules_(std::move(rules)), used_(rules_.size(), 0)
{
    for (const auto& rule : rules_) {
        if (rule.replies.empty()) {
            throw std::invalid_argument("script rule without replies: " + rule.matcher.pattern);
        }
    }
}

BackendResponse ScriptedBackend::complete(const BackendRequest& request)
{
    const ChatTurn* latest = nullptr;
    for (auto it = request.turns.rbegin(); it != request.turns.rend(); ++it) {
        if (it->role == Role::User || it->role == Role::ToolResult) {
            latest = &*it;
            break;
        }
    }
    const std::string text = latest != nullptr ? latest->content : std::string();
    for (std::size_t i = 0; i < rules_.size(); ++i) {
        if (!rules_[i].matcher.matches(text)) {
            continue;
        }
        const auto& replies = rules_[i].replies;
        ChatTurn reply = replies[std::min(used_[i], replies.size() - 1)];
        ++used_[i];
        reply.role = Role::Assistant;
        reply.phase.clear();
        reply.content = fill_context(std::move(reply.content), request.context);
        for (auto& call : reply.tool_calls) {
            if (call.id.empty()) {
                call.id = "call_" + std::to_string(++call_counter_);
            }
            for (auto& [key, value] : call.arguments) {
                value = fill_context(std::move(value), request.context);
            }
        }
        BackendResponse r;
        r.turn = std::move(reply);
        return r;
    }
    throw Error(ErrorCode::NoRuleMatched, "no script rule matches: " + text.substr(0, 200));
}

std::vector<ScriptRule> script_from_json(const nlohmann::json& j)
{
    std::vector<ScriptRule> rules;
    try {
        for (const auto& r : j.at("rules")) {
            ScriptRule rule;
            rule.matcher.pattern = r.at("match").get<std::string>();
            rule.matcher.kind = r.value("regex", false) ? ScriptMatcher::Kind::Regex : ScriptMatcher::Kind::Substring;
            if (rule.matcher.kind == ScriptMatcher::Kind::Regex) {
                std::regex validate(rule.matcher.pattern);
            }
            for (const auto& reply : r.at("replies")) {
                ChatTurn turn = ChatTurn::assistant(reply.value("content", std::string()));
                if (reply.contains("tool_calls")) {
                    for (const auto& c : reply.at("tool_calls")) {
                        ToolInvocation call;
                        call.id = c.value("id", std::string());
                        call.tool_name = c.at("name").get<std::string>();
                        if (c.contains("arguments")) {
                            call.arguments = c.at("arguments").get<std::map<std::string, std::string>>();
                        }
                        turn.tool_calls.push_back(std::move(call));
                    }
                }
                rule.replies.push_back(std::move(turn));
            }
            rules.push_back(std::move(rule));
        }
    }
    catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::FatalConfig, std::string("script: ") + e.what());
    }
    catch (const std::regex_error& e) {
        throw Error(ErrorCode::FatalConfig, std::string("script pattern: ") + e.what());
    }
    if (rules.empty()) {
        throw Error(ErrorCode::FatalConfig, "script needs at least one rule");
    }
    return rules;
}

std::vector<ScriptRule> load_script(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::FatalConfig, "cannot read script " + path.string());
    }
    try {
        return script_from_json(nlohmann::json::parse(in));
    }
    catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::FatalConfig, path.string() + ": " + e.what());
    }
}

} // namespace drvsynth

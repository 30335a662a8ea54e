#pragma once

#include "drvsynth/chat.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <vector>

namespace drvsynth {

struct BackendRequest {
    const std::vector<ChatTurn>& turns;
    const std::vector<ToolSpec>& tools;
    /// Session facts such as function_name; never sent over the wire.
    const std::map<std::string, std::string>& context;
};

struct BackendResponse {
    int status = 200;
    /// Server-provided delay in seconds for throttled responses.
    std::optional<double> retry_after;
    ChatTurn turn;

    bool throttled() const noexcept { return status == 429 || status == 503; }
};

/// One model endpoint. Implementations throw Error with BACKEND_UNREACHABLE,
/// MALFORMED_RESPONSE, NO_RULE_MATCHED or TRANSCRIPT_EXHAUSTED.
class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string id() const = 0;
    virtual BackendResponse complete(const BackendRequest& request) = 0;
};

/// Creates the backend for one function session.
using BackendFactory = std::function<std::unique_ptr<Backend>(const std::string& function_name)>;

struct HttpBackendConfig {
    /// Full URL of an OpenAI-style chat-completions endpoint.
    std::string endpoint;
    std::string model;
    std::string api_key;
    double timeout_seconds = 120;
    double temperature = 0.2;
};

class HttpBackend final : public Backend {
public:
    explicit HttpBackend(HttpBackendConfig config);
    std::string id() const override { return "http:" + config_.model; }
    BackendResponse complete(const BackendRequest& request) override;

    /// Wire encoding, exposed for tests.
    static nlohmann::json encode(const BackendRequest& request, const std::string& model, double temperature);
    static ChatTurn decode(const nlohmann::json& body);

private:
    HttpBackendConfig config_;
    int call_counter_ = 0;
};

/// Serves the ASSISTANT turns of a recorded transcript in order.
class ReplayBackend final : public Backend {
public:
    explicit ReplayBackend(const SessionTranscript& recorded);
    std::string id() const override { return "replay"; }
    BackendResponse complete(const BackendRequest& request) override;

    std::size_t remaining() const noexcept { return replies_.size() - next_; }

private:
    std::vector<ChatTurn> replies_;
    std::size_t next_ = 0;
};

struct ScriptMatcher {
    enum class Kind { Substring, Regex };
    Kind kind = Kind::Substring;
    std::string pattern;

    bool matches(const std::string& text) const;
};

/// Replies are used in order; the last one repeats once the list is exhausted.
struct ScriptRule {
    ScriptMatcher matcher;
    std::vector<ChatTurn> replies;
};

/// Test double answering from ordered rules matched against the latest
/// USER or TOOL_RESULT turn. `{{name}}` in replies is filled from the request
/// context. Tool calls without ids get `call_<n>`.
class ScriptedBackend final : public Backend {
public:
    explicit ScriptedBackend(std::vector<ScriptRule> rules);
    std::string id() const override { return "scripted"; }
    BackendResponse complete(const BackendRequest& request) override;

private:
    std::vector<ScriptRule> rules_;
    std::vector<std::size_t> used_;
    int call_counter_ = 0;
};

/// Script file format:
///   {"rules":[{"match":"text","regex":false,
///              "replies":[{"content":"...","tool_calls":[{"name":"..","arguments":{}}]}]}]}
std::vector<ScriptRule> script_from_json(const nlohmann::json& j);
std::vector<ScriptRule> load_script(const std::filesystem::path& path);

} // namespace drvsynth

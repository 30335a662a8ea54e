#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "drvsynth/backend.hpp"
#include "drvsynth/clock.hpp"
#include "drvsynth/error.hpp"

#include <fmt/format.h>

#include <regex>

namespace drvsynth {

namespace {

struct ParsedUrl {
    std::string origin;
    std::string path;
};

ParsedUrl parse_url(const std::string& url)
{
    static const std::regex pattern(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, pattern)) {
        throw Error(ErrorCode::FatalConfig, "endpoint must be an http(s) URL: " + url);
    }
    return {m[1].str(), m[2].matched ? m[2].str() : std::string("/")};
}

std::string wire_role(Role role)
{
    switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
    case Role::ToolResult: return "tool";
    }
    return "user";
}

} // namespace

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config))
{
    parse_url(config_.endpoint);
}

nlohmann::json HttpBackend::encode(const BackendRequest& request, const std::string& model, double temperature)
{
    nlohmann::json body;
    body["model"] = model;
    body["temperature"] = temperature;
    auto& messages = body["messages"] = nlohmann::json::array();
    for (const auto& turn : request.turns) {
        nlohmann::json m = {{"role", wire_role(turn.role)}, {"content", turn.content}};
        if (!turn.tool_calls.empty()) {
            auto& calls = m["tool_calls"] = nlohmann::json::array();
            for (const auto& c : turn.tool_calls) {
                nlohmann::json args(c.arguments);
                calls.push_back({{"id", c.id},
                                 {"type", "function"},
                                 {"function", {{"name", c.tool_name}, {"arguments", args.dump()}}}});
            }
        }
        if (turn.tool_call_id) {
            m["tool_call_id"] = *turn.tool_call_id;
        }
        messages.push_back(std::move(m));
    }
    if (!request.tools.empty()) {
        auto& tools = body["tools"] = nlohmann::json::array();
        for (const auto& spec : request.tools) {
            nlohmann::json properties = nlohmann::json::object();
            nlohmann::json required = nlohmann::json::array();
            for (const auto& p : spec.parameters) {
                properties[p.name] = {{"type", p.type_hint}, {"description", p.description}};
                if (p.required) {
                    required.push_back(p.name);
                }
            }
            tools.push_back({{"type", "function"},
                             {"function",
                              {{"name", spec.name},
                               {"description", spec.description},
                               {"parameters", {{"type", "object"}, {"properties", properties}, {"required", required}}}}}});
        }
    }
    return body;
}

ChatTurn HttpBackend::decode(const nlohmann::json& body)
{
    try {
        const auto& message = body.at("choices").at(0).at("message");
        ChatTurn turn = ChatTurn::assistant("");
        if (message.contains("content") && message.at("content").is_string()) {
            turn.content = message.at("content").get<std::string>();
        }
        if (message.contains("tool_calls") && message.at("tool_calls").is_array()) {
            for (const auto& c : message.at("tool_calls")) {
                ToolInvocation call;
                call.id = c.value("id", std::string());
                const auto& fn = c.at("function");
                call.tool_name = fn.at("name").get<std::string>();
                nlohmann::json args = nlohmann::json::object();
                if (fn.contains("arguments")) {
                    const auto& raw = fn.at("arguments");
                    args = raw.is_string() ? (raw.get<std::string>().empty() ? nlohmann::json::object()
                                                                             : nlohmann::json::parse(raw.get<std::string>()))
                                           : raw;
                }
                if (!args.is_object()) {
                    throw Error(ErrorCode::MalformedResponse, "tool arguments are not an object");
                }
                for (const auto& [key, value] : args.items()) {
                    call.arguments[key] = value.is_string() ? value.get<std::string>() : value.dump();
                }
                turn.tool_calls.push_back(std::move(call));
            }
        }
        return turn;
    }
    catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedResponse, std::string("chat completion: ") + e.what());
    }
}

BackendResponse HttpBackend::complete(const BackendRequest& request)
{
    auto url = parse_url(config_.endpoint);
    httplib::Client client(url.origin);
    auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(Seconds(config_.timeout_seconds));
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    httplib::Headers headers;
    if (!config_.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + config_.api_key);
    }
    auto body = encode(request, config_.model, config_.temperature).dump();
    auto res = client.Post(url.path, headers, body, "application/json");
    if (!res) {
        throw Error(ErrorCode::BackendUnreachable,
                    fmt::format("{}: {}", config_.endpoint, httplib::to_string(res.error())));
    }

    BackendResponse out;
    out.status = res->status;
    if (out.throttled()) {
        if (res->has_header("Retry-After")) {
            try {
                out.retry_after = std::stod(res->get_header_value("Retry-After"));
            }
            catch (const std::exception&) {
                // HTTP-date values fall back to the backoff schedule
            }
        }
        return out;
    }
    if (res->status == 401 || res->status == 403 || res->status == 404) {
        throw Error(ErrorCode::FatalConfig, fmt::format("endpoint answered HTTP {}: {}", res->status,
                                                         res->body.substr(0, 500)));
    }
    if (res->status < 200 || res->status >= 300) {
        throw Error(ErrorCode::BackendUnreachable,
                    fmt::format("endpoint answered HTTP {}: {}", res->status, res->body.substr(0, 500)));
    }
    nlohmann::json parsed;
    try {
        parsed = nlohmann::json::parse(res->body);
    }
    catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::MalformedResponse, std::string("response is not JSON: ") + e.what());
    }
    out.turn = decode(parsed);
    for (auto& call : out.turn.tool_calls) {
        if (call.id.empty()) {
            call.id = "call_" + std::to_string(++call_counter_);
        }
    }
    return out;
}

} // namespace drvsynth

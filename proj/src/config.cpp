#include "drvsynth/config.hpp"

#include "drvsynth/error.hpp"

#include <fmt/format.h>

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace drvsynth {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(BackendKind kind) noexcept
{
    switch (kind) {
    case BackendKind::Http: return "http";
    case BackendKind::Replay: return "replay";
    case BackendKind::Scripted: return "scripted";
    }
    return "unknown";
}

void PipelineConfig::validate() const
{
    budgets.validate();
    if (parallelism < 1) {
        throw Error(ErrorCode::FatalConfig, "parallelism must be at least 1");
    }
    if (compiler_template.find("{source}") == std::string::npos ||
        compiler_template.find("{output}") == std::string::npos) {
        throw Error(ErrorCode::FatalConfig, "compiler_template needs {source} and {output}");
    }
    auto need = [&](const char* key) {
        if (!backend_params.contains(key) || backend_params.at(key).empty()) {
            throw Error(ErrorCode::FatalConfig,
                        fmt::format("{} backend needs backend_params.{}", to_string(backend), key));
        }
    };
    switch (backend) {
    case BackendKind::Http:
        need("endpoint");
        need("model");
        break;
    case BackendKind::Scripted: need("script"); break;
    case BackendKind::Replay: need("transcripts"); break;
    }
}

namespace {

bool looks_secret(const std::string& key)
{
    std::string k;
    for (char c : key) {
        k += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    for (const char* word : {"api_key", "apikey", "token", "secret", "password"}) {
        if (k.find(word) != std::string::npos) {
            return true;
        }
    }
    return false;
}

fs::path resolve(const fs::path& base, const std::string& p)
{
    fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

template <typename T>
T get(const json& j, const char* key)
{
    try {
        return j.at(key).get<T>();
    }
    catch (const json::exception& e) {
        throw Error(ErrorCode::FatalConfig, fmt::format("config key '{}': {}", key, e.what()));
    }
}

} // namespace

PipelineConfig config_from_json(const json& j, const fs::path& base_dir)
{
    if (!j.is_object()) {
        throw Error(ErrorCode::FatalConfig, "config must be a JSON object");
    }
    static const std::set<std::string> known = {"library",       "backend",    "backend_params", "compiler_template",
                                                "disassembler",  "budgets",    "parallelism",    "workspace",
                                                "denylist",      "prompts_dir", "context_ceiling_tokens"};
    for (const auto& [key, value] : j.items()) {
        if (looks_secret(key)) {
            throw Error(ErrorCode::FatalConfig, "credentials are read from the environment only, not '" + key + "'");
        }
        if (!known.contains(key)) {
            throw Error(ErrorCode::FatalConfig, "unknown config key '" + key + "'");
        }
    }

    PipelineConfig c;
    if (j.contains("library")) {
        c.library_path = resolve(base_dir, get<std::string>(j, "library"));
    }
    bool rate_given = false;
    if (j.contains("backend")) {
        auto name = get<std::string>(j, "backend");
        if (name == "http") {
            c.backend = BackendKind::Http;
        }
        else if (name == "replay") {
            c.backend = BackendKind::Replay;
        }
        else if (name == "scripted") {
            c.backend = BackendKind::Scripted;
        }
        else {
            throw Error(ErrorCode::FatalConfig, "backend must be http, replay or scripted");
        }
    }
    if (j.contains("backend_params")) {
        for (const auto& [key, value] : j.at("backend_params").items()) {
            if (looks_secret(key)) {
                throw Error(ErrorCode::FatalConfig,
                            "credentials are read from the environment only, not backend_params." + key);
            }
            std::string text = value.is_string() ? value.get<std::string>() : value.dump();
            if (key == "script" || key == "transcripts") {
                text = resolve(base_dir, text).string();
            }
            c.backend_params[key] = text;
        }
    }
    if (j.contains("compiler_template")) {
        c.compiler_template = get<std::string>(j, "compiler_template");
    }
    if (j.contains("disassembler")) {
        c.disassembler_cmd = get<std::string>(j, "disassembler");
    }
    if (j.contains("budgets")) {
        const auto& b = j.at("budgets");
        static const std::set<std::string> budget_keys = {"max_analysis_turns", "max_generation_attempts",
                                                          "smoke_run_seconds", "rate_limit_per_minute"};
        for (const auto& [key, value] : b.items()) {
            if (!budget_keys.contains(key)) {
                throw Error(ErrorCode::FatalConfig, "unknown budgets key '" + key + "'");
            }
        }
        if (b.contains("max_analysis_turns")) {
            c.budgets.max_analysis_turns = get<int>(b, "max_analysis_turns");
        }
        if (b.contains("max_generation_attempts")) {
            c.budgets.max_generation_attempts = get<int>(b, "max_generation_attempts");
        }
        if (b.contains("smoke_run_seconds")) {
            c.budgets.smoke_run_seconds = Seconds(get<double>(b, "smoke_run_seconds"));
        }
        if (b.contains("rate_limit_per_minute")) {
            c.budgets.rate_budget = get<int>(b, "rate_limit_per_minute");
            rate_given = true;
        }
    }
    if (!rate_given && c.backend == BackendKind::Http) {
        c.budgets.rate_budget = 10;
    }
    if (j.contains("parallelism")) {
        c.parallelism = get<int>(j, "parallelism");
    }
    if (j.contains("workspace")) {
        c.workspace = resolve(base_dir, get<std::string>(j, "workspace"));
    }
    if (j.contains("denylist")) {
        c.denylist_patterns = get<std::vector<std::string>>(j, "denylist");
    }
    if (j.contains("prompts_dir")) {
        c.prompts_dir = resolve(base_dir, get<std::string>(j, "prompts_dir"));
    }
    if (j.contains("context_ceiling_tokens")) {
        c.context_ceiling_tokens = get<std::size_t>(j, "context_ceiling_tokens");
    }
    return c;
}

PipelineConfig load_config(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::FatalConfig, "cannot read config " + path.string());
    }
    json j;
    try {
        j = json::parse(in);
    }
    catch (const json::exception& e) {
        throw Error(ErrorCode::FatalConfig, path.string() + ": " + e.what());
    }
    return config_from_json(j, fs::absolute(path).parent_path());
}

EnvLookup process_environment()
{
    return [](const std::string& name) -> std::optional<std::string> {
        const char* v = std::getenv(name.c_str());
        if (v == nullptr || *v == '\0') {
            return std::nullopt;
        }
        return std::string(v);
    };
}

void apply_environment(PipelineConfig& config, const EnvLookup& env)
{
    if (auto v = env("DRVSYNTH_ENDPOINT")) {
        config.backend_params["endpoint"] = *v;
    }
    if (auto v = env("DRVSYNTH_MODEL")) {
        config.backend_params["model"] = *v;
    }
    if (auto v = env("DRVSYNTH_DISASSEMBLER")) {
        config.disassembler_cmd = *v;
    }
}

json config_snapshot(const PipelineConfig& c)
{
    return {{"library", c.library_path.string()},
            {"backend", std::string(to_string(c.backend))},
            {"backend_params", c.backend_params},
            {"compiler_template", c.compiler_template},
            {"disassembler", c.disassembler_cmd ? json(*c.disassembler_cmd) : json("builtin")},
            {"budgets",
             {{"max_analysis_turns", c.budgets.max_analysis_turns},
              {"max_generation_attempts", c.budgets.max_generation_attempts},
              {"smoke_run_seconds", c.budgets.smoke_run_seconds.count()},
              {"rate_limit_per_minute", c.budgets.rate_budget}}},
            {"parallelism", c.parallelism},
            {"denylist", c.denylist_patterns},
            {"prompts_dir", c.prompts_dir ? json(c.prompts_dir->string()) : json(nullptr)},
            {"context_ceiling_tokens", c.context_ceiling_tokens}};
}

BackendFactory make_backend_factory(const PipelineConfig& config, const EnvLookup& env)
{
    switch (config.backend) {
    case BackendKind::Scripted: {
        auto rules = load_script(config.backend_params.at("script"));
        return [rules](const std::string&) { return std::make_unique<ScriptedBackend>(rules); };
    }
    case BackendKind::Replay: {
        fs::path dir = config.backend_params.at("transcripts");
        if (!fs::is_directory(dir)) {
            throw Error(ErrorCode::FatalConfig, "transcript directory not found: " + dir.string());
        }
        return [dir](const std::string& function) -> std::unique_ptr<Backend> {
            auto path = dir / function / "transcript.json";
            if (!fs::exists(path)) {
                throw Error(ErrorCode::TranscriptMissing, "no transcript for " + function + " at " + path.string());
            }
            return std::make_unique<ReplayBackend>(load_transcript(path));
        };
    }
    case BackendKind::Http: {
        HttpBackendConfig http;
        http.endpoint = config.backend_params.at("endpoint");
        http.model = config.backend_params.at("model");
        http.api_key = env("DRVSYNTH_API_KEY").value_or("");
        if (auto it = config.backend_params.find("timeout_seconds"); it != config.backend_params.end()) {
            http.timeout_seconds = std::stod(it->second);
        }
        if (auto it = config.backend_params.find("temperature"); it != config.backend_params.end()) {
            http.temperature = std::stod(it->second);
        }
        return [http](const std::string&) { return std::make_unique<HttpBackend>(http); };
    }
    }
    throw Error(ErrorCode::FatalConfig, "unknown backend");
}

std::unique_ptr<DisassemblyProvider> make_disassembler(const PipelineConfig& config)
{
    if (!config.disassembler_cmd || *config.disassembler_cmd == "builtin") {
        return std::make_unique<BuiltinDisassembler>();
    }
    std::vector<std::string> argv;
    std::istringstream words(*config.disassembler_cmd);
    std::string w;
    while (words >> w) {
        argv.push_back(w);
    }
    if (argv.empty()) {
        throw Error(ErrorCode::FatalConfig, "empty disassembler command");
    }
    return std::make_unique<ExternalDisassembler>(std::move(argv));
}

int exit_code_for(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::NotElf:
    case ErrorCode::UnsupportedClass:
    case ErrorCode::NoDynsym:
    case ErrorCode::Truncated:
    case ErrorCode::IoFailure:
    case ErrorCode::DecodeFailure:
    case ErrorCode::MalformedLedger:
    case ErrorCode::TranscriptMissing:
        return 2;
    case ErrorCode::BackendUnreachable:
    case ErrorCode::RateLimitedExhausted:
    case ErrorCode::MalformedResponse:
        return 4;
    default:
        return 3;
    }
}

} // namespace drvsynth

#pragma once

#include "drvsynth/backend.hpp"
#include "drvsynth/disassembly.hpp"
#include "drvsynth/error.hpp"
#include "drvsynth/fuzzable.hpp"
#include "drvsynth/orchestrator.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace drvsynth {

enum class BackendKind { Http, Replay, Scripted };

std::string_view to_string(BackendKind kind) noexcept;

struct PipelineConfig {
    std::filesystem::path library_path;
    BackendKind backend = BackendKind::Http;
    /// http: endpoint, model, timeout_seconds; scripted: script; replay: transcripts.
    std::map<std::string, std::string> backend_params;
    std::string compiler_template{kDefaultCompileTemplate};
    /// Whitespace-separated command of an external disassembler; unset uses the builtin one.
    std::optional<std::string> disassembler_cmd;
    Budgets budgets;
    int parallelism = 2;
    std::filesystem::path workspace = "drvsynth-work";
    std::vector<std::string> denylist_patterns = default_denylist();
    std::optional<std::filesystem::path> prompts_dir;
    std::size_t context_ceiling_tokens = 0;

    /// Throws FATAL_CONFIG.
    void validate() const;
};

/// Reads a JSON config. Relative paths resolve against `base_dir`. Unknown
/// keys and anything that looks like a credential are FATAL_CONFIG.
PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

EnvLookup process_environment();

/// DRVSYNTH_ENDPOINT, DRVSYNTH_MODEL and DRVSYNTH_DISASSEMBLER override the file.
void apply_environment(PipelineConfig& config, const EnvLookup& env);

/// Settings as JSON for the ledger header; never contains secrets.
nlohmann::json config_snapshot(const PipelineConfig& config);

/// Backend per session. HTTP reads DRVSYNTH_API_KEY from `env`.
BackendFactory make_backend_factory(const PipelineConfig& config, const EnvLookup& env);

std::unique_ptr<DisassemblyProvider> make_disassembler(const PipelineConfig& config);

/// Process exit status for an error: 2 input, 3 configuration, 4 backend.
int exit_code_for(ErrorCode code) noexcept;

} // namespace drvsynth

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace drvsynth {

enum class TemplateId { System, Analysis, Generation, CompileRepair, RuntimeRepair };

std::string_view to_string(TemplateId id) noexcept;
/// File name of the template inside a prompt directory, e.g. `generation.txt`.
std::string template_file_name(TemplateId id);

inline constexpr TemplateId kAllTemplates[] = {TemplateId::System, TemplateId::Analysis, TemplateId::Generation,
                                               TemplateId::CompileRepair, TemplateId::RuntimeRepair};

std::string_view default_template(TemplateId id) noexcept;

using PromptContext = std::map<std::string, std::string>;

/// Single-pass `{{name}}` substitution; bound values are never re-expanded.
/// Throws MISSING_PLACEHOLDER for a name without a binding.
std::string render_template(std::string_view text, const PromptContext& context);

/// Caps captured tool output before it is embedded in a prompt. Text within
/// the cap is returned unchanged; longer text keeps its first `cap` bytes
/// followed by one truncation marker line.
std::string cap_output(std::string_view text, std::size_t cap = 32 * 1024);
std::string truncation_marker(std::size_t dropped);

class PromptSet {
public:
    /// Built-in templates.
    PromptSet() = default;

    /// Built-ins overridden by any `<template>.txt` found in `directory`.
    static PromptSet from_directory(const std::filesystem::path& directory);

    std::string render(TemplateId id, const PromptContext& context) const;
    std::string_view text(TemplateId id) const;

private:
    std::map<TemplateId, std::string> overrides_;
};

} // namespace drvsynth

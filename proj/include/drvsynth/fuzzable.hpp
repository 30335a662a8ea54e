#pragma once

#include "drvsynth/exports.hpp"
#include "drvsynth/signature.hpp"

#include <map>
#include <string>
#include <vector>

namespace drvsynth {

/// Default glob patterns for runtime hooks and reserved names.
std::vector<std::string> default_denylist();

struct FuzzableSelection {
    std::vector<ExportedFunction> functions;
    /// Signatures of entries whose inference succeeded, keyed by name.
    std::map<std::string, InferredSignature> signatures;

    std::vector<std::string> fuzzable_names() const;
};

/// Annotates every export; nothing is dropped. An export is fuzzable when it
/// matches no denylist pattern and its inferred arity is at least one.
/// Inference failures mark the entry NOT_FUNCTION.
FuzzableSelection filter_fuzzable(std::vector<ExportedFunction> exports, SignatureProvider& provider,
                                  const std::vector<std::string>& denylist = default_denylist());

} // namespace drvsynth

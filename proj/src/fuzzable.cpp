#include "drvsynth/fuzzable.hpp"

#include "drvsynth/error.hpp"

#include <fnmatch.h>

namespace drvsynth {

std::vector<std::string> default_denylist()
{
    return {"_init", "_fini", "__*"};
}

std::vector<std::string> FuzzableSelection::fuzzable_names() const
{
    std::vector<std::string> out;
    for (const auto& f : functions) {
        if (f.fuzzable) {
            out.push_back(f.name);
        }
    }
    return out;
}

FuzzableSelection filter_fuzzable(std::vector<ExportedFunction> exports, SignatureProvider& provider,
                                  const std::vector<std::string>& denylist)
{
    FuzzableSelection out;
    for (auto& fn : exports) {
        fn.fuzzable = false;
        fn.exclusion_reason.reset();
        bool denied = false;
        for (const auto& pattern : denylist) {
            if (::fnmatch(pattern.c_str(), fn.name.c_str(), 0) == 0) {
                denied = true;
                break;
            }
        }
        if (denied) {
            fn.exclusion_reason = ExclusionReason::DenylistPattern;
            continue;
        }
        try {
            auto sig = provider.signature_for(fn);
            if (sig.params.empty()) {
                fn.exclusion_reason = ExclusionReason::ZeroArity;
            }
            else {
                fn.fuzzable = true;
            }
            out.signatures.emplace(fn.name, std::move(sig));
        }
        catch (const Error&) {
            fn.exclusion_reason = ExclusionReason::NotFunction;
        }
    }
    out.functions = std::move(exports);
    return out;
}

} // namespace drvsynth

#pragma once

#include "drvsynth/disassembly.hpp"
#include "drvsynth/exports.hpp"

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace drvsynth {

enum class TypeClass { Int64, Int32, Float64, PtrOpaque, Void };
enum class Confidence { Derived, Defaulted };

std::string_view to_string(TypeClass type) noexcept;
std::string_view to_string(Confidence confidence) noexcept;

struct InferredSignature {
    std::string function_name;
    TypeClass return_class = TypeClass::Int64;
    std::vector<TypeClass> params;
    Confidence confidence = Confidence::Derived;

    /// C declaration such as `int64_t add(int64_t arg1, int64_t arg2)`.
    std::string render() const;

    bool operator==(const InferredSignature&) const = default;
};

/// The SysV integer argument registers in order.
inline constexpr std::array<std::string_view, 6> kArgumentRegisters = {"rdi", "rsi", "rdx", "rcx", "r8", "r9"};

/// Infers a signature from a function's disassembly.
///
/// Only instructions reachable from the entry (following fall-through and
/// direct branches inside the listing) are inspected, in address order.
/// Arity is one past the highest argument register read before being
/// written. A parameter is PTR_OPAQUE when its value reaches a memory base
/// register, an indirect call target, or a pointer argument of a recognized
/// memory/string routine; every other parameter is INT64. The return class is
/// VOID when no value is left in rax/xmm0 at a return.
///
/// Throws DecodeFailure when a reachable instruction is `(bad)`.
InferredSignature infer_signature(const Disassembly& disassembly);

InferredSignature infer_signature(const BinaryImage& image, const ExportedFunction& function,
                                  DisassemblyProvider& provider);

class SignatureProvider {
public:
    virtual ~SignatureProvider() = default;
    virtual InferredSignature signature_for(const ExportedFunction& function) = 0;
};

class DisassemblySignatureProvider final : public SignatureProvider {
public:
    DisassemblySignatureProvider(const BinaryImage& image, DisassemblyProvider& provider)
        : image_(image), provider_(provider)
    {
    }

    InferredSignature signature_for(const ExportedFunction& function) override
    {
        return infer_signature(image_, function, provider_);
    }

private:
    const BinaryImage& image_;
    DisassemblyProvider& provider_;
};

} // namespace drvsynth

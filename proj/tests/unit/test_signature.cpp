#include "drvsynth/error.hpp"
#include "drvsynth/fuzzable.hpp"
#include "drvsynth/signature.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <map>

using namespace drvsynth;
using testing_support::fixture;

namespace {

std::map<std::string, std::string> rendered(const std::string& lib, DisassemblyProvider& provider)
{
    auto image = load_binary(fixture(lib));
    std::map<std::string, std::string> out;
    for (const auto& fn : list_exports(image)) {
        out[fn.name] = infer_signature(image, fn, provider).render();
    }
    return out;
}

Disassembly listing(const std::string& name, const std::string& text)
{
    Disassembly d;
    d.function_name = name;
    d.instructions = Disassembly::parse_text(text);
    return d;
}

// Frozen after hand-checking the -O0 fixture listings.
const std::map<std::string, std::string> kBasicGolden = {
    {"add", "int64_t add(int64_t arg1, int64_t arg2)"},
    {"concat", "int64_t concat(void *arg1, void *arg2)"},
    {"parse_buf", "int64_t parse_buf(void *arg1, int64_t arg2)"},
    {"get_version", "int64_t get_version(void)"},
    {"reg_callback", "int64_t reg_callback(void *arg1, int64_t arg2)"},
    {"process_blob", "int64_t process_blob(void *arg1)"},
};

const std::map<std::string, std::string> kEdgeGolden = {
    {"weak_hook", "int64_t weak_hook(int64_t arg1)"},
    {"__internal_reset", "void __internal_reset(int64_t arg1)"},
    {"sum7", "int64_t sum7(int64_t arg1, int64_t arg2, int64_t arg3, int64_t arg4, int64_t arg5, int64_t arg6)"},
    {"scale", "double scale(int64_t arg1)"},
    {"store_value", "void store_value(void *arg1, int64_t arg2)"},
    {"primary_entry", "int64_t primary_entry(int64_t arg1)"},
    {"alias_entry", "int64_t alias_entry(int64_t arg1)"},
    {"sum_ints", "int64_t sum_ints(int64_t arg1)"},
};

} // namespace

TEST(InferSignature, BasicFixtureGolden)
{
    BuiltinDisassembler builtin;
    EXPECT_EQ(rendered("libfixture_basic.so", builtin), kBasicGolden);
    EXPECT_EQ(rendered("libfixture_basic_stripped.so", builtin), kBasicGolden);
}

TEST(InferSignature, EdgeFixtureGolden)
{
    BuiltinDisassembler builtin;
    EXPECT_EQ(rendered("libfixture_edge.so", builtin), kEdgeGolden);
    EXPECT_EQ(rendered("libfixture_edge_stripped.so", builtin), kEdgeGolden);
}

TEST(InferSignature, OptimizedBuildKeepsArity)
{
    BuiltinDisassembler builtin;
    auto image = load_binary(fixture("libfixture_optimized.so"));
    std::map<std::string, size_t> arity;
    for (const auto& fn : list_exports(image)) {
        arity[fn.name] = infer_signature(image, fn, builtin).params.size();
    }
    std::map<std::string, size_t> expected = {{"add", 2},          {"concat", 2},       {"parse_buf", 2},
                                              {"get_version", 0}, {"reg_callback", 2}, {"process_blob", 1}};
    EXPECT_EQ(arity, expected);
}

TEST(InferSignature, ExternalAdapterAgreesWithBuiltin)
{
    BuiltinDisassembler builtin;
    ExternalDisassembler external({testing_support::tool("objdump_adapter.py").string()});
    for (const char* lib : {"libfixture_basic.so", "libfixture_edge.so", "libfixture_optimized.so"}) {
        EXPECT_EQ(rendered(lib, builtin), rendered(lib, external)) << lib;
    }
}

TEST(InferSignature, SevenArgumentsTruncateAndDefault)
{
    BuiltinDisassembler builtin;
    auto image = load_binary(fixture("libfixture_edge.so"));
    auto exports = list_exports(image);
    auto sum7 = std::ranges::find(exports, std::string("sum7"), &ExportedFunction::name);
    auto sig = infer_signature(image, *sum7, builtin);
    EXPECT_EQ(sig.params.size(), 6u);
    EXPECT_EQ(sig.confidence, Confidence::Defaulted);
    for (const auto& fn : exports) {
        if (fn.name != "sum7") {
            EXPECT_EQ(infer_signature(image, fn, builtin).confidence, Confidence::Derived) << fn.name;
        }
    }
}

TEST(InferSignature, WrapperPassingArgumentOnIsInt64)
{
    // Shape of an -O0 wrapper that forwards its pointer argument to a non-memory routine.
    auto d = listing("cJSON_Print", "1000:\tpush\trbp\n"
                                    "1001:\tmov\trbp,rsp\n"
                                    "1004:\tsub\trsp,0x10\n"
                                    "1008:\tmov\tQWORD PTR [rbp-0x8],rdi\n"
                                    "100c:\tmov\trax,QWORD PTR [rbp-0x8]\n"
                                    "1010:\tmov\tesi,0x1\n"
                                    "1015:\tmov\trdi,rax\n"
                                    "1018:\tcall\t1100 <print>\n"
                                    "101d:\tleave\t\n"
                                    "101e:\tret\t\n");
    EXPECT_EQ(infer_signature(d).render(), "int64_t cJSON_Print(int64_t arg1)");
}

TEST(InferSignature, StringRoutineUpgradesToPointer)
{
    auto d = listing("name_len", "1000:\tpush\trbp\n"
                                 "1001:\tmov\trbp,rsp\n"
                                 "1004:\tsub\trsp,0x10\n"
                                 "1008:\tmov\tQWORD PTR [rbp-0x8],rdi\n"
                                 "100c:\tmov\trax,QWORD PTR [rbp-0x8]\n"
                                 "1010:\tmov\trdi,rax\n"
                                 "1013:\tcall\t1100 <strlen@plt>\n"
                                 "1018:\tleave\t\n"
                                 "1019:\tret\t\n");
    EXPECT_EQ(infer_signature(d).render(), "int64_t name_len(void *arg1)");
}

TEST(InferSignature, NoArgumentReadsIsZeroArity)
{
    auto d = listing("tick", "1000:\tmov\teax,0x2a\n"
                             "1005:\tret\t\n");
    auto sig = infer_signature(d);
    EXPECT_TRUE(sig.params.empty());
    EXPECT_EQ(sig.return_class, TypeClass::Int64);
}

TEST(InferSignature, NoReturnWriteIsVoid)
{
    auto d = listing("poke", "1000:\tmov\tDWORD PTR [rdi],esi\n"
                             "1002:\tret\t\n");
    auto sig = infer_signature(d);
    EXPECT_EQ(sig.return_class, TypeClass::Void);
    EXPECT_EQ(sig.render(), "void poke(void *arg1, int64_t arg2)");
}

TEST(InferSignature, WriteBeforeReadDoesNotCount)
{
    auto d = listing("f", "1000:\txor\tesi,esi\n"
                          "1002:\tmov\trdx,rsi\n"
                          "1005:\tmov\teax,edi\n"
                          "1007:\tret\t\n");
    EXPECT_EQ(infer_signature(d).params.size(), 1u);
}

TEST(InferSignature, TrailingUnreachableBytesDoNotChangeArity)
{
    const std::string body = "1000:\tmov\teax,edi\n"
                             "1002:\tadd\teax,esi\n"
                             "1004:\tret\t\n";
    auto base = infer_signature(listing("f", body));
    auto padded = infer_signature(listing("f", body + "1005:\t(bad)\t\n"
                                                      "1006:\tmov\trax,r9\n"
                                                      "1009:\tret\t\n"));
    EXPECT_EQ(base, padded);
    EXPECT_EQ(base.params.size(), 2u);
}

TEST(InferSignature, BranchTargetsAreFollowed)
{
    auto d = listing("g", "1000:\ttest\tedi,edi\n"
                          "1002:\tje\t1008 <g+0x8>\n"
                          "1004:\tmov\teax,esi\n"
                          "1006:\tret\t\n"
                          "1007:\tnop\t\n"
                          "1008:\tmov\trax,rdx\n"
                          "100b:\tret\t\n");
    EXPECT_EQ(infer_signature(d).params.size(), 3u);
}

TEST(InferSignature, ReachableBadInstructionIsDecodeFailure)
{
    auto d = listing("broken", "1000:\tmov\teax,edi\n"
                               "1002:\t(bad)\t\n"
                               "1003:\tret\t\n");
    try {
        infer_signature(d);
        FAIL() << "expected DECODE_FAILURE";
    }
    catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DecodeFailure);
    }
}

TEST(InferSignature, Deterministic)
{
    BuiltinDisassembler builtin;
    EXPECT_EQ(rendered("libfixture_basic.so", builtin), rendered("libfixture_basic.so", builtin));
}

TEST(InferSignature, RenderAndNames)
{
    InferredSignature sig{"f", TypeClass::PtrOpaque, {TypeClass::Int64, TypeClass::Float64}, Confidence::Derived};
    EXPECT_EQ(sig.render(), "void *f(int64_t arg1, double arg2)");
    EXPECT_EQ(to_string(TypeClass::PtrOpaque), "PTR_OPAQUE");
    EXPECT_EQ(to_string(Confidence::Defaulted), "DEFAULTED");
    EXPECT_EQ(kArgumentRegisters.front(), "rdi");
}

namespace {

class FailingProvider final : public SignatureProvider {
public:
    InferredSignature signature_for(const ExportedFunction& fn) override
    {
        if (fn.name == "concat") {
            throw Error(ErrorCode::DecodeFailure, "synthetic failure");
        }
        return inner_.signature_for(fn);
    }

    FailingProvider(const BinaryImage& image, DisassemblyProvider& d) : inner_(image, d) {}

private:
    DisassemblySignatureProvider inner_;
};

} // namespace

TEST(FilterFuzzable, BasicFixtureHasFiveFuzzable)
{
    auto image = load_binary(fixture("libfixture_basic_stripped.so"));
    BuiltinDisassembler builtin;
    DisassemblySignatureProvider provider(image, builtin);
    auto exports = list_exports(image);
    auto selection = filter_fuzzable(exports, provider);
    ASSERT_EQ(selection.functions.size(), exports.size());
    EXPECT_EQ(selection.fuzzable_names().size(), 5u);
    for (size_t i = 0; i < exports.size(); ++i) {
        const auto& f = selection.functions[i];
        EXPECT_EQ(f.name, exports[i].name);
        EXPECT_EQ(f.fuzzable, !f.exclusion_reason.has_value()) << f.name;
        if (f.name == "get_version") {
            EXPECT_EQ(f.exclusion_reason, ExclusionReason::ZeroArity);
        }
    }
}

TEST(FilterFuzzable, DenylistAndProviderFailure)
{
    auto image = load_binary(fixture("libfixture_edge.so"));
    BuiltinDisassembler builtin;
    DisassemblySignatureProvider provider(image, builtin);
    auto exports = list_exports(image);
    ExportedFunction finalize;
    finalize.name = "__cxa_finalize";
    exports.push_back(finalize);
    auto selection = filter_fuzzable(exports, provider);
    for (const auto& f : selection.functions) {
        if (f.name.starts_with("__")) {
            EXPECT_EQ(f.exclusion_reason, ExclusionReason::DenylistPattern) << f.name;
        }
    }

    auto basic = load_binary(fixture("libfixture_basic.so"));
    FailingProvider failing(basic, builtin);
    auto annotated = filter_fuzzable(list_exports(basic), failing);
    auto concat = std::ranges::find(annotated.functions, std::string("concat"), &ExportedFunction::name);
    EXPECT_FALSE(concat->fuzzable);
    EXPECT_EQ(concat->exclusion_reason, ExclusionReason::NotFunction);
    EXPECT_EQ(annotated.fuzzable_names().size(), 4u);
}

TEST(FilterFuzzable, CustomDenylist)
{
    auto image = load_binary(fixture("libfixture_basic.so"));
    BuiltinDisassembler builtin;
    DisassemblySignatureProvider provider(image, builtin);
    auto selection = filter_fuzzable(list_exports(image), provider, {"*_buf", "add"});
    auto names = selection.fuzzable_names();
    EXPECT_EQ(names.size(), 3u);
    EXPECT_EQ(std::ranges::count(names, std::string("parse_buf")), 0);
}

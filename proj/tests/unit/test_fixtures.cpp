#include "drvsynth/elf_image.hpp"
#include "drvsynth/fuzzable.hpp"
#include "scenarios.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace drvsynth;
using namespace testing_support;
using nlohmann::json;

namespace {

json manifest()
{
    return json::parse(read_text(std::filesystem::path(DRVSYNTH_FIXTURE_SRC_DIR) / "manifest.json"));
}

/// Defined GLOBAL/WEAK FUNC names from readelf's dynamic symbol dump.
std::set<std::string> oracle_names(const std::filesystem::path& lib)
{
    std::set<std::string> names;
    for (const auto& line : lines(capture("readelf -W --dyn-syms " + lib.string()))) {
        std::istringstream in(line);
        std::string num, value, size, type, bind, vis, ndx, name;
        if (!(in >> num >> value >> size >> type >> bind >> vis >> ndx >> name)) {
            continue;
        }
        if (type == "FUNC" && (bind == "GLOBAL" || bind == "WEAK") && ndx != "UND") {
            names.insert(name.substr(0, name.find('@')));
        }
    }
    return names;
}

} // namespace

TEST(FixtureManifest, MatchesOracleAndInference)
{
    const json doc = manifest();
    ASSERT_EQ(doc["fixtures"].size(), 3u);
    std::size_t checked = 0;
    for (const auto& fx : doc["fixtures"]) {
        std::string name = fx["name"];
        for (const std::string& variant : {std::string("lib") + name + ".so", "lib" + name + "_stripped.so"}) {
            SCOPED_TRACE(variant);
            auto path = fixture(variant);
            std::set<std::string> expected;
            for (const auto& e : fx["expected_exports"]) {
                expected.insert(e["name"].get<std::string>());
            }
            EXPECT_EQ(oracle_names(path), expected);

            auto image = load_binary(path);
            BuiltinDisassembler disasm;
            DisassemblySignatureProvider sigs(image, disasm);
            auto selection = filter_fuzzable(list_exports(image), sigs);
            for (const auto& e : fx["expected_exports"]) {
                auto it = std::find_if(selection.functions.begin(), selection.functions.end(),
                                       [&](const auto& f) { return f.name == e["name"]; });
                ASSERT_NE(it, selection.functions.end()) << e["name"];
                EXPECT_EQ(it->fuzzable, e["fuzzable"].get<bool>()) << e["name"];
                auto sig = infer_signature(image, *it, disasm);
                EXPECT_EQ(sig.params.size(), e["arity"].get<std::size_t>()) << e["name"];
                ++checked;
            }
        }
    }
    EXPECT_EQ(checked, 2u * (6u + 8u + 6u));
}

TEST(FixtureManifest, StrippedVariantsExportTheSameSymbols)
{
    for (const char* name : {"fixture_basic", "fixture_edge", "fixture_optimized"}) {
        auto full = fixture(std::string("lib") + name + ".so");
        auto stripped = fixture(std::string("lib") + name + "_stripped.so");
        EXPECT_EQ(oracle_names(full), oracle_names(stripped)) << name;
        EXPECT_EQ(list_exports(load_binary(full)), list_exports(load_binary(stripped))) << name;
        EXPECT_TRUE(capture("readelf -W --syms " + stripped.string()).find(".symtab") == std::string::npos);
    }
}

TEST(FixtureManifest, BuiltWithoutWarnings)
{
    TempDir dir;
    for (const char* src : {"fixture_basic.c", "fixture_edge.c"}) {
        auto cmd = std::string("cc -Wall -Wextra -O0 -fPIC -shared -o ") + (dir.path() / "x.so").string() + " " +
                   (std::filesystem::path(DRVSYNTH_FIXTURE_SRC_DIR) / src).string() + " 2>&1";
        EXPECT_EQ(capture(cmd), "") << src;
    }
}

#include "drvsynth/elf_image.hpp"
#include "drvsynth/error.hpp"
#include "drvsynth/exports.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <elf.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

using namespace drvsynth;
using testing_support::fixture;

namespace {

// Independent oracle: readelf's view of defined GLOBAL/WEAK FUNC dynamic symbols.
std::set<std::string> readelf_exports(const std::filesystem::path& lib)
{
    std::set<std::string> names;
    auto text = testing_support::capture("readelf --dyn-syms -W " + lib.string());
    for (const auto& line : testing_support::lines(text)) {
        std::istringstream in(line);
        std::string num, value, size, type, bind, vis, ndx, name;
        if (!(in >> num >> value >> size >> type >> bind >> vis >> ndx >> name)) {
            continue;
        }
        if (type != "FUNC" || (bind != "GLOBAL" && bind != "WEAK") || ndx == "UND") {
            continue;
        }
        names.insert(name.substr(0, name.find('@')));
    }
    return names;
}

std::set<std::string> names_of(const std::vector<ExportedFunction>& exports)
{
    std::set<std::string> out;
    for (const auto& e : exports) {
        out.insert(e.name);
    }
    return out;
}

std::vector<char> slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::filesystem::path& p, const std::vector<char>& bytes)
{
    std::ofstream out(p, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

ErrorCode load_error(const std::filesystem::path& p)
{
    try {
        load_binary(p);
    }
    catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "load_binary succeeded on " << p;
    return ErrorCode::IoFailure;
}

} // namespace

class ExportOracle : public ::testing::TestWithParam<std::string> {};

TEST_P(ExportOracle, MatchesReadelf)
{
    auto lib = fixture(GetParam());
    auto oracle = readelf_exports(lib);
    ASSERT_FALSE(oracle.empty());
    EXPECT_EQ(names_of(list_exports(load_binary(lib))), oracle);
}

INSTANTIATE_TEST_SUITE_P(Fixtures, ExportOracle,
                         ::testing::Values("libfixture_basic.so", "libfixture_basic_stripped.so", "libfixture_edge.so",
                                           "libfixture_edge_stripped.so", "libfixture_optimized.so"));

TEST(ListExports, BasicFixtureHasSixNamedExports)
{
    auto exports = list_exports(load_binary(fixture("libfixture_basic.so")));
    std::set<std::string> expected = {"add", "concat", "parse_buf", "get_version", "reg_callback", "process_blob"};
    EXPECT_EQ(names_of(exports), expected);
    EXPECT_EQ(exports.size(), 6u);
}

TEST(ListExports, OrderedByAddressThenName)
{
    auto exports = list_exports(load_binary(fixture("libfixture_edge.so")));
    ASSERT_FALSE(exports.empty());
    EXPECT_TRUE(std::ranges::is_sorted(exports, [](const auto& a, const auto& b) {
        return a.address != b.address ? a.address < b.address : a.name < b.name;
    }));
    auto alias = std::ranges::find(exports, std::string("alias_entry"), &ExportedFunction::name);
    auto primary = std::ranges::find(exports, std::string("primary_entry"), &ExportedFunction::name);
    ASSERT_NE(alias, exports.end());
    ASSERT_NE(primary, exports.end());
    EXPECT_EQ(alias->address, primary->address);
    EXPECT_LT(alias, primary);
}

TEST(ListExports, WeakIncludedDataExcluded)
{
    auto exports = list_exports(load_binary(fixture("libfixture_edge.so")));
    auto weak = std::ranges::find(exports, std::string("weak_hook"), &ExportedFunction::name);
    ASSERT_NE(weak, exports.end());
    EXPECT_EQ(weak->binding, SymbolBinding::Weak);
    EXPECT_EQ(std::ranges::count(exports, std::string("fixture_counter"), &ExportedFunction::name), 0);
}

TEST(ListExports, UndefinedOnlyYieldsEmpty)
{
    BinaryImage image = load_binary(fixture("libfixture_basic.so"));
    std::erase_if(image.dynamic_symbols, [](const RawSymbol& s) { return s.defined(); });
    EXPECT_TRUE(list_exports(image).empty());
}

TEST(ListExports, DuplicateNamesKeepFirstDefinition)
{
    BinaryImage image = load_binary(fixture("libfixture_basic.so"));
    auto add = std::ranges::find(image.dynamic_symbols, std::string("add"), &RawSymbol::name);
    ASSERT_NE(add, image.dynamic_symbols.end());
    RawSymbol copy = *add;
    copy.value += 4;
    image.dynamic_symbols.push_back(copy);
    auto exports = list_exports(image);
    EXPECT_EQ(std::ranges::count(exports, std::string("add"), &ExportedFunction::name), 1);
    EXPECT_EQ(std::ranges::find(exports, std::string("add"), &ExportedFunction::name)->address, add->value);
}

TEST(LoadBinary, SymbolsResolveAndLieInSections)
{
    auto image = load_binary(fixture("libfixture_basic.so"));
    EXPECT_EQ(image.format, BinaryFormat::Elf64);
    EXPECT_EQ(image.machine, Machine::Amd64);
    EXPECT_GE(image.dynamic_symbols.size(), 6u);
    for (const auto& sym : image.dynamic_symbols) {
        if (sym.defined() && sym.type == SymbolType::Func) {
            EXPECT_NE(image.section_containing(sym.value), nullptr) << sym.name;
        }
    }
}

TEST(LoadBinary, Deterministic)
{
    EXPECT_TRUE(load_binary(fixture("libfixture_edge.so")) == load_binary(fixture("libfixture_edge.so")));
}

TEST(LoadBinary, DoesNotModifyInput)
{
    auto lib = fixture("libfixture_basic.so");
    auto before = slurp(lib);
    auto mtime = std::filesystem::last_write_time(lib);
    load_binary(lib);
    EXPECT_EQ(slurp(lib), before);
    EXPECT_EQ(std::filesystem::last_write_time(lib), mtime);
}

TEST(LoadBinary, ZeroBytesIsNotElf)
{
    testing_support::TempDir dir;
    auto p = dir.path() / "zeros";
    spit(p, std::vector<char>(4, 0));
    EXPECT_EQ(load_error(p), ErrorCode::NotElf);
}

TEST(LoadBinary, Elf32IsUnsupported)
{
    testing_support::TempDir dir;
    auto bytes = slurp(fixture("libfixture_basic.so"));
    bytes[EI_CLASS] = ELFCLASS32;
    auto p = dir.path() / "class32.so";
    spit(p, bytes);
    EXPECT_EQ(load_error(p), ErrorCode::UnsupportedClass);
}

TEST(LoadBinary, DynsymPastEndIsTruncated)
{
    testing_support::TempDir dir;
    auto bytes = slurp(fixture("libfixture_basic.so"));
    Elf64_Ehdr eh;
    std::memcpy(&eh, bytes.data(), sizeof(eh));
    bool patched = false;
    for (int i = 0; i < eh.e_shnum; ++i) {
        Elf64_Shdr sh;
        size_t at = eh.e_shoff + static_cast<size_t>(i) * eh.e_shentsize;
        std::memcpy(&sh, bytes.data() + at, sizeof(sh));
        if (sh.sh_type == SHT_DYNSYM) {
            sh.sh_offset = bytes.size() + 0x1000;
            std::memcpy(bytes.data() + at, &sh, sizeof(sh));
            patched = true;
        }
    }
    ASSERT_TRUE(patched);
    auto p = dir.path() / "truncated.so";
    spit(p, bytes);
    EXPECT_EQ(load_error(p), ErrorCode::Truncated);
}

TEST(LoadBinary, CutFileIsTruncated)
{
    testing_support::TempDir dir;
    auto bytes = slurp(fixture("libfixture_basic.so"));
    bytes.resize(bytes.size() / 2);
    auto p = dir.path() / "half.so";
    spit(p, bytes);
    EXPECT_EQ(load_error(p), ErrorCode::Truncated);
}

TEST(LoadBinary, MissingDynsym)
{
    testing_support::TempDir dir;
    auto bytes = slurp(fixture("libfixture_basic.so"));
    Elf64_Ehdr eh;
    std::memcpy(&eh, bytes.data(), sizeof(eh));
    for (int i = 0; i < eh.e_shnum; ++i) {
        Elf64_Shdr sh;
        size_t at = eh.e_shoff + static_cast<size_t>(i) * eh.e_shentsize;
        std::memcpy(&sh, bytes.data() + at, sizeof(sh));
        if (sh.sh_type == SHT_DYNSYM) {
            sh.sh_type = SHT_PROGBITS;
            std::memcpy(bytes.data() + at, &sh, sizeof(sh));
        }
    }
    auto p = dir.path() / "nodynsym.so";
    spit(p, bytes);
    EXPECT_EQ(load_error(p), ErrorCode::NoDynsym);
}

TEST(LoadBinary, MissingFileIsIoFailure)
{
    EXPECT_EQ(load_error("/nonexistent/libnothing.so"), ErrorCode::IoFailure);
}

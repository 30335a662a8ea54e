#include "drvsynth/signature.hpp"

#include "drvsynth/error.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fmt/format.h>
#include <map>
#include <optional>
#include <set>
#include <unordered_map>

namespace drvsynth {

std::string_view to_string(TypeClass type) noexcept
{
    switch (type) {
    case TypeClass::Int64: return "INT64";
    case TypeClass::Int32: return "INT32";
    case TypeClass::Float64: return "FLOAT64";
    case TypeClass::PtrOpaque: return "PTR_OPAQUE";
    case TypeClass::Void: return "VOID";
    }
    return "INT64";
}

std::string_view to_string(Confidence confidence) noexcept
{
    return confidence == Confidence::Derived ? "DERIVED" : "DEFAULTED";
}

namespace {

std::string_view c_type(TypeClass type)
{
    switch (type) {
    case TypeClass::Int64: return "int64_t";
    case TypeClass::Int32: return "int32_t";
    case TypeClass::Float64: return "double";
    case TypeClass::PtrOpaque: return "void *";
    case TypeClass::Void: return "void";
    }
    return "int64_t";
}

} // namespace

std::string InferredSignature::render() const
{
    std::string out = std::string(c_type(return_class));
    if (!out.ends_with('*')) {
        out += ' ';
    }
    out += function_name + "(";
    if (params.empty()) {
        out += "void";
    }
    for (size_t i = 0; i < params.size(); ++i) {
        if (i > 0) {
            out += ", ";
        }
        std::string type(c_type(params[i]));
        out += type + (type.ends_with('*') ? "" : " ") + "arg" + std::to_string(i + 1);
    }
    return out + ")";
}

namespace {

// GPR ids follow the hardware encoding: rax=0 ... rdi=7, r8..r15=8..15.
// xmm registers are 16 + n.
constexpr int kRax = 0;
constexpr int kRbp = 5;
constexpr int kRsp = 4;
constexpr int kXmm0 = 16;
constexpr std::array<int, 6> kArgIds = {7, 6, 2, 1, 8, 9};
constexpr std::array<int, 9> kCallerSaved = {0, 1, 2, 6, 7, 8, 9, 10, 11};

const std::unordered_map<std::string, int>& register_table()
{
    static const auto table = [] {
        std::unordered_map<std::string, int> t;
        const char* r64[] = {"rax", "rcx", "rdx", "rbx", "rsp", "rbp", "rsi", "rdi"};
        const char* r32[] = {"eax", "ecx", "edx", "ebx", "esp", "ebp", "esi", "edi"};
        const char* r16[] = {"ax", "cx", "dx", "bx", "sp", "bp", "si", "di"};
        const char* r8[] = {"al", "cl", "dl", "bl", "spl", "bpl", "sil", "dil"};
        const char* r8h[] = {"ah", "ch", "dh", "bh"};
        for (int i = 0; i < 8; ++i) {
            t[r64[i]] = t[r32[i]] = t[r16[i]] = t[r8[i]] = i;
        }
        for (int i = 0; i < 4; ++i) {
            t[r8h[i]] = i;
        }
        for (int i = 8; i < 16; ++i) {
            auto base = "r" + std::to_string(i);
            t[base] = t[base + "d"] = t[base + "w"] = t[base + "b"] = t[base + "l"] = i;
        }
        for (int i = 0; i < 16; ++i) {
            t["xmm" + std::to_string(i)] = kXmm0 + i;
            t["ymm" + std::to_string(i)] = kXmm0 + i;
        }
        return t;
    }();
    return table;
}

std::optional<int> register_id(std::string_view name)
{
    const auto& t = register_table();
    auto it = t.find(std::string(name));
    if (it == t.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::string trim(std::string_view s)
{
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
        s.remove_prefix(1);
    }
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
        s.remove_suffix(1);
    }
    return std::string(s);
}

bool is_hex_token(std::string_view s)
{
    if (s.starts_with("0x")) {
        s.remove_prefix(2);
    }
    return !s.empty() && std::ranges::all_of(s, [](char c) { return std::isxdigit(static_cast<unsigned char>(c)); });
}

uint64_t hex_value(std::string_view s)
{
    if (s.starts_with("0x")) {
        s.remove_prefix(2);
    }
    return std::stoull(std::string(s), nullptr, 16);
}

struct MemRef {
    int base = -1;
    int index = -1;
    int64_t disp = 0;
};

struct Operand {
    enum class Kind { Reg, Mem, Imm, Target, Other } kind = Kind::Other;
    int reg = -1;
    MemRef mem;
    uint64_t target = 0;
    std::string label;
    bool qword = false;
};

MemRef parse_memory(std::string_view inner)
{
    MemRef m;
    size_t i = 0;
    char sign = '+';
    while (i <= inner.size()) {
        size_t j = inner.find_first_of("+-", i);
        if (j == std::string_view::npos) {
            j = inner.size();
        }
        std::string term = trim(inner.substr(i, j - i));
        if (!term.empty()) {
            auto star = term.find('*');
            if (star != std::string::npos) {
                if (auto id = register_id(term.substr(0, star))) {
                    m.index = *id;
                }
            }
            else if (auto id = register_id(term)) {
                if (m.base < 0) {
                    m.base = *id;
                }
                else {
                    m.index = *id;
                }
            }
            else if (is_hex_token(term)) {
                auto v = static_cast<int64_t>(hex_value(term));
                m.disp += sign == '-' ? -v : v;
            }
        }
        if (j >= inner.size()) {
            break;
        }
        sign = inner[j];
        i = j + 1;
    }
    return m;
}

bool is_branch(std::string_view mnemonic)
{
    return mnemonic.starts_with('j') || mnemonic == "call" || mnemonic.starts_with("loop");
}

Operand parse_operand(std::string_view raw, bool branch)
{
    Operand op;
    std::string text = trim(raw);
    auto bracket = text.find('[');
    if (bracket != std::string::npos) {
        op.kind = Operand::Kind::Mem;
        op.qword = text.starts_with("QWORD");
        auto close = text.find(']', bracket);
        op.mem = parse_memory(std::string_view(text).substr(bracket + 1, close - bracket - 1));
        return op;
    }
    if (auto colon = text.find(':'); colon != std::string::npos) {
        // segment-absolute such as fs:0x28
        op.kind = Operand::Kind::Mem;
        return op;
    }
    if (auto id = register_id(text)) {
        op.kind = Operand::Kind::Reg;
        op.reg = *id;
        return op;
    }
    auto space = text.find(' ');
    std::string head = text.substr(0, space);
    if (branch && is_hex_token(head)) {
        op.kind = Operand::Kind::Target;
        op.target = hex_value(head);
        auto lt = text.find('<');
        auto gt = text.rfind('>');
        if (lt != std::string::npos && gt != std::string::npos && gt > lt) {
            op.label = text.substr(lt + 1, gt - lt - 1);
        }
        return op;
    }
    if (text.starts_with("0x") || text.starts_with("-0x") || (!text.empty() && std::isdigit(text[0]))) {
        op.kind = Operand::Kind::Imm;
    }
    return op;
}

std::vector<std::string> split_operands(std::string_view text)
{
    if (auto hash = text.find('#'); hash != std::string_view::npos) {
        text = text.substr(0, hash);
    }
    std::vector<std::string> out;
    int depth = 0;
    size_t start = 0;
    for (size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c == '[' || c == '<') {
            ++depth;
        }
        else if (c == ']' || c == '>') {
            --depth;
        }
        else if (c == ',' && depth == 0) {
            out.push_back(trim(text.substr(start, i - start)));
            start = i + 1;
        }
    }
    auto last = trim(text.substr(start));
    if (!last.empty()) {
        out.push_back(last);
    }
    return out;
}

std::string base_mnemonic(std::string_view mnemonic)
{
    static const std::set<std::string, std::less<>> prefixes = {"rep",  "repz", "repe", "repnz", "repne",
                                                                "lock", "bnd",  "notrack", "data16", "addr32",
                                                                "cs",   "ds",   "es",   "fs",    "gs", "ss"};
    std::string m = trim(mnemonic);
    for (;;) {
        auto space = m.find(' ');
        if (space == std::string::npos || !prefixes.contains(m.substr(0, space))) {
            break;
        }
        m = trim(std::string_view(m).substr(space + 1));
    }
    std::ranges::transform(m, m.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return m;
}

std::string routine_name(std::string label)
{
    if (auto plus = label.find('+'); plus != std::string::npos) {
        return {};
    }
    if (auto at = label.find('@'); at != std::string::npos) {
        label.resize(at);
    }
    return label;
}

/// Pointer-typed argument positions of routines whose use reveals pointers.
const std::map<std::string, std::vector<int>, std::less<>>& pointer_routines()
{
    static const std::map<std::string, std::vector<int>, std::less<>> table = {
        {"memcpy", {0, 1}},       {"memmove", {0, 1}},    {"memset", {0}},         {"memcmp", {0, 1}},
        {"memchr", {0}},          {"bcmp", {0, 1}},       {"bzero", {0}},          {"bcopy", {0, 1}},
        {"strlen", {0}},          {"strnlen", {0}},       {"strcpy", {0, 1}},      {"strncpy", {0, 1}},
        {"stpcpy", {0, 1}},       {"strcat", {0, 1}},     {"strncat", {0, 1}},     {"strcmp", {0, 1}},
        {"strncmp", {0, 1}},      {"strcasecmp", {0, 1}}, {"strncasecmp", {0, 1}}, {"strchr", {0}},
        {"strrchr", {0}},         {"strstr", {0, 1}},     {"strdup", {0}},         {"strndup", {0}},
        {"strspn", {0, 1}},       {"strcspn", {0, 1}},    {"strpbrk", {0, 1}},     {"strtok", {0, 1}},
        {"strtol", {0, 1}},       {"strtoul", {0, 1}},    {"strtoll", {0, 1}},     {"strtoull", {0, 1}},
        {"strtod", {0, 1}},       {"atoi", {0}},          {"atol", {0}},           {"atof", {0}},
        {"sprintf", {0, 1}},      {"snprintf", {0, 2}},   {"sscanf", {0, 1}},      {"puts", {0}},
        {"fputs", {0, 1}},        {"fwrite", {0, 3}},     {"fread", {0, 3}},       {"free", {0}},
        {"realloc", {0}},         {"__memcpy_chk", {0, 1}}, {"__memmove_chk", {0, 1}}, {"__memset_chk", {0}},
        {"__strcpy_chk", {0, 1}}, {"__strcat_chk", {0, 1}}, {"__sprintf_chk", {0, 3}}, {"__snprintf_chk", {0, 4}},
    };
    return table;
}

bool is_noreturn(std::string_view name)
{
    static const std::set<std::string, std::less<>> names = {"__stack_chk_fail", "abort",        "exit",
                                                             "_exit",            "__assert_fail", "__cxa_throw",
                                                             "longjmp",          "__fortify_fail", "__chk_fail"};
    return names.contains(name);
}

struct Parsed {
    const DisasmLine* line = nullptr;
    std::string mnemonic;
    std::vector<Operand> operands;
};

std::vector<size_t> reachable_indices(const std::vector<Parsed>& insns)
{
    std::unordered_map<uint64_t, size_t> by_address;
    for (size_t i = 0; i < insns.size(); ++i) {
        by_address.emplace(insns[i].line->address, i);
    }
    std::vector<bool> seen(insns.size(), false);
    std::vector<size_t> work;
    if (!insns.empty()) {
        work.push_back(0);
    }
    while (!work.empty()) {
        size_t i = work.back();
        work.pop_back();
        if (i >= insns.size() || seen[i]) {
            continue;
        }
        seen[i] = true;
        const auto& p = insns[i];
        const std::string& m = p.mnemonic;
        auto push_target = [&] {
            if (!p.operands.empty() && p.operands[0].kind == Operand::Kind::Target) {
                if (auto it = by_address.find(p.operands[0].target); it != by_address.end()) {
                    work.push_back(it->second);
                }
            }
        };
        if (m == "ret" || m == "retq" || m == "ud2" || m == "hlt" || m == "(bad)") {
            continue;
        }
        if (m == "jmp") {
            push_target();
            continue;
        }
        if (m == "call" && !p.operands.empty() && is_noreturn(routine_name(p.operands[0].label))) {
            continue;
        }
        if (is_branch(m) && m != "call") {
            push_target();
        }
        work.push_back(i + 1);
    }
    std::vector<size_t> out;
    for (size_t i = 0; i < insns.size(); ++i) {
        if (seen[i]) {
            out.push_back(i);
        }
    }
    return out;
}

class Analyzer {
public:
    explicit Analyzer(const Disassembly& d) : disassembly_(d)
    {
        for (size_t j = 0; j < kArgIds.size(); ++j) {
            taint_[reg_key(kArgIds[j])] = static_cast<int>(j);
        }
    }

    InferredSignature run()
    {
        std::vector<Parsed> parsed;
        parsed.reserve(disassembly_.instructions.size());
        for (const auto& line : disassembly_.instructions) {
            Parsed p;
            p.line = &line;
            p.mnemonic = base_mnemonic(line.mnemonic);
            bool branch = is_branch(p.mnemonic);
            for (const auto& text : split_operands(line.operands)) {
                p.operands.push_back(parse_operand(text, branch));
            }
            parsed.push_back(std::move(p));
        }

        for (size_t i : reachable_indices(parsed)) {
            if (parsed[i].mnemonic == "(bad)") {
                throw Error(ErrorCode::DecodeFailure,
                            fmt::format("{}: undecodable instruction at 0x{:x}", disassembly_.function_name,
                                        parsed[i].line->address));
            }
            step(parsed[i]);
        }

        InferredSignature sig;
        sig.function_name = disassembly_.function_name;
        int arity = 0;
        for (size_t j = 0; j < kArgIds.size(); ++j) {
            if (read_before_write_[j]) {
                arity = static_cast<int>(j) + 1;
            }
        }
        for (int j = 0; j < arity; ++j) {
            sig.params.push_back(pointer_[static_cast<size_t>(j)] ? TypeClass::PtrOpaque : TypeClass::Int64);
        }
        if (arity == 6 && stack_argument_read_) {
            sig.confidence = Confidence::Defaulted;
        }
        if (auto fixed = variadic_fixed_arity(); fixed && *fixed < arity) {
            sig.params.resize(static_cast<size_t>(*fixed));
        }
        if (int_return_) {
            sig.return_class = TypeClass::Int64;
        }
        else if (float_return_) {
            sig.return_class = TypeClass::Float64;
        }
        else {
            sig.return_class = TypeClass::Void;
        }
        return sig;
    }

private:
    const Disassembly& disassembly_;
    std::array<bool, 32> written_{};
    std::array<bool, 6> read_before_write_{};
    std::array<bool, 6> pointer_{};
    std::unordered_map<std::string, int> taint_;
    bool rax_pending_ = false;
    bool xmm0_pending_ = false;
    bool int_return_ = false;
    bool float_return_ = false;
    bool frame_ = false;
    bool stack_argument_read_ = false;
    bool al_read_first_ = false;
    // (argument index, frame displacement) of full-width spills made before the register was written
    std::vector<std::pair<int, int64_t>> spills_;

    // A variadic prologue reads al (the vector register count) before
    // writing it and spills the unnamed argument registers into a save area
    // whose slot for register i sits at area + 8 * i. The first spilled
    // register of that block is one past the last named parameter.
    std::optional<int> variadic_fixed_arity() const
    {
        if (!al_read_first_) {
            return std::nullopt;
        }
        std::map<int64_t, std::set<int>> by_area;
        for (auto [index, disp] : spills_) {
            by_area[disp - 8 * index].insert(index);
        }
        for (const auto& [area, indices] : by_area) {
            if (!indices.contains(5)) {
                continue;
            }
            int first = 5;
            while (first > 0 && indices.contains(first - 1)) {
                --first;
            }
            return first;
        }
        return std::nullopt;
    }

    static std::string reg_key(int id) { return "r" + std::to_string(id); }

    static std::optional<std::string> slot_key(const MemRef& m)
    {
        if ((m.base == kRbp || m.base == kRsp) && m.index < 0) {
            return fmt::format("s{}:{}", m.base, m.disp);
        }
        return std::nullopt;
    }

    static std::optional<std::string> location(const Operand& op)
    {
        if (op.kind == Operand::Kind::Reg) {
            return reg_key(op.reg);
        }
        if (op.kind == Operand::Kind::Mem) {
            return slot_key(op.mem);
        }
        return std::nullopt;
    }

    std::optional<int> taint_of(const Operand& op) const
    {
        auto loc = location(op);
        if (!loc) {
            return std::nullopt;
        }
        auto it = taint_.find(*loc);
        return it == taint_.end() ? std::nullopt : std::optional<int>(it->second);
    }

    std::optional<int> taint_of_reg(int id) const
    {
        auto it = taint_.find(reg_key(id));
        return it == taint_.end() ? std::nullopt : std::optional<int>(it->second);
    }

    void set_taint(const Operand& dst, std::optional<int> value)
    {
        auto loc = location(dst);
        if (!loc) {
            return;
        }
        if (value) {
            taint_[*loc] = *value;
        }
        else {
            taint_.erase(*loc);
        }
    }

    void read(int id)
    {
        if (id < 0) {
            return;
        }
        for (size_t j = 0; j < kArgIds.size(); ++j) {
            if (kArgIds[j] == id && !written_[static_cast<size_t>(id)]) {
                read_before_write_[j] = true;
            }
        }
        if (id == kRax) {
            rax_pending_ = false;
            if (!written_[kRax]) {
                al_read_first_ = true;
            }
        }
        if (id == kXmm0) {
            xmm0_pending_ = false;
        }
    }

    void write(int id)
    {
        if (id < 0) {
            return;
        }
        written_[static_cast<size_t>(id)] = true;
        if (id == kRax) {
            rax_pending_ = true;
        }
        if (id == kXmm0) {
            xmm0_pending_ = true;
        }
    }

    void read_operand(const Operand& op)
    {
        if (op.kind == Operand::Kind::Reg) {
            read(op.reg);
        }
    }

    void write_operand(const Operand& op, bool clear_taint = true)
    {
        if (op.kind == Operand::Kind::Reg) {
            write(op.reg);
        }
        if (clear_taint) {
            set_taint(op, std::nullopt);
        }
    }

    void mark_pointer(std::optional<int> param)
    {
        if (param) {
            pointer_[static_cast<size_t>(*param)] = true;
        }
    }

    // Address registers are read by every memory operand; a tainted base is
    // pointer evidence unless the instruction only computes the address.
    void memory_effects(const Parsed& p, bool dereferences)
    {
        for (const auto& op : p.operands) {
            if (op.kind != Operand::Kind::Mem) {
                continue;
            }
            read(op.mem.base);
            read(op.mem.index);
            if (!dereferences) {
                continue;
            }
            if (op.mem.base >= 0 && op.mem.base != kRbp && op.mem.base != kRsp) {
                mark_pointer(taint_of_reg(op.mem.base));
            }
            if (frame_ && op.mem.base == kRbp && op.mem.disp >= 0x10) {
                stack_argument_read_ = true;
            }
        }
    }

    void clobber_call()
    {
        for (int id : kCallerSaved) {
            written_[static_cast<size_t>(id)] = true;
            taint_.erase(reg_key(id));
        }
        for (int i = 0; i < 16; ++i) {
            written_[static_cast<size_t>(kXmm0 + i)] = true;
            taint_.erase(reg_key(kXmm0 + i));
        }
        rax_pending_ = true;
        xmm0_pending_ = false;
    }

    void step(const Parsed& p)
    {
        const std::string& m = p.mnemonic;
        const auto& ops = p.operands;

        static const std::set<std::string, std::less<>> no_effect = {
            "nop", "endbr64", "endbr32", "hlt", "ud2", "int3", "pause", "lfence", "mfence", "sfence",
            "prefetchnta", "prefetcht0", "prefetcht1", "prefetcht2", "prefetchw", "cld", "std", "clc", "stc", "cmc"};
        if (no_effect.contains(m)) {
            return;
        }

        if (m == "ret" || m == "retq") {
            if (rax_pending_) {
                int_return_ = true;
            }
            else if (xmm0_pending_) {
                float_return_ = true;
            }
            return;
        }
        if (m == "leave") {
            return;
        }
        if (m == "call") {
            memory_effects(p, true);
            if (!ops.empty()) {
                if (ops[0].kind == Operand::Kind::Reg) {
                    read(ops[0].reg);
                    mark_pointer(taint_of(ops[0]));
                }
                if (ops[0].kind == Operand::Kind::Target) {
                    auto name = routine_name(ops[0].label);
                    auto it = pointer_routines().find(name);
                    if (it != pointer_routines().end()) {
                        for (int position : it->second) {
                            mark_pointer(taint_of_reg(kArgIds[static_cast<size_t>(position)]));
                        }
                    }
                }
            }
            clobber_call();
            return;
        }
        if (m == "jmp" || is_branch(m)) {
            memory_effects(p, true);
            if (!ops.empty() && ops[0].kind == Operand::Kind::Reg) {
                read(ops[0].reg);
                mark_pointer(taint_of(ops[0]));
            }
            if (m == "jmp" && !ops.empty() && ops[0].kind != Operand::Kind::Target) {
                // indirect tail transfer: whatever is in rax is the callee's business
                int_return_ = int_return_ || rax_pending_;
            }
            return;
        }

        if (m == "lea") {
            memory_effects(p, false);
            if (ops.size() == 2) {
                std::optional<int> derived;
                if (ops[1].kind == Operand::Kind::Mem && ops[1].mem.base >= 0 && ops[1].mem.base != kRbp &&
                    ops[1].mem.base != kRsp) {
                    derived = taint_of_reg(ops[1].mem.base);
                }
                write_operand(ops[0]);
                set_taint(ops[0], derived);
            }
            return;
        }

        memory_effects(p, true);

        static const std::set<std::string, std::less<>> zero_idioms = {"xor", "sub", "pxor", "xorps", "xorpd", "sbb"};
        if (zero_idioms.contains(m) && ops.size() == 2 && ops[0].kind == Operand::Kind::Reg &&
            ops[1].kind == Operand::Kind::Reg && ops[0].reg == ops[1].reg && m != "sbb") {
            write_operand(ops[0]);
            return;
        }

        if (m == "push") {
            if (!ops.empty()) {
                read_operand(ops[0]);
            }
            return;
        }
        if (m == "pop") {
            if (!ops.empty()) {
                write_operand(ops[0]);
            }
            return;
        }

        static const std::set<std::string, std::less<>> read_only = {
            "cmp", "test", "bt", "ucomiss", "ucomisd", "comiss", "comisd", "ptest"};
        if (read_only.contains(m)) {
            for (const auto& op : ops) {
                read_operand(op);
            }
            return;
        }

        if (m == "xchg" && ops.size() == 2) {
            read_operand(ops[0]);
            read_operand(ops[1]);
            auto a = taint_of(ops[0]);
            auto b = taint_of(ops[1]);
            write_operand(ops[0]);
            write_operand(ops[1]);
            set_taint(ops[0], b);
            set_taint(ops[1], a);
            return;
        }

        if ((m == "mul" || m == "imul" || m == "div" || m == "idiv") && ops.size() == 1) {
            read_operand(ops[0]);
            read(kRax);
            if (m == "div" || m == "idiv") {
                read(2);
            }
            write(kRax);
            write(2);
            taint_.erase(reg_key(kRax));
            taint_.erase(reg_key(2));
            return;
        }
        if (m == "cdqe" || m == "cwde" || m == "cbw") {
            read(kRax);
            write(kRax);
            return;
        }
        if (m == "cdq" || m == "cqo" || m == "cwd") {
            read(kRax);
            write(2);
            taint_.erase(reg_key(2));
            return;
        }

        if (m == "stos" || m == "movs" || m == "lods" || m == "scas" || m == "cmps") {
            read(7);
            read(1);
            if (m == "stos" || m == "scas") {
                read(kRax);
            }
            if (m == "movs" || m == "lods" || m == "cmps") {
                read(6);
            }
            write(7);
            write(1);
            if (m == "movs" || m == "lods" || m == "cmps") {
                write(6);
            }
            if (m == "lods") {
                write(kRax);
            }
            return;
        }

        if (m == "syscall" || m == "cpuid" || m == "rdtsc") {
            read(kRax);
            read(1);
            write(kRax);
            write(2);
            write(1);
            write(11);
            return;
        }

        if (ops.empty()) {
            return;
        }

        bool is_move = m == "mov" || m == "movabs" || m == "movzx" || m == "movsx" || m == "movsxd" || m == "movd" ||
                       m == "movq" || m == "movss" || m == "movsd" || m == "movaps" || m == "movapd" ||
                       m == "movups" || m == "movupd" || m == "movdqa" || m == "movdqu" || m.starts_with("cvt") ||
                       m.starts_with("set");
        if (is_move) {
            std::optional<int> carried;
            for (size_t i = 1; i < ops.size(); ++i) {
                read_operand(ops[i]);
            }
            if (m == "mov" && ops.size() == 2 && ops[0].kind == Operand::Kind::Mem && ops[0].qword &&
                ops[0].mem.base == kRbp && ops[0].mem.index < 0 && ops[1].kind == Operand::Kind::Reg) {
                for (size_t j = 0; j < kArgIds.size(); ++j) {
                    if (kArgIds[j] == ops[1].reg && !written_[static_cast<size_t>(ops[1].reg)]) {
                        spills_.emplace_back(static_cast<int>(j), ops[0].mem.disp);
                    }
                }
            }
            if (ops.size() >= 2 && (m == "mov" || m == "movsxd" || m == "movzx" || m == "movsx" || m == "movq" ||
                                    m == "movd" || m == "movabs")) {
                carried = taint_of(ops[1]);
            }
            write_operand(ops[0]);
            set_taint(ops[0], carried);
            if (m == "mov" && ops.size() == 2 && ops[0].kind == Operand::Kind::Reg && ops[0].reg == kRbp &&
                ops[1].kind == Operand::Kind::Reg && ops[1].reg == kRsp) {
                frame_ = true;
            }
            return;
        }

        if (m.starts_with("cmov") && ops.size() == 2) {
            read_operand(ops[0]);
            read_operand(ops[1]);
            auto carried = taint_of(ops[1]);
            if (!carried) {
                carried = taint_of(ops[0]);
            }
            write_operand(ops[0]);
            set_taint(ops[0], carried);
            return;
        }

        if (m == "imul" && ops.size() == 3) {
            read_operand(ops[1]);
            write_operand(ops[0]);
            return;
        }

        // read-modify-write on the first operand
        for (const auto& op : ops) {
            read_operand(op);
        }
        std::optional<int> carried;
        if ((m == "add" || m == "sub") && ops.size() == 2) {
            carried = taint_of(ops[0]);
            if (!carried && m == "add") {
                carried = taint_of(ops[1]);
            }
        }
        else if ((m == "inc" || m == "dec") && ops.size() == 1) {
            carried = taint_of(ops[0]);
        }
        write_operand(ops[0]);
        set_taint(ops[0], carried);
    }
};

} // namespace

InferredSignature infer_signature(const Disassembly& disassembly)
{
    return Analyzer(disassembly).run();
}

InferredSignature infer_signature(const BinaryImage& image, const ExportedFunction& function,
                                  DisassemblyProvider& provider)
{
    return infer_signature(provider.disassemble(image, function));
}

} // namespace drvsynth

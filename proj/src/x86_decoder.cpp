#include "drvsynth/x86_decoder.hpp"

#include <array>
#include <cstring>
#include <fmt/format.h>

namespace drvsynth::x86 {

namespace {

constexpr std::array<const char*, 16> kReg64 = {"rax", "rcx", "rdx", "rbx", "rsp", "rbp", "rsi", "rdi",
                                                "r8",  "r9",  "r10", "r11", "r12", "r13", "r14", "r15"};
constexpr std::array<const char*, 16> kReg32 = {"eax", "ecx", "edx",  "ebx",  "esp",  "ebp",  "esi",  "edi",
                                                "r8d", "r9d", "r10d", "r11d", "r12d", "r13d", "r14d", "r15d"};
constexpr std::array<const char*, 16> kReg16 = {"ax",  "cx",  "dx",   "bx",   "sp",   "bp",   "si",   "di",
                                                "r8w", "r9w", "r10w", "r11w", "r12w", "r13w", "r14w", "r15w"};
constexpr std::array<const char*, 16> kReg8Rex = {"al",  "cl",  "dl",   "bl",   "spl",  "bpl",  "sil",  "dil",
                                                  "r8b", "r9b", "r10b", "r11b", "r12b", "r13b", "r14b", "r15b"};
constexpr std::array<const char*, 8> kReg8Legacy = {"al", "cl", "dl", "bl", "ah", "ch", "dh", "bh"};

const char* condition(unsigned cc)
{
    static constexpr std::array<const char*, 16> names = {"o", "no", "b", "ae", "e", "ne", "be", "a",
                                                          "s", "ns", "p", "np", "l", "ge", "le", "g"};
    return names[cc & 15];
}

constexpr std::array<const char*, 8> kGroup1 = {"add", "or", "adc", "sbb", "and", "sub", "xor", "cmp"};
constexpr std::array<const char*, 8> kGroup2 = {"rol", "ror", "rcl", "rcr", "shl", "shr", "shl", "sar"};

enum class Width { B8, B16, B32, B64, Xmm };

struct Prefixes {
    bool opsize = false;
    bool addrsize = false;
    bool rep = false;
    bool repne = false;
    bool lock = false;
    const char* segment = nullptr;
    uint8_t rex = 0;

    bool rex_w() const { return (rex & 8) != 0; }
    bool rex_r() const { return (rex & 4) != 0; }
    bool rex_x() const { return (rex & 2) != 0; }
    bool rex_b() const { return (rex & 1) != 0; }
};

struct ModRm {
    uint8_t mod = 0;
    uint8_t reg = 0; // includes REX.R
    uint8_t rm = 0;  // includes REX.B when is_register
    bool is_register = false;
    std::string address; // "[rbp-0x8]" style, without size keyword
    bool rip_relative = false;
    int64_t displacement = 0;
};

std::string hex(uint64_t v) { return fmt::format("0x{:x}", v); }

std::string signed_disp(int64_t d)
{
    if (d < 0) {
        return fmt::format("-0x{:x}", static_cast<uint64_t>(-d));
    }
    return fmt::format("+0x{:x}", static_cast<uint64_t>(d));
}

const char* size_keyword(Width w)
{
    switch (w) {
    case Width::B8: return "BYTE PTR ";
    case Width::B16: return "WORD PTR ";
    case Width::B32: return "DWORD PTR ";
    case Width::B64: return "QWORD PTR ";
    case Width::Xmm: return "XMMWORD PTR ";
    }
    return "";
}

uint64_t mask_for(Width w)
{
    switch (w) {
    case Width::B8: return 0xff;
    case Width::B16: return 0xffff;
    case Width::B32: return 0xffffffff;
    default: return ~uint64_t{0};
    }
}

class Decoder {
public:
    Decoder(std::span<const uint8_t> code, uint64_t address, const SymbolLookup& lookup)
        : code_(code), address_(address), lookup_(lookup)
    {
    }

    std::optional<Instruction> run()
    {
        if (!read_prefixes()) {
            return std::nullopt;
        }
        if (!decode_opcode() || !ok_) {
            return std::nullopt;
        }
        Instruction insn;
        insn.address = address_;
        insn.length = static_cast<uint32_t>(pos_);
        insn.mnemonic = std::move(mnemonic_);
        insn.operands = std::move(operands_);
        if (rip_target_) {
            insn.operands += fmt::format("        # {:x}", address_ + pos_ + *rip_target_);
        }
        return insn;
    }

private:
    std::span<const uint8_t> code_;
    uint64_t address_;
    const SymbolLookup& lookup_;
    size_t pos_ = 0;
    bool ok_ = true;
    Prefixes px_;
    std::string mnemonic_;
    std::string operands_;
    std::optional<int64_t> rip_target_;

    bool more() const { return pos_ < code_.size(); }

    uint8_t peek() const { return pos_ < code_.size() ? code_[pos_] : 0; }

    uint8_t u8()
    {
        if (pos_ >= code_.size()) {
            ok_ = false;
            return 0;
        }
        return code_[pos_++];
    }

    template <typename T>
    T fixed()
    {
        if (code_.size() - pos_ < sizeof(T) || pos_ > code_.size()) {
            ok_ = false;
            pos_ = code_.size();
            return T{};
        }
        T v;
        std::memcpy(&v, code_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    int64_t s8() { return static_cast<int8_t>(u8()); }
    int64_t s32() { return fixed<int32_t>(); }

    bool read_prefixes()
    {
        for (int guard = 0; guard < 15 && more(); ++guard) {
            uint8_t b = peek();
            switch (b) {
            case 0x66: px_.opsize = true; break;
            case 0x67: px_.addrsize = true; break;
            case 0xF3: px_.rep = true; px_.repne = false; break;
            case 0xF2: px_.repne = true; px_.rep = false; break;
            case 0xF0: px_.lock = true; break;
            case 0x2E: px_.segment = "cs"; break;
            case 0x36: px_.segment = "ss"; break;
            case 0x3E: px_.segment = "ds"; break;
            case 0x26: px_.segment = "es"; break;
            case 0x64: px_.segment = "fs"; break;
            case 0x65: px_.segment = "gs"; break;
            default:
                if ((b & 0xF0) == 0x40) {
                    px_.rex = b;
                    ++pos_;
                    return more();
                }
                return true;
            }
            ++pos_;
        }
        return more();
    }

    Width operand_width() const
    {
        if (px_.rex_w()) {
            return Width::B64;
        }
        return px_.opsize ? Width::B16 : Width::B32;
    }

    std::string gpr(unsigned index, Width w) const
    {
        switch (w) {
        case Width::B64: return kReg64[index & 15];
        case Width::B32: return kReg32[index & 15];
        case Width::B16: return kReg16[index & 15];
        case Width::B8: return px_.rex != 0 ? kReg8Rex[index & 15] : kReg8Legacy[index & 7];
        case Width::Xmm: return "xmm" + std::to_string(index & 15);
        }
        return "?";
    }

    std::string xmm(unsigned index) const { return "xmm" + std::to_string(index & 15); }

    ModRm modrm()
    {
        ModRm m;
        uint8_t b = u8();
        m.mod = b >> 6;
        m.reg = ((b >> 3) & 7) | (px_.rex_r() ? 8 : 0);
        uint8_t rm = b & 7;
        if (m.mod == 3) {
            m.is_register = true;
            m.rm = rm | (px_.rex_b() ? 8 : 0);
            return m;
        }
        const auto& names = px_.addrsize ? kReg32 : kReg64;
        std::string base;
        std::string index;
        unsigned scale = 1;
        bool absolute = false;
        if (rm == 4) {
            uint8_t sib = u8();
            scale = 1u << (sib >> 6);
            unsigned idx = ((sib >> 3) & 7) | (px_.rex_x() ? 8 : 0);
            unsigned bas = (sib & 7) | (px_.rex_b() ? 8 : 0);
            if (idx != 4) {
                index = names[idx];
            }
            if ((sib & 7) == 5 && m.mod == 0) {
                m.displacement = s32();
                absolute = index.empty();
            }
            else {
                base = names[bas];
            }
        }
        else if (rm == 5 && m.mod == 0) {
            m.displacement = s32();
            m.rip_relative = true;
            base = px_.addrsize ? "eip" : "rip";
        }
        else {
            base = names[rm | (px_.rex_b() ? 8 : 0)];
        }
        if (m.mod == 1) {
            m.displacement = s8();
        }
        else if (m.mod == 2) {
            m.displacement = s32();
        }

        std::string seg = px_.segment != nullptr ? std::string(px_.segment) + ":" : std::string();
        if (absolute) {
            if (seg.empty()) {
                seg = "ds:";
            }
            m.address = seg + hex(static_cast<uint64_t>(m.displacement) & 0xffffffff);
            return m;
        }
        std::string inner = base;
        if (!index.empty()) {
            inner += (inner.empty() ? "" : "+") + index + "*" + std::to_string(scale);
        }
        bool show_disp = m.mod != 0 || base.empty() || m.rip_relative;
        if (show_disp) {
            inner += signed_disp(m.displacement);
        }
        m.address = seg + "[" + inner + "]";
        if (m.rip_relative) {
            rip_target_ = m.displacement;
        }
        return m;
    }

    std::string rm_operand(const ModRm& m, Width w, bool sized = true) const
    {
        if (m.is_register) {
            return gpr(m.rm, w);
        }
        return (sized ? std::string(size_keyword(w)) : std::string()) + m.address;
    }

    std::string xmm_rm(const ModRm& m, Width mem_width) const
    {
        if (m.is_register) {
            return xmm(m.rm);
        }
        return std::string(size_keyword(mem_width)) + m.address;
    }

    std::string imm(Width w)
    {
        int64_t v = 0;
        switch (w) {
        case Width::B8: v = s8(); break;
        case Width::B16: v = fixed<int16_t>(); break;
        default: v = s32(); break;
        }
        return hex(static_cast<uint64_t>(v) & mask_for(w));
    }

    std::string imm8_extended(Width w) { return hex(static_cast<uint64_t>(s8()) & mask_for(w)); }

    std::string branch_target(int64_t rel)
    {
        uint64_t target = address_ + pos_ + static_cast<uint64_t>(rel);
        std::string text = fmt::format("{:x}", target);
        if (lookup_) {
            if (auto label = lookup_(target)) {
                text += " <" + *label + ">";
            }
        }
        return text;
    }

    void set(std::string mnemonic, std::string operands = {})
    {
        mnemonic_ = std::move(mnemonic);
        operands_ = std::move(operands);
    }

    // F2 on a control transfer is the MPX bnd prefix.
    std::string bnd(std::string mnemonic) const { return px_.repne ? "bnd " + mnemonic : mnemonic; }

    static std::string join(const std::string& a, const std::string& b) { return a + "," + b; }

    bool decode_opcode()
    {
        uint8_t op = u8();
        if (!ok_) {
            return false;
        }
        if (op == 0x0F) {
            return decode_0f();
        }

        if (op < 0x40 && (op & 7) < 6) {
            const char* name = kGroup1[op >> 3];
            switch (op & 7) {
            case 0: { auto m = modrm(); set(name, join(rm_operand(m, Width::B8), gpr(m.reg, Width::B8))); return true; }
            case 1: { auto w = operand_width(); auto m = modrm(); set(name, join(rm_operand(m, w), gpr(m.reg, w))); return true; }
            case 2: { auto m = modrm(); set(name, join(gpr(m.reg, Width::B8), rm_operand(m, Width::B8))); return true; }
            case 3: { auto w = operand_width(); auto m = modrm(); set(name, join(gpr(m.reg, w), rm_operand(m, w))); return true; }
            case 4: set(name, join("al", imm(Width::B8))); return true;
            case 5: { auto w = operand_width(); set(name, join(gpr(0, w), imm(w == Width::B16 ? Width::B16 : Width::B32)));
                      if (w == Width::B64) { fix_sign_extended_imm(); } return true; }
            }
        }
        if (op >= 0x50 && op <= 0x57) {
            set("push", px_.opsize ? kReg16[(op & 7) | (px_.rex_b() ? 8 : 0)] : kReg64[(op & 7) | (px_.rex_b() ? 8 : 0)]);
            return true;
        }
        if (op >= 0x58 && op <= 0x5F) {
            set("pop", px_.opsize ? kReg16[(op & 7) | (px_.rex_b() ? 8 : 0)] : kReg64[(op & 7) | (px_.rex_b() ? 8 : 0)]);
            return true;
        }
        if (op >= 0x70 && op <= 0x7F) {
            int64_t rel = s8();
            set(bnd(std::string("j") + condition(op & 15)), branch_target(rel));
            return true;
        }
        if (op >= 0x91 && op <= 0x97) {
            auto w = operand_width();
            set("xchg", join(gpr((op & 7) | (px_.rex_b() ? 8 : 0), w), gpr(0, w)));
            return true;
        }
        if (op >= 0xB0 && op <= 0xB7) {
            set("mov", join(gpr((op & 7) | (px_.rex_b() ? 8 : 0), Width::B8), imm(Width::B8)));
            return true;
        }
        if (op >= 0xB8 && op <= 0xBF) {
            unsigned r = (op & 7) | (px_.rex_b() ? 8 : 0);
            if (px_.rex_w()) {
                set("movabs", join(kReg64[r], hex(fixed<uint64_t>())));
            }
            else {
                auto w = operand_width();
                set("mov", join(gpr(r, w), imm(w)));
            }
            return true;
        }

        switch (op) {
        case 0x63: {
            auto w = operand_width();
            auto m = modrm();
            set("movsxd", join(gpr(m.reg, w), rm_operand(m, Width::B32)));
            return true;
        }
        case 0x68: set("push", hex(static_cast<uint64_t>(s32()))); return true;
        case 0x6A: set("push", hex(static_cast<uint64_t>(s8()))); return true;
        case 0x69:
        case 0x6B: {
            auto w = operand_width();
            auto m = modrm();
            std::string src = rm_operand(m, w);
            std::string value = op == 0x6B ? imm8_extended(w) : imm(w == Width::B16 ? Width::B16 : Width::B32);
            set("imul", gpr(m.reg, w) + "," + src + "," + value);
            return true;
        }
        case 0x80:
        case 0x81:
        case 0x83: {
            Width w = op == 0x80 ? Width::B8 : operand_width();
            auto m = modrm();
            std::string dst = rm_operand(m, w);
            std::string value;
            if (op == 0x81) {
                value = imm(w == Width::B16 ? Width::B16 : Width::B32);
                if (w == Width::B64) {
                    set(kGroup1[m.reg & 7], join(dst, value));
                    fix_sign_extended_imm();
                    return true;
                }
            }
            else if (op == 0x83) {
                value = imm8_extended(w);
            }
            else {
                value = imm(Width::B8);
            }
            set(kGroup1[m.reg & 7], join(dst, value));
            return true;
        }
        case 0x84: { auto m = modrm(); set("test", join(rm_operand(m, Width::B8), gpr(m.reg, Width::B8))); return true; }
        case 0x85: { auto w = operand_width(); auto m = modrm(); set("test", join(rm_operand(m, w), gpr(m.reg, w))); return true; }
        case 0x86: { auto m = modrm(); set("xchg", join(rm_operand(m, Width::B8), gpr(m.reg, Width::B8))); return true; }
        case 0x87: { auto w = operand_width(); auto m = modrm(); set("xchg", join(rm_operand(m, w), gpr(m.reg, w))); return true; }
        case 0x88: { auto m = modrm(); set("mov", join(rm_operand(m, Width::B8), gpr(m.reg, Width::B8))); return true; }
        case 0x89: { auto w = operand_width(); auto m = modrm(); set("mov", join(rm_operand(m, w), gpr(m.reg, w))); return true; }
        case 0x8A: { auto m = modrm(); set("mov", join(gpr(m.reg, Width::B8), rm_operand(m, Width::B8))); return true; }
        case 0x8B: { auto w = operand_width(); auto m = modrm(); set("mov", join(gpr(m.reg, w), rm_operand(m, w))); return true; }
        case 0x8D: {
            auto w = operand_width();
            auto m = modrm();
            if (m.is_register) {
                return false;
            }
            set("lea", join(gpr(m.reg, w), m.address));
            return true;
        }
        case 0x8F: {
            auto m = modrm();
            if ((m.reg & 7) != 0) {
                return false;
            }
            set("pop", rm_operand(m, Width::B64));
            return true;
        }
        case 0x90:
            if (px_.rex_b()) {
                set("xchg", join("r8", "rax"));
            }
            else if (px_.rep) {
                set("pause");
            }
            else if (px_.opsize) {
                set("xchg", "ax,ax");
            }
            else {
                set("nop");
            }
            return true;
        case 0x98: set(px_.rex_w() ? "cdqe" : px_.opsize ? "cbw" : "cwde"); return true;
        case 0x99: set(px_.rex_w() ? "cqo" : px_.opsize ? "cwd" : "cdq"); return true;
        case 0x9C: set("pushf"); return true;
        case 0x9D: set("popf"); return true;
        case 0x9E: set("sahf"); return true;
        case 0x9F: set("lahf"); return true;
        case 0xA8: set("test", join("al", imm(Width::B8))); return true;
        case 0xA9: { auto w = operand_width(); set("test", join(gpr(0, w), imm(w == Width::B16 ? Width::B16 : Width::B32)));
                     if (w == Width::B64) { fix_sign_extended_imm(); } return true; }
        case 0xA4: case 0xA5: case 0xA6: case 0xA7:
        case 0xAA: case 0xAB: case 0xAC: case 0xAD: case 0xAE: case 0xAF:
            return string_op(op);
        case 0xC0:
        case 0xC1:
        case 0xD0:
        case 0xD1:
        case 0xD2:
        case 0xD3: {
            Width w = (op & 1) == 0 ? Width::B8 : operand_width();
            auto m = modrm();
            std::string dst = rm_operand(m, w);
            std::string count;
            if (op <= 0xC1) {
                count = imm(Width::B8);
            }
            else if (op <= 0xD1) {
                count = "1";
            }
            else {
                count = "cl";
            }
            set(kGroup2[m.reg & 7], join(dst, count));
            return true;
        }
        case 0xC2: set(bnd("ret"), hex(fixed<uint16_t>())); return true;
        case 0xC3: set(px_.rep ? "repz ret" : bnd("ret")); return true;
        case 0xC6:
        case 0xC7: {
            Width w = op == 0xC6 ? Width::B8 : operand_width();
            auto m = modrm();
            if ((m.reg & 7) != 0) {
                return false;
            }
            std::string dst = rm_operand(m, w);
            std::string value = imm(w == Width::B64 ? Width::B32 : w);
            set("mov", join(dst, value));
            if (w == Width::B64) {
                fix_sign_extended_imm();
            }
            return true;
        }
        case 0xC9: set("leave"); return true;
        case 0xCC: set("int3"); return true;
        case 0xCD: set("int", hex(u8())); return true;
        case 0xE3: { int64_t rel = s8(); set("jrcxz", branch_target(rel)); return true; }
        case 0xE8: { int64_t rel = s32(); set(bnd("call"), branch_target(rel)); return true; }
        case 0xE9: { int64_t rel = s32(); set(bnd("jmp"), branch_target(rel)); return true; }
        case 0xEB: { int64_t rel = s8(); set(bnd("jmp"), branch_target(rel)); return true; }
        case 0xF4: set("hlt"); return true;
        case 0xF5: set("cmc"); return true;
        case 0xF8: set("clc"); return true;
        case 0xF9: set("stc"); return true;
        case 0xFC: set("cld"); return true;
        case 0xFD: set("std"); return true;
        case 0xF6:
        case 0xF7: {
            Width w = op == 0xF6 ? Width::B8 : operand_width();
            auto m = modrm();
            static constexpr std::array<const char*, 8> names = {"test", "test", "not", "neg", "mul", "imul", "div", "idiv"};
            std::string dst = rm_operand(m, w);
            if ((m.reg & 7) < 2) {
                set("test", join(dst, imm(w == Width::B64 ? Width::B32 : w)));
                if (w == Width::B64) {
                    fix_sign_extended_imm();
                }
            }
            else {
                set(names[m.reg & 7], dst);
            }
            return true;
        }
        case 0xFE: {
            auto m = modrm();
            if ((m.reg & 7) > 1) {
                return false;
            }
            set((m.reg & 7) == 0 ? "inc" : "dec", rm_operand(m, Width::B8));
            return true;
        }
        case 0xFF: {
            auto m = modrm();
            switch (m.reg & 7) {
            case 0: set("inc", rm_operand(m, operand_width())); return true;
            case 1: set("dec", rm_operand(m, operand_width())); return true;
            case 2: set(bnd("call"), rm_operand(m, Width::B64)); return true;
            case 4: set(bnd("jmp"), rm_operand(m, Width::B64)); return true;
            case 6: set("push", rm_operand(m, Width::B64)); return true;
            default: return false;
            }
        }
        default: return false;
        }
    }

    // Immediates sign-extended to 64 bits render as 64-bit values.
    void fix_sign_extended_imm()
    {
        auto comma = operands_.rfind(',');
        if (comma == std::string::npos) {
            return;
        }
        uint64_t v = std::stoull(operands_.substr(comma + 3), nullptr, 16);
        int64_t extended = static_cast<int32_t>(static_cast<uint32_t>(v));
        operands_ = operands_.substr(0, comma + 1) + hex(static_cast<uint64_t>(extended));
    }

    bool string_op(uint8_t op)
    {
        Width w = (op & 1) == 0 ? Width::B8 : operand_width();
        std::string acc = gpr(0, w);
        std::string di = std::string(size_keyword(w)) + "es:[rdi]";
        std::string si = std::string(size_keyword(w)) + "ds:[rsi]";
        std::string prefix = px_.rep ? "rep " : px_.repne ? "repnz " : "";
        switch (op & 0xFE) {
        case 0xA4: set(prefix + "movs", join(di, si)); return true;
        case 0xA6: set((px_.rep ? "repz " : prefix) + "cmps", join(si, di)); return true;
        case 0xAA: set(prefix + "stos", join(di, acc)); return true;
        case 0xAC: set(prefix + "lods", join(acc, si)); return true;
        case 0xAE: set((px_.rep ? "repz " : prefix) + "scas", join(acc, di)); return true;
        }
        return false;
    }

    enum class Sse { Ps, Pd, Ss, Sd };

    Sse sse_kind() const
    {
        if (px_.rep) {
            return Sse::Ss;
        }
        if (px_.repne) {
            return Sse::Sd;
        }
        return px_.opsize ? Sse::Pd : Sse::Ps;
    }

    static const char* suffix(Sse k)
    {
        switch (k) {
        case Sse::Ps: return "ps";
        case Sse::Pd: return "pd";
        case Sse::Ss: return "ss";
        case Sse::Sd: return "sd";
        }
        return "";
    }

    static Width mem_width(Sse k)
    {
        switch (k) {
        case Sse::Ss: return Width::B32;
        case Sse::Sd: return Width::B64;
        default: return Width::Xmm;
        }
    }

    bool sse_arith(const std::string& stem, bool scalar_allowed = true)
    {
        Sse k = sse_kind();
        if (!scalar_allowed && (k == Sse::Ss || k == Sse::Sd)) {
            return false;
        }
        auto m = modrm();
        set(stem + suffix(k), join(xmm(m.reg), xmm_rm(m, mem_width(k))));
        return true;
    }

    bool sse_int(const char* name, bool with_imm = false)
    {
        if (!px_.opsize) {
            return false;
        }
        auto m = modrm();
        std::string text = join(xmm(m.reg), xmm_rm(m, Width::Xmm));
        if (with_imm) {
            text += "," + imm(Width::B8);
        }
        set(name, text);
        return true;
    }

    bool decode_0f()
    {
        uint8_t op = u8();
        if (!ok_) {
            return false;
        }
        if (op >= 0x80 && op <= 0x8F) {
            int64_t rel = s32();
            set(bnd(std::string("j") + condition(op & 15)), branch_target(rel));
            return true;
        }
        if (op >= 0x90 && op <= 0x9F) {
            auto m = modrm();
            set(std::string("set") + condition(op & 15), rm_operand(m, Width::B8));
            return true;
        }
        if (op >= 0x40 && op <= 0x4F) {
            auto w = operand_width();
            auto m = modrm();
            set(std::string("cmov") + condition(op & 15), join(gpr(m.reg, w), rm_operand(m, w)));
            return true;
        }
        if (op >= 0xC8 && op <= 0xCF) {
            auto w = operand_width();
            set("bswap", gpr((op & 7) | (px_.rex_b() ? 8 : 0), w));
            return true;
        }

        switch (op) {
        case 0x05: set("syscall"); return true;
        case 0x0B: set("ud2"); return true;
        case 0x0D:
        case 0x18: {
            auto m = modrm();
            if (m.is_register) {
                return false;
            }
            static constexpr std::array<const char*, 4> hints = {"prefetchnta", "prefetcht0", "prefetcht1", "prefetcht2"};
            set(op == 0x0D ? "prefetchw" : hints[m.reg & 3], "BYTE PTR " + m.address);
            return true;
        }
        case 0x1E:
            if (px_.rep && peek() == 0xFA) {
                ++pos_;
                set("endbr64");
                return true;
            }
            [[fallthrough]];
        case 0x1F: {
            auto m = modrm();
            set("nop", rm_operand(m, operand_width()));
            return true;
        }
        case 0x10:
        case 0x11: {
            Sse k = sse_kind();
            auto m = modrm();
            std::string name = std::string(k == Sse::Ps || k == Sse::Pd ? "movu" : "mov") + suffix(k);
            std::string r = xmm(m.reg);
            std::string o = xmm_rm(m, mem_width(k));
            set(name, op == 0x10 ? join(r, o) : join(o, r));
            return true;
        }
        case 0x12:
        case 0x13:
        case 0x16:
        case 0x17: {
            if (px_.rep || px_.repne) {
                return false;
            }
            auto m = modrm();
            bool high = op >= 0x16;
            std::string name = std::string("mov") + (high ? "h" : "l") + (px_.opsize ? "pd" : "ps");
            if (m.is_register && !px_.opsize) {
                name = high ? "movlhps" : "movhlps";
            }
            std::string r = xmm(m.reg);
            std::string o = xmm_rm(m, Width::B64);
            set(name, (op & 1) == 0 ? join(r, o) : join(o, r));
            return true;
        }
        case 0x14: return sse_arith("unpckl", false);
        case 0x15: return sse_arith("unpckh", false);
        case 0x28:
        case 0x29: {
            if (px_.rep || px_.repne) {
                return false;
            }
            auto m = modrm();
            std::string name = px_.opsize ? "movapd" : "movaps";
            std::string r = xmm(m.reg);
            std::string o = xmm_rm(m, Width::Xmm);
            set(name, op == 0x28 ? join(r, o) : join(o, r));
            return true;
        }
        case 0x2A: {
            Sse k = sse_kind();
            if (k != Sse::Ss && k != Sse::Sd) {
                return false;
            }
            Width w = px_.rex_w() ? Width::B64 : Width::B32;
            auto m = modrm();
            set(std::string("cvtsi2") + suffix(k), join(xmm(m.reg), rm_operand(m, w)));
            return true;
        }
        case 0x2C:
        case 0x2D: {
            Sse k = sse_kind();
            if (k != Sse::Ss && k != Sse::Sd) {
                return false;
            }
            Width w = px_.rex_w() ? Width::B64 : Width::B32;
            auto m = modrm();
            std::string name = std::string(op == 0x2C ? "cvtt" : "cvt") + suffix(k) + "2si";
            set(name, join(gpr(m.reg, w), xmm_rm(m, mem_width(k))));
            return true;
        }
        case 0x2E:
        case 0x2F: {
            if (px_.rep || px_.repne) {
                return false;
            }
            auto m = modrm();
            Sse k = px_.opsize ? Sse::Sd : Sse::Ss;
            set(std::string(op == 0x2E ? "ucomi" : "comi") + suffix(k), join(xmm(m.reg), xmm_rm(m, mem_width(k))));
            return true;
        }
        case 0x31: set("rdtsc"); return true;
        case 0x51: return sse_arith("sqrt");
        case 0x54: return sse_arith("and", false);
        case 0x55: return sse_arith("andn", false);
        case 0x56: return sse_arith("or", false);
        case 0x57: return sse_arith("xor", false);
        case 0x58: return sse_arith("add");
        case 0x59: return sse_arith("mul");
        case 0x5C: return sse_arith("sub");
        case 0x5D: return sse_arith("min");
        case 0x5E: return sse_arith("div");
        case 0x5F: return sse_arith("max");
        case 0x5A: {
            Sse k = sse_kind();
            static constexpr std::array<const char*, 4> names = {"cvtps2pd", "cvtpd2ps", "cvtss2sd", "cvtsd2ss"};
            static constexpr std::array<Width, 4> widths = {Width::B64, Width::Xmm, Width::B32, Width::B64};
            auto m = modrm();
            set(names[static_cast<int>(k)], join(xmm(m.reg), xmm_rm(m, widths[static_cast<int>(k)])));
            return true;
        }
        case 0x5B: {
            if (px_.repne) {
                return false;
            }
            auto m = modrm();
            const char* name = px_.rep ? "cvttps2dq" : px_.opsize ? "cvtps2dq" : "cvtdq2ps";
            set(name, join(xmm(m.reg), xmm_rm(m, Width::Xmm)));
            return true;
        }
        case 0x60: return sse_int("punpcklbw");
        case 0x61: return sse_int("punpcklwd");
        case 0x62: return sse_int("punpckldq");
        case 0x66: return sse_int("pcmpgtd");
        case 0x68: return sse_int("punpckhbw");
        case 0x69: return sse_int("punpckhwd");
        case 0x6A: return sse_int("punpckhdq");
        case 0x6C: return sse_int("punpcklqdq");
        case 0x6D: return sse_int("punpckhqdq");
        case 0x6E: {
            if (!px_.opsize) {
                return false;
            }
            Width w = px_.rex_w() ? Width::B64 : Width::B32;
            auto m = modrm();
            set(px_.rex_w() ? "movq" : "movd", join(xmm(m.reg), rm_operand(m, w)));
            return true;
        }
        case 0x6F:
        case 0x7F: {
            if (!px_.opsize && !px_.rep) {
                return false;
            }
            auto m = modrm();
            std::string name = px_.rep ? "movdqu" : "movdqa";
            std::string r = xmm(m.reg);
            std::string o = xmm_rm(m, Width::Xmm);
            set(name, op == 0x6F ? join(r, o) : join(o, r));
            return true;
        }
        case 0x70: {
            if (px_.opsize) {
                return sse_int("pshufd", true);
            }
            if (px_.rep || px_.repne) {
                auto m = modrm();
                std::string text = join(xmm(m.reg), xmm_rm(m, Width::Xmm)) + "," + imm(Width::B8);
                set(px_.rep ? "pshufhw" : "pshuflw", text);
                return true;
            }
            return false;
        }
        case 0x72:
        case 0x73: {
            if (!px_.opsize) {
                return false;
            }
            auto m = modrm();
            if (!m.is_register) {
                return false;
            }
            const char* name = nullptr;
            unsigned sub = m.reg & 7;
            if (op == 0x72) {
                name = sub == 2 ? "psrld" : sub == 4 ? "psrad" : sub == 6 ? "pslld" : nullptr;
            }
            else {
                name = sub == 2 ? "psrlq" : sub == 3 ? "psrldq" : sub == 6 ? "psllq" : sub == 7 ? "pslldq" : nullptr;
            }
            if (name == nullptr) {
                return false;
            }
            set(name, join(xmm(m.rm), imm(Width::B8)));
            return true;
        }
        case 0x74: return sse_int("pcmpeqb");
        case 0x75: return sse_int("pcmpeqw");
        case 0x76: return sse_int("pcmpeqd");
        case 0x7E: {
            if (px_.rep) {
                auto m = modrm();
                set("movq", join(xmm(m.reg), xmm_rm(m, Width::B64)));
                return true;
            }
            if (!px_.opsize) {
                return false;
            }
            Width w = px_.rex_w() ? Width::B64 : Width::B32;
            auto m = modrm();
            set(px_.rex_w() ? "movq" : "movd", join(rm_operand(m, w), xmm(m.reg)));
            return true;
        }
        case 0xA2: set("cpuid"); return true;
        case 0xA3:
        case 0xAB:
        case 0xB3:
        case 0xBB: {
            static constexpr std::array<const char*, 4> names = {"bt", "bts", "btr", "btc"};
            auto w = operand_width();
            auto m = modrm();
            set(names[(op >> 3) & 3], join(rm_operand(m, w), gpr(m.reg, w)));
            return true;
        }
        case 0xA4:
        case 0xAC: {
            auto w = operand_width();
            auto m = modrm();
            std::string text = join(rm_operand(m, w), gpr(m.reg, w));
            set(op == 0xA4 ? "shld" : "shrd", text + "," + imm(Width::B8));
            return true;
        }
        case 0xA5:
        case 0xAD: {
            auto w = operand_width();
            auto m = modrm();
            set(op == 0xA5 ? "shld" : "shrd", join(rm_operand(m, w), gpr(m.reg, w)) + ",cl");
            return true;
        }
        case 0xAE: {
            uint8_t b = peek();
            if (b == 0xF0 || b == 0xE8 || b == 0xF8) {
                ++pos_;
                set(b == 0xF0 ? "mfence" : b == 0xE8 ? "lfence" : "sfence");
                return true;
            }
            return false;
        }
        case 0xAF: {
            auto w = operand_width();
            auto m = modrm();
            set("imul", join(gpr(m.reg, w), rm_operand(m, w)));
            return true;
        }
        case 0xB0:
        case 0xB1:
        case 0xC0:
        case 0xC1: {
            Width w = (op & 1) == 0 ? Width::B8 : operand_width();
            auto m = modrm();
            std::string name = op < 0xC0 ? "cmpxchg" : "xadd";
            if (px_.lock) {
                name = "lock " + name;
            }
            set(name, join(rm_operand(m, w), gpr(m.reg, w)));
            return true;
        }
        case 0xB6:
        case 0xB7:
        case 0xBE:
        case 0xBF: {
            auto w = operand_width();
            auto m = modrm();
            Width src = (op & 1) == 0 ? Width::B8 : Width::B16;
            set(op < 0xB8 ? "movzx" : "movsx", join(gpr(m.reg, w), rm_operand(m, src)));
            return true;
        }
        case 0xB8: {
            if (!px_.rep) {
                return false;
            }
            auto w = operand_width();
            auto m = modrm();
            set("popcnt", join(gpr(m.reg, w), rm_operand(m, w)));
            return true;
        }
        case 0xBA: {
            static constexpr std::array<const char*, 4> names = {"bt", "bts", "btr", "btc"};
            auto w = operand_width();
            auto m = modrm();
            if ((m.reg & 7) < 4) {
                return false;
            }
            std::string dst = rm_operand(m, w);
            set(names[(m.reg & 7) - 4], join(dst, imm(Width::B8)));
            return true;
        }
        case 0xBC:
        case 0xBD: {
            auto w = operand_width();
            auto m = modrm();
            const char* name = px_.rep ? (op == 0xBC ? "tzcnt" : "lzcnt") : (op == 0xBC ? "bsf" : "bsr");
            set(name, join(gpr(m.reg, w), rm_operand(m, w)));
            return true;
        }
        case 0xC2: {
            Sse k = sse_kind();
            auto m = modrm();
            std::string text = join(xmm(m.reg), xmm_rm(m, mem_width(k)));
            set(std::string("cmp") + suffix(k), text + "," + imm(Width::B8));
            return true;
        }
        case 0xC6: {
            if (px_.rep || px_.repne) {
                return false;
            }
            auto m = modrm();
            std::string text = join(xmm(m.reg), xmm_rm(m, Width::Xmm));
            set(px_.opsize ? "shufpd" : "shufps", text + "," + imm(Width::B8));
            return true;
        }
        case 0xD4: return sse_int("paddq");
        case 0xD6: {
            if (!px_.opsize) {
                return false;
            }
            auto m = modrm();
            set("movq", join(xmm_rm(m, Width::B64), xmm(m.reg)));
            return true;
        }
        case 0xDB: return sse_int("pand");
        case 0xDF: return sse_int("pandn");
        case 0xEB: return sse_int("por");
        case 0xEF: return sse_int("pxor");
        case 0xF4: return sse_int("pmuludq");
        case 0xFA: return sse_int("psubd");
        case 0xFB: return sse_int("psubq");
        case 0xFE: return sse_int("paddd");
        default: return false;
        }
    }
};

} // namespace

std::optional<Instruction> decode(std::span<const uint8_t> code, uint64_t address, const SymbolLookup& lookup)
{
    if (code.empty()) {
        return std::nullopt;
    }
    // Architectural limit on instruction length.
    auto window = code.first(std::min<size_t>(code.size(), 15));
    return Decoder(window, address, lookup).run();
}

} // namespace drvsynth::x86

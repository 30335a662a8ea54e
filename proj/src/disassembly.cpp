#include "drvsynth/disassembly.hpp"

#include "drvsynth/error.hpp"
#include "drvsynth/subprocess.hpp"
#include "drvsynth/x86_decoder.hpp"

#include <elf.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstring>
#include <fmt/format.h>
#include <map>
#include <sstream>
#include <system_error>

namespace drvsynth {

namespace {

struct Label {
    uint64_t address;
    std::string name;
    const Section* section;
};

bool is_plt_section(const Section& s)
{
    return s.name == ".plt" || s.name == ".plt.sec" || s.name == ".plt.got";
}

std::vector<Label> collect_labels(const BinaryImage& image)
{
    std::vector<Label> labels;
    auto add = [&](const RawSymbol& sym) {
        if (!sym.defined() || sym.name.empty() ||
            (sym.type != SymbolType::Func && sym.type != SymbolType::NoType && sym.type != SymbolType::GnuIfunc)) {
            return;
        }
        const Section* s = image.section_containing(sym.value);
        if (s != nullptr && s->executable()) {
            labels.push_back({sym.value, sym.name, s});
        }
    };
    for (const auto& sym : image.dynamic_symbols) {
        add(sym);
    }
    for (const auto& sym : image.static_symbols) {
        add(sym);
    }
    std::ranges::sort(labels, [](const Label& a, const Label& b) {
        return a.address != b.address ? a.address < b.address : a.name < b.name;
    });
    return labels;
}

x86::SymbolLookup make_lookup(const BinaryImage& image)
{
    auto labels = std::make_shared<std::vector<Label>>(collect_labels(image));
    auto plt = std::make_shared<std::map<uint64_t, std::string>>();
    for (auto& [addr, name] : plt_stub_names(image)) {
        plt->emplace(addr, name);
    }
    const BinaryImage* img = &image;
    return [labels, plt, img](uint64_t target) -> std::optional<std::string> {
        if (auto it = plt->find(target); it != plt->end()) {
            return it->second;
        }
        const Section* s = img->section_containing(target);
        if (s == nullptr) {
            return std::nullopt;
        }
        auto it = std::upper_bound(labels->begin(), labels->end(), target,
                                   [](uint64_t t, const Label& l) { return t < l.address; });
        while (it != labels->begin()) {
            --it;
            if (it->section == s) {
                uint64_t off = target - it->address;
                return off == 0 ? it->name : fmt::format("{}+0x{:x}", it->name, off);
            }
        }
        if (is_plt_section(*s)) {
            return s->name == ".plt" ? std::optional<std::string>(".plt") : std::nullopt;
        }
        return std::nullopt;
    };
}

const Section& executable_section_for(const BinaryImage& image, uint64_t address, const std::string& name)
{
    if (image.machine != Machine::Amd64) {
        throw Error(ErrorCode::DecodeFailure, "only AMD64 objects can be disassembled");
    }
    const Section* s = image.section_containing(address);
    if (s == nullptr || !s->executable() || !s->has_file_data()) {
        throw Error(ErrorCode::DecodeFailure,
                    fmt::format("{} at 0x{:x} is not inside an executable section", name, address));
    }
    return *s;
}

uint64_t parse_hex(std::string_view text)
{
    if (text.starts_with("0x") || text.starts_with("0X")) {
        text.remove_prefix(2);
    }
    return std::stoull(std::string(text), nullptr, 16);
}

} // namespace

std::string Disassembly::text() const
{
    std::string out;
    for (const auto& insn : instructions) {
        out += fmt::format("{:x}:\t{}\t{}\n", insn.address, insn.mnemonic, insn.operands);
    }
    return out;
}

std::vector<DisasmLine> Disassembly::parse_text(std::string_view text)
{
    std::vector<DisasmLine> out;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        auto colon = line.find(":\t");
        auto tab = line.find('\t', colon + 2);
        if (colon == std::string::npos || tab == std::string::npos) {
            throw Error(ErrorCode::DecodeFailure, "malformed disassembly line: " + line);
        }
        DisasmLine insn;
        insn.address = parse_hex(std::string_view(line).substr(0, colon));
        insn.mnemonic = line.substr(colon + 2, tab - colon - 2);
        insn.operands = line.substr(tab + 1);
        out.push_back(std::move(insn));
    }
    return out;
}

FunctionExtent function_extent(const BinaryImage& image, const ExportedFunction& function)
{
    const Section& section = executable_section_for(image, function.address, function.name);
    const uint64_t section_end = section.address + section.size;

    FunctionExtent extent;
    extent.start = function.address;
    if (function.size > 0) {
        extent.length = std::min(function.size, section_end - function.address);
        return extent;
    }

    std::optional<uint64_t> next;
    auto consider = [&](const RawSymbol& sym) {
        if (!sym.defined() || sym.name == function.name || sym.value < function.address || sym.value >= section_end) {
            return;
        }
        if (sym.type != SymbolType::Func && sym.type != SymbolType::GnuIfunc && sym.type != SymbolType::NoType) {
            return;
        }
        if (!next || sym.value < *next) {
            next = sym.value;
        }
    };
    for (const auto& sym : image.dynamic_symbols) {
        consider(sym);
    }
    for (const auto& sym : image.static_symbols) {
        consider(sym);
    }
    if (next) {
        extent.length = *next - function.address;
    }
    else {
        extent.length = section_end - function.address;
        extent.stop_at_return = true;
    }
    return extent;
}

std::vector<std::pair<uint64_t, std::string>> plt_stub_names(const BinaryImage& image)
{
    // GOT slot -> imported symbol name, from JUMP_SLOT and GLOB_DAT relocations.
    std::map<uint64_t, std::string> slots;
    for (const auto& s : image.sections) {
        if (s.type != SHT_RELA || (s.name != ".rela.plt" && s.name != ".rela.dyn")) {
            continue;
        }
        auto data = image.section_data(s);
        for (size_t off = 0; off + sizeof(Elf64_Rela) <= data.size(); off += sizeof(Elf64_Rela)) {
            Elf64_Rela rela;
            std::memcpy(&rela, data.data() + off, sizeof(rela));
            auto type = ELF64_R_TYPE(rela.r_info);
            auto index = ELF64_R_SYM(rela.r_info);
            if ((type == R_X86_64_JUMP_SLOT || type == R_X86_64_GLOB_DAT) && index < image.dynamic_symbols.size()) {
                const auto& name = image.dynamic_symbols[index].name;
                if (!name.empty()) {
                    slots.emplace(rela.r_offset, name);
                }
            }
        }
    }

    std::vector<std::pair<uint64_t, std::string>> out;
    if (slots.empty() || image.machine != Machine::Amd64) {
        return out;
    }
    for (const auto& s : image.sections) {
        if (!is_plt_section(s) || !s.has_file_data()) {
            continue;
        }
        auto data = image.section_data(s);
        uint64_t offset = 0;
        // IBT stubs open with endbr64; the entry then starts there, not at the jmp.
        std::optional<uint64_t> endbr_at;
        while (offset < data.size()) {
            auto insn = x86::decode(data.subspan(offset), s.address + offset);
            if (!insn) {
                ++offset;
                endbr_at.reset();
                continue;
            }
            if (insn->mnemonic.ends_with("jmp") && insn->operands.find("[rip+") != std::string::npos) {
                auto hash = insn->operands.find('#');
                if (hash != std::string::npos) {
                    uint64_t slot = parse_hex(insn->operands.substr(hash + 2));
                    if (auto it = slots.find(slot); it != slots.end()) {
                        out.emplace_back(endbr_at.value_or(insn->address), it->second + "@plt");
                    }
                }
            }
            endbr_at = insn->mnemonic == "endbr64" ? std::optional<uint64_t>(insn->address) : std::nullopt;
            offset += insn->length;
        }
    }
    return out;
}

Disassembly BuiltinDisassembler::disassemble(const BinaryImage& image, const ExportedFunction& function)
{
    auto extent = function_extent(image, function);
    return disassemble_range(image, function.name, extent.start, extent.length, extent.stop_at_return);
}

Disassembly BuiltinDisassembler::disassemble_range(const BinaryImage& image, const std::string& name, uint64_t address,
                                                   uint64_t length, bool stop_at_return)
{
    const Section& section = executable_section_for(image, address, name);
    length = std::min(length, section.address + section.size - address);
    auto bytes = image.read_virtual(address, length);
    if (!bytes) {
        throw Error(ErrorCode::DecodeFailure, "cannot read bytes for " + name);
    }
    auto lookup = make_lookup(image);

    Disassembly out;
    out.function_name = name;
    uint64_t offset = 0;
    while (offset < bytes->size()) {
        auto insn = x86::decode(bytes->subspan(offset), address + offset, lookup);
        if (!insn) {
            out.instructions.push_back({address + offset, "(bad)", ""});
            ++offset;
            continue;
        }
        offset += insn->length;
        bool is_return = insn->mnemonic.ends_with("ret");
        out.instructions.push_back({insn->address, std::move(insn->mnemonic), std::move(insn->operands)});
        if (stop_at_return && is_return) {
            break;
        }
    }
    out.byte_length = offset;
    return out;
}

ExternalDisassembler::ExternalDisassembler(std::vector<std::string> command) : command_(std::move(command)) {}

ExternalDisassembler::~ExternalDisassembler() = default;

std::string ExternalDisassembler::id() const
{
    return command_.empty() ? std::string("external") : "external:" + command_.front();
}

Disassembly ExternalDisassembler::disassemble(const BinaryImage& image, const ExportedFunction& function)
{
    auto extent = function_extent(image, function);
    return disassemble_range(image, function.name, extent.start, extent.length, extent.stop_at_return);
}

Disassembly ExternalDisassembler::disassemble_range(const BinaryImage& image, const std::string& name,
                                                    uint64_t address, uint64_t length, bool stop_at_return)
{
    const Section& section = executable_section_for(image, address, name);
    length = std::min(length, section.address + section.size - address);

    std::optional<std::string> reply;
    {
        std::lock_guard lock(mutex_);
        if (!channel_) {
            try {
                channel_ = std::make_unique<LineChannel>(command_);
            }
            catch (const std::system_error& e) {
                throw Error(ErrorCode::AdapterUnavailable, e.what());
            }
        }
        reply = channel_->request(fmt::format("disasm {} 0x{:x} {}", std::filesystem::absolute(image.path).string(),
                                              address, length));
        if (!reply) {
            channel_.reset();
            throw Error(ErrorCode::AdapterUnavailable, "disassembler adapter exited");
        }
    }

    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(*reply);
    }
    catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::DecodeFailure, std::string("adapter sent invalid JSON: ") + e.what());
    }
    if (doc.contains("error")) {
        throw Error(ErrorCode::DecodeFailure, "adapter: " + doc["error"].get<std::string>());
    }

    Disassembly out;
    out.function_name = name;
    out.byte_length = length;
    try {
        for (const auto& item : doc.at("instructions")) {
            DisasmLine insn;
            insn.address = item.at("address").get<uint64_t>();
            insn.mnemonic = item.at("mnemonic").get<std::string>();
            insn.operands = item.value("operands", std::string());
            if (!out.instructions.empty() && insn.address <= out.instructions.back().address) {
                throw Error(ErrorCode::DecodeFailure, "adapter returned non-ascending addresses");
            }
            bool is_return = insn.mnemonic.ends_with("ret");
            out.instructions.push_back(std::move(insn));
            if (stop_at_return && is_return) {
                out.byte_length = out.instructions.back().address + 1 - address;
                break;
            }
        }
    }
    catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::DecodeFailure, std::string("adapter response missing fields: ") + e.what());
    }
    return out;
}

} // namespace drvsynth

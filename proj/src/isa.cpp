#include "msw/isa.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <sstream>

#include "msw/error.hpp"

namespace msw {

namespace {

using K = OperandKind;

const std::vector<OpInfo>& op_table()
{
    static const std::vector<OpInfo> table = {
        {Opcode::Halt, "HALT", {}, OpClass::Other},
        {Opcode::Thend, "THEND", {}, OpClass::Other},
        {Opcode::Nop, "NOP", {}, OpClass::Other},
        {Opcode::Loadi, "LOADI", {K::Reg, K::Imm}, OpClass::Other},
        {Opcode::Mov, "MOV", {K::Reg, K::Reg}, OpClass::Other},
        {Opcode::Add, "ADD", {K::Reg, K::Reg, K::Reg}, OpClass::Other},
        {Opcode::Sub, "SUB", {K::Reg, K::Reg, K::Reg}, OpClass::Other},
        {Opcode::And, "AND", {K::Reg, K::Reg, K::Reg}, OpClass::Other},
        {Opcode::Or, "OR", {K::Reg, K::Reg, K::Reg}, OpClass::Other},
        {Opcode::CmpEq, "CMPEQ", {K::Reg, K::Reg, K::Reg}, OpClass::Comparison},
        {Opcode::CmpNe, "CMPNE", {K::Reg, K::Reg, K::Reg}, OpClass::Comparison},
        {Opcode::CmpLt, "CMPLT", {K::Reg, K::Reg, K::Reg}, OpClass::Comparison},
        {Opcode::CmpGt, "CMPGT", {K::Reg, K::Reg, K::Reg}, OpClass::Comparison},
        {Opcode::CmpLe, "CMPLE", {K::Reg, K::Reg, K::Reg}, OpClass::Comparison},
        {Opcode::CmpGe, "CMPGE", {K::Reg, K::Reg, K::Reg}, OpClass::Comparison},
        {Opcode::MsReset, "MSRESET", {K::Switch}, OpClass::MsOp},
        {Opcode::MsArity, "MSARITY", {K::Switch, K::Count, K::Kind}, OpClass::MsOp},
        {Opcode::MsIn, "MSIN", {K::Switch, K::Line}, OpClass::MsOp},
        {Opcode::MsOff, "MSOFF", {K::Switch}, OpClass::MsOp},
        {Opcode::MsAct, "MSACT", {K::Switch, K::Line, K::Addr}, OpClass::MsOp},
        {Opcode::MsFalse, "MSFALSE", {K::Switch, K::Addr}, OpClass::MsOp},
        {Opcode::MsRes, "MSRES", {K::Switch, K::Line, K::Field, K::Reg}, OpClass::MsOp},
        {Opcode::MsPut, "MSPUT", {K::Switch, K::Line, K::Field, K::Reg}, OpClass::MsOp},
        {Opcode::MsSave, "MSSAVE", {K::Switch, K::Slot}, OpClass::MsOp},
        {Opcode::MsLoad, "MSLOAD", {K::Switch, K::Slot}, OpClass::MsOp},
        {Opcode::Jmp, "JMP", {K::Addr}, OpClass::Jump},
        {Opcode::JmpIf, "JMPIF", {K::Reg, K::Addr}, OpClass::Jump},
        {Opcode::JmpZ, "JMPZ", {K::Reg, K::Addr}, OpClass::Jump},
        {Opcode::Ld, "LD", {K::Reg, K::Mem}, OpClass::Other},
        {Opcode::St, "ST", {K::Reg, K::Mem}, OpClass::Other},
        {Opcode::Poll, "POLL", {K::Reg, K::Mem}, OpClass::Poll},
        {Opcode::Print, "PRINT", {K::Reg}, OpClass::Other},
        {Opcode::PrintS, "PRINTS", {K::Str}, OpClass::Other},
        {Opcode::PrintNl, "PRINTNL", {}, OpClass::Other},
        {Opcode::Ext, "EXT", {K::Ext, K::Reg, K::Count, K::Reg}, OpClass::Other},
    };
    return table;
}

const OpInfo* find_info(std::uint16_t byte)
{
    static const auto index = [] {
        std::array<const OpInfo*, 256> idx{};
        for (const auto& info : op_table())
            idx[static_cast<std::uint8_t>(info.op)] = &info;
        return idx;
    }();
    return byte < 256 ? index[byte] : nullptr;
}

}  // namespace

const OpInfo& op_info(Opcode op)
{
    const OpInfo* info = find_info(static_cast<std::uint8_t>(op));
    if (info == nullptr)
        throw DecodeError("unknown opcode " + std::to_string(static_cast<int>(op)));
    return *info;
}

std::optional<Opcode> opcode_from_byte(std::uint16_t byte)
{
    const OpInfo* info = find_info(byte);
    if (info == nullptr)
        return std::nullopt;
    return info->op;
}

std::optional<Opcode> opcode_from_mnemonic(std::string_view mnemonic)
{
    std::string upper(mnemonic);
    std::transform(upper.begin(), upper.end(), upper.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    for (const auto& info : op_table())
        if (info.mnemonic == upper)
            return info.op;
    return std::nullopt;
}

bool is_ms_op(Opcode op)
{
    return op_info(op).cls == OpClass::MsOp;
}

Instruction::Instruction(Opcode opcode, std::initializer_list<long long> operands) : op(opcode)
{
    const auto& info = op_info(opcode);
    if (operands.size() != info.operands.size())
        throw EncodingError(std::string(info.mnemonic) + " takes " +
                            std::to_string(info.operands.size()) + " operands, got " +
                            std::to_string(operands.size()));
    std::size_t i = 0;
    for (long long v : operands) {
        if (v < 0 || v > 0xFFFF)
            throw EncodingError(std::string(info.mnemonic) + " operand " + std::to_string(i) +
                                " = " + std::to_string(v) + " does not fit 16 bits");
        const auto kind = info.operands[i];
        if (kind == K::Reg && v >= kRegisterCount)
            throw EncodingError("register r" + std::to_string(v) + " does not exist");
        if (kind == K::Kind && v > 1)
            throw EncodingError("gate kind must be 0 (and) or 1 (or)");
        args[i++] = static_cast<std::uint16_t>(v);
    }
}

std::uint16_t Program::intern_string(std::string_view s)
{
    auto it = std::find(strings.begin(), strings.end(), s);
    if (it != strings.end())
        return static_cast<std::uint16_t>(it - strings.begin());
    strings.emplace_back(s);
    return static_cast<std::uint16_t>(strings.size() - 1);
}

std::uint16_t Program::intern_extern(std::string_view s)
{
    auto it = std::find(externs.begin(), externs.end(), s);
    if (it != externs.end())
        return static_cast<std::uint16_t>(it - externs.begin());
    externs.emplace_back(s);
    return static_cast<std::uint16_t>(externs.size() - 1);
}

void encode_into(const Instruction& instr, std::vector<std::uint16_t>& out)
{
    const auto& info = op_info(instr.op);
    out.push_back(static_cast<std::uint16_t>(instr.op));
    for (std::size_t i = 0; i < info.operands.size(); ++i)
        out.push_back(instr.args[i]);
    for (std::size_t i = info.operands.size(); i < kMaxOperands; ++i)
        if (instr.args[i] != 0)
            throw EncodingError(std::string(info.mnemonic) + " has a stray operand");
}

std::vector<std::uint16_t> encode(const Instruction& instr)
{
    std::vector<std::uint16_t> out;
    encode_into(instr, out);
    return out;
}

Instruction decode(std::span<const std::uint16_t> words, std::size_t& pos)
{
    if (pos >= words.size())
        throw DecodeError("no instruction at word " + std::to_string(pos));
    const OpInfo* info = find_info(words[pos]);
    if (info == nullptr) {
        std::ostringstream os;
        os << "unknown opcode 0x" << std::hex << words[pos] << " at word " << std::dec << pos;
        throw DecodeError(os.str());
    }
    if (pos + 1 + info->operands.size() > words.size())
        throw DecodeError(std::string("truncated ") + std::string(info->mnemonic));
    Instruction instr;
    instr.op = info->op;
    for (std::size_t i = 0; i < info->operands.size(); ++i) {
        instr.args[i] = words[pos + 1 + i];
        if (info->operands[i] == K::Reg && instr.args[i] >= kRegisterCount)
            throw DecodeError("register operand out of range in " + std::string(info->mnemonic));
        if (info->operands[i] == K::Kind && instr.args[i] > 1)
            throw DecodeError("bad gate kind in " + std::string(info->mnemonic));
    }
    pos += 1 + info->operands.size();
    return instr;
}

Instruction decode(std::span<const std::uint16_t> words)
{
    std::size_t pos = 0;
    Instruction instr = decode(words, pos);
    if (pos != words.size())
        throw DecodeError("trailing words after instruction");
    return instr;
}

std::string format_instruction(const Instruction& instr)
{
    const auto& info = op_info(instr.op);
    std::string out(info.mnemonic);
    for (std::size_t i = 0; i < info.operands.size(); ++i) {
        out += i == 0 ? " " : ", ";
        if (info.operands[i] == K::Reg)
            out += "r";
        out += std::to_string(instr.args[i]);
    }
    return out;
}

// --- binary image -----------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'M', 'S', 'W', '1'};
constexpr std::uint16_t kVersion = 1;

class WordWriter {
public:
    void word(std::uint32_t w)
    {
        if (w > 0xFFFF)
            throw EncodingError("value " + std::to_string(w) + " does not fit a 16-bit word");
        words_.push_back(static_cast<std::uint16_t>(w));
    }
    void text(const std::string& s)
    {
        word(static_cast<std::uint32_t>(s.size()));
        for (std::size_t i = 0; i < s.size(); i += 2) {
            std::uint16_t lo = static_cast<std::uint8_t>(s[i]);
            std::uint16_t hi = i + 1 < s.size() ? static_cast<std::uint8_t>(s[i + 1]) : 0;
            words_.push_back(static_cast<std::uint16_t>(lo | (hi << 8)));
        }
    }
    std::vector<std::uint16_t>& words() { return words_; }

private:
    std::vector<std::uint16_t> words_;
};

class WordReader {
public:
    explicit WordReader(std::vector<std::uint16_t> w) : words_(std::move(w)) {}
    std::uint16_t word()
    {
        if (pos_ >= words_.size())
            throw DecodeError("binary image truncated");
        return words_[pos_++];
    }
    std::string text()
    {
        const std::size_t n = word();
        std::string s;
        s.reserve(n);
        for (std::size_t i = 0; i < n; i += 2) {
            const std::uint16_t w = word();
            s.push_back(static_cast<char>(w & 0xFF));
            if (i + 1 < n)
                s.push_back(static_cast<char>(w >> 8));
        }
        return s;
    }
    std::span<const std::uint16_t> take(std::size_t n)
    {
        if (pos_ + n > words_.size())
            throw DecodeError("binary image truncated");
        auto s = std::span<const std::uint16_t>(words_).subspan(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == words_.size(); }

private:
    std::vector<std::uint16_t> words_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> write_binary(const Program& p)
{
    WordWriter w;
    w.word(kVersion);
    w.word(p.entry);
    w.word(p.memory_size);
    w.word(static_cast<std::uint32_t>(p.switch_sizes.size()));
    for (int s : p.switch_sizes)
        w.word(static_cast<std::uint32_t>(s));
    w.word(static_cast<std::uint32_t>(p.strings.size()));
    for (const auto& s : p.strings)
        w.text(s);
    w.word(static_cast<std::uint32_t>(p.externs.size()));
    for (const auto& s : p.externs)
        w.text(s);
    for (const auto* table : {&p.labels, &p.variables}) {
        w.word(static_cast<std::uint32_t>(table->size()));
        for (const auto& [name, value] : *table) {
            w.text(name);
            w.word(value);
        }
    }
    std::vector<std::uint16_t> code;
    for (const auto& instr : p.code)
        encode_into(instr, code);
    w.word(static_cast<std::uint32_t>(code.size() & 0xFFFF));
    w.word(static_cast<std::uint32_t>(code.size() >> 16));
    w.words().insert(w.words().end(), code.begin(), code.end());

    std::vector<std::uint8_t> out(kMagic, kMagic + 4);
    for (std::uint16_t word : w.words()) {
        out.push_back(static_cast<std::uint8_t>(word & 0xFF));
        out.push_back(static_cast<std::uint8_t>(word >> 8));
    }
    return out;
}

Program read_binary(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw DecodeError("missing MSW1 magic");
    if ((bytes.size() - 4) % 2 != 0)
        throw DecodeError("odd byte count in word stream");
    std::vector<std::uint16_t> words;
    for (std::size_t i = 4; i < bytes.size(); i += 2)
        words.push_back(static_cast<std::uint16_t>(bytes[i] | (bytes[i + 1] << 8)));

    WordReader r(std::move(words));
    if (r.word() != kVersion)
        throw DecodeError("unsupported binary version");
    Program p;
    p.entry = r.word();
    p.memory_size = r.word();
    for (std::size_t n = r.word(); n > 0; --n)
        p.switch_sizes.push_back(r.word());
    for (std::size_t n = r.word(); n > 0; --n)
        p.strings.push_back(r.text());
    for (std::size_t n = r.word(); n > 0; --n)
        p.externs.push_back(r.text());
    for (auto* table : {&p.labels, &p.variables}) {
        for (std::size_t n = r.word(); n > 0; --n) {
            std::string name = r.text();
            (*table)[name] = r.word();
        }
    }
    const std::size_t lo = r.word();
    const std::size_t hi = r.word();
    const auto code = r.take(lo | (hi << 16));
    for (std::size_t pos = 0; pos < code.size();)
        p.code.push_back(decode(code, pos));
    if (!r.done())
        throw DecodeError("trailing words after code section");
    return p;
}

}  // namespace msw

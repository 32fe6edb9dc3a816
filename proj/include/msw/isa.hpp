#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "msw/gate.hpp"

namespace msw {

// Opcode byte values are part of the published binary format.
enum class Opcode : std::uint8_t {
    Halt = 0x01,
    Thend = 0x02,
    Nop = 0x03,
    Loadi = 0x04,
    Mov = 0x05,
    Add = 0x06,
    Sub = 0x07,
    And = 0x08,
    Or = 0x09,
    CmpEq = 0x0A,
    CmpNe = 0x0B,
    CmpLt = 0x0C,
    CmpGt = 0x0D,
    CmpLe = 0x0E,
    CmpGe = 0x0F,

    MsReset = 0x10,
    MsArity = 0x11,
    MsIn = 0x12,
    MsOff = 0x13,
    MsAct = 0x14,
    MsFalse = 0x15,
    MsRes = 0x16,
    MsPut = 0x17,
    MsSave = 0x18,
    MsLoad = 0x19,

    Jmp = 0x20,
    JmpIf = 0x21,
    JmpZ = 0x22,

    Ld = 0x28,
    St = 0x29,
    Poll = 0x2A,

    Print = 0x30,
    PrintS = 0x31,
    PrintNl = 0x32,

    Ext = 0x38,
};

enum class OperandKind : std::uint8_t {
    Reg,     // r0..r15
    Imm,     // 16-bit unsigned immediate
    Addr,    // code address, 0 = null
    Mem,     // data memory cell
    Switch,  // physical switch id
    Line,    // switch line
    Field,   // result field, 0 = status
    Kind,    // gate kind: 0 and, 1 or
    Slot,    // configuration save slot
    Count,
    Str,     // index into the string table
    Ext,     // index into the extern table
};

enum class OpClass : std::uint8_t { Comparison, Jump, MsOp, Poll, Other };

struct OpInfo {
    Opcode op;
    std::string_view mnemonic;
    std::vector<OperandKind> operands;
    OpClass cls;
};

inline constexpr int kRegisterCount = 16;
inline constexpr std::size_t kMaxOperands = 4;

const OpInfo& op_info(Opcode op);
std::optional<Opcode> opcode_from_byte(std::uint16_t byte);
std::optional<Opcode> opcode_from_mnemonic(std::string_view mnemonic);
bool is_ms_op(Opcode op);

struct Instruction {
    Opcode op = Opcode::Nop;
    std::array<std::uint16_t, kMaxOperands> args{};

    Instruction() = default;
    // Operands outside [0, 0xFFFF] raise EncodingError; so does a count that
    // does not match the opcode.
    Instruction(Opcode op, std::initializer_list<long long> operands);

    std::uint16_t arg(std::size_t i) const { return args[i]; }
    bool operator==(const Instruction&) const = default;
};

// Where a mswitch target's result record lives at run time.
struct ResultLocation {
    enum class Where : std::uint8_t { Switch, Memory };
    Where where = Where::Switch;
    int sw = 0;    // physical switch (Where::Switch)
    int line = 0;  // target line (Where::Switch)
    std::uint16_t status_cell = 0;             // Where::Memory
    std::uint16_t ready_cell = 0;              // Where::Memory, nonzero once written
    std::vector<std::uint16_t> field_cells;    // Where::Memory, field n at [n-1]
    std::vector<std::string> field_names;      // field n named field_names[n-1]
};

struct Program {
    std::vector<Instruction> code;  // code[0] sits at address 1
    Address entry = 1;
    std::uint16_t memory_size = 0;  // valid cells are 1..memory_size
    std::vector<int> switch_sizes;  // minimum size per physical switch id
    std::vector<std::string> strings;
    std::vector<std::string> externs;
    std::map<std::string, std::uint16_t> labels;     // code labels
    std::map<std::string, std::uint16_t> variables;  // data cells
    // (logical switch, target name) -> record location. Not serialized.
    std::map<std::pair<std::string, std::string>, ResultLocation> results;

    std::size_t size() const noexcept { return code.size(); }
    bool valid_address(Address a) const noexcept { return a >= 1 && a <= code.size(); }
    const Instruction& at(Address a) const { return code.at(a - 1); }

    std::uint16_t intern_string(std::string_view s);
    std::uint16_t intern_extern(std::string_view s);
};

// Fixed-width word encoding: one opcode word followed by one word per operand.
std::vector<std::uint16_t> encode(const Instruction& instr);
void encode_into(const Instruction& instr, std::vector<std::uint16_t>& out);
// Decodes the instruction starting at words[pos] and advances pos.
Instruction decode(std::span<const std::uint16_t> words, std::size_t& pos);
Instruction decode(std::span<const std::uint16_t> words);

// Binary program image: "MSW1" then little-endian 16-bit words.
std::vector<std::uint8_t> write_binary(const Program& p);
Program read_binary(std::span<const std::uint8_t> bytes);

Program assemble(std::string_view text);
std::string disassemble(const Program& p);
// Names every referenced address that has no label, so that a disassembly
// reassembles to an identical image.
void label_targets(Program& p);

// One-line rendering of a single instruction, addresses as numbers.
std::string format_instruction(const Instruction& instr);

}  // namespace msw

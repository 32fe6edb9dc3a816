#include <doctest.h>

#include <random>

#include "msw/error.hpp"
#include "msw/isa.hpp"

using namespace msw;

namespace {

const std::vector<Opcode> kAllOps = {
    Opcode::Halt,   Opcode::Thend,   Opcode::Nop,     Opcode::Loadi, Opcode::Mov,
    Opcode::Add,    Opcode::Sub,     Opcode::And,     Opcode::Or,    Opcode::CmpEq,
    Opcode::CmpNe,  Opcode::CmpLt,   Opcode::CmpGt,   Opcode::CmpLe, Opcode::CmpGe,
    Opcode::MsReset, Opcode::MsArity, Opcode::MsIn,   Opcode::MsOff, Opcode::MsAct,
    Opcode::MsFalse, Opcode::MsRes,  Opcode::MsPut,   Opcode::MsSave, Opcode::MsLoad,
    Opcode::Jmp,    Opcode::JmpIf,   Opcode::JmpZ,    Opcode::Ld,    Opcode::St,
    Opcode::Poll,   Opcode::Print,   Opcode::PrintS,  Opcode::PrintNl, Opcode::Ext,
};

Program random_program(std::mt19937& rng)
{
    Program p;
    p.memory_size = 64;
    p.switch_sizes = {8, 8, 4};
    p.strings = {"hello world", "quote \" and \\ slash", ""};
    p.externs = {"call-a", "idx-has-dept"};
    const std::size_t n = 1 + rng() % 40;
    auto pick = [&](unsigned lo, unsigned hi) { return static_cast<long long>(lo + rng() % (hi - lo + 1)); };
    for (std::size_t i = 0; i < n; ++i) {
        const Opcode op = kAllOps[rng() % kAllOps.size()];
        std::vector<long long> args;
        for (OperandKind k : op_info(op).operands) {
            switch (k) {
            case OperandKind::Reg: args.push_back(pick(0, 15)); break;
            case OperandKind::Imm: args.push_back(pick(0, 0xFFFF)); break;
            case OperandKind::Addr:
                args.push_back(op == Opcode::MsAct || op == Opcode::MsFalse ? pick(0, static_cast<unsigned>(n))
                                                                            : pick(1, static_cast<unsigned>(n)));
                break;
            case OperandKind::Mem: args.push_back(pick(1, 64)); break;
            case OperandKind::Switch: args.push_back(pick(0, 2)); break;
            case OperandKind::Line: args.push_back(pick(0, 3)); break;
            case OperandKind::Field: args.push_back(pick(0, 3)); break;
            case OperandKind::Kind: args.push_back(pick(0, 1)); break;
            case OperandKind::Slot: args.push_back(pick(1, 4)); break;
            case OperandKind::Count: args.push_back(pick(0, 4)); break;
            case OperandKind::Str: args.push_back(pick(0, 2)); break;
            case OperandKind::Ext: args.push_back(pick(0, 1)); break;
            }
        }
        Instruction ins;
        ins.op = op;
        for (std::size_t j = 0; j < args.size(); ++j)
            ins.args[j] = static_cast<std::uint16_t>(args[j]);
        p.code.push_back(ins);
    }
    p.entry = static_cast<Address>(1 + rng() % n);
    return p;
}

void check_same(const Program& a, const Program& b)
{
    REQUIRE(a.code.size() == b.code.size());
    for (std::size_t i = 0; i < a.code.size(); ++i)
        REQUIRE_MESSAGE(a.code[i] == b.code[i], format_instruction(a.code[i]));
    CHECK(a.entry == b.entry);
    CHECK(a.memory_size == b.memory_size);
    CHECK(a.switch_sizes == b.switch_sizes);
    CHECK(a.strings == b.strings);
    CHECK(a.externs == b.externs);
}

}  // namespace

TEST_SUITE("isa")
{
    TEST_CASE("MSIN encodes as opcode then operands")
    {
        CHECK(encode(Instruction(Opcode::MsIn, {2, 1})) == std::vector<std::uint16_t>{0x12, 2, 1});
    }

    TEST_CASE("MSACT round trips through the word encoding")
    {
        const Instruction i(Opcode::MsAct, {1, 0, 100});
        CHECK(decode(encode(i)) == i);
    }

    TEST_CASE("unknown opcode is a decode error")
    {
        const std::vector<std::uint16_t> w{0xFF};
        CHECK_THROWS_AS(decode(w), DecodeError);
        const std::vector<std::uint16_t> truncated{0x12, 2};
        CHECK_THROWS_AS(decode(truncated), DecodeError);
    }

    TEST_CASE("operand validation")
    {
        CHECK_THROWS_AS(Instruction(Opcode::Mov, {16, 0}), EncodingError);
        CHECK_THROWS_AS(Instruction(Opcode::MsArity, {0, 2, 2}), EncodingError);
        CHECK_THROWS_AS(Instruction(Opcode::MsIn, {0}), EncodingError);
        CHECK_THROWS_AS(Instruction(Opcode::Loadi, {0, 70000}), EncodingError);
    }

    TEST_CASE("label resolution")
    {
        const Program self = assemble("L: JMP L\n");
        REQUIRE(self.code.size() == 1);
        CHECK(self.code[0] == Instruction(Opcode::Jmp, {1}));

        const Program fwd = assemble("NOP\nNOP\nNOP\nNOP\nNOP\nNOP\nMSACT 1, 0, T\nT: THEND\n");
        CHECK(fwd.code[6] == Instruction(Opcode::MsAct, {1, 0, 8}));
    }

    TEST_CASE("undefined label names the label")
    {
        try {
            assemble("JMP nowhere\n");
            FAIL("expected AssemblyError");
        } catch (const AssemblyError& e) {
            CHECK(std::string(e.what()).find("nowhere") != std::string::npos);
        }
    }

    TEST_CASE("bad mnemonic and bad operand count report the line")
    {
        try {
            assemble("NOP\nFROB r1\n");
            FAIL("expected AssemblyError");
        } catch (const AssemblyError& e) {
            CHECK(e.line() == 2);
        }
        CHECK_THROWS_AS(assemble("MOV r1\n"), AssemblyError);
    }

    TEST_CASE("assemble(disassemble(p)) is the identity on random programs")
    {
        std::mt19937 rng(2024);
        for (int i = 0; i < 1000; ++i) {
            const Program p = random_program(rng);
            const std::string text = disassemble(p);
            INFO(text);
            check_same(p, assemble(text));
        }
    }

    TEST_CASE("binary image round trip")
    {
        std::mt19937 rng(99);
        for (int i = 0; i < 300; ++i) {
            const Program p = random_program(rng);
            const auto bytes = write_binary(p);
            REQUIRE(bytes.size() >= 4);
            CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "MSW1");
            check_same(p, read_binary(bytes));
        }
    }

    TEST_CASE("binary image rejects bad magic")
    {
        const std::vector<std::uint8_t> junk{'N', 'O', 'P', 'E', 0, 0};
        CHECK_THROWS_AS(read_binary(junk), DecodeError);
    }
}

#include <doctest.h>

#include "msw/error.hpp"
#include "msw/isa.hpp"
#include "msw/vm.hpp"

using namespace msw;

namespace {

RunResult run_asm(const std::string& text, int procs = 8, std::uint64_t max_cycles = 10000)
{
    Machine m(assemble(text), MachineShape::uniform(4, 10, procs));
    return m.run(max_cycles);
}

const char* kFork = R"(
.switches 10
    MSARITY 0, 1, and
    MSACT 0, 0, A
    MSACT 0, 1, B
    MSACT 0, 2, C
    MSIN 0, 0
    THEND
A:  PRINTS "a"
    THEND
B:  PRINTS "b"
    THEND
C:  PRINTS "c"
    THEND
)";

// Three workers each compare once, then join on switch 1.
const char* kForkJoin = R"(
.switches 10, 10
    MSARITY 1, 3, and
    MSACT 1, 0, J
    MSARITY 0, 1, and
    MSACT 0, 0, W0
    MSACT 0, 1, W1
    MSACT 0, 2, W2
    MSIN 0, 0
    THEND
W0: CMPEQ r1, r0, r0
    MSIN 1, 0
    THEND
W1: CMPEQ r1, r0, r0
    MSIN 1, 1
    THEND
W2: CMPEQ r1, r0, r0
    MSIN 1, %LINE%
    THEND
J:  PRINTS "joined"
    THEND
)";

std::string with_line(std::string s, const char* line)
{
    s.replace(s.find("%LINE%"), 6, line);
    return s;
}

}  // namespace

TEST_SUITE("vm")
{
    TEST_CASE("firing spawns one thread per target, ready on the next cycle")
    {
        Machine m(assemble(kFork), MachineShape::default_shape());
        m.set_tracing(true);
        const RunResult r = m.run();
        REQUIRE(r.status == RunStatus::Completed);
        CHECK(r.output == std::vector<std::string>{"a", "b", "c"});
        CHECK(r.metrics.firings == 1);
        CHECK(r.metrics.threads_spawned == 4);
        REQUIRE(r.metrics.spawns.size() == 1);
        const SpawnRecord& s = r.metrics.spawns[0];
        CHECK(s.cycle == 4);  // MSIN executes in cycle 4
        CHECK(s.sw == 0);
        CHECK_FALSE(s.false_path);
        CHECK(s.threads == std::vector<int>{1, 2, 3});
        for (const auto& line : m.trace()) {
            const auto c1 = line.find(',');
            if (line.substr(c1 + 1, line.find(',', c1 + 1) - c1 - 1) == "1") {
                CHECK(line.substr(0, c1) == "5");
                break;
            }
        }
        CHECK(r.metrics.cycles == 7);
    }

    TEST_CASE("join fires once after every line is driven")
    {
        const RunResult r = run_asm(with_line(kForkJoin, "2"));
        REQUIRE(r.ok());
        CHECK(r.output == std::vector<std::string>{"joined"});
        CHECK(r.metrics.firings == 2);
        CHECK(r.metrics.comparison_cycles == 1);
        CHECK(r.metrics.comparisons == 3);
    }

    TEST_CASE("repeated drive of one line does not complete a join")
    {
        const RunResult r = run_asm(with_line(kForkJoin, "1"));
        CHECK(r.status == RunStatus::Completed);
        CHECK(r.output.empty());
        CHECK(r.metrics.firings == 1);
    }

    TEST_CASE("one processor serialises the comparisons")
    {
        const RunResult r = run_asm(with_line(kForkJoin, "2"), 1);
        REQUIRE(r.ok());
        CHECK(r.output == std::vector<std::string>{"joined"});
        CHECK(r.metrics.comparison_cycles == 3);
    }

    TEST_CASE("bypass starts the FALSE path")
    {
        const RunResult r = run_asm(R"(
.switches 4
    MSARITY 0, 2, and
    MSACT 0, 0, T
    MSFALSE 0, F
    MSIN 0, 0
    MSOFF 0
    THEND
T:  PRINTS "true"
    THEND
F:  PRINTS "false"
    THEND
)");
        REQUIRE(r.ok());
        CHECK(r.output == std::vector<std::string>{"false"});
        CHECK(r.metrics.bypasses == 1);
        CHECK(r.metrics.firings == 0);
        REQUIRE(r.metrics.spawns.size() == 1);
        CHECK(r.metrics.spawns[0].false_path);
    }

    TEST_CASE("result records")
    {
        const RunResult r = run_asm(R"(
.switches 4
    LOADI r1, 1
    LOADI r3, 42
    MSPUT 0, 1, 0, r1
    MSPUT 0, 1, 2, r3
    MSRES 0, 1, 0, r2
    MSRES 0, 1, 2, r4
    PRINT r2
    PRINT r4
    THEND
)");
        REQUIRE(r.ok());
        CHECK(r.output == std::vector<std::string>{"1 42"});
    }

    TEST_CASE("configuration slots")
    {
        const RunResult r = run_asm(R"(
.switches 4
    MSARITY 0, 1, and
    MSACT 0, 0, A
    MSSAVE 0, 1
    MSRESET 0
    MSLOAD 0, 1
    MSIN 0, 0
    THEND
A:  PRINTS "restored"
    THEND
)");
        REQUIRE(r.ok());
        CHECK(r.output == std::vector<std::string>{"restored"});
    }

    TEST_CASE("default extern handler prints the call")
    {
        const RunResult r = run_asm(R"(
    LOADI r1, 7
    LOADI r2, 9
    EXT call-a, r1, 2, r0
    PRINT r0
    THEND
)");
        REQUIRE(r.ok());
        CHECK(r.output == std::vector<std::string>{"call call-a(7, 9)", "1"});
    }

    TEST_CASE("custom extern handler status lands in the status register")
    {
        Machine m(assemble("LOADI r1, 3\nEXT probe, r1, 1, r5\nPRINT r5\nTHEND\n"),
                  MachineShape::default_shape());
        m.set_extern_handler([](Machine&, std::string_view n, std::span<std::int64_t> a) {
            return n == "probe" && a.size() == 1 && a[0] == 4;
        });
        CHECK(m.run().output == std::vector<std::string>{"0"});
    }

    TEST_CASE("memory and variables")
    {
        Machine m(assemble(".memory 2\n.var x, 2\nLD r1, 2\nLOADI r2, 1\nADD r1, r1, r2\nST r1, 2\nTHEND\n"),
                  MachineShape::default_shape());
        m.set_variable("x", 41);
        REQUIRE(m.run().ok());
        CHECK(m.variable("x") == 42);
        CHECK(m.peek(2) == 42);
    }

    TEST_CASE("HALT stops every thread")
    {
        const RunResult r = run_asm(R"(
.switches 4
    MSARITY 0, 1, and
    MSACT 0, 0, LOOP
    MSACT 0, 1, STOP
    MSIN 0, 0
    THEND
LOOP: JMP LOOP
STOP: HALT
)");
        CHECK(r.status == RunStatus::Halted);
    }

    TEST_CASE("cycle limit gives a timeout")
    {
        const RunResult r = run_asm("L: JMP L\n", 8, 100);
        CHECK(r.status == RunStatus::Timeout);
        CHECK(r.metrics.cycles == 100);
    }

    TEST_CASE("traps")
    {
        CHECK(run_asm("JMP 0\n").status == RunStatus::Trap);
        CHECK(run_asm("LD r1, 5\nTHEND\n").status == RunStatus::Trap);
        const RunResult pending = run_asm(".switches 4\nMSRES 0, 0, 0, r1\nTHEND\n");
        CHECK(pending.status == RunStatus::Trap);
        CHECK(pending.diagnostic.find("not ready") != std::string::npos);
        CHECK(run_asm(".switches 4\nMSIN 0, 12\nTHEND\n").status == RunStatus::Trap);
        CHECK(run_asm("PC: NOP\n").status == RunStatus::Trap);  // runs off the end
    }

    TEST_CASE("program larger than the machine is a load error")
    {
        const Program big = assemble(".switches 2, 2, 2, 2, 2\nTHEND\n");
        CHECK_THROWS_AS(Machine(big, MachineShape::uniform(4, 10, 1)), LoadError);
        const Program wide = assemble(".switches 12\nTHEND\n");
        CHECK_THROWS_AS(Machine(wide, MachineShape::uniform(4, 10, 1)), LoadError);
        const Program far = assemble("MSRESET 7\nTHEND\n");
        CHECK_THROWS_AS(Machine(far, MachineShape::uniform(4, 10, 1)), LoadError);
    }

    TEST_CASE("harness spawn runs in the current cycle")
    {
        Machine m(assemble("THEND\nT: PRINTS \"spawned\"\nTHEND\n"), MachineShape::default_shape());
        const int id = m.spawn(2);
        CHECK(id == 1);
        const RunResult r = m.run();
        CHECK(r.output == std::vector<std::string>{"spawned"});
        CHECK(r.metrics.cycles == 2);
        CHECK_THROWS_AS(m.spawn(99), VmTrap);
    }

    TEST_CASE("runs are deterministic")
    {
        for (int p : {1, 2, 3, 8}) {
            Machine a(assemble(with_line(kForkJoin, "2")), MachineShape::uniform(4, 10, p));
            Machine b(assemble(with_line(kForkJoin, "2")), MachineShape::uniform(4, 10, p));
            a.set_tracing(true);
            b.set_tracing(true);
            const RunResult ra = a.run();
            const RunResult rb = b.run();
            CHECK(a.trace() == b.trace());
            CHECK(ra.metrics.to_json() == rb.metrics.to_json());
            CHECK(ra.output == std::vector<std::string>{"joined"});
        }
    }

    TEST_CASE("metrics serialise")
    {
        const RunResult r = run_asm(kFork);
        CHECK(r.metrics.to_kv().find("firings=1\n") != std::string::npos);
        CHECK(r.metrics.to_json().find("\"spawns\"") != std::string::npos);
    }
}

#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "msw/error.hpp"
#include "msw/lowering.hpp"
#include "msw/vm.hpp"

using namespace msw;

namespace {

std::string corpus(const std::string& name)
{
    std::ifstream in(std::string(MSW_CORPUS_DIR) + "/" + name);
    REQUIRE_MESSAGE(in, "missing corpus file " << name);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

MachineShape shape_of(std::vector<int> sizes, int procs = 8)
{
    MachineShape s;
    s.sizes = std::move(sizes);
    s.procs = procs;
    return s;
}

struct Ran {
    CompileResult compiled;
    RunResult run;
};

Ran run_msl(const std::string& src, LowerMode mode,
            const MachineShape& shape = MachineShape::default_shape(),
            AllocPolicy policy = AllocPolicy::Page, ExternHandler handler = default_extern)
{
    CompileOptions opts;
    opts.mode = mode;
    opts.policy = policy;
    Ran r{compile(src, shape, opts), {}};
    Machine m(r.compiled.program, shape);
    m.set_extern_handler(std::move(handler));
    r.run = m.run(100000);
    return r;
}

std::size_t count_ops(const Program& p, std::initializer_list<Opcode> ops)
{
    return static_cast<std::size_t>(std::count_if(p.code.begin(), p.code.end(), [&](const Instruction& i) {
        return std::find(ops.begin(), ops.end(), i.op) != ops.end();
    }));
}

std::size_t count_class(const Program& p, OpClass cls)
{
    return static_cast<std::size_t>(std::count_if(
        p.code.begin(), p.code.end(), [&](const Instruction& i) { return op_info(i.op).cls == cls; }));
}

std::vector<std::string> sorted(std::vector<std::string> v)
{
    std::sort(v.begin(), v.end());
    return v;
}

const LowerMode kModes[] = {LowerMode::MSwitch, LowerMode::Sequential, LowerMode::BaselinePoll};

const char* kCorpus[] = {"example01.msl", "example02.msl", "example03.msl", "example04.msl",
                         "example05.msl", "example06.msl", "example07.msl", "example08.msl",
                         "example09.msl", "example10.msl", "examples_corpus.msl",
                         "fused_if.msl",  "fused_loop.msl"};

}  // namespace

TEST_SUITE("lowering")
{
    TEST_CASE("mode names")
    {
        CHECK(mode_from_string("mswitch") == LowerMode::MSwitch);
        CHECK(mode_from_string("baseline-poll") == LowerMode::BaselinePoll);
        CHECK(to_string(LowerMode::Sequential) == "sequential");
        CHECK_THROWS_AS(mode_from_string("turbo"), ArgumentError);
    }

    TEST_CASE("conditional fan-out output")
    {
        for (LowerMode m : kModes) {
            const Ran r = run_msl(corpus("example01.msl"), m);
            REQUIRE(r.run.status == RunStatus::Completed);
            CHECK(sorted(r.run.output) == std::vector<std::string>{
                                               "call process-a()", "call process-b()", "call process-c()"});
        }
    }

    TEST_CASE("every corpus program completes with equal sorted output in every mode")
    {
        for (const char* f : kCorpus) {
            INFO(f);
            const Ran ref = run_msl(corpus(f), LowerMode::Sequential);
            REQUIRE(ref.run.status == RunStatus::Completed);
            for (LowerMode m : {LowerMode::MSwitch, LowerMode::BaselinePoll}) {
                const Ran r = run_msl(corpus(f), m);
                CHECK(r.run.status == RunStatus::Completed);
                CHECK(sorted(r.run.output) == sorted(ref.run.output));
            }
        }
    }

    TEST_CASE("sequential lowering emits no switch operations")
    {
        for (const char* f : kCorpus) {
            const Ran r = run_msl(corpus(f), LowerMode::Sequential);
            CHECK(count_class(r.compiled.program, OpClass::MsOp) == 0);
            CHECK(r.compiled.program.switch_sizes.empty());
            CHECK(r.compiled.allocation.demands.empty());
        }
    }

    TEST_CASE("fused if: static shape of each lowering")
    {
        const std::string src = corpus("fused_if.msl");
        const Ran ms = run_msl(src, LowerMode::MSwitch);
        const Ran seq = run_msl(src, LowerMode::Sequential);
        CHECK(count_class(ms.compiled.program, OpClass::Comparison) == 3);
        CHECK(count_class(seq.compiled.program, OpClass::Comparison) == 3);
        CHECK(count_ops(seq.compiled.program, {Opcode::JmpZ, Opcode::JmpIf}) == 3);
        int joins = 0;
        for (const auto& d : ms.compiled.allocation.demands)
            joins += d.name.find(".join") != std::string::npos;
        CHECK(joins == 1);
        CHECK(ms.run.output == std::vector<std::string>{"all three hold"});
        CHECK(seq.run.output == ms.run.output);
    }

    TEST_CASE("fused if: comparison phase lasts one cycle with enough processors")
    {
        const std::string src = corpus("fused_if.msl");
        for (int p : {3, 4, 8}) {
            CHECK(run_msl(src, LowerMode::MSwitch, shape_of(std::vector<int>(8, 10), p))
                      .run.metrics.comparison_cycles == 1);
        }
        CHECK(run_msl(src, LowerMode::Sequential).run.metrics.comparison_cycles == 3);
        CHECK(run_msl(src, LowerMode::MSwitch, shape_of(std::vector<int>(8, 10), 1))
                  .run.metrics.comparison_cycles == 3);
    }

    TEST_CASE("fusion threshold")
    {
        CompileOptions o;
        o.fusion_threshold = 4;
        const CompileResult r = compile(corpus("fused_if.msl"), MachineShape::default_shape(), o);
        CHECK(r.allocation.demands.empty());
        Machine m(r.program, MachineShape::default_shape());
        CHECK(m.run().metrics.comparison_cycles == 3);
    }

    TEST_CASE("false conjunct takes the else path")
    {
        const std::string src =
            "a = 1\nb = 2\nif ((a == 1) and (b == 3) and (a < b)) then print(\"yes\") else print(\"no\")\n";
        for (LowerMode m : kModes) {
            const Ran r = run_msl(src, m);
            REQUIRE(r.run.status == RunStatus::Completed);
            CHECK(r.run.output == std::vector<std::string>{"no"});
        }
        CHECK(run_msl(src, LowerMode::MSwitch).run.metrics.bypasses == 1);
    }

    TEST_CASE("join in switch mode does not poll")
    {
        const std::string src = corpus("example05.msl");
        CHECK(run_msl(src, LowerMode::MSwitch).run.metrics.polls == 0);
        CHECK(run_msl(src, LowerMode::BaselinePoll).run.metrics.polls > 0);
        CHECK(run_msl(src, LowerMode::Sequential).run.metrics.polls == 0);
    }

    TEST_CASE("failing process sends the join down the else branch")
    {
        auto handler = [](Machine& m, std::string_view n, std::span<std::int64_t> a) {
            default_extern(m, n, a);
            return n != "db-search-b";
        };
        for (LowerMode m : kModes) {
            const Ran r = run_msl(corpus("example05.msl"), m, MachineShape::default_shape(),
                                  AllocPolicy::Page, handler);
            REQUIRE(r.run.status == RunStatus::Completed);
            REQUIRE(!r.run.output.empty());
            CHECK(r.run.output.back() ==
                  "One or more databases inaccessible. Query not completed.");
        }
    }

    TEST_CASE("fan-out threads share one spawn timestamp")
    {
        const Ran r = run_msl(corpus("example01.msl"), LowerMode::MSwitch);
        const auto& spawns = r.run.metrics.spawns;
        const auto it = std::find_if(spawns.begin(), spawns.end(),
                                     [](const SpawnRecord& s) { return s.threads.size() == 3; });
        REQUIRE(it != spawns.end());
        CHECK_FALSE(it->false_path);
    }

    TEST_CASE("results can be read back after a run")
    {
        for (LowerMode m : {LowerMode::MSwitch, LowerMode::BaselinePoll, LowerMode::Sequential}) {
            Machine vm(compile(corpus("example07.msl"), MachineShape::default_shape(),
                               CompileOptions{m, AllocPolicy::Page, false, 2})
                           .program,
                       MachineShape::default_shape());
            REQUIRE(vm.run().ok());
            CHECK(vm.read_result("ms1", "db-search-a", 0) == 1);
            CHECK_THROWS_AS(vm.read_result("ms1", "nothing", 0), NameError);
        }
    }

    TEST_CASE("paging on one small switch matches two switches")
    {
        const std::string src = "declare mswitch ms1, ms2\n"
                                "ms1(db-search-a[ id#, name]), (db-search-b[ id#, name])\n"
                                "msreset(ms1)\n"
                                "ms2(db-search-c[ id#, name]), (db-search-d[ id#, name])\n";
        const Ran paged = run_msl(src, LowerMode::MSwitch, shape_of({4}), AllocPolicy::Page);
        const Ran wide = run_msl(src, LowerMode::MSwitch, shape_of({10, 10, 10, 10}), AllocPolicy::BestFit);
        REQUIRE(paged.run.ok());
        REQUIRE(wide.run.ok());
        CHECK(paged.run.output == wide.run.output);
        CHECK(count_ops(paged.compiled.program, {Opcode::MsSave, Opcode::MsLoad}) > 0);
        CHECK_THROWS_AS(compile(src, shape_of({4}), CompileOptions{LowerMode::MSwitch, AllocPolicy::BestFit, false, 2}),
                        CapacityError);
    }

    TEST_CASE("capacity shortage falls back to sequential on request")
    {
        const MachineShape tiny = shape_of({2});
        CHECK_THROWS_AS(compile(corpus("example01.msl"), tiny), CapacityError);
        CompileOptions o;
        o.sequential_fallback = true;
        const CompileResult r = compile(corpus("example01.msl"), tiny, o);
        CHECK(r.mode_used == LowerMode::Sequential);
        CHECK(r.report.find("fallback") != std::string::npos);
        Machine m(r.program, tiny);
        CHECK(m.run().output.size() == 3);
    }

    TEST_CASE("compiled programs survive disassembly")
    {
        for (const char* f : kCorpus)
            for (LowerMode m : kModes) {
                const Ran r = run_msl(corpus(f), m);
                const Program back = assemble(disassemble(r.compiled.program));
                CHECK(back.code == r.compiled.program.code);
                CHECK(back.strings == r.compiled.program.strings);
            }
    }

    TEST_CASE("loops and procedures")
    {
        const std::string src =
            "proc twice(v) { print(v + v) }\ni = 0\nwhile (i < 3) {\n i = i + 1\n twice(i)\n}\n";
        for (LowerMode m : kModes)
            CHECK(run_msl(src, m).run.output == std::vector<std::string>{"2", "4", "6"});
    }

    TEST_CASE("compile errors")
    {
        const auto shape = MachineShape::default_shape();
        CHECK_THROWS_AS(compile("proc p(n) { p(n) }\np(1)\n", shape), CompileError);
        CHECK_THROWS_AS(compile("declare mswitch ms1\nproc p() { ms1(a) }\ndeclare mswitch ms2\nms2(p)\n", shape),
                        CompileError);
        CHECK_THROWS_AS(compile("x = f[1]\n", shape), CompileError);
        CHECK_THROWS_AS(compile("x = ms3.a\n", shape), NameError);
    }

    TEST_CASE("report names mode, policy and allocation")
    {
        const CompileResult r = compile(corpus("example01.msl"), MachineShape::default_shape());
        CHECK(r.report.find("mswitch") != std::string::npos);
        CHECK(r.report.find("page") != std::string::npos);
        CHECK(r.report.find("ms1") != std::string::npos);
    }
}

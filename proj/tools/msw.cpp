#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "msw/db.hpp"
#include "msw/error.hpp"
#include "msw/isa.hpp"
#include "msw/lowering.hpp"
#include "msw/msl.hpp"
#include "msw/net.hpp"
#include "msw/shape.hpp"
#include "msw/vm.hpp"

namespace {

using namespace msw;

std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ArgumentError("cannot open '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::string_view data)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ArgumentError("cannot write '" + path + "'");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

bool has_suffix(const std::string& s, std::string_view suf)
{
    return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

struct ShapeOpts {
    std::string shape = "default";
    int procs = 0;

    MachineShape resolve() const
    {
        MachineShape s;
        if (shape == "default")
            s = MachineShape::default_shape();
        else if (shape.find("switches=") != std::string::npos)
            s = MachineShape::parse(shape);
        else
            s = MachineShape::parse(slurp(shape));
        if (procs > 0)
            s.procs = procs;
        s.validate();
        return s;
    }

    void add(CLI::App* app)
    {
        app->add_option("--shape", shape,
                        "'default', a shape file, or inline 'switches=<n> sizes=<..> procs=<p>'");
        app->add_option("--procs", procs, "override the processor count P")->check(CLI::PositiveNumber);
    }
};

struct CompileFlags {
    std::string mode = "mswitch";
    std::string policy = "page";
    int threshold = msl::kDefaultFusionThreshold;

    CompileOptions resolve() const
    {
        CompileOptions o;
        o.mode = mode_from_string(mode);
        if (policy == "auto") {
            o.policy = AllocPolicy::Page;
            o.sequential_fallback = true;
        } else {
            o.policy = policy_from_string(policy);
        }
        o.fusion_threshold = threshold;
        return o;
    }

    void add(CLI::App* app)
    {
        app->add_option("--mode", mode, "mswitch | sequential | baseline-poll");
        app->add_option("--policy", policy, "best-fit | gang | page | auto");
        app->add_option("--threshold", threshold, "conjuncts needed to fuse an if")
            ->check(CLI::Range(2, 64));
    }
};

// MSL source, assembly text (.s/.asm) or a binary image.
Program load_program(const std::string& path, const MachineShape& shape, const CompileOptions& o)
{
    const std::string data = slurp(path);
    if (data.rfind("MSW1", 0) == 0) {
        std::vector<std::uint8_t> bytes(data.begin(), data.end());
        return read_binary(bytes);
    }
    if (has_suffix(path, ".s") || has_suffix(path, ".asm"))
        return assemble(data);
    return compile(data, shape, o).program;
}

std::uint64_t max_phase(const RunMetrics& m)
{
    std::uint64_t best = 0;
    for (const auto& s : m.spawns)
        best = std::max<std::uint64_t>(best, s.threads.size());
    return best;
}

int cmd_compile(const std::string& in, const std::string& out, bool report, bool listing,
                const ShapeOpts& so, const CompileFlags& cf)
{
    const MachineShape shape = so.resolve();
    CompileResult r = compile(slurp(in), shape, cf.resolve());
    const auto bytes = write_binary(r.program);
    write_file(out.empty() ? in + ".mswb" : out,
               std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    if (report)
        std::cout << r.report;
    if (listing)
        std::cout << disassemble(r.program);
    return 0;
}

int cmd_run(const std::string& in, std::uint64_t max_cycles, const std::string& trace,
            const std::string& metrics, bool stats, const ShapeOpts& so, const CompileFlags& cf)
{
    const MachineShape shape = so.resolve();
    Machine m(load_program(in, shape, cf.resolve()), shape);
    m.set_tracing(!trace.empty());
    const RunResult r = m.run(max_cycles);
    for (const auto& line : r.output)
        std::cout << line << "\n";
    if (!trace.empty()) {
        std::ostringstream os;
        for (const auto& t : m.trace())
            os << t << "\n";
        write_file(trace, os.str());
    }
    if (!metrics.empty())
        write_file(metrics, r.metrics.to_json());
    if (stats)
        std::cout << "status=" << to_string(r.status) << "\n" << r.metrics.to_kv();
    if (!r.ok()) {
        std::cerr << "msw: " << to_string(r.status) << ": " << r.diagnostic << "\n";
        return 1;
    }
    return 0;
}

int cmd_compare(const std::string& in, std::uint64_t max_cycles, const std::string& metrics,
                const ShapeOpts& so, const CompileFlags& cf)
{
    const MachineShape shape = so.resolve();
    const std::string src = slurp(in);
    const LowerMode modes[] = {LowerMode::MSwitch, LowerMode::Sequential, LowerMode::BaselinePoll};
    std::vector<RunResult> runs;
    std::vector<LowerMode> used;
    for (LowerMode mode : modes) {
        CompileOptions o = cf.resolve();
        o.mode = mode;
        CompileResult c = compile(src, shape, o);
        used.push_back(c.mode_used);
        Machine m(std::move(c.program), shape);
        runs.push_back(m.run(max_cycles));
        if (!runs.back().ok()) {
            std::cerr << "msw: " << to_string(mode) << ": " << to_string(runs.back().status)
                      << ": " << runs.back().diagnostic << "\n";
            return 1;
        }
    }
    struct Row {
        const char* name;
        std::uint64_t (*get)(const RunMetrics&);
    };
    const Row rows[] = {
        {"comparisons", [](const RunMetrics& m) { return m.comparisons; }},
        {"comparison_cycles", [](const RunMetrics& m) { return m.comparison_cycles; }},
        {"cycles", [](const RunMetrics& m) { return m.cycles; }},
        {"instructions", [](const RunMetrics& m) { return m.instructions; }},
        {"jumps", [](const RunMetrics& m) { return m.jumps; }},
        {"polls", [](const RunMetrics& m) { return m.polls; }},
        {"ms_ops", [](const RunMetrics& m) { return m.ms_ops; }},
        {"threads_spawned", [](const RunMetrics& m) { return m.threads_spawned; }},
        {"parallel_phases", [](const RunMetrics& m) { return m.parallel_phases; }},
        {"max_spawn_width", max_phase},
    };
    std::cout << std::left << std::setw(20) << "metric";
    for (LowerMode m : used)
        std::cout << std::right << std::setw(15) << to_string(m);
    std::cout << "\n";
    nlohmann::ordered_json j;
    for (const auto& row : rows) {
        std::cout << std::left << std::setw(20) << row.name;
        for (std::size_t i = 0; i < runs.size(); ++i) {
            const auto v = row.get(runs[i].metrics);
            std::cout << std::right << std::setw(15) << v;
            j[std::string(to_string(modes[i]))][row.name] = v;
        }
        std::cout << "\n";
    }
    auto sorted = [](std::vector<std::string> v) {
        std::sort(v.begin(), v.end());
        return v;
    };
    const bool same = sorted(runs[0].output) == sorted(runs[1].output) &&
                      sorted(runs[0].output) == sorted(runs[2].output);
    std::cout << "outputs_equal=" << (same ? "yes" : "no") << "\n";
    if (!metrics.empty())
        write_file(metrics, j.dump(2) + "\n");
    return same ? 0 : 1;
}

std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep))
        if (!item.empty())
            out.push_back(item);
    return out;
}

int cmd_net(const std::string& in, const std::string& stimulus, const std::string& promote,
            const std::string& via, const ShapeOpts& so)
{
    const MachineShape shape = so.resolve();
    NetSpec spec = NetSpec::parse(slurp(in));
    if (!promote.empty()) {
        const std::string src = via.empty() ? (spec.inputs.empty() ? "" : spec.inputs.front()) : via;
        spec = reconfigure(spec, promote_to_top(spec, promote, src));
    }
    std::set<std::string> stim;
    for (const auto& s : split(stimulus, ','))
        stim.insert(s);
    const NetRun r = run_net(spec, shape, stim);
    for (const auto& line : r.result.output)
        std::cout << line << "\n";
    const auto oracle = net_oracle(spec, stim);
    std::cout << "fired=";
    for (const auto& f : r.fired)
        std::cout << f << (f == *r.fired.rbegin() ? "" : ",");
    std::cout << "\n";
    for (const auto& o : spec.outputs)
        std::cout << "output " << o << "=" << (r.fired.count(o) ? 1 : 0) << "\n";
    std::cout << "oracle_match=" << (oracle == r.fired ? "yes" : "no") << "\n"
              << "cycles=" << r.result.metrics.cycles << "\n";
    if (!r.result.ok()) {
        std::cerr << "msw: " << r.result.diagnostic << "\n";
        return 1;
    }
    return oracle == r.fired ? 0 : 1;
}

Fields parse_key(const std::string& s)
{
    Fields key;
    for (const auto& kv : split(s, ',')) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw ArgumentError("key item '" + kv + "' is not field=value");
        key[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    return key;
}

int cmd_db(const std::string& in, const std::string& index, const std::string& key,
           const std::vector<std::string>& deletes, const ShapeOpts& so)
{
    const MachineShape shape = so.resolve();
    DbState db(split(index, ','));
    std::ifstream f(in);
    if (!f)
        throw ArgumentError("cannot open '" + in + "'");
    std::size_t inserts = 0;
    std::size_t simultaneous = 0;
    for (const auto& rec : read_records(f)) {
        DbUpdate u = db_update(db, DbOp::Insert, rec, shape);
        db = std::move(u.state);
        ++inserts;
        if (max_phase(u.metrics) == db.indexed().size())
            ++simultaneous;
    }
    for (const auto& d : deletes) {
        DbRecord r;
        r.id = std::stoll(d);
        DbUpdate u = db_update(db, DbOp::Delete, r, shape);
        db = std::move(u.state);
        ++inserts;
        if (max_phase(u.metrics) == db.indexed().size())
            ++simultaneous;
    }
    std::cout << "records=" << db.records().size() << "\nupdates=" << inserts
              << "\nsingle_phase_updates=" << simultaneous
              << "\ninvariants=" << (db.invariants_hold() ? "ok" : "broken") << "\n";
    if (!key.empty()) {
        const Fields k = parse_key(key);
        const DbSearch s = db_search_composite(db, k, shape);
        std::cout << "match=";
        bool first = true;
        for (auto id : s.ids) {
            std::cout << (first ? "" : ",") << id;
            first = false;
        }
        std::cout << "\noracle_match=" << (s.ids == db.scan(k) ? "yes" : "no")
                  << "\nbypasses=" << s.metrics.bypasses << "\nfirings=" << s.metrics.firings
                  << "\n";
    }
    return db.invariants_hold() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"multi-switch toolchain: compiler, assembler, machine and demos"};
    app.require_subcommand(1);

    ShapeOpts so;
    CompileFlags cf;
    std::string in;
    std::string out;
    std::string trace;
    std::string metrics;
    std::uint64_t max_cycles = kDefaultMaxCycles;
    bool report = false;
    bool listing = false;
    bool stats = false;

    auto* compile_cmd = app.add_subcommand("compile", "compile MSL to a binary program");
    compile_cmd->add_option("input", in, "MSL source")->required();
    compile_cmd->add_option("-o,--output", out, "binary output (default <input>.mswb)");
    compile_cmd->add_flag("--report", report, "print the lowering report");
    compile_cmd->add_flag("--listing", listing, "print the disassembly");
    so.add(compile_cmd);
    cf.add(compile_cmd);

    auto* asm_cmd = app.add_subcommand("asm", "assemble text to a binary program");
    asm_cmd->add_option("input", in, "assembly source")->required();
    asm_cmd->add_option("-o,--output", out, "binary output (default <input>.mswb)");

    auto* disasm_cmd = app.add_subcommand("disasm", "print a binary program as assembly");
    disasm_cmd->add_option("input", in, "binary program")->required();

    auto* run_cmd = app.add_subcommand("run", "run an MSL, assembly or binary program");
    run_cmd->add_option("input", in, "program")->required();
    run_cmd->add_option("--max-cycles", max_cycles, "cycle limit");
    run_cmd->add_option("--trace", trace, "write the execution trace here");
    run_cmd->add_option("--metrics", metrics, "write metrics JSON here");
    run_cmd->add_flag("--stats", stats, "print metrics after the output");
    so.add(run_cmd);
    cf.add(run_cmd);

    auto* stats_cmd = app.add_subcommand("stats", "branching statistics of an MSL program");
    stats_cmd->add_option("input", in, "MSL source")->required();
    stats_cmd->add_option("--threshold", cf.threshold, "conjuncts needed to fuse an if");

    std::string stimulus;
    std::string promote;
    std::string via;
    auto* net_cmd = app.add_subcommand("demo-net", "run a multi-switch neural net");
    net_cmd->add_option("input", in, "net spec")->required();
    net_cmd->add_option("--stimulus", stimulus, "comma-separated inputs to drive");
    net_cmd->add_option("--promote", promote, "move this node to the top of the pyramid");
    net_cmd->add_option("--via", via, "stimulus input feeding the promoted node");
    so.add(net_cmd);

    std::string index;
    std::string key;
    std::vector<std::string> deletes;
    auto* db_cmd = app.add_subcommand("demo-db", "parallel index maintenance and search");
    db_cmd->add_option("input", in, "records, one JSON object per line")->required();
    db_cmd->add_option("--index", index, "comma-separated indexed fields")->required();
    db_cmd->add_option("--key", key, "composite key field=value,...");
    db_cmd->add_option("--delete", deletes, "record ids to delete after loading");
    so.add(db_cmd);

    auto* cmp_cmd = app.add_subcommand("compare-modes", "run one source under all lowering modes");
    cmp_cmd->add_option("input", in, "MSL source")->required();
    cmp_cmd->add_option("--max-cycles", max_cycles, "cycle limit");
    cmp_cmd->add_option("--metrics", metrics, "write metrics JSON here");
    so.add(cmp_cmd);
    cf.add(cmp_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*compile_cmd)
            return cmd_compile(in, out, report, listing, so, cf);
        if (*asm_cmd) {
            const auto bytes = write_binary(assemble(slurp(in)));
            write_file(out.empty() ? in + ".mswb" : out,
                       std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
            return 0;
        }
        if (*disasm_cmd) {
            const std::string data = slurp(in);
            std::vector<std::uint8_t> bytes(data.begin(), data.end());
            std::cout << disassemble(read_binary(bytes));
            return 0;
        }
        if (*run_cmd)
            return cmd_run(in, max_cycles, trace, metrics, stats, so, cf);
        if (*stats_cmd) {
            std::cout << msl::analyze_branching(msl::parse(slurp(in)), cf.threshold).to_string();
            return 0;
        }
        if (*net_cmd)
            return cmd_net(in, stimulus, promote, via, so);
        if (*db_cmd)
            return cmd_db(in, index, key, deletes, so);
        if (*cmp_cmd)
            return cmd_compare(in, max_cycles, metrics, so, cf);
    } catch (const ArgumentError& e) {
        std::cerr << "msw: " << e.what() << "\n";
        return 2;
    } catch (const ShapeError& e) {
        std::cerr << "msw: " << e.what() << "\n";
        return 2;
    } catch (const msw::Error& e) {
        std::cerr << "msw: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "msw: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

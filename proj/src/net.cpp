#include "msw/net.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "msw/allocator.hpp"
#include "msw/error.hpp"

namespace msw {

const NetNode* NetSpec::node(std::string_view name) const
{
    for (const auto& n : nodes)
        if (n.name == name)
            return &n;
    return nullptr;
}

bool NetSpec::is_input(std::string_view name) const
{
    return std::find(inputs.begin(), inputs.end(), name) != inputs.end();
}

void NetSpec::validate() const
{
    std::set<std::string> names;
    for (const auto& i : inputs)
        if (!names.insert(i).second)
            throw SpecError("duplicate name '" + i + "'");
    for (const auto& n : nodes) {
        if (!names.insert(n.name).second)
            throw SpecError("duplicate name '" + n.name + "'");
        if (n.arity < 1)
            throw SpecError("node '" + n.name + "' needs arity >= 1");
    }
    for (const auto& l : links) {
        if (!node(l.from) && !is_input(l.from))
            throw SpecError("link source '" + l.from + "' does not exist");
        const NetNode* to = node(l.to);
        if (!to)
            throw SpecError("link target '" + l.to + "' is not a node");
        if (l.line < 0 || l.line >= to->arity)
            throw SpecError("link " + l.from + " -> " + l.to + " uses line " +
                            std::to_string(l.line) + " outside arity " +
                            std::to_string(to->arity));
    }
    for (const auto& o : outputs)
        if (!node(o))
            throw SpecError("output '" + o + "' is not a node");
}

NetSpec NetSpec::parse(std::string_view text)
{
    NetSpec spec;
    std::istringstream in{std::string(text)};
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        if (auto hash = raw.find('#'); hash != std::string::npos)
            raw.erase(hash);
        std::istringstream ls(raw);
        std::string kw;
        if (!(ls >> kw))
            continue;
        auto bad = [&] {
            return SpecError("net line " + std::to_string(lineno) + ": malformed '" + kw + "'");
        };
        if (kw == "input" || kw == "output") {
            std::string name;
            if (!(ls >> name))
                throw bad();
            (kw == "input" ? spec.inputs : spec.outputs).push_back(name);
        } else if (kw == "node") {
            NetNode n;
            std::string kind;
            if (!(ls >> n.name >> n.arity >> kind))
                throw bad();
            if (kind == "and")
                n.kind = GateKind::And;
            else if (kind == "or")
                n.kind = GateKind::Or;
            else
                throw bad();
            spec.nodes.push_back(n);
        } else if (kw == "link") {
            NetLink l;
            if (!(ls >> l.from >> l.to >> l.line))
                throw bad();
            spec.links.push_back(l);
        } else {
            throw SpecError("net line " + std::to_string(lineno) + ": unknown keyword '" + kw +
                            "'");
        }
        std::string extra;
        if (ls >> extra)
            throw bad();
    }
    spec.validate();
    return spec;
}

std::string NetSpec::to_string() const
{
    std::ostringstream os;
    for (const auto& i : inputs)
        os << "input " << i << "\n";
    for (const auto& n : nodes)
        os << "node " << n.name << " " << n.arity << " " << msw::to_string(n.kind) << "\n";
    for (const auto& l : links)
        os << "link " << l.from << " " << l.to << " " << l.line << "\n";
    for (const auto& o : outputs)
        os << "output " << o << "\n";
    return os.str();
}

namespace {

// Straight emission with named forward labels.
struct Asm {
    Program& prog;
    std::map<std::string, std::uint16_t> labels;
    struct Fix {
        std::size_t instr;
        std::size_t operand;
        std::string label;
    };
    std::vector<Fix> fixes;

    void op(Opcode o, std::initializer_list<long long> args) { prog.code.emplace_back(o, args); }

    void op_to(Opcode o, std::initializer_list<long long> args, std::size_t operand,
               std::string label)
    {
        fixes.push_back({prog.code.size(), operand, std::move(label)});
        op(o, args);
    }

    void place(const std::string& label)
    {
        labels[label] = static_cast<std::uint16_t>(prog.code.size() + 1);
    }

    void resolve()
    {
        for (const auto& f : fixes)
            prog.code[f.instr].args[f.operand] = labels.at(f.label);
    }
};

}  // namespace

Program compile_net(const NetSpec& spec, const MachineShape& shape)
{
    spec.validate();
    std::map<std::string, std::vector<const NetLink*>> out;
    for (const auto& l : spec.links)
        out[l.from].push_back(&l);

    std::vector<SwitchDemand> demands;
    for (const auto& n : spec.nodes)
        demands.push_back({n.name, n.arity, 1 + static_cast<int>(out[n.name].size()), false, 0, 0});
    const AllocationTable table = allocate(demands, shape, AllocPolicy::BestFit);
    std::map<std::string, int> sw;
    for (std::size_t i = 0; i < spec.nodes.size(); ++i)
        sw[spec.nodes[i].name] = table.placements[i].sw;

    Program prog;
    std::uint16_t cell = 1;
    for (const auto& i : spec.inputs)
        prog.variables["in:" + i] = cell++;
    for (const auto& n : spec.nodes)
        prog.variables["fired:" + n.name] = cell++;
    prog.memory_size = static_cast<std::uint16_t>(cell - 1);
    const auto fired_word = prog.intern_string("fired");

    Asm a{prog, {}, {}};
    for (const auto& n : spec.nodes) {
        const int s = sw[n.name];
        a.op(Opcode::MsReset, {s});
        a.op(Opcode::MsArity, {s, n.arity, static_cast<int>(n.kind)});
        a.op_to(Opcode::MsAct, {s, 0, 0}, 2, "rec:" + n.name);
        const auto& links = out[n.name];
        for (std::size_t j = 0; j < links.size(); ++j)
            a.op_to(Opcode::MsAct, {s, static_cast<long long>(j + 1), 0}, 2,
                    "link:" + n.name + ":" + std::to_string(j));
    }
    for (const auto& i : spec.inputs) {
        a.op(Opcode::Ld, {1, prog.variables.at("in:" + i)});
        a.op_to(Opcode::JmpZ, {1, 0}, 1, "skip:" + i);
        for (const NetLink* l : out[i])
            a.op(Opcode::MsIn, {sw[l->to], l->line});
        a.place("skip:" + i);
    }
    a.op(Opcode::Thend, {});

    for (const auto& n : spec.nodes) {
        const int s = sw[n.name];
        a.place("rec:" + n.name);
        a.op(Opcode::MsReset, {s});
        a.op(Opcode::Loadi, {1, 1});
        a.op(Opcode::St, {1, prog.variables.at("fired:" + n.name)});
        a.op(Opcode::PrintS, {fired_word});
        a.op(Opcode::PrintS, {prog.intern_string(n.name)});
        a.op(Opcode::PrintNl, {});
        a.op(Opcode::Thend, {});
        const auto& links = out[n.name];
        for (std::size_t j = 0; j < links.size(); ++j) {
            a.place("link:" + n.name + ":" + std::to_string(j));
            a.op(Opcode::MsIn, {sw[links[j]->to], links[j]->line});
            a.op(Opcode::Thend, {});
        }
    }
    a.resolve();

    for (std::size_t i = 0; i < table.placements.size(); ++i) {
        const int s = table.placements[i].sw;
        if (static_cast<int>(prog.switch_sizes.size()) <= s)
            prog.switch_sizes.resize(static_cast<std::size_t>(s) + 1, 0);
        prog.switch_sizes[s] = std::max({prog.switch_sizes[s], demands[i].lines(), 2});
    }
    label_targets(prog);
    return prog;
}

NetRun run_net(const NetSpec& spec, const MachineShape& shape,
               const std::set<std::string>& stimulus)
{
    for (const auto& s : stimulus)
        if (!spec.is_input(s))
            throw SpecError("stimulus '" + s + "' is not an input");
    Machine m(compile_net(spec, shape), shape);
    for (const auto& s : stimulus)
        m.set_variable("in:" + s, 1);
    NetRun r;
    r.result = m.run();
    for (const auto& n : spec.nodes)
        if (m.variable("fired:" + n.name) != 0)
            r.fired.insert(n.name);
    return r;
}

std::set<std::string> net_oracle(const NetSpec& spec, const std::set<std::string>& stimulus)
{
    std::set<std::string> fired;
    for (bool changed = true; changed;) {
        changed = false;
        for (const auto& n : spec.nodes) {
            if (fired.count(n.name))
                continue;
            std::vector<bool> lines(static_cast<std::size_t>(n.arity), false);
            for (const auto& l : spec.links)
                if (l.to == n.name && (stimulus.count(l.from) || fired.count(l.from)))
                    lines[static_cast<std::size_t>(l.line)] = true;
            if (eval_gate(n.kind, lines)) {
                fired.insert(n.name);
                changed = true;
            }
        }
    }
    return fired;
}

NetSpec reconfigure(const NetSpec& spec, const std::vector<LinkRewrite>& rewrites)
{
    NetSpec out = spec;
    for (const auto& rw : rewrites) {
        if (rw.remove) {
            auto it = std::find(out.links.begin(), out.links.end(), *rw.remove);
            if (it == out.links.end())
                throw SpecError("no link " + rw.remove->from + " -> " + rw.remove->to + " line " +
                                std::to_string(rw.remove->line));
            out.links.erase(it);
        }
        if (rw.add && std::find(out.links.begin(), out.links.end(), *rw.add) == out.links.end())
            out.links.push_back(*rw.add);
    }
    out.validate();
    return out;
}

std::vector<LinkRewrite> promote_to_top(const NetSpec& spec, const std::string& node,
                                        const std::string& stimulus)
{
    const NetNode* n = spec.node(node);
    if (!n)
        throw SpecError("no node '" + node + "'");
    if (!spec.is_input(stimulus))
        throw SpecError("'" + stimulus + "' is not an input");
    std::vector<LinkRewrite> rw;
    std::vector<bool> fed(static_cast<std::size_t>(n->arity), false);
    for (const auto& l : spec.links) {
        if (l.to != node)
            continue;
        fed[static_cast<std::size_t>(l.line)] = true;
        rw.push_back({l, NetLink{stimulus, node, l.line}});
    }
    for (int line = 0; line < n->arity; ++line)
        if (!fed[static_cast<std::size_t>(line)])
            rw.push_back({std::nullopt, NetLink{stimulus, node, line}});
    return rw;
}

}  // namespace msw

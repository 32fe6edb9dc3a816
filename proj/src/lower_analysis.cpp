#include <algorithm>

#include "lower_internal.hpp"
#include "msw/error.hpp"

namespace msw::detail {

using namespace msw::msl;

namespace {

template <class... F>
struct Overload : F... {
    using F::operator()...;
};
template <class... F>
Overload(F...) -> Overload<F...>;

// Pass 1: which identifiers are variables and which switches are consumed.
struct Classifier {
    Analysis& an;

    void var(const std::string& name)
    {
        if (an.variable_set.insert(name).second)
            an.variables.push_back(name);
    }

    void operand(const Expr& e)
    {
        if (const auto* id = std::get_if<Ident>(&e.node))
            var(id->name);
        expr(e);
    }

    void call(const MsCall& c)
    {
        for (const auto& t : c.targets) {
            for (const auto& a : t.args)
                expr(*a.expr);
            for (const auto& i : t.items)
                expr(*i);
        }
    }

    void expr(const Expr& e)
    {
        std::visit(Overload{
                       [&](const Binary& b) {
                           operand(*b.lhs);
                           operand(*b.rhs);
                       },
                       [&](const Negate& n) { operand(*n.operand); },
                       [&](const ResultAccess& r) { an.consumed.insert(r.sw); },
                       [&](const MsCallExpr& m) {
                           an.consumed.insert(m.call.sw);
                           call(m.call);
                       },
                       [&](const Call& c) {
                           for (const auto& a : c.args)
                               expr(*a.expr);
                       },
                       [&](const Tagged& t) {
                           for (const auto& a : t.args)
                               expr(*a.expr);
                       },
                       [](const auto&) {},
                   },
                   e.node);
    }

    void stmt(const Stmt& s)
    {
        std::visit(Overload{
                       [&](const MsCallStmt& m) { call(m.call); },
                       [&](const If& f) {
                           operand(*f.cond);
                           stmt(*f.then_branch);
                           if (f.else_branch)
                               stmt(*f.else_branch);
                       },
                       [&](const While& w) {
                           operand(*w.cond);
                           stmt(*w.body);
                       },
                       [&](const Assign& a) {
                           var(a.name);
                           expr(*a.value);
                       },
                       [&](const Print& p) {
                           for (const auto& i : p.items)
                               expr(*i);
                       },
                       [&](const CallStmt& c) {
                           for (const auto& a : c.call.args)
                               expr(*a.expr);
                       },
                       [&](const Block& b) {
                           for (const auto& c : b.stmts)
                               stmt(*c);
                       },
                       [](const auto&) {},
                   },
                   s.node);
    }
};

struct Range {
    int begin = 0;
    int end = 0;
};

// Pass 2: interning, demands and lifetimes, in source order.
struct Collector {
    const Ast& ast;
    Analysis& an;
    Program& prog;
    LowerMode mode;
    int threshold;
    bool forced = false;  // inside a while loop or a procedure
    Range forced_range;

    Range range_of(const Stmt& s) const { return forced ? forced_range : Range{s.id, s.last}; }

    int demand(std::string name, int arity, int fanout, bool gangable, Range r)
    {
        an.demands.push_back({std::move(name), arity, fanout, gangable, r.begin, r.end});
        return static_cast<int>(an.demands.size()) - 1;
    }

    // The logical switch's spawner demand, widened to cover r.
    int logical(const std::string& sw, int fanout, Range r)
    {
        if (mode == LowerMode::Sequential)
            return -1;
        auto it = an.logical.find(sw);
        if (it == an.logical.end()) {
            const int d = demand(sw, 1, fanout, false, r);
            an.logical.emplace(sw, d);
            return d;
        }
        auto& d = an.demands[it->second];
        d.fanout = std::max(d.fanout, fanout);
        d.begin = std::min(d.begin, r.begin);
        d.end = std::max(d.end, r.end);
        return it->second;
    }

    void atom(const std::string& text) { prog.intern_string(text); }

    void callee(const std::string& name)
    {
        if (!ast.find_proc(name))
            prog.intern_extern(name);
    }

    void args(const std::vector<Arg>& as, Range r)
    {
        for (const auto& a : as)
            expr(*a.expr, r);
    }

    void call(const MsCall& c, const Stmt& at)
    {
        const Range r = range_of(at);
        CallSite site;
        site.consumed = an.consumed.count(c.sw) != 0;
        site.spawner = logical(c.sw, static_cast<int>(c.targets.size()), r);
        if (site.consumed && mode == LowerMode::MSwitch)
            site.joiner = demand(c.sw + ".join@" + std::to_string(at.id),
                                 static_cast<int>(c.targets.size()), 1, true, r);
        an.sites[&c] = site;
        an.site_order.push_back(&c);
        for (const auto& t : c.targets) {
            if (t.kind == Target::Kind::Named)
                callee(t.name);
            args(t.args, r);
            for (const auto& i : t.items)
                expr(*i, r);
        }
    }

    const Stmt* cur = nullptr;

    void expr(const Expr& e, Range r)
    {
        std::visit(Overload{
                       [&](const String& s) { atom(s.text); },
                       [&](const Ident& id) {
                           if (!an.is_variable(id.name))
                               atom(id.name);
                       },
                       [&](const Atom& a) { atom(a.text); },
                       [&](const Binary& b) {
                           expr(*b.lhs, r);
                           expr(*b.rhs, r);
                       },
                       [&](const Negate& n) { expr(*n.operand, r); },
                       [&](const ResultAccess& ra) { logical(ra.sw, 1, r); },
                       [&](const MsCallExpr& m) { call(m.call, *cur); },
                       [&](const Call& c) {
                           callee(c.name);
                           args(c.args, r);
                       },
                       [&](const Tagged& t) {
                           atom(t.name);
                           args(t.args, r);
                       },
                       [](const Number&) {},
                   },
                   e.node);
    }

    void stmt(const Stmt& s)
    {
        const Stmt* saved = cur;
        cur = &s;
        const Range r = range_of(s);
        std::visit(Overload{
                       [&](const MsReset& m) { logical(m.sw, 1, r); },
                       [&](const MsCallStmt& m) { call(m.call, s); },
                       [&](const If& f) {
                           expr(*f.cond, r);
                           if (mode != LowerMode::Sequential) {
                               auto conj = fusable_conjuncts(*f.cond, ast, threshold);
                               if (!conj.empty()) {
                                   FusedIf fi;
                                   const int c = static_cast<int>(conj.size());
                                   const std::string base = "if@" + std::to_string(s.id);
                                   fi.spawner = demand(base + ".spawn", 1,
                                                       mode == LowerMode::MSwitch ? c - 1 : c,
                                                       false, r);
                                   if (mode == LowerMode::MSwitch)
                                       fi.joiner = demand(base + ".join", c, 1, true, r);
                                   fi.conjuncts = std::move(conj);
                                   an.fused[&s] = std::move(fi);
                               }
                           } else {
                               auto conj = fusable_conjuncts(*f.cond, ast, threshold);
                               if (!conj.empty())
                                   an.fused[&s] = FusedIf{std::move(conj), -1, -1};
                           }
                           stmt(*f.then_branch);
                           if (f.else_branch)
                               stmt(*f.else_branch);
                       },
                       [&](const While& w) {
                           const bool outer = !forced;
                           if (outer) {
                               forced = true;
                               forced_range = {s.id, s.last};
                           }
                           expr(*w.cond, range_of(s));
                           stmt(*w.body);
                           if (outer)
                               forced = false;
                       },
                       [&](const Assign& a) { expr(*a.value, r); },
                       [&](const Print& p) {
                           for (const auto& i : p.items)
                               expr(*i, r);
                       },
                       [&](const CallStmt& c) {
                           callee(c.call.name);
                           args(c.call.args, r);
                       },
                       [&](const Block& b) {
                           for (const auto& c : b.stmts)
                               stmt(*c);
                       },
                       [](const Declare&) {},
                   },
                   s.node);
        cur = saved;
    }
};

}  // namespace

Analysis analyze(const Ast& ast, LowerMode mode, int fusion_threshold, Program& prog)
{
    Analysis an;
    Classifier cls{an};
    for (const auto& p : ast.procs)
        for (const auto& name : p.params)
            cls.var(name);
    for (const auto& s : ast.stmts)
        cls.stmt(*s);
    for (const auto& p : ast.procs)
        for (const auto& s : p.body.stmts)
            cls.stmt(*s);

    Collector col{ast, an, prog, mode, fusion_threshold, false, {}, nullptr};
    for (const auto& s : ast.stmts)
        col.stmt(*s);
    col.forced = true;
    col.forced_range = {1, std::max(ast.stmt_count, 1)};
    for (const auto& p : ast.procs)
        for (const auto& s : p.body.stmts)
            col.stmt(*s);
    return an;
}

}  // namespace msw::detail

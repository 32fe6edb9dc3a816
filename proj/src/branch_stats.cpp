#include <algorithm>
#include <sstream>

#include "msw/msl.hpp"

namespace msw::msl {

bool is_comparison(BinOp op)
{
    switch (op) {
    case BinOp::Eq:
    case BinOp::Ne:
    case BinOp::Lt:
    case BinOp::Gt:
    case BinOp::Le:
    case BinOp::Ge: return true;
    default: return false;
    }
}

namespace {

void flatten_and(const Expr& e, std::vector<const Expr*>& out)
{
    if (const auto* b = std::get_if<Binary>(&e.node); b && b->op == BinOp::And) {
        flatten_and(*b->lhs, out);
        flatten_and(*b->rhs, out);
        return;
    }
    out.push_back(&e);
}

// True when evaluating e needs a mswitch call or an inlined procedure.
bool needs_hoist(const Expr& e, const Ast& ast)
{
    return std::visit(
        [&](const auto& n) -> bool {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, MsCallExpr>) {
                return true;
            } else if constexpr (std::is_same_v<T, Binary>) {
                return needs_hoist(*n.lhs, ast) || needs_hoist(*n.rhs, ast);
            } else if constexpr (std::is_same_v<T, Negate>) {
                return needs_hoist(*n.operand, ast);
            } else if constexpr (std::is_same_v<T, Call> || std::is_same_v<T, Tagged>) {
                if (ast.find_proc(n.name))
                    return true;
                for (const auto& a : n.args)
                    if (needs_hoist(*a.expr, ast))
                        return true;
                return false;
            } else {
                return false;
            }
        },
        e.node);
}

struct Walker {
    const Ast& ast;
    int threshold;
    BranchStats stats;

    void site(int fanout)
    {
        ++stats.sites;
        ++stats.histogram[fanout];
    }

    void call(const MsCall& c)
    {
        site(static_cast<int>(c.targets.size()));
        for (const auto& t : c.targets) {
            for (const auto& a : t.args)
                expr(*a.expr);
            for (const auto& i : t.items)
                expr(*i);
        }
    }

    void args(const std::vector<Arg>& as)
    {
        for (const auto& a : as)
            expr(*a.expr);
    }

    void expr(const Expr& e)
    {
        std::visit(
            [&](const auto& n) {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, MsCallExpr>) {
                    call(n.call);
                } else if constexpr (std::is_same_v<T, Binary>) {
                    expr(*n.lhs);
                    expr(*n.rhs);
                } else if constexpr (std::is_same_v<T, Negate>) {
                    expr(*n.operand);
                } else if constexpr (std::is_same_v<T, Call> || std::is_same_v<T, Tagged>) {
                    args(n.args);
                }
            },
            e.node);
    }

    void stmt(const Stmt& s)
    {
        std::visit(
            [&](const auto& n) {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, MsCallStmt>) {
                    call(n.call);
                } else if constexpr (std::is_same_v<T, If>) {
                    const auto conj = fusable_conjuncts(*n.cond, ast, threshold);
                    if (!conj.empty())
                        site(static_cast<int>(conj.size()));
                    expr(*n.cond);
                    stmt(*n.then_branch);
                    if (n.else_branch)
                        stmt(*n.else_branch);
                } else if constexpr (std::is_same_v<T, While>) {
                    expr(*n.cond);
                    stmt(*n.body);
                } else if constexpr (std::is_same_v<T, Assign>) {
                    expr(*n.value);
                } else if constexpr (std::is_same_v<T, Print>) {
                    for (const auto& i : n.items)
                        expr(*i);
                } else if constexpr (std::is_same_v<T, CallStmt>) {
                    args(n.call.args);
                } else if constexpr (std::is_same_v<T, Block>) {
                    for (const auto& c : n.stmts)
                        stmt(*c);
                }
            },
            s.node);
    }
};

}  // namespace

std::vector<const Expr*> fusable_conjuncts(const Expr& cond, const Ast& ast, int threshold)
{
    std::vector<const Expr*> conj;
    flatten_and(cond, conj);
    if (static_cast<int>(conj.size()) < std::max(threshold, 2))
        return {};
    for (const Expr* c : conj) {
        const auto* b = std::get_if<Binary>(&c->node);
        if (!b || !is_comparison(b->op) || needs_hoist(*c, ast))
            return {};
    }
    return conj;
}

BranchStats analyze_branching(const Ast& ast, int fusion_threshold)
{
    Walker w{ast, fusion_threshold, {}};
    for (const auto& s : ast.stmts)
        w.stmt(*s);
    for (const auto& p : ast.procs)
        for (const auto& s : p.body.stmts)
            w.stmt(*s);
    long total = 0;
    for (const auto& [fan, count] : w.stats.histogram) {
        w.stats.max_fanout = std::max(w.stats.max_fanout, fan);
        total += static_cast<long>(fan) * count;
    }
    if (w.stats.sites > 0)
        w.stats.mean_fanout = static_cast<double>(total) / w.stats.sites;
    return w.stats;
}

std::string BranchStats::to_string() const
{
    std::ostringstream os;
    os << "sites=" << sites << "\nmax_fanout=" << max_fanout << "\nmean_fanout=" << mean_fanout
       << "\nhistogram=";
    bool first = true;
    for (const auto& [fan, count] : histogram) {
        os << (first ? "" : ",") << fan << ":" << count;
        first = false;
    }
    os << "\n";
    return os.str();
}

}  // namespace msw::msl

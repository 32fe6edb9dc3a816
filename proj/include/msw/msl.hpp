#pragma once

// MSL: a small imperative language with the `mswitch` / `msreset` constructs.
// Grammar: docs/MSL.md.

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace msw::msl {

struct SourcePos {
    std::size_t line = 1;
    std::size_t col = 1;
};

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

// Argument of a call or target. `name` is the field name used for
// `sw.target.field` access; empty for non-identifier arguments.
struct Arg {
    ExprPtr expr;
    std::string name;
};

struct Target {
    enum class Kind { Named, Print };
    Kind kind = Kind::Named;
    std::string name;           // callee; "print" for print targets
    std::vector<Arg> args;      // Named: call arguments / bracketed parameters
    std::vector<ExprPtr> items; // Print: printed items
    SourcePos pos;
};

struct MsCall {
    std::string sw;
    std::vector<Target> targets;
    SourcePos pos;
};

enum class BinOp { Add, Sub, Eq, Ne, Lt, Gt, Le, Ge, And, Or };

bool is_comparison(BinOp op);

struct Number { std::int64_t value; };
struct String { std::string text; };
struct Ident { std::string name; };
// Multi-word parameter such as `dept-a prtr`; a symbolic constant.
struct Atom { std::string text; };
struct Binary {
    BinOp op;
    ExprPtr lhs;
    ExprPtr rhs;
};
struct Negate { ExprPtr operand; };
// sw.target (status) or sw.target.field
struct ResultAccess {
    std::string sw;
    std::string target;
    std::string field;  // empty = status
};
struct MsCallExpr { MsCall call; };
struct Call {
    std::string name;
    std::vector<Arg> args;
};
// name[params] inside print items.
struct Tagged {
    std::string name;
    std::vector<Arg> args;
};

struct Expr {
    std::variant<Number, String, Ident, Atom, Binary, Negate, ResultAccess, MsCallExpr, Call, Tagged>
        node;
    SourcePos pos;
    // Set by the lowering pass for expressions it evaluates ahead of time.
    int hoist_cell = 0;
};

struct Stmt;
using StmtPtr = std::unique_ptr<Stmt>;

struct Declare { std::vector<std::string> names; };
struct MsReset { std::string sw; };
struct MsCallStmt { MsCall call; };
struct If {
    ExprPtr cond;
    StmtPtr then_branch;
    StmtPtr else_branch;  // may be null
};
struct While {
    ExprPtr cond;
    StmtPtr body;
};
struct Assign {
    std::string name;
    ExprPtr value;
};
struct Print { std::vector<ExprPtr> items; };
struct CallStmt { Call call; };
struct Block { std::vector<StmtPtr> stmts; };

struct Stmt {
    std::variant<Declare, MsReset, MsCallStmt, If, While, Assign, Print, CallStmt, Block> node;
    SourcePos pos;
    int id = 0;    // pre-order number
    int last = 0;  // largest id in this subtree
};

struct Proc {
    std::string name;
    std::vector<std::string> params;
    Block body;
    SourcePos pos;
};

struct Ast {
    std::vector<StmtPtr> stmts;
    std::vector<Proc> procs;
    std::vector<std::string> mswitches;  // declaration order
    int stmt_count = 0;

    const Proc* find_proc(std::string_view name) const;
};

// Parses MSL source. Raises SyntaxError (with line/column) or NameError for
// an undeclared multi-switch.
Ast parse(std::string_view source);

// --- branching statistics -----------------------------------------------------

struct BranchStats {
    int sites = 0;
    std::map<int, int> histogram;  // fan-out -> site count
    int max_fanout = 0;
    double mean_fanout = 0.0;

    std::string to_string() const;
};

// Default number of conjuncts at which an `if` is lowered to a joiner.
inline constexpr int kDefaultFusionThreshold = 2;

// Conjuncts of a condition lowered to parallel comparison threads, or empty
// when the condition does not qualify.
std::vector<const Expr*> fusable_conjuncts(const Expr& cond, const Ast& ast, int threshold);

BranchStats analyze_branching(const Ast& ast, int fusion_threshold = kDefaultFusionThreshold);

}  // namespace msw::msl

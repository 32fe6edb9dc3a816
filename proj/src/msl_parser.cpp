#include <algorithm>
#include <cctype>
#include <set>

#include "msl_lexer.hpp"
#include "msw/error.hpp"
#include "msw/msl.hpp"

namespace msw::msl {

namespace {

std::string lower(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

const std::set<std::string> kKeywords = {"and",  "or",      "true",    "false", "if",   "then",
                                         "else", "while",   "declare", "mswitch", "msreset",
                                         "proc"};

// `ms` followed by digits names a multi-switch and must be declared.
bool reserved_switch_name(std::string_view s)
{
    if (s.size() < 3 || s.substr(0, 2) != "ms")
        return false;
    return std::all_of(s.begin() + 2, s.end(), [](unsigned char c) { return std::isdigit(c); });
}

template <class T>
ExprPtr make_expr(T node, SourcePos pos)
{
    auto e = std::make_unique<Expr>();
    e->node = std::move(node);
    e->pos = pos;
    return e;
}

template <class T>
StmtPtr make_stmt(T node, SourcePos pos)
{
    auto s = std::make_unique<Stmt>();
    s->node = std::move(node);
    s->pos = pos;
    return s;
}

class Parser {
public:
    explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

    Ast run()
    {
        while (!at(Tok::End)) {
            if (is_kw("proc"))
                ast_.procs.push_back(proc());
            else
                ast_.stmts.push_back(statement());
        }
        int next = 1;
        for (auto& s : ast_.stmts)
            number(*s, next);
        for (auto& p : ast_.procs)
            for (auto& s : p.body.stmts)
                number(*s, next);
        ast_.stmt_count = next - 1;
        return std::move(ast_);
    }

private:
    // --- token helpers ---------------------------------------------------------

    const Token& cur() const { return toks_[i_]; }
    const Token& ahead(std::size_t k) const { return toks_[std::min(i_ + k, toks_.size() - 1)]; }
    bool at(Tok k) const { return cur().kind == k; }

    bool is_kw(std::string_view kw, std::size_t k = 0) const
    {
        const Token& t = ahead(k);
        return t.kind == Tok::Ident && lower(t.text) == kw;
    }

    bool is_word(std::size_t k = 0) const
    {
        const Token& t = ahead(k);
        return t.kind == Tok::Ident && !kKeywords.count(lower(t.text));
    }

    [[noreturn]] void fail(const std::string& msg) const
    {
        throw SyntaxError(cur().pos.line, cur().pos.col, msg);
    }

    const Token& take() { return toks_[i_ < toks_.size() - 1 ? i_++ : i_]; }

    bool accept(Tok k)
    {
        if (!at(k))
            return false;
        take();
        return true;
    }

    void expect(Tok k, const char* what)
    {
        if (!accept(k))
            fail(std::string("expected ") + what);
    }

    std::string word(const char* what)
    {
        if (!is_word())
            fail(std::string("expected ") + what);
        return take().text;
    }

    bool declared(const std::string& name) const { return declared_.count(name) != 0; }

    void require_declared(const std::string& name, SourcePos pos) const
    {
        if (!declared(name))
            throw NameError("line " + std::to_string(pos.line) + ": undeclared mswitch '" + name +
                            "'");
    }

    // --- statements ------------------------------------------------------------

    Proc proc()
    {
        Proc p;
        p.pos = cur().pos;
        take();
        p.name = word("procedure name");
        expect(Tok::LParen, "'('");
        if (!at(Tok::RParen)) {
            do
                p.params.push_back(word("parameter name"));
            while (accept(Tok::Comma));
        }
        expect(Tok::RParen, "')'");
        if (!at(Tok::LBrace))
            fail("expected '{'");
        take();
        while (!accept(Tok::RBrace)) {
            if (at(Tok::End))
                fail("unterminated procedure body");
            p.body.stmts.push_back(statement());
        }
        return p;
    }

    StmtPtr statement()
    {
        StmtPtr s = statement_body();
        while (accept(Tok::Semi)) {
        }
        return s;
    }

    StmtPtr statement_body()
    {
        const SourcePos pos = cur().pos;
        if (at(Tok::LBrace)) {
            take();
            Block b;
            while (!accept(Tok::RBrace)) {
                if (at(Tok::End))
                    fail("unterminated block");
                b.stmts.push_back(statement());
            }
            return make_stmt(std::move(b), pos);
        }
        if (at(Tok::Semi)) {
            take();
            return make_stmt(Block{}, pos);
        }
        if (is_kw("declare")) {
            take();
            if (!is_kw("mswitch"))
                fail("expected 'mswitch'");
            take();
            Declare d;
            do {
                std::string n = word("mswitch name");
                if (!declared(n))
                    ast_.mswitches.push_back(n);
                declared_.insert(n);
                d.names.push_back(std::move(n));
            } while (accept(Tok::Comma));
            return make_stmt(std::move(d), pos);
        }
        if (is_kw("msreset")) {
            take();
            expect(Tok::LParen, "'('");
            const SourcePos npos = cur().pos;
            std::string n = word("mswitch name");
            require_declared(n, npos);
            expect(Tok::RParen, "')'");
            return make_stmt(MsReset{std::move(n)}, pos);
        }
        if (is_kw("mswitch")) {
            take();
            const SourcePos npos = cur().pos;
            std::string n = word("mswitch name");
            require_declared(n, npos);
            return make_stmt(MsCallStmt{mscall(std::move(n), npos)}, pos);
        }
        if (is_kw("if")) {
            take();
            If f;
            f.cond = expression();
            if (is_kw("then"))
                take();
            f.then_branch = statement();
            if (is_kw("else")) {
                take();
                f.else_branch = statement();
            }
            return make_stmt(std::move(f), pos);
        }
        if (is_kw("while")) {
            take();
            While w;
            w.cond = expression();
            w.body = statement();
            return make_stmt(std::move(w), pos);
        }
        if (!is_word())
            fail("expected statement");

        const std::string name = take().text;
        if (name == "print" && at(Tok::LParen))
            return make_stmt(Print{print_items()}, pos);
        if (at(Tok::Assign)) {
            take();
            if (declared(name) || reserved_switch_name(name))
                fail("cannot assign to mswitch '" + name + "'");
            return make_stmt(Assign{name, expression()}, pos);
        }
        if (at(Tok::LParen)) {
            if (declared(name))
                return make_stmt(MsCallStmt{mscall(name, pos)}, pos);
            if (reserved_switch_name(name))
                require_declared(name, pos);
            take();
            return make_stmt(CallStmt{Call{name, args(Tok::RParen)}}, pos);
        }
        fail("expected '=' or '(' after '" + name + "'");
    }

    void number(Stmt& s, int& next)
    {
        s.id = next++;
        std::visit(
            [&](auto& n) {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, If>) {
                    number(*n.then_branch, next);
                    if (n.else_branch)
                        number(*n.else_branch, next);
                } else if constexpr (std::is_same_v<T, While>) {
                    number(*n.body, next);
                } else if constexpr (std::is_same_v<T, Block>) {
                    for (auto& c : n.stmts)
                        number(*c, next);
                }
            },
            s.node);
        s.last = next - 1;
    }

    // --- mswitch calls ---------------------------------------------------------

    // At '(' after the switch name. `ms1(a), (b)` continues the target list.
    MsCall mscall(std::string sw, SourcePos pos)
    {
        MsCall c;
        c.sw = std::move(sw);
        c.pos = pos;
        expect(Tok::LParen, "'('");
        target_list(c);
        while (at(Tok::Comma) && ahead(1).kind == Tok::LParen) {
            take();
            take();
            target_list(c);
        }
        return c;
    }

    void target_list(MsCall& c)
    {
        if (at(Tok::RParen))
            fail("mswitch call needs at least one target");
        do
            c.targets.push_back(target());
        while (accept(Tok::Comma));
        expect(Tok::RParen, "')'");
    }

    Target target()
    {
        Target t;
        t.pos = cur().pos;
        t.name = word("target");
        if (t.name == "print" && at(Tok::LParen)) {
            t.kind = Target::Kind::Print;
            t.items = print_items();
            return t;
        }
        if (declared(t.name) || reserved_switch_name(t.name)) {
            if (at(Tok::LParen))
                throw SyntaxError(t.pos.line, t.pos.col,
                                  "nested mswitch call '" + t.name + "' cannot be a target");
            fail("mswitch '" + t.name + "' cannot be a target");
        }
        if (accept(Tok::LBracket))
            t.args = args(Tok::RBracket);
        else if (accept(Tok::LParen))
            t.args = args(Tok::RParen);
        return t;
    }

    // --- argument lists --------------------------------------------------------

    std::vector<ExprPtr> print_items()
    {
        expect(Tok::LParen, "'('");
        std::vector<ExprPtr> items;
        if (!accept(Tok::RParen)) {
            do
                items.push_back(argument().expr);
            while (accept(Tok::Comma));
            expect(Tok::RParen, "')'");
        }
        return items;
    }

    // After the opening bracket; consumes the closing one.
    std::vector<Arg> args(Tok close)
    {
        std::vector<Arg> out;
        if (accept(close))
            return out;
        do
            out.push_back(argument());
        while (accept(Tok::Comma));
        expect(close, close == Tok::RBracket ? "']'" : "')'");
        return out;
    }

    // Adjacent words form one multi-word atom.
    Arg argument()
    {
        Arg a;
        if (is_word() && is_word(1)) {
            const SourcePos pos = cur().pos;
            std::string text = take().text;
            while (is_word())
                text += " " + take().text;
            a.expr = make_expr(Atom{std::move(text)}, pos);
            return a;
        }
        a.expr = expression();
        if (const auto* id = std::get_if<Ident>(&a.expr->node))
            a.name = id->name;
        return a;
    }

    // --- expressions -----------------------------------------------------------

    ExprPtr expression() { return or_expr(); }

    ExprPtr binary(BinOp op, ExprPtr l, ExprPtr r, SourcePos pos)
    {
        return make_expr(Binary{op, std::move(l), std::move(r)}, pos);
    }

    ExprPtr or_expr()
    {
        ExprPtr e = and_expr();
        while (is_kw("or") || at(Tok::OrOr)) {
            const SourcePos pos = take().pos;
            e = binary(BinOp::Or, std::move(e), and_expr(), pos);
        }
        return e;
    }

    ExprPtr and_expr()
    {
        ExprPtr e = comparison();
        while (is_kw("and") || at(Tok::AndAnd)) {
            const SourcePos pos = take().pos;
            e = binary(BinOp::And, std::move(e), comparison(), pos);
        }
        return e;
    }

    ExprPtr comparison()
    {
        ExprPtr e = additive();
        BinOp op;
        switch (cur().kind) {
        case Tok::Eq: op = BinOp::Eq; break;
        case Tok::Ne: op = BinOp::Ne; break;
        case Tok::Lt: op = BinOp::Lt; break;
        case Tok::Gt: op = BinOp::Gt; break;
        case Tok::Le: op = BinOp::Le; break;
        case Tok::Ge: op = BinOp::Ge; break;
        default: return e;
        }
        const SourcePos pos = take().pos;
        return binary(op, std::move(e), additive(), pos);
    }

    ExprPtr additive()
    {
        ExprPtr e = unary();
        while (at(Tok::Plus) || at(Tok::Minus)) {
            const Token& t = take();
            e = binary(t.kind == Tok::Plus ? BinOp::Add : BinOp::Sub, std::move(e), unary(), t.pos);
        }
        return e;
    }

    ExprPtr unary()
    {
        if (at(Tok::Minus)) {
            const SourcePos pos = take().pos;
            return make_expr(Negate{unary()}, pos);
        }
        return primary();
    }

    ExprPtr primary()
    {
        const Token& t = cur();
        const SourcePos pos = t.pos;
        switch (t.kind) {
        case Tok::Number: return make_expr(Number{take().value}, pos);
        case Tok::String: return make_expr(String{take().text}, pos);
        case Tok::LParen: {
            take();
            ExprPtr e = expression();
            expect(Tok::RParen, "')'");
            return e;
        }
        case Tok::Ident: break;
        default: fail("expected expression");
        }
        if (is_kw("true")) {
            take();
            return make_expr(Number{1}, pos);
        }
        if (is_kw("false")) {
            take();
            return make_expr(Number{0}, pos);
        }
        if (!is_word())
            fail("unexpected keyword '" + t.text + "'");
        std::string name = take().text;
        const bool sw = declared(name);
        if (!sw && reserved_switch_name(name))
            require_declared(name, pos);
        if (sw) {
            if (at(Tok::LParen))
                return make_expr(MsCallExpr{mscall(std::move(name), pos)}, pos);
            if (accept(Tok::Dot)) {
                ResultAccess r;
                r.sw = std::move(name);
                r.target = word("target name");
                if (accept(Tok::Dot))
                    r.field = word("field name");
                return make_expr(std::move(r), pos);
            }
            fail("mswitch '" + name + "' used as a value");
        }
        if (accept(Tok::LParen))
            return make_expr(Call{std::move(name), args(Tok::RParen)}, pos);
        if (accept(Tok::LBracket))
            return make_expr(Tagged{std::move(name), args(Tok::RBracket)}, pos);
        return make_expr(Ident{std::move(name)}, pos);
    }

    std::vector<Token> toks_;
    std::size_t i_ = 0;
    std::set<std::string> declared_;
    Ast ast_;
};

}  // namespace

const Proc* Ast::find_proc(std::string_view name) const
{
    for (const auto& p : procs)
        if (p.name == name)
            return &p;
    return nullptr;
}

Ast parse(std::string_view source)
{
    return Parser(lex(source)).run();
}

}  // namespace msw::msl

#include "msw/lowering.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <sstream>

#include "lower_internal.hpp"
#include "msw/error.hpp"

namespace msw {

using namespace msw::msl;
using detail::Analysis;

std::string_view to_string(LowerMode m)
{
    switch (m) {
    case LowerMode::MSwitch: return "mswitch";
    case LowerMode::Sequential: return "sequential";
    case LowerMode::BaselinePoll: return "baseline-poll";
    }
    return "?";
}

LowerMode mode_from_string(std::string_view s)
{
    if (s == "mswitch" || s == "MSWITCH")
        return LowerMode::MSwitch;
    if (s == "sequential" || s == "SEQUENTIAL")
        return LowerMode::Sequential;
    if (s == "baseline-poll" || s == "baseline_poll" || s == "BASELINE_POLL" || s == "poll")
        return LowerMode::BaselinePoll;
    throw ArgumentError("unknown lowering mode '" + std::string(s) + "'");
}

namespace {

template <class... F>
struct Overload : F... {
    using F::operator()...;
};
template <class... F>
Overload(F...) -> Overload<F...>;

struct Label {
    int id;
};

// Immediate value or a code label resolved at the end.
struct Operand {
    long long value = 0;
    int label = -1;
    Operand(long long v) : value(v) {}  // NOLINT
    Operand(int v) : value(v) {}        // NOLINT
    Operand(std::uint16_t v) : value(v) {}  // NOLINT
    Operand(Label l) : label(l.id) {}  // NOLINT
};

using Frame = std::map<std::string, std::uint16_t>;

// Code position state captured for deferred thread bodies.
struct Context {
    std::vector<Frame> frames;
    std::vector<std::string> procs;
    int target_depth = 0;
};

constexpr int kFirstReg = 1;

class Codegen {
public:
    Codegen(const Ast& ast, const Analysis& an, const AllocationTable& alloc, LowerMode mode,
            Program& prog)
        : ast_(ast), an_(an), alloc_(alloc), mode_(mode), prog_(prog)
    {
    }

    void run()
    {
        for (const auto& name : an_.variables)
            prog_.variables[name] = new_cell();
        plan_results();
        for (const auto& s : ast_.stmts)
            stmt(*s);
        emit(Opcode::Thend, {});
        while (!deferred_.empty()) {
            auto job = std::move(deferred_.front());
            deferred_.pop_front();
            job();
        }
        resolve();
        prog_.entry = 1;
        prog_.memory_size = static_cast<std::uint16_t>(next_cell_ - 1);
        size_switches();
        label_targets(prog_);
    }

private:
    // --- emission --------------------------------------------------------------

    Label label()
    {
        labels_.push_back(0);
        return Label{static_cast<int>(labels_.size()) - 1};
    }

    void place(Label l) { labels_[l.id] = static_cast<Address>(prog_.code.size() + 1); }

    void emit(Opcode op, std::initializer_list<Operand> ops)
    {
        const auto& info = op_info(op);
        if (ops.size() != info.operands.size())
            throw CompileError("internal: operand count for " + std::string(info.mnemonic));
        Instruction ins;
        ins.op = op;
        std::size_t i = 0;
        for (const auto& o : ops) {
            if (o.label >= 0) {
                fixups_.push_back({prog_.code.size(), i, o.label});
            } else {
                if (o.value < 0 || o.value > 0xFFFF)
                    throw CompileError("operand out of range in " + std::string(info.mnemonic));
                ins.args[i] = static_cast<std::uint16_t>(o.value);
            }
            ++i;
        }
        prog_.code.push_back(ins);
    }

    void resolve()
    {
        for (const auto& f : fixups_) {
            const Address a = labels_[f.label];
            if (a == 0 || a > 0xFFFF)
                throw CompileError("internal: unplaced label");
            prog_.code[f.instr].args[f.operand] = static_cast<std::uint16_t>(a);
        }
    }

    void defer(std::function<void()> body)
    {
        Context saved = ctx_;
        deferred_.push_back([this, saved = std::move(saved), body = std::move(body)] {
            ctx_ = saved;
            body();
        });
    }

    std::uint16_t new_cell()
    {
        if (next_cell_ > 0xFFFF)
            throw CompileError("program needs more than 65535 memory cells");
        return static_cast<std::uint16_t>(next_cell_++);
    }

    int reg(int r) const
    {
        if (r >= kRegisterCount)
            throw CompileError("expression too deep for the register file");
        return r;
    }

    void constant(std::int64_t v, int r)
    {
        reg(r);
        if (v < 0) {
            constant(-v, r);
            emit(Opcode::Loadi, {reg(r + 1), 0});
            emit(Opcode::Sub, {r, r + 1, r});
            return;
        }
        if (v <= 0xFFFF) {
            emit(Opcode::Loadi, {r, static_cast<long long>(v)});
            return;
        }
        constant(v >> 16, r);
        for (int i = 0; i < 16; ++i)
            emit(Opcode::Add, {r, r, r});
        emit(Opcode::Loadi, {reg(r + 1), static_cast<long long>(v & 0xFFFF)});
        emit(Opcode::Add, {r, r, r + 1});
    }

    std::uint16_t string_id(const std::string& s) { return prog_.intern_string(s); }

    // --- names -----------------------------------------------------------------

    const std::uint16_t* variable(const std::string& name) const
    {
        if (!ctx_.frames.empty()) {
            auto it = ctx_.frames.back().find(name);
            if (it != ctx_.frames.back().end())
                return &it->second;
        }
        auto it = prog_.variables.find(name);
        return it == prog_.variables.end() ? nullptr : &it->second;
    }

    std::uint16_t variable_cell(const std::string& name)
    {
        if (const auto* c = variable(name))
            return *c;
        throw CompileError("internal: no cell for variable '" + name + "'");
    }

    // --- switch placements -----------------------------------------------------

    const Placement& placement(int demand) const { return alloc_.placements.at(demand); }

    void page_in(const Placement& p)
    {
        if (p.kind == Placement::Kind::Paged)
            emit(Opcode::MsLoad, {p.sw, p.slot});
    }

    void page_out(const Placement& p)
    {
        if (p.kind == Placement::Kind::Paged)
            emit(Opcode::MsSave, {p.sw, p.slot});
    }

    void configure_spawner(const Placement& p, const std::vector<Label>& targets)
    {
        page_in(p);
        emit(Opcode::MsReset, {p.sw});
        emit(Opcode::MsArity, {p.sw, 1, 0});
        for (std::size_t i = 0; i < targets.size(); ++i)
            emit(Opcode::MsAct, {p.sw, static_cast<long long>(i), targets[i]});
        page_out(p);
    }

    // Joiner of n inputs firing to `fired`; FALSE goes to `on_false` if given.
    void configure_join(const Placement& p, int n, Label fired, const Label* on_false)
    {
        if (p.kind != Placement::Kind::Ganged) {
            page_in(p);
            emit(Opcode::MsReset, {p.sw});
            emit(Opcode::MsArity, {p.sw, n, 0});
            emit(Opcode::MsAct, {p.sw, 0, fired});
            if (on_false)
                emit(Opcode::MsFalse, {p.sw, *on_false});
            page_out(p);
            return;
        }
        const auto& segs = p.segments;
        for (std::size_t j = 0; j < segs.size(); ++j) {
            const auto& g = segs[j];
            emit(Opcode::MsReset, {g.sw});
            emit(Opcode::MsArity, {g.sw, g.arity, 0});
            if (j + 1 == segs.size()) {
                emit(Opcode::MsAct, {g.sw, 0, fired});
                if (on_false)
                    emit(Opcode::MsFalse, {g.sw, *on_false});
                continue;
            }
            const Label stub = label();
            emit(Opcode::MsAct, {g.sw, 0, stub});
            const GangSegment next = segs[j + 1];
            defer([this, stub, next] {
                place(stub);
                emit(Opcode::MsIn, {next.sw, next.link});
                emit(Opcode::Thend, {});
            });
        }
    }

    void join_input(const Placement& p, int i)
    {
        const auto [sw, line] = p.input(i);
        emit(Opcode::MsIn, {sw, line});
    }

    void join_off(const Placement& p) { emit(Opcode::MsOff, {p.sw}); }

    // --- results ---------------------------------------------------------------

    struct SiteResults {
        std::vector<ResultLocation> locs;  // per target line
        std::vector<std::string> names;
    };

    static std::string target_key(const Target& t)
    {
        return t.kind == Target::Kind::Print ? "print" : t.name;
    }

    void plan_results()
    {
        for (const MsCall* c : an_.site_order) {
            const auto& site = an_.sites.at(c);
            if (!site.consumed)
                continue;
            SiteResults sr;
            for (std::size_t i = 0; i < c->targets.size(); ++i) {
                const Target& t = c->targets[i];
                ResultLocation loc;
                for (const auto& a : t.args)
                    loc.field_names.push_back(a.name);
                if (mode_ == LowerMode::MSwitch) {
                    loc.where = ResultLocation::Where::Switch;
                    loc.sw = placement(site.spawner).sw;
                    loc.line = static_cast<int>(i);
                } else {
                    loc.where = ResultLocation::Where::Memory;
                    loc.status_cell = new_cell();
                    loc.ready_cell = new_cell();
                    for (std::size_t j = 0; j < t.args.size(); ++j)
                        loc.field_cells.push_back(new_cell());
                }
                sr.locs.push_back(std::move(loc));
                sr.names.push_back(target_key(t));
            }
            for (std::size_t i = sr.locs.size(); i-- > 0;)
                final_[{c->sw, sr.names[i]}] = sr.locs[i];
            planned_[c] = std::move(sr);
        }
        for (const auto& [key, loc] : final_)
            prog_.results[key] = loc;
    }

    const ResultLocation& locate(const ResultAccess& ra, SourcePos pos) const
    {
        const std::pair<std::string, std::string> key{ra.sw, ra.target};
        auto it = current_.find(key);
        if (it != current_.end())
            return it->second;
        auto f = final_.find(key);
        if (f != final_.end())
            return f->second;
        throw CompileError("line " + std::to_string(pos.line) + ": no call of '" + ra.sw +
                           "' has a target '" + ra.target + "'");
    }

    void read_result(const ResultAccess& ra, SourcePos pos, int r)
    {
        const ResultLocation& loc = locate(ra, pos);
        int field = 0;
        if (!ra.field.empty()) {
            auto it = std::find(loc.field_names.begin(), loc.field_names.end(), ra.field);
            if (it == loc.field_names.end())
                throw CompileError("line " + std::to_string(pos.line) + ": target '" +
                                   ra.target + "' has no field '" + ra.field + "'");
            field = static_cast<int>(it - loc.field_names.begin()) + 1;
        }
        if (loc.where == ResultLocation::Where::Switch) {
            emit(Opcode::MsRes, {loc.sw, loc.line, field, r});
        } else {
            emit(Opcode::Ld,
                 {r, field == 0 ? loc.status_cell : loc.field_cells[static_cast<std::size_t>(field - 1)]});
        }
    }

    // --- expressions -----------------------------------------------------------

    [[noreturn]] static void fail(SourcePos pos, const std::string& msg)
    {
        throw CompileError("line " + std::to_string(pos.line) + ": " + msg);
    }

    static Opcode binop(BinOp op)
    {
        switch (op) {
        case BinOp::Add: return Opcode::Add;
        case BinOp::Sub: return Opcode::Sub;
        case BinOp::Eq: return Opcode::CmpEq;
        case BinOp::Ne: return Opcode::CmpNe;
        case BinOp::Lt: return Opcode::CmpLt;
        case BinOp::Gt: return Opcode::CmpGt;
        case BinOp::Le: return Opcode::CmpLe;
        case BinOp::Ge: return Opcode::CmpGe;
        case BinOp::And: return Opcode::And;
        case BinOp::Or: return Opcode::Or;
        }
        return Opcode::Nop;
    }

    void eval(const Expr& e, int r)
    {
        reg(r);
        std::visit(Overload{
                       [&](const Number& n) { constant(n.value, r); },
                       [&](const String& s) { emit(Opcode::Loadi, {r, string_id(s.text) + 1}); },
                       [&](const Atom& a) { emit(Opcode::Loadi, {r, string_id(a.text) + 1}); },
                       [&](const Ident& id) {
                           if (const auto* c = variable(id.name))
                               emit(Opcode::Ld, {r, *c});
                           else
                               emit(Opcode::Loadi, {r, string_id(id.name) + 1});
                       },
                       [&](const Binary& b) {
                           eval(*b.lhs, r);
                           eval(*b.rhs, reg(r + 1));
                           emit(binop(b.op), {r, r, r + 1});
                       },
                       [&](const Negate& n) {
                           eval(*n.operand, reg(r + 1));
                           emit(Opcode::Loadi, {r, 0});
                           emit(Opcode::Sub, {r, r, r + 1});
                       },
                       [&](const ResultAccess& ra) { read_result(ra, e.pos, r); },
                       [&](const MsCallExpr&) { emit(Opcode::Ld, {r, hoisted(e)}); },
                       [&](const Call& c) {
                           if (ast_.find_proc(c.name)) {
                               emit(Opcode::Ld, {r, hoisted(e)});
                               return;
                           }
                           extern_call(c.name, c.args, r);
                       },
                       [&](const Tagged& t) {
                           fail(e.pos, "'" + t.name + "[...]' is only allowed in print items");
                       },
                   },
                   e.node);
    }

    // Arguments in r+1.., status in r; arguments stay in place afterwards.
    void extern_call(const std::string& name, const std::vector<Arg>& args, int r)
    {
        const int n = static_cast<int>(args.size());
        reg(r + n);
        for (int j = 0; j < n; ++j)
            eval(*args[j].expr, r + 1 + j);
        emit(Opcode::Ext, {prog_.intern_extern(name), r + 1, n, r});
    }

    std::uint16_t hoisted(const Expr& e) const
    {
        auto it = hoist_.find(&e);
        if (it == hoist_.end())
            throw CompileError("internal: expression not hoisted");
        return it->second;
    }

    // Runs mswitch calls and procedure calls nested in e ahead of the
    // statement; their values land in fresh cells.
    void hoist(const Expr& e)
    {
        std::visit(Overload{
                       [&](const Binary& b) {
                           hoist(*b.lhs);
                           hoist(*b.rhs);
                       },
                       [&](const Negate& n) { hoist(*n.operand); },
                       [&](const MsCallExpr& m) {
                           for (const auto& t : m.call.targets)
                               for (const auto& a : t.args)
                                   no_mscall(*a.expr);
                           hoist_[&e] = mscall(m.call);
                       },
                       [&](const Call& c) {
                           for (const auto& a : c.args)
                               hoist(*a.expr);
                           if (const Proc* p = ast_.find_proc(c.name)) {
                               inline_proc(*p, c.args, e.pos);
                               const std::uint16_t cell = new_cell();
                               emit(Opcode::Loadi, {kFirstReg, 1});
                               emit(Opcode::St, {kFirstReg, cell});
                               hoist_[&e] = cell;
                           }
                       },
                       [&](const Tagged& t) {
                           for (const auto& a : t.args)
                               hoist(*a.expr);
                       },
                       [](const auto&) {},
                   },
                   e.node);
    }

    void no_mscall(const Expr& e)
    {
        if (std::holds_alternative<MsCallExpr>(e.node))
            fail(e.pos, "mswitch call cannot be a target argument");
        if (const auto* b = std::get_if<Binary>(&e.node)) {
            no_mscall(*b->lhs);
            no_mscall(*b->rhs);
        }
    }

    void print_item(const Expr& e)
    {
        std::visit(Overload{
                       [&](const String& s) { emit(Opcode::PrintS, {string_id(s.text)}); },
                       [&](const Atom& a) { emit(Opcode::PrintS, {string_id(a.text)}); },
                       [&](const Ident& id) {
                           if (variable(id.name)) {
                               eval(e, kFirstReg);
                               emit(Opcode::Print, {kFirstReg});
                           } else {
                               emit(Opcode::PrintS, {string_id(id.name)});
                           }
                       },
                       [&](const Tagged& t) {
                           emit(Opcode::PrintS, {string_id(t.name)});
                           for (const auto& a : t.args)
                               print_item(*a.expr);
                       },
                       [&](const auto&) {
                           eval(e, kFirstReg);
                           emit(Opcode::Print, {kFirstReg});
                       },
                   },
                   e.node);
    }

    void print_line(const std::vector<ExprPtr>& items)
    {
        for (const auto& i : items)
            print_item(*i);
        emit(Opcode::PrintNl, {});
    }

    // --- procedures ------------------------------------------------------------

    std::vector<std::uint16_t> inline_proc(const Proc& p, const std::vector<Arg>& args,
                                           SourcePos pos)
    {
        if (std::find(ctx_.procs.begin(), ctx_.procs.end(), p.name) != ctx_.procs.end())
            fail(pos, "recursive call of '" + p.name + "'");
        if (args.size() != p.params.size())
            fail(pos, "'" + p.name + "' takes " + std::to_string(p.params.size()) +
                          " arguments, got " + std::to_string(args.size()));
        Frame frame;
        std::vector<std::uint16_t> cells;
        for (std::size_t j = 0; j < args.size(); ++j) {
            const std::uint16_t cell = new_cell();
            eval(*args[j].expr, kFirstReg);
            emit(Opcode::St, {kFirstReg, cell});
            frame[p.params[j]] = cell;
            cells.push_back(cell);
        }
        ctx_.frames.push_back(std::move(frame));
        ctx_.procs.push_back(p.name);
        for (const auto& s : p.body.stmts)
            stmt(*s);
        ctx_.procs.pop_back();
        ctx_.frames.pop_back();
        return cells;
    }

    // --- mswitch calls ---------------------------------------------------------

    void require_not_target(SourcePos pos, const std::string& what)
    {
        if (ctx_.target_depth > 0)
            fail(pos, what + " inside a mswitch target is not supported");
    }

    // Body of target i. Leaves the status in r1 and field j in r(2+j).
    void run_target(const Target& t)
    {
        ++ctx_.target_depth;
        if (t.kind == Target::Kind::Print) {
            print_line(t.items);
            emit(Opcode::Loadi, {kFirstReg, 1});
        } else if (const Proc* p = ast_.find_proc(t.name)) {
            const auto cells = inline_proc(*p, t.args, t.pos);
            for (std::size_t j = 0; j < cells.size(); ++j)
                emit(Opcode::Ld, {reg(static_cast<int>(kFirstReg + 1 + j)), cells[j]});
            emit(Opcode::Loadi, {kFirstReg, 1});
        } else {
            extern_call(t.name, t.args, kFirstReg);
        }
        --ctx_.target_depth;
    }

    // Stores r1 (status) and r2.. (fields) into a memory record.
    void store_record(const ResultLocation& loc)
    {
        for (std::size_t j = 0; j < loc.field_cells.size(); ++j)
            emit(Opcode::St, {static_cast<int>(kFirstReg + 1 + j), loc.field_cells[j]});
        emit(Opcode::St, {kFirstReg, loc.status_cell});
        emit(Opcode::Loadi, {kFirstReg, 1});
        emit(Opcode::St, {kFirstReg, loc.ready_cell});
    }

    // AND of the record statuses into a fresh cell.
    std::uint16_t aggregate(const SiteResults& sr)
    {
        for (std::size_t i = 0; i < sr.locs.size(); ++i) {
            const auto& loc = sr.locs[i];
            const int r = i == 0 ? kFirstReg : kFirstReg + 1;
            if (loc.where == ResultLocation::Where::Switch)
                emit(Opcode::MsRes, {loc.sw, loc.line, 0, r});
            else
                emit(Opcode::Ld, {r, loc.status_cell});
            if (i > 0)
                emit(Opcode::And, {kFirstReg, kFirstReg, kFirstReg + 1});
        }
        const std::uint16_t cell = new_cell();
        emit(Opcode::St, {kFirstReg, cell});
        return cell;
    }

    void clear_flags(const std::vector<std::uint16_t>& flags)
    {
        if (flags.empty())
            return;
        emit(Opcode::Loadi, {kFirstReg, 0});
        for (auto f : flags)
            emit(Opcode::St, {kFirstReg, f});
    }

    void poll_all(const std::vector<std::uint16_t>& flags)
    {
        for (auto f : flags) {
            const Label loop = label();
            place(loop);
            emit(Opcode::Poll, {kFirstReg, f});
            emit(Opcode::JmpZ, {kFirstReg, loop});
        }
    }

    // Emits one call site. Returns the aggregate status cell for consumed
    // calls, 0 otherwise.
    std::uint16_t mscall(const MsCall& c)
    {
        require_not_target(c.pos, "mswitch call");
        const auto& site = an_.sites.at(&c);
        const SiteResults* sr = site.consumed ? &planned_.at(&c) : nullptr;
        std::uint16_t result = 0;
        const std::size_t k = c.targets.size();

        if (mode_ == LowerMode::Sequential) {
            for (std::size_t i = 0; i < k; ++i) {
                run_target(c.targets[i]);
                if (sr)
                    store_record(sr->locs[i]);
            }
        } else if (mode_ == LowerMode::BaselinePoll) {
            std::vector<std::uint16_t> flags;
            if (sr)
                for (const auto& loc : sr->locs)
                    flags.push_back(loc.ready_cell);
            clear_flags(flags);
            std::vector<Label> starts;
            for (std::size_t i = 0; i < k; ++i)
                starts.push_back(label());
            const Placement& s = placement(site.spawner);
            configure_spawner(s, starts);
            emit(Opcode::MsIn, {s.sw, 0});
            for (std::size_t i = 0; i < k; ++i) {
                defer([this, &c, i, sr, start = starts[i]] {
                    place(start);
                    run_target(c.targets[i]);
                    if (sr)
                        store_record(sr->locs[i]);
                    emit(Opcode::Thend, {});
                });
            }
            poll_all(flags);
        } else {
            const Placement& s = placement(site.spawner);
            const Label cont = label();
            if (sr)
                configure_join(placement(site.joiner), static_cast<int>(k), cont, nullptr);
            std::vector<Label> starts;
            for (std::size_t i = 0; i < k; ++i)
                starts.push_back(label());
            configure_spawner(s, starts);
            emit(Opcode::MsIn, {s.sw, 0});
            for (std::size_t i = 0; i < k; ++i) {
                const int joiner = site.joiner;
                const int sw = s.sw;
                defer([this, &c, i, sr, joiner, sw, start = starts[i]] {
                    place(start);
                    run_target(c.targets[i]);
                    if (sr) {
                        const auto n = sr->locs[i].field_names.size();
                        for (std::size_t j = 0; j < n; ++j)
                            emit(Opcode::MsPut, {sw, static_cast<long long>(i),
                                                 static_cast<long long>(j + 1),
                                                 static_cast<int>(kFirstReg + 1 + j)});
                        emit(Opcode::MsPut, {sw, static_cast<long long>(i), 0, kFirstReg});
                        join_input(placement(joiner), static_cast<int>(i));
                    }
                    emit(Opcode::Thend, {});
                });
            }
            if (sr) {
                emit(Opcode::Thend, {});
                place(cont);
            }
        }
        if (sr) {
            result = aggregate(*sr);
            for (std::size_t i = 0; i < k; ++i)
                current_[{c.sw, sr->names[i]}] = sr->locs[i];
        }
        return result;
    }

    // --- statements ------------------------------------------------------------

    void fused_if(const Stmt& s, const If& f, const detail::FusedIf& fi)
    {
        require_not_target(s.pos, "fused if");
        const auto& conj = fi.conjuncts;
        const int c = static_cast<int>(conj.size());
        const Label then_l = label();
        const Label else_l = label();
        const Label after = label();
        const Label on_false = f.else_branch ? else_l : after;

        if (mode_ == LowerMode::Sequential) {
            for (const Expr* e : conj) {
                eval(*e, kFirstReg);
                emit(Opcode::JmpZ, {kFirstReg, on_false});
            }
        } else if (mode_ == LowerMode::BaselinePoll) {
            std::vector<std::uint16_t> flags;
            std::vector<std::uint16_t> values;
            for (int i = 0; i < c; ++i) {
                flags.push_back(new_cell());
                values.push_back(new_cell());
            }
            clear_flags(flags);
            std::vector<Label> starts;
            for (int i = 0; i < c; ++i)
                starts.push_back(label());
            const Placement& sp = placement(fi.spawner);
            configure_spawner(sp, starts);
            emit(Opcode::MsIn, {sp.sw, 0});
            for (int i = 0; i < c; ++i) {
                const Expr* e = conj[i];
                defer([this, e, start = starts[i], flag = flags[i], value = values[i]] {
                    place(start);
                    eval(*e, kFirstReg);
                    emit(Opcode::St, {kFirstReg, value});
                    emit(Opcode::Loadi, {kFirstReg + 1, 1});
                    emit(Opcode::St, {kFirstReg + 1, flag});
                    emit(Opcode::Thend, {});
                });
            }
            poll_all(flags);
            for (int i = 0; i < c; ++i) {
                emit(Opcode::Ld, {i == 0 ? kFirstReg : kFirstReg + 1, values[i]});
                if (i > 0)
                    emit(Opcode::And, {kFirstReg, kFirstReg, kFirstReg + 1});
            }
            emit(Opcode::JmpZ, {kFirstReg, on_false});
        } else {
            const Placement& jp = placement(fi.joiner);
            const Placement& sp = placement(fi.spawner);
            configure_join(jp, c, then_l, &on_false);
            std::vector<Label> starts;
            for (int i = 1; i < c; ++i)
                starts.push_back(label());
            configure_spawner(sp, starts);
            emit(Opcode::MsIn, {sp.sw, 0});
            const int joiner = fi.joiner;
            comparison_thread(*conj[0], placement(joiner), 0);
            for (int i = 1; i < c; ++i) {
                const Expr* e = conj[i];
                defer([this, e, joiner, i, start = starts[i - 1]] {
                    place(start);
                    comparison_thread(*e, placement(joiner), i);
                });
            }
        }
        place(then_l);
        stmt(*f.then_branch);
        if (f.else_branch) {
            emit(Opcode::Jmp, {after});
            place(else_l);
            stmt(*f.else_branch);
        }
        place(after);
    }

    // True drives the joiner line, false trips the bypass.
    void comparison_thread(const Expr& e, const Placement& j, int i)
    {
        const Label off = label();
        eval(e, kFirstReg);
        emit(Opcode::JmpZ, {kFirstReg, off});
        join_input(j, i);
        emit(Opcode::Thend, {});
        place(off);
        join_off(j);
        emit(Opcode::Thend, {});
    }

    void stmt(const Stmt& s)
    {
        std::visit(
            Overload{
                [](const Declare&) {},
                [&](const MsReset& m) {
                    require_not_target(s.pos, "msreset");
                    if (mode_ == LowerMode::Sequential)
                        return;
                    const Placement& p = placement(an_.logical.at(m.sw));
                    page_in(p);
                    emit(Opcode::MsReset, {p.sw});
                    page_out(p);
                },
                [&](const MsCallStmt& m) {
                    for (const auto& t : m.call.targets)
                        for (const auto& a : t.args)
                            no_mscall(*a.expr);
                    mscall(m.call);
                },
                [&](const If& f) {
                    if (auto it = an_.fused.find(&s); it != an_.fused.end()) {
                        fused_if(s, f, it->second);
                        return;
                    }
                    hoist(*f.cond);
                    const Label else_l = label();
                    const Label after = label();
                    eval(*f.cond, kFirstReg);
                    emit(Opcode::JmpZ, {kFirstReg, f.else_branch ? else_l : after});
                    stmt(*f.then_branch);
                    if (f.else_branch) {
                        emit(Opcode::Jmp, {after});
                        place(else_l);
                        stmt(*f.else_branch);
                    }
                    place(after);
                },
                [&](const While& w) {
                    const Label head = label();
                    const Label end = label();
                    place(head);
                    hoist(*w.cond);
                    eval(*w.cond, kFirstReg);
                    emit(Opcode::JmpZ, {kFirstReg, end});
                    stmt(*w.body);
                    emit(Opcode::Jmp, {head});
                    place(end);
                },
                [&](const Assign& a) {
                    hoist(*a.value);
                    eval(*a.value, kFirstReg);
                    emit(Opcode::St, {kFirstReg, variable_cell(a.name)});
                },
                [&](const Print& p) {
                    for (const auto& i : p.items)
                        hoist(*i);
                    print_line(p.items);
                },
                [&](const CallStmt& c) {
                    for (const auto& a : c.call.args)
                        hoist(*a.expr);
                    if (const Proc* p = ast_.find_proc(c.call.name))
                        inline_proc(*p, c.call.args, s.pos);
                    else
                        extern_call(c.call.name, c.call.args, 0);
                },
                [&](const Block& b) {
                    for (const auto& c : b.stmts)
                        stmt(*c);
                },
            },
            s.node);
    }

    void size_switches()
    {
        std::vector<int> sizes;
        auto need = [&](int sw, int lines) {
            if (static_cast<int>(sizes.size()) <= sw)
                sizes.resize(static_cast<std::size_t>(sw) + 1, 0);
            sizes[sw] = std::max({sizes[sw], lines, 2});  // no physical switch is smaller
        };
        for (std::size_t i = 0; i < alloc_.placements.size(); ++i) {
            const auto& p = alloc_.placements[i];
            if (p.kind == Placement::Kind::Ganged)
                for (const auto& g : p.segments)
                    need(g.sw, g.arity);
            else
                need(p.sw, alloc_.demands[i].lines());
        }
        prog_.switch_sizes = std::move(sizes);
    }

    struct Fixup {
        std::size_t instr;
        std::size_t operand;
        int label;
    };

    const Ast& ast_;
    const Analysis& an_;
    const AllocationTable& alloc_;
    LowerMode mode_;
    Program& prog_;
    Context ctx_;
    std::vector<Address> labels_;
    std::vector<Fixup> fixups_;
    std::deque<std::function<void()>> deferred_;
    int next_cell_ = 1;
    std::map<const Expr*, std::uint16_t> hoist_;
    std::map<const MsCall*, SiteResults> planned_;
    std::map<std::pair<std::string, std::string>, ResultLocation> current_;
    std::map<std::pair<std::string, std::string>, ResultLocation> final_;
};

std::string class_counts(const Program& p)
{
    int cmp = 0, jmp = 0, ms = 0, poll = 0;
    for (const auto& i : p.code) {
        switch (op_info(i.op).cls) {
        case OpClass::Comparison: ++cmp; break;
        case OpClass::Jump: ++jmp; break;
        case OpClass::MsOp: ++ms; break;
        case OpClass::Poll: ++poll; break;
        case OpClass::Other: break;
        }
    }
    std::ostringstream os;
    os << "instructions=" << p.code.size() << " comparisons=" << cmp << " jumps=" << jmp
       << " ms_ops=" << ms << " polls=" << poll;
    return os.str();
}

}  // namespace

CompileResult lower(const Ast& ast, const MachineShape& shape, const CompileOptions& opts)
{
    shape.validate();
    CompileResult out;
    out.mode_used = opts.mode;
    const Analysis an = detail::analyze(ast, opts.mode, opts.fusion_threshold, out.program);
    out.allocation = allocate(an.demands, shape, opts.policy);
    Codegen(ast, an, out.allocation, opts.mode, out.program).run();

    std::ostringstream os;
    os << "mode=" << to_string(opts.mode) << " policy=" << to_string(opts.policy)
       << " shape=" << shape.to_string() << "\n"
       << class_counts(out.program) << "\n"
       << "memory=" << out.program.memory_size << "\n"
       << analyze_branching(ast, opts.fusion_threshold).to_string();
    if (!out.allocation.placements.empty())
        os << "allocation:\n" << out.allocation.to_string();
    out.report = os.str();
    return out;
}

Program lower(const Ast& ast, const MachineShape& shape, LowerMode mode)
{
    CompileOptions opts;
    opts.mode = mode;
    return lower(ast, shape, opts).program;
}

CompileResult compile(std::string_view source, const MachineShape& shape,
                      const CompileOptions& opts)
{
    const Ast ast = parse(source);
    try {
        return lower(ast, shape, opts);
    } catch (const CapacityError& e) {
        if (!opts.sequential_fallback || opts.mode == LowerMode::Sequential)
            throw;
        CompileOptions seq = opts;
        seq.mode = LowerMode::Sequential;
        CompileResult r = lower(ast, shape, seq);
        r.report = std::string("fallback: ") + e.what() + "\n" + r.report;
        return r;
    }
}

}  // namespace msw

#include "msw/vm.hpp"

#include <algorithm>
#include <sstream>

#include <json.hpp>

#include "msw/error.hpp"

namespace msw {

std::string_view to_string(RunStatus s)
{
    switch (s) {
    case RunStatus::Completed: return "completed";
    case RunStatus::Halted: return "halted";
    case RunStatus::Timeout: return "timeout";
    case RunStatus::Trap: return "trap";
    }
    return "?";
}

std::string RunMetrics::to_kv() const
{
    std::ostringstream os;
    os << "comparisons=" << comparisons << "\n"
       << "jumps=" << jumps << "\n"
       << "ms_ops=" << ms_ops << "\n"
       << "polls=" << polls << "\n"
       << "other=" << other << "\n"
       << "instructions=" << instructions << "\n"
       << "cycles=" << cycles << "\n"
       << "comparison_cycles=" << comparison_cycles << "\n"
       << "firings=" << firings << "\n"
       << "bypasses=" << bypasses << "\n"
       << "threads_spawned=" << threads_spawned << "\n"
       << "max_live_threads=" << max_live_threads << "\n"
       << "parallel_phases=" << parallel_phases << "\n";
    return os.str();
}

std::string RunMetrics::to_json() const
{
    nlohmann::ordered_json j;
    j["comparisons"] = comparisons;
    j["jumps"] = jumps;
    j["ms_ops"] = ms_ops;
    j["polls"] = polls;
    j["other"] = other;
    j["instructions"] = instructions;
    j["cycles"] = cycles;
    j["comparison_cycles"] = comparison_cycles;
    j["firings"] = firings;
    j["bypasses"] = bypasses;
    j["threads_spawned"] = threads_spawned;
    j["max_live_threads"] = max_live_threads;
    j["parallel_phases"] = parallel_phases;
    auto spawns_json = nlohmann::ordered_json::array();
    for (const auto& s : spawns) {
        nlohmann::ordered_json e;
        e["cycle"] = s.cycle;
        e["switch"] = s.sw;
        e["false_path"] = s.false_path;
        e["threads"] = s.threads;
        spawns_json.push_back(std::move(e));
    }
    j["spawns"] = std::move(spawns_json);
    return j.dump(2);
}

bool default_extern(Machine& m, std::string_view name, std::span<std::int64_t> args)
{
    std::string line = "call " + std::string(name) + "(";
    for (std::size_t i = 0; i < args.size(); ++i)
        line += (i ? ", " : "") + std::to_string(args[i]);
    line += ")";
    m.emit_line(std::move(line));
    return true;
}

Machine::Machine(Program program, MachineShape shape)
    : program_(std::move(program)), shape_(std::move(shape))
{
    shape_.validate();

    const auto n = static_cast<std::size_t>(shape_.switch_count());
    if (program_.switch_sizes.size() > n)
        throw LoadError("program needs " + std::to_string(program_.switch_sizes.size()) +
                        " switches, machine has " + std::to_string(n));
    for (std::size_t i = 0; i < program_.switch_sizes.size(); ++i)
        if (program_.switch_sizes[i] > shape_.sizes[i])
            throw LoadError("program needs switch " + std::to_string(i) + " of size " +
                            std::to_string(program_.switch_sizes[i]) + ", machine has " +
                            std::to_string(shape_.sizes[i]));
    for (std::size_t a = 0; a < program_.code.size(); ++a) {
        const auto& instr = program_.code[a];
        const auto& info = op_info(instr.op);
        for (std::size_t i = 0; i < info.operands.size(); ++i)
            if (info.operands[i] == OperandKind::Switch && instr.args[i] >= n)
                throw LoadError("instruction at " + std::to_string(a + 1) + " uses switch " +
                                std::to_string(instr.args[i]) + " but machine has " +
                                std::to_string(n));
    }

    for (std::size_t i = 0; i < n; ++i)
        bank_.emplace_back(shape_.sizes[i], 1, GateKind::And, static_cast<int>(i));
    last_driver_.assign(n, -1);
    memory_.assign(static_cast<std::size_t>(program_.memory_size) + 1, 0);
    if (!program_.code.empty())
        start_thread(program_.entry, 0);
}

int Machine::start_thread(Address addr, std::uint64_t stamp)
{
    Thread t;
    t.id = static_cast<int>(threads_.size());
    t.pc = addr;
    t.spawned_at = stamp;
    t.ready_at = threads_.empty() ? 0 : cycle_ + 1;
    threads_.push_back(std::move(t));
    ++metrics_.threads_spawned;
    return threads_.back().id;
}

int Machine::spawn(Address addr)
{
    if (!program_.valid_address(addr))
        throw VmTrap(-1, addr, "spawn address outside code");
    const int id = start_thread(addr, cycle_);
    threads_[static_cast<std::size_t>(id)].ready_at = cycle_;
    metrics_.spawns.push_back({cycle_, -1, false, {id}});
    return id;
}

bool Machine::runnable() const noexcept
{
    if (halted_)
        return false;
    if (program_.code.empty())
        return true;  // halts on the first step
    return std::any_of(threads_.begin(), threads_.end(), [](const Thread& t) { return !t.done; });
}

MultiSwitch& Machine::sw(const Thread& t, std::uint16_t id)
{
    if (id >= bank_.size())
        throw VmTrap(t.id, t.pc, "no switch " + std::to_string(id));
    return bank_[id];
}

std::int64_t& Machine::cell(const Thread& t, std::uint16_t addr)
{
    if (addr == 0 || addr > program_.memory_size)
        throw VmTrap(t.id, t.pc, "memory cell " + std::to_string(addr) + " out of range");
    return memory_[addr];
}

void Machine::jump(Thread& t, Address target)
{
    if (!program_.valid_address(target))
        throw VmTrap(t.id, t.pc, "jump to invalid address " + std::to_string(target));
    t.pc = target;
}

void Machine::execute(Thread& t)
{
    if (!program_.valid_address(t.pc))
        throw VmTrap(t.id, t.pc, "program counter outside code");
    const Instruction& in = program_.at(t.pc);
    const auto& info = op_info(in.op);

    if (tracing_) {
        trace_.push_back(std::to_string(cycle_) + "," + std::to_string(t.id) + "," +
                         std::to_string(t.pc) + "," + std::string(info.mnemonic));
    }
    ++metrics_.instructions;
    switch (info.cls) {
    case OpClass::Comparison: ++metrics_.comparisons; break;
    case OpClass::Jump: ++metrics_.jumps; break;
    case OpClass::MsOp: ++metrics_.ms_ops; break;
    case OpClass::Poll: ++metrics_.polls; break;
    case OpClass::Other: ++metrics_.other; break;
    }

    auto& r = t.regs;
    const auto a0 = in.args[0], a1 = in.args[1], a2 = in.args[2], a3 = in.args[3];
    Address next = t.pc + 1;

    try {
        switch (in.op) {
        case Opcode::Halt:
            halted_ = true;
            t.done = true;
            break;
        case Opcode::Thend:
            if (!t.line.empty())
                output_.push_back(std::move(t.line));
            t.line.clear();
            t.done = true;
            break;
        case Opcode::Nop: break;
        case Opcode::Loadi: r[a0] = a1; break;
        case Opcode::Mov: r[a0] = r[a1]; break;
        case Opcode::Add: r[a0] = r[a1] + r[a2]; break;
        case Opcode::Sub: r[a0] = r[a1] - r[a2]; break;
        case Opcode::And: r[a0] = (r[a1] != 0 && r[a2] != 0) ? 1 : 0; break;
        case Opcode::Or: r[a0] = (r[a1] != 0 || r[a2] != 0) ? 1 : 0; break;
        case Opcode::CmpEq: r[a0] = r[a1] == r[a2]; break;
        case Opcode::CmpNe: r[a0] = r[a1] != r[a2]; break;
        case Opcode::CmpLt: r[a0] = r[a1] < r[a2]; break;
        case Opcode::CmpGt: r[a0] = r[a1] > r[a2]; break;
        case Opcode::CmpLe: r[a0] = r[a1] <= r[a2]; break;
        case Opcode::CmpGe: r[a0] = r[a1] >= r[a2]; break;

        case Opcode::MsReset: sw(t, a0).reset(); break;
        case Opcode::MsArity:
            sw(t, a0).set_arity(a1, a2 == 0 ? GateKind::And : GateKind::Or);
            break;
        case Opcode::MsIn:
            sw(t, a0).drive_input(a1);
            last_driver_[a0] = t.id;
            break;
        case Opcode::MsOff:
            sw(t, a0).drive_bypass();
            last_driver_[a0] = t.id;
            break;
        case Opcode::MsAct: sw(t, a0).set_target(a1, a2); break;
        case Opcode::MsFalse: sw(t, a0).set_false_target(a1); break;
        case Opcode::MsRes: {
            const auto& rec = sw(t, a0).result(a1);
            if (a2 == 0) {
                if (rec.status == ResultStatus::Pending)
                    throw VmTrap(t.id, t.pc, "result not ready");
                r[a3] = rec.status == ResultStatus::True ? 1 : 0;
            } else {
                r[a3] = a2 <= rec.payload.size() ? rec.payload[a2 - 1] : 0;
            }
            break;
        }
        case Opcode::MsPut: sw(t, a0).put_result(a1, a2, r[a3]); break;
        case Opcode::MsSave: slots_[a1] = sw(t, a0).save_config(); break;
        case Opcode::MsLoad: {
            // A slot never saved holds the reset configuration.
            auto it = slots_.find(a1);
            sw(t, a0).load_config(it == slots_.end() ? SwitchConfig{} : it->second);
            break;
        }

        case Opcode::Jmp: jump(t, a0); next = t.pc; break;
        case Opcode::JmpIf:
            if (r[a0] != 0) {
                jump(t, a1);
                next = t.pc;
            }
            break;
        case Opcode::JmpZ:
            if (r[a0] == 0) {
                jump(t, a1);
                next = t.pc;
            }
            break;

        case Opcode::Ld: r[a0] = cell(t, a1); break;
        case Opcode::St: cell(t, a1) = r[a0]; break;
        case Opcode::Poll: r[a0] = cell(t, a1); break;

        case Opcode::Print:
            if (!t.line.empty())
                t.line.push_back(' ');
            t.line += std::to_string(r[a0]);
            break;
        case Opcode::PrintS:
            if (a0 >= program_.strings.size())
                throw VmTrap(t.id, t.pc, "string index out of range");
            if (!t.line.empty())
                t.line.push_back(' ');
            t.line += program_.strings[a0];
            break;
        case Opcode::PrintNl:
            output_.push_back(std::move(t.line));
            t.line.clear();
            break;

        case Opcode::Ext: {
            if (a0 >= program_.externs.size())
                throw VmTrap(t.id, t.pc, "extern index out of range");
            if (a1 + a2 > kRegisterCount)
                throw VmTrap(t.id, t.pc, "extern argument registers out of range");
            std::span<std::int64_t> args(r.data() + a1, a2);
            const bool ok = extern_(*this, program_.externs[a0], args);
            r[a3] = ok ? 1 : 0;
            break;
        }
        }
    } catch (const LineError& e) {
        throw VmTrap(t.id, t.pc, e.what());
    } catch (const ShapeError& e) {
        throw VmTrap(t.id, t.pc, e.what());
    }

    if (!t.done)
        t.pc = next;
}

void Machine::step_switches()
{
    for (auto& s : bank_) {
        FireEvent ev = s.step();
        if (ev.idle())
            continue;
        const int driver = last_driver_[static_cast<std::size_t>(s.id())];
        SpawnRecord rec{cycle_, s.id(), ev.is_false(), {}};
        if (ev.fired()) {
            ++metrics_.firings;
            for (Address a : ev.targets) {
                if (!program_.valid_address(a))
                    throw VmTrap(driver, a, "switch " + std::to_string(s.id()) +
                                                " fired to an address outside code");
                rec.threads.push_back(start_thread(a, cycle_));
            }
        } else {
            ++metrics_.bypasses;
            if (ev.false_target != kNullAddress) {
                if (!program_.valid_address(ev.false_target))
                    throw VmTrap(driver, ev.false_target,
                                 "switch " + std::to_string(s.id()) +
                                     " FALSE path outside code");
                rec.threads.push_back(start_thread(ev.false_target, cycle_));
            }
        }
        if (!rec.threads.empty()) {
            ++metrics_.parallel_phases;
            metrics_.spawns.push_back(std::move(rec));
        }
    }
}

void Machine::step_cycle()
{
    if (halted_)
        return;
    if (program_.code.empty()) {
        halted_ = true;
        ++cycle_;
        metrics_.cycles = cycle_;
        return;
    }

    // Pick up to P runnable threads, round-robin from the cursor.
    std::vector<std::size_t> picked;
    const std::size_t n = threads_.size();
    for (std::size_t k = 0; k < n && picked.size() < static_cast<std::size_t>(shape_.procs); ++k) {
        const std::size_t i = (cursor_ + k) % n;
        const auto& t = threads_[i];
        if (!t.done && t.ready_at <= cycle_)
            picked.push_back(i);
    }
    if (!picked.empty())
        cursor_ = (picked.back() + 1) % n;

    std::uint64_t live = 0;
    for (const auto& t : threads_)
        live += t.done ? 0 : 1;
    metrics_.max_live_threads = std::max(metrics_.max_live_threads, live);

    const auto comparisons_before = metrics_.comparisons;
    for (std::size_t i : picked)
        execute(threads_[i]);
    if (metrics_.comparisons != comparisons_before)
        ++metrics_.comparison_cycles;

    if (!halted_)
        step_switches();
    ++cycle_;
    metrics_.cycles = cycle_;
}

RunResult Machine::run(std::uint64_t max_cycles)
{
    RunResult res;
    try {
        while (runnable()) {
            if (cycle_ >= max_cycles) {
                res.status = RunStatus::Timeout;
                res.diagnostic = "cycle limit " + std::to_string(max_cycles) +
                                 " reached with threads still runnable";
                break;
            }
            step_cycle();
        }
        if (res.status != RunStatus::Timeout)
            res.status = halted_ ? RunStatus::Halted : RunStatus::Completed;
    } catch (const VmTrap& e) {
        res.status = RunStatus::Trap;
        res.diagnostic = e.what();
    }
    for (auto& t : threads_)
        if (!t.line.empty() && t.done) {
            output_.push_back(std::move(t.line));
            t.line.clear();
        }
    res.output = output_;
    res.metrics = metrics_;
    return res;
}

std::int64_t Machine::read_result(const std::string& swname, const std::string& target,
                                  int field) const
{
    auto it = program_.results.find({swname, target});
    if (it == program_.results.end())
        throw NameError("no target '" + target + "' on mswitch '" + swname + "'");
    const auto& loc = it->second;
    if (field < 0)
        throw ArgumentError("negative result field");

    if (loc.where == ResultLocation::Where::Switch) {
        const auto& rec = bank_.at(static_cast<std::size_t>(loc.sw)).result(loc.line);
        if (rec.status == ResultStatus::Pending)
            throw NotReadyError("result of " + swname + "." + target + " is still pending");
        if (field == 0)
            return rec.status == ResultStatus::True ? 1 : 0;
        return static_cast<std::size_t>(field) <= rec.payload.size() ? rec.payload[field - 1] : 0;
    }

    if (memory_.at(loc.ready_cell) == 0)
        throw NotReadyError("result of " + swname + "." + target + " is still pending");
    if (field == 0)
        return memory_.at(loc.status_cell);
    if (static_cast<std::size_t>(field) > loc.field_cells.size())
        return 0;
    return memory_.at(loc.field_cells[static_cast<std::size_t>(field - 1)]);
}

std::int64_t Machine::peek(std::uint16_t cell) const
{
    if (cell == 0 || cell > program_.memory_size)
        throw ArgumentError("memory cell " + std::to_string(cell) + " out of range");
    return memory_[cell];
}

void Machine::poke(std::uint16_t cell, std::int64_t value)
{
    if (cell == 0 || cell > program_.memory_size)
        throw ArgumentError("memory cell " + std::to_string(cell) + " out of range");
    memory_[cell] = value;
}

std::int64_t Machine::variable(const std::string& name) const
{
    auto it = program_.variables.find(name);
    if (it == program_.variables.end())
        throw NameError("no variable '" + name + "'");
    return peek(it->second);
}

void Machine::set_variable(const std::string& name, std::int64_t value)
{
    auto it = program_.variables.find(name);
    if (it == program_.variables.end())
        throw NameError("no variable '" + name + "'");
    poke(it->second, value);
}

}  // namespace msw

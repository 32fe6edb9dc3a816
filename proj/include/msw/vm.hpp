#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "msw/gate.hpp"
#include "msw/isa.hpp"
#include "msw/shape.hpp"

namespace msw {

inline constexpr std::uint64_t kDefaultMaxCycles = 1'000'000;

struct Thread {
    int id = 0;
    Address pc = 0;
    std::array<std::int64_t, kRegisterCount> regs{};
    bool done = false;
    std::uint64_t spawned_at = 0;  // cycle of the firing that started it
    std::uint64_t ready_at = 0;    // first cycle it may execute
    std::string line;              // pending PRINT items
};

// Threads started by a single switch event: one parallel phase.
struct SpawnRecord {
    std::uint64_t cycle = 0;
    int sw = -1;  // -1: started by the harness
    bool false_path = false;
    std::vector<int> threads;
};

struct RunMetrics {
    std::uint64_t comparisons = 0;
    std::uint64_t jumps = 0;
    std::uint64_t ms_ops = 0;
    std::uint64_t polls = 0;
    std::uint64_t other = 0;
    std::uint64_t instructions = 0;
    std::uint64_t cycles = 0;
    // Distinct cycles in which at least one comparison executed.
    std::uint64_t comparison_cycles = 0;
    std::uint64_t firings = 0;
    std::uint64_t bypasses = 0;
    std::uint64_t threads_spawned = 0;
    std::uint64_t max_live_threads = 0;
    std::uint64_t parallel_phases = 0;
    std::vector<SpawnRecord> spawns;

    // Flat "key=value" lines.
    std::string to_kv() const;
    // Structured form, see docs/FORMATS.md.
    std::string to_json() const;
};

enum class RunStatus { Completed, Halted, Timeout, Trap };

std::string_view to_string(RunStatus s);

struct RunResult {
    RunStatus status = RunStatus::Completed;
    std::string diagnostic;
    std::vector<std::string> output;
    RunMetrics metrics;

    bool ok() const noexcept
    {
        return status == RunStatus::Completed || status == RunStatus::Halted;
    }
};

class Machine;

// Host-side process invoked by EXT. Arguments may be rewritten in place;
// the return value is the process status.
using ExternHandler =
    std::function<bool(Machine&, std::string_view name, std::span<std::int64_t> args)>;

// Writes "call name(a, b)" to the output stream and reports success.
bool default_extern(Machine& m, std::string_view name, std::span<std::int64_t> args);

// Deterministic cycle-stepped machine. Each cycle up to P runnable threads
// (round-robin from a persistent cursor) execute one instruction each, then
// every switch is stepped and fired targets become new threads that first run
// on the next cycle.
class Machine {
public:
    // Validates the program's switch demand against the shape (LoadError).
    Machine(Program program, MachineShape shape);

    void set_extern_handler(ExternHandler h) { extern_ = std::move(h); }
    void set_tracing(bool on) { tracing_ = on; }

    bool runnable() const noexcept;
    bool halted() const noexcept { return halted_; }
    void step_cycle();
    RunResult run(std::uint64_t max_cycles = kDefaultMaxCycles);

    // Start a thread at addr on the next cycle. Used by harnesses.
    int spawn(Address addr);

    // Result of a mswitch target; field 0 is the status (1 TRUE, 0 FALSE).
    std::int64_t read_result(const std::string& sw, const std::string& target, int field) const;

    std::int64_t peek(std::uint16_t cell) const;
    void poke(std::uint16_t cell, std::int64_t value);
    std::int64_t variable(const std::string& name) const;
    void set_variable(const std::string& name, std::int64_t value);

    void emit_line(std::string line) { output_.push_back(std::move(line)); }

    const Program& program() const noexcept { return program_; }
    const MachineShape& shape() const noexcept { return shape_; }
    std::uint64_t cycle() const noexcept { return cycle_; }
    const RunMetrics& metrics() const noexcept { return metrics_; }
    const std::vector<std::string>& output() const noexcept { return output_; }
    const std::vector<std::string>& trace() const noexcept { return trace_; }
    const std::vector<Thread>& threads() const noexcept { return threads_; }
    const std::vector<MultiSwitch>& switches() const noexcept { return bank_; }

private:
    void execute(Thread& t);
    MultiSwitch& sw(const Thread& t, std::uint16_t id);
    std::int64_t& cell(const Thread& t, std::uint16_t addr);
    void jump(Thread& t, Address target);
    void step_switches();
    int start_thread(Address addr, std::uint64_t stamp);

    Program program_;
    MachineShape shape_;
    std::vector<MultiSwitch> bank_;
    std::vector<int> last_driver_;
    std::map<std::uint16_t, SwitchConfig> slots_;
    std::vector<std::int64_t> memory_;
    std::vector<Thread> threads_;
    std::size_t cursor_ = 0;
    std::uint64_t cycle_ = 0;
    bool halted_ = false;
    bool tracing_ = false;
    RunMetrics metrics_;
    std::vector<std::string> output_;
    std::vector<std::string> trace_;
    ExternHandler extern_ = default_extern;
};

}  // namespace msw

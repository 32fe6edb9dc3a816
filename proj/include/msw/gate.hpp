#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace msw {

// Code address. 0 is the null sentinel: an unused target line.
using Address = std::uint32_t;
inline constexpr Address kNullAddress = 0;

enum class GateKind : std::uint8_t { And = 0, Or = 1 };

std::string_view to_string(GateKind kind);

enum class ResultStatus : std::uint8_t { Pending, True, False };

struct ResultRecord {
    ResultStatus status = ResultStatus::Pending;
    std::vector<std::int64_t> payload;  // payload[0] is field 1

    bool operator==(const ResultRecord&) const = default;
};

struct FireEvent {
    enum class Outcome : std::uint8_t { Idle, Fired, False };

    Outcome outcome = Outcome::Idle;
    std::vector<Address> targets;        // Fired: nonzero targets in line order
    Address false_target = kNullAddress;  // False: where the FALSE path goes, 0 = flag only

    bool idle() const noexcept { return outcome == Outcome::Idle; }
    bool fired() const noexcept { return outcome == Outcome::Fired; }
    bool is_false() const noexcept { return outcome == Outcome::False; }
};

// Configuration snapshot used for paging a logical switch in and out of a
// physical one. Carries no input, bypass or result state.
struct SwitchConfig {
    int arity = 1;
    GateKind kind = GateKind::And;
    std::vector<Address> targets;
    Address false_target = kNullAddress;

    bool operator==(const SwitchConfig&) const = default;
};

// N-input / N-output threshold gate.
//
// Lines [0, arity) are the assigned inputs; lines [arity, size) are spare.
// An AND switch fires when every assigned line is high, an OR switch when any
// is. Firing emits every nonzero target address and clears the inputs; the
// target table and result records persist until reset(). The bypass line
// forces a FALSE outcome regardless of the inputs.
class MultiSwitch {
public:
    MultiSwitch(int size, int arity, GateKind kind, int id = 0);

    int id() const noexcept { return id_; }
    int size() const noexcept { return static_cast<int>(inputs_.size()); }
    int arity() const noexcept { return arity_; }
    GateKind kind() const noexcept { return kind_; }
    bool bypass() const noexcept { return bypass_; }
    bool input(int line) const;
    int high_count() const noexcept;
    Address target(int line) const;
    Address false_target() const noexcept { return false_target_; }
    const std::vector<Address>& targets() const noexcept { return targets_; }

    void set_arity(int arity, GateKind kind);
    void drive_input(int line);
    void drive_bypass() noexcept { bypass_ = true; }
    void set_target(int line, Address addr);
    void set_false_target(Address addr) noexcept { false_target_ = addr; }

    // Evaluate the gate once. Bypass beats firing.
    FireEvent step();

    // Clear inputs, bypass, targets, false target and results.
    void reset();

    SwitchConfig save_config() const;
    void load_config(const SwitchConfig& cfg);

    const ResultRecord& result(int line) const;
    // field 0 writes the status (nonzero = TRUE), field n >= 1 the payload.
    void put_result(int line, int field, std::int64_t value);

    bool operator==(const MultiSwitch&) const = default;

private:
    void check_line(int line) const;

    int id_;
    int arity_;
    GateKind kind_;
    std::vector<bool> inputs_;
    bool bypass_ = false;
    std::vector<Address> targets_;
    Address false_target_ = kNullAddress;
    std::vector<ResultRecord> results_;
};

// Ideal multi-input gate: AND is true iff every input is, OR iff any is.
bool eval_gate(GateKind kind, std::span<const bool> inputs);
bool eval_gate(GateKind kind, const std::vector<bool>& inputs);

// Threshold-voltage model of the gate: each line carries 0 or v_unit and the
// output goes high once the summed level reaches v_threshold.
bool eval_voltage(std::span<const double> levels, double v_unit, double v_threshold);

}  // namespace msw

#include "msw/gate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "msw/error.hpp"

namespace msw {

std::string_view to_string(GateKind kind)
{
    return kind == GateKind::And ? "and" : "or";
}

MultiSwitch::MultiSwitch(int size, int arity, GateKind kind, int id)
    : id_(id), arity_(arity), kind_(kind)
{
    if (size < 2)
        throw ShapeError("switch size must be at least 2, got " + std::to_string(size));
    if (arity < 1 || arity > size)
        throw ShapeError("arity " + std::to_string(arity) + " out of range for size " +
                         std::to_string(size));
    inputs_.assign(static_cast<std::size_t>(size), false);
    targets_.assign(static_cast<std::size_t>(size), kNullAddress);
    results_.assign(static_cast<std::size_t>(size), ResultRecord{});
}

void MultiSwitch::check_line(int line) const
{
    if (line < 0 || line >= size())
        throw LineError("line " + std::to_string(line) + " out of range for switch " +
                        std::to_string(id_) + " of size " + std::to_string(size()));
}

bool MultiSwitch::input(int line) const
{
    check_line(line);
    return inputs_[static_cast<std::size_t>(line)];
}

int MultiSwitch::high_count() const noexcept
{
    return static_cast<int>(std::count(inputs_.begin(), inputs_.begin() + arity_, true));
}

Address MultiSwitch::target(int line) const
{
    check_line(line);
    return targets_[static_cast<std::size_t>(line)];
}

void MultiSwitch::set_arity(int arity, GateKind kind)
{
    if (arity < 1 || arity > size())
        throw ShapeError("arity " + std::to_string(arity) + " out of range for size " +
                         std::to_string(size()));
    arity_ = arity;
    kind_ = kind;
}

void MultiSwitch::drive_input(int line)
{
    check_line(line);
    inputs_[static_cast<std::size_t>(line)] = true;
}

void MultiSwitch::set_target(int line, Address addr)
{
    check_line(line);
    targets_[static_cast<std::size_t>(line)] = addr;
}

FireEvent MultiSwitch::step()
{
    FireEvent ev;
    if (bypass_) {
        ev.outcome = FireEvent::Outcome::False;
        ev.false_target = false_target_;
        for (auto& r : results_)
            if (r.status == ResultStatus::Pending)
                r.status = ResultStatus::False;
        std::fill(inputs_.begin(), inputs_.end(), false);
        bypass_ = false;
        return ev;
    }

    const int high = high_count();
    const bool on = kind_ == GateKind::And ? high == arity_ : high > 0;
    if (!on)
        return ev;

    ev.outcome = FireEvent::Outcome::Fired;
    for (Address t : targets_)
        if (t != kNullAddress)
            ev.targets.push_back(t);
    std::fill(inputs_.begin(), inputs_.end(), false);
    return ev;
}

void MultiSwitch::reset()
{
    std::fill(inputs_.begin(), inputs_.end(), false);
    bypass_ = false;
    std::fill(targets_.begin(), targets_.end(), kNullAddress);
    false_target_ = kNullAddress;
    std::fill(results_.begin(), results_.end(), ResultRecord{});
}

SwitchConfig MultiSwitch::save_config() const
{
    return SwitchConfig{arity_, kind_, targets_, false_target_};
}

void MultiSwitch::load_config(const SwitchConfig& cfg)
{
    if (cfg.arity < 1 || cfg.arity > size())
        throw ShapeError("config arity " + std::to_string(cfg.arity) +
                         " does not fit switch of size " + std::to_string(size()));
    if (cfg.targets.size() > static_cast<std::size_t>(size()) &&
        std::any_of(cfg.targets.begin() + size(), cfg.targets.end(),
                    [](Address a) { return a != kNullAddress; }))
        throw ShapeError("config uses more target lines than switch size " +
                         std::to_string(size()));

    arity_ = cfg.arity;
    kind_ = cfg.kind;
    std::fill(targets_.begin(), targets_.end(), kNullAddress);
    std::copy_n(cfg.targets.begin(), std::min(cfg.targets.size(), targets_.size()),
                targets_.begin());
    false_target_ = cfg.false_target;
    std::fill(inputs_.begin(), inputs_.end(), false);
    bypass_ = false;
    std::fill(results_.begin(), results_.end(), ResultRecord{});
}

const ResultRecord& MultiSwitch::result(int line) const
{
    check_line(line);
    return results_[static_cast<std::size_t>(line)];
}

void MultiSwitch::put_result(int line, int field, std::int64_t value)
{
    check_line(line);
    if (field < 0)
        throw ArgumentError("negative result field " + std::to_string(field));
    auto& r = results_[static_cast<std::size_t>(line)];
    if (field == 0) {
        r.status = value != 0 ? ResultStatus::True : ResultStatus::False;
        return;
    }
    const auto idx = static_cast<std::size_t>(field - 1);
    if (r.payload.size() <= idx)
        r.payload.resize(idx + 1, 0);
    r.payload[idx] = value;
}

bool eval_gate(GateKind kind, std::span<const bool> inputs)
{
    if (inputs.empty())
        throw ArgumentError("gate needs at least one input");
    if (kind == GateKind::And)
        return std::all_of(inputs.begin(), inputs.end(), [](bool b) { return b; });
    return std::any_of(inputs.begin(), inputs.end(), [](bool b) { return b; });
}

bool eval_gate(GateKind kind, const std::vector<bool>& inputs)
{
    if (inputs.empty())
        throw ArgumentError("gate needs at least one input");
    if (kind == GateKind::And)
        return std::find(inputs.begin(), inputs.end(), false) == inputs.end();
    return std::find(inputs.begin(), inputs.end(), true) != inputs.end();
}

bool eval_voltage(std::span<const double> levels, double v_unit, double v_threshold)
{
    if (!(v_unit > 0.0) || !(v_threshold > 0.0))
        throw ArgumentError("unit and threshold voltages must be positive");
    const double tol = 1e-9 * v_unit;
    double sum = 0.0;
    for (double v : levels) {
        if (std::abs(v) > tol && std::abs(v - v_unit) > tol)
            throw ModelError("input level " + std::to_string(v) + " is neither 0 nor " +
                             std::to_string(v_unit));
        sum += v;
    }
    return sum + tol >= v_threshold;
}

}  // namespace msw

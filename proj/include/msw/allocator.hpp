#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "msw/shape.hpp"

namespace msw {

// Enabled placement strategies. Each policy includes the ones before it.
enum class AllocPolicy { BestFit, Gang, Page };

std::string_view to_string(AllocPolicy p);
AllocPolicy policy_from_string(std::string_view s);  // ArgumentError

// One logical switch the compiled program needs.
struct SwitchDemand {
    std::string name;
    int arity = 1;
    int fanout = 1;         // target lines used
    bool gangable = false;  // a pure joiner: inputs may be split across switches
    int begin = 0;          // statement-id lifetime, inclusive
    int end = 0;

    int lines() const noexcept { return arity > fanout ? arity : fanout; }
};

// A ganged join is a chain: segment 0 takes the first inputs directly; every
// later segment has one extra link line driven when the previous segment
// fires. The final segment carries the join's targets.
struct GangSegment {
    int sw = 0;
    int arity = 0;      // includes the link line
    int link = -1;      // link line, -1 for segment 0
    int first = 0;      // first logical input served
    int count = 0;      // logical inputs served
};

struct Placement {
    enum class Kind { Exclusive, Paged, Ganged };
    Kind kind = Kind::Exclusive;
    int sw = 0;    // Exclusive/Paged: physical switch; Ganged: final segment
    int slot = 0;  // Paged: configuration slot, >= 1
    std::vector<GangSegment> segments;  // Ganged only

    // Physical switch and line carrying logical input i.
    std::pair<int, int> input(int i) const;
};

struct AllocationTable {
    std::vector<SwitchDemand> demands;
    std::vector<Placement> placements;  // parallel to demands

    // Exclusive lines never shared; paged sharers never overlap in lifetime;
    // every placement fits its switch.
    bool consistent(const MachineShape& shape) const;
    std::string to_string() const;
};

// Places demands in order. Raises CapacityError naming the unmet demand and
// its shortfall when no enabled policy fits it.
AllocationTable allocate(const std::vector<SwitchDemand>& demands, const MachineShape& shape,
                         AllocPolicy policy);

}  // namespace msw

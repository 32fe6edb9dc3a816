#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace msw {

// Physical resources of a machine: the switch bank and the processor count.
struct MachineShape {
    std::vector<int> sizes;  // size of each physical switch, all >= 2
    int procs = 1;           // logical processors P >= 1

    int switch_count() const noexcept { return static_cast<int>(sizes.size()); }
    void validate() const;

    // 8 switches of size 10, P = 8.
    static MachineShape default_shape();
    static MachineShape uniform(int count, int size, int procs);

    // "switches=<n> sizes=<s1,s2,...> procs=<p>". A single size is repeated
    // for all n switches; sizes may be omitted (defaults to 10).
    static MachineShape parse(std::string_view text);
    std::string to_string() const;

    bool operator==(const MachineShape&) const = default;
};

}  // namespace msw

#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "msw/gate.hpp"
#include "msw/isa.hpp"
#include "msw/shape.hpp"
#include "msw/vm.hpp"

namespace msw {

struct NetNode {
    std::string name;
    int arity = 1;
    GateKind kind = GateKind::And;
    bool operator==(const NetNode&) const = default;
};

// `from` is a stimulus input or a node; `to` is always a node.
struct NetLink {
    std::string from;
    std::string to;
    int line = 0;
    bool operator==(const NetLink&) const = default;
    auto operator<=>(const NetLink&) const = default;
};

// Text form, one declaration per line, '#' comments:
//   input <name>
//   node <name> <arity> and|or
//   link <from> <to> <line>
//   output <name>
struct NetSpec {
    std::vector<std::string> inputs;
    std::vector<NetNode> nodes;
    std::vector<NetLink> links;
    std::vector<std::string> outputs;

    // SpecError on dangling endpoints, bad lines or duplicate names.
    void validate() const;
    const NetNode* node(std::string_view name) const;
    bool is_input(std::string_view name) const;

    static NetSpec parse(std::string_view text);
    std::string to_string() const;

    bool operator==(const NetSpec&) const = default;
};

// Each node is a resident switch. Line 0 of a node starts a record thread
// that resets the node (its refractory period for the run), sets the node's
// `fired:<name>` cell and prints `fired <name>`; one more line per outgoing
// link drives the linked input. Stimulus cells `in:<name>` are read once at
// start. Raises CapacityError when the nodes do not fit the shape.
Program compile_net(const NetSpec& spec, const MachineShape& shape);

struct NetRun {
    std::set<std::string> fired;
    RunResult result;
};

NetRun run_net(const NetSpec& spec, const MachineShape& shape,
               const std::set<std::string>& stimulus);

// Least fixed point of the firing rule: direct graph evaluation.
std::set<std::string> net_oracle(const NetSpec& spec, const std::set<std::string>& stimulus);

// Removes `remove` (if set) and adds `add` (if set).
struct LinkRewrite {
    std::optional<NetLink> remove;
    std::optional<NetLink> add;
};

// SpecError when a rewrite removes a missing link or adds a dangling one.
NetSpec reconfigure(const NetSpec& spec, const std::vector<LinkRewrite>& rewrites);

// Rewrites that feed every input line of `node` from `stimulus`.
std::vector<LinkRewrite> promote_to_top(const NetSpec& spec, const std::string& node,
                                        const std::string& stimulus);

}  // namespace msw

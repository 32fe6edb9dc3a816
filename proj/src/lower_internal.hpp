#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "msw/allocator.hpp"
#include "msw/isa.hpp"
#include "msw/lowering.hpp"
#include "msw/msl.hpp"

namespace msw::detail {

struct CallSite {
    int spawner = -1;  // demand index of the logical switch
    int joiner = -1;   // MSwitch mode, consumed calls
    bool consumed = false;
};

struct FusedIf {
    std::vector<const msl::Expr*> conjuncts;
    int spawner = -1;
    int joiner = -1;  // MSwitch mode
};

// Facts gathered before code generation. Interning into the program's string
// and extern tables happens here, in source order, so tables match across
// lowering modes.
struct Analysis {
    std::vector<std::string> variables;  // global variables, source order
    std::set<std::string> variable_set;
    std::set<std::string> consumed;      // switches whose calls must join
    std::map<std::string, int> logical;  // switch -> spawner demand
    std::map<const msl::MsCall*, CallSite> sites;
    std::vector<const msl::MsCall*> site_order;  // source order
    std::map<const msl::Stmt*, FusedIf> fused;
    std::vector<SwitchDemand> demands;

    bool is_variable(const std::string& name) const { return variable_set.count(name) != 0; }
};

Analysis analyze(const msl::Ast& ast, LowerMode mode, int fusion_threshold, Program& prog);

}  // namespace msw::detail

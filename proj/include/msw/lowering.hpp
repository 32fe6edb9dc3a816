#pragma once

#include <string>
#include <string_view>

#include "msw/allocator.hpp"
#include "msw/isa.hpp"
#include "msw/msl.hpp"
#include "msw/shape.hpp"

namespace msw {

// MSwitch: spawners and joiners. BaselinePoll: spawners, joins by done flags
// and spin-polling. Sequential: straight-line code, no switch opcodes.
enum class LowerMode { MSwitch, Sequential, BaselinePoll };

std::string_view to_string(LowerMode m);
LowerMode mode_from_string(std::string_view s);  // ArgumentError

struct CompileOptions {
    LowerMode mode = LowerMode::MSwitch;
    AllocPolicy policy = AllocPolicy::Page;
    // Retry in Sequential mode when the switch demand does not fit.
    bool sequential_fallback = false;
    int fusion_threshold = msl::kDefaultFusionThreshold;
};

struct CompileResult {
    Program program;
    AllocationTable allocation;
    LowerMode mode_used = LowerMode::MSwitch;
    std::string report;
};

// Raises CompileError, NameError or CapacityError.
CompileResult lower(const msl::Ast& ast, const MachineShape& shape, const CompileOptions& opts);
Program lower(const msl::Ast& ast, const MachineShape& shape, LowerMode mode);

// parse + lower, honouring sequential_fallback.
CompileResult compile(std::string_view source, const MachineShape& shape,
                      const CompileOptions& opts = {});

}  // namespace msw

// Copyright (c) ubpf-forge contributors.
// SPDX-License-Identifier: MIT
#pragma once

#include <stdexcept>
#include <vector>

#include "ubpf/isa.hpp"
#include "ubpf/verifier.hpp"

namespace ubpf {

struct XformError : std::runtime_error {
    explicit XformError(const std::string& what) : std::runtime_error{what} {}
};

// A program plus its per-instruction verifier facts, kept index-aligned
// through the transforms.
struct TransformedProgram {
    Program prog;
    std::vector<InsnNotes> notes;
};

// Removes every instruction the verifier never simulated; jumps the verifier
// decided in one direction become unconditional (or disappear). Jump offsets
// and subprog boundaries are re-targeted. Semantics on all concrete inputs
// are unchanged.
TransformedProgram eliminate_dead_code(const Program& p, const std::vector<InsnNotes>& notes);

// Replaces map helper calls whose map operand is static: array lookups become
// an inline bounds-check plus direct address computation; other map calls
// become direct calls into the map implementation.
TransformedProgram rewrite_map_helpers(const Program& p, const std::vector<InsnNotes>& notes,
                                       const std::vector<MapDef>& maps);

// Both passes in pipeline order.
TransformedProgram transform(const VerifiedProgram& vp, const std::vector<MapDef>& maps);

} // namespace ubpf

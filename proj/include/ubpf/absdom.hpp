// Copyright (c) ubpf-forge contributors.
// SPDX-License-Identifier: MIT
#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "ubpf/isa.hpp"
#include "ubpf/tnum.hpp"

namespace ubpf {

// Signed/unsigned interval pairs, with 32-bit sub-bounds for the low word.
struct Bounds {
    uint64_t umin{0};
    uint64_t umax{~0ull};
    int64_t smin{INT64_MIN};
    int64_t smax{INT64_MAX};
    uint32_t u32min{0};
    uint32_t u32max{~0u};
    int32_t s32min{INT32_MIN};
    int32_t s32max{INT32_MAX};

    bool operator==(const Bounds&) const = default;
};

// Abstract scalar: tristate bits plus interval bounds, kept mutually
// consistent by normalize(). A contradiction (empty concretization) flags the
// value as dead; the verifier treats the carrying path as infeasible.
struct ScalarAbs {
    Tnum tnum{Tnum::unknown()};
    Bounds bounds{};
    bool dead{false};

    bool operator==(const ScalarAbs&) const = default;

    bool is_const() const { return !dead && tnum.is_const() && bounds.umin == bounds.umax; }
    uint64_t const_value() const { return tnum.value; }

    // Re-tightens tnum from bounds and bounds from tnum until stable
    // (two passes suffice); sets dead on contradiction.
    void normalize();
};

struct UnsupportedOp : std::invalid_argument {
    explicit UnsupportedOp(const std::string& what) : std::invalid_argument{what} {}
};

ScalarAbs abs_const(uint64_t v);
ScalarAbs abs_unknown();
// Constant confined to the low 32 bits, as MOV32 produces.
ScalarAbs abs_const32(uint32_t v);

// Sound transfer function for an ALU operation at the given width (32 or 64).
// 32-bit results are zero-extended. Division by a range containing zero
// widens to unknown; the runtime defines x/0 = 0 and x%0 = x.
ScalarAbs abs_alu(AluOp op, const ScalarAbs& a, const ScalarAbs& b, uint32_t width);

// Byte-swap transfer: to-BE permutes the low `bits` bytes, to-LE masks (the
// host is little-endian). Upper bits of the result are zero.
ScalarAbs abs_alu_end(const ScalarAbs& a, uint32_t bits, bool to_big_endian);

struct RefinedPair {
    ScalarAbs lhs;
    ScalarAbs rhs;
};

// Refined operand abstractions under each branch outcome; a side is nullopt
// when that outcome is infeasible.
struct BranchRefinement {
    std::optional<RefinedPair> taken;
    std::optional<RefinedPair> not_taken;
};

BranchRefinement abs_refine_branch(JmpOp cond, const ScalarAbs& a, const ScalarAbs& b, uint32_t width);

// Branch outcome if the abstractions decide it: true = always taken.
inline std::optional<bool> abs_branch_decide(JmpOp cond, const ScalarAbs& a, const ScalarAbs& b, uint32_t width) {
    BranchRefinement r = abs_refine_branch(cond, a, b, width);
    if (!r.taken && !r.not_taken)
        return std::nullopt; // dead inputs; caller prunes the path
    if (!r.not_taken)
        return true;
    if (!r.taken)
        return false;
    return std::nullopt;
}

bool abs_contains(const ScalarAbs& a, uint64_t x);
ScalarAbs abs_join(const ScalarAbs& a, const ScalarAbs& b);
// True when every concrete value admitted by inner is admitted by outer.
bool abs_subsumes(const ScalarAbs& outer, const ScalarAbs& inner);

std::string abs_to_string(const ScalarAbs& a);

} // namespace ubpf

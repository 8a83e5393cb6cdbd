// Copyright (c) ubpf-forge contributors.
// SPDX-License-Identifier: MIT
#pragma once

#include <cstdint>

namespace ubpf {

// Tristate number: each bit is known-0, known-1 or unknown. `value` holds the
// known-1 bits, `mask` the unknown bits; the two never overlap. The
// concretization is { x : (x & ~mask) == value }.
struct Tnum {
    uint64_t value{};
    uint64_t mask{};

    bool operator==(const Tnum&) const = default;

    static Tnum make_const(uint64_t v) { return {v, 0}; }
    static Tnum unknown() { return {0, ~0ull}; }
    // Tightest tnum containing the unsigned range [min, max].
    static Tnum range(uint64_t min, uint64_t max);

    bool wellformed() const { return (value & mask) == 0; }
    bool is_const() const { return mask == 0; }
    bool contains(uint64_t x) const { return (x & ~mask) == value; }

    uint64_t umin() const { return value; }
    uint64_t umax() const { return value | mask; }

    Tnum truncate(uint32_t bits) const {
        uint64_t m = bits >= 64 ? ~0ull : (1ull << bits) - 1;
        return {value & m, mask & m};
    }
};

Tnum tnum_add(Tnum a, Tnum b);
Tnum tnum_sub(Tnum a, Tnum b);
Tnum tnum_and(Tnum a, Tnum b);
Tnum tnum_or(Tnum a, Tnum b);
Tnum tnum_xor(Tnum a, Tnum b);
// Long multiplication over tnums; falls back to unknown when either operand
// has more unknown bits than the cutoff.
Tnum tnum_mul(Tnum a, Tnum b);
Tnum tnum_lshift(Tnum a, uint8_t shift);
Tnum tnum_rshift(Tnum a, uint8_t shift);
Tnum tnum_arshift(Tnum a, uint8_t shift);
// Byte swap of the low `bits` (16, 32 or 64), upper bits cleared.
Tnum tnum_bswap(Tnum a, uint32_t bits);

// Smallest tnum whose concretization covers both inputs.
Tnum tnum_union(Tnum a, Tnum b);
// Meet; check tnum_conflict first, the result is garbage on conflict.
Tnum tnum_intersect(Tnum a, Tnum b);
// True when some bit is known in both operands with different values, i.e.
// the meet is empty.
bool tnum_conflict(Tnum a, Tnum b);
// True when every concrete value of `inner` is contained in `outer`.
bool tnum_subset(Tnum outer, Tnum inner);

} // namespace ubpf

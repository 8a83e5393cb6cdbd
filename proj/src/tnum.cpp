// Copyright (c) ubpf-forge contributors.
// SPDX-License-Identifier: MIT
#include "ubpf/tnum.hpp"

#include <bit>

namespace ubpf {

namespace {
constexpr int kMulUnknownCutoff = 32;
}

Tnum Tnum::range(uint64_t min, uint64_t max) {
    uint64_t chi = min ^ max;
    int bits = 64 - std::countl_zero(chi);
    if (bits > 63)
        return unknown();
    uint64_t delta = (1ull << bits) - 1;
    return {min & ~delta, delta};
}

Tnum tnum_add(Tnum a, Tnum b) {
    uint64_t sm = a.mask + b.mask;
    uint64_t sv = a.value + b.value;
    uint64_t sigma = sm + sv;
    uint64_t chi = sigma ^ sv;
    uint64_t mu = chi | a.mask | b.mask;
    return {sv & ~mu, mu};
}

Tnum tnum_sub(Tnum a, Tnum b) {
    uint64_t dv = a.value - b.value;
    uint64_t alpha = dv + a.mask;
    uint64_t beta = dv - b.mask;
    uint64_t chi = alpha ^ beta;
    uint64_t mu = chi | a.mask | b.mask;
    return {dv & ~mu, mu};
}

Tnum tnum_and(Tnum a, Tnum b) {
    uint64_t alpha = a.value | a.mask;
    uint64_t beta = b.value | b.mask;
    uint64_t v = a.value & b.value;
    return {v, alpha & beta & ~v};
}

Tnum tnum_or(Tnum a, Tnum b) {
    uint64_t v = a.value | b.value;
    uint64_t mu = a.mask | b.mask;
    return {v, mu & ~v};
}

Tnum tnum_xor(Tnum a, Tnum b) {
    uint64_t v = a.value ^ b.value;
    uint64_t mu = a.mask | b.mask;
    return {v & ~mu, mu};
}

Tnum tnum_mul(Tnum a, Tnum b) {
    if (std::popcount(a.mask) > kMulUnknownCutoff || std::popcount(b.mask) > kMulUnknownCutoff)
        return Tnum::unknown();
    Tnum acc_v = Tnum::make_const(a.value * b.value);
    Tnum acc_m{0, 0};
    while (a.value || a.mask) {
        if (a.value & 1)
            acc_m = tnum_add(acc_m, Tnum{0, b.mask});
        else if (a.mask & 1)
            acc_m = tnum_add(acc_m, Tnum{0, b.value | b.mask});
        a = tnum_rshift(a, 1);
        b = tnum_lshift(b, 1);
    }
    return tnum_add(acc_v, acc_m);
}

Tnum tnum_lshift(Tnum a, uint8_t shift) { return {a.value << shift, a.mask << shift}; }

Tnum tnum_rshift(Tnum a, uint8_t shift) { return {a.value >> shift, a.mask >> shift}; }

Tnum tnum_arshift(Tnum a, uint8_t shift) {
    return {static_cast<uint64_t>(static_cast<int64_t>(a.value) >> shift),
            static_cast<uint64_t>(static_cast<int64_t>(a.mask) >> shift)};
}

Tnum tnum_bswap(Tnum a, uint32_t bits) {
    auto swap = [bits](uint64_t x) -> uint64_t {
        uint64_t out = 0;
        uint32_t nbytes = bits / 8;
        for (uint32_t k = 0; k < nbytes; ++k)
            out |= ((x >> (8 * k)) & 0xff) << (8 * (nbytes - 1 - k));
        return out;
    };
    return {swap(a.value), swap(a.mask)};
}

Tnum tnum_union(Tnum a, Tnum b) {
    uint64_t mu = a.mask | b.mask | (a.value ^ b.value);
    return {a.value & b.value & ~mu, mu};
}

Tnum tnum_intersect(Tnum a, Tnum b) {
    uint64_t v = a.value | b.value;
    uint64_t mu = a.mask & b.mask;
    return {v & ~mu, mu};
}

bool tnum_conflict(Tnum a, Tnum b) { return ((a.value ^ b.value) & ~a.mask & ~b.mask) != 0; }

bool tnum_subset(Tnum outer, Tnum inner) {
    if (inner.mask & ~outer.mask)
        return false;
    return ((inner.value ^ outer.value) & ~outer.mask) == 0;
}

} // namespace ubpf

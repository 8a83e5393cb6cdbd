// Copyright (c) ubpf-forge contributors.
// SPDX-License-Identifier: MIT
#include "ubpf/absdom.hpp"

#include <algorithm>
#include <sstream>
#include <vector>

namespace ubpf {

namespace {

constexpr uint64_t kSignBit64 = 1ull << 63;
constexpr uint32_t kSignBit32 = 1u << 31;

bool add_overflows_u64(uint64_t a, uint64_t b) { return a + b < a; }

bool add_overflows_s64(int64_t a, int64_t b) {
    int64_t r;
    return __builtin_add_overflow(a, b, &r);
}

bool sub_overflows_s64(int64_t a, int64_t b) {
    int64_t r;
    return __builtin_sub_overflow(a, b, &r);
}

bool mul_overflows_u64(uint64_t a, uint64_t b) {
    uint64_t r;
    return __builtin_mul_overflow(a, b, &r);
}

} // namespace

void ScalarAbs::normalize() {
    if (dead)
        return;
    for (int pass = 0; pass < 2; ++pass) {
        // tnum from unsigned bounds.
        Tnum range = Tnum::range(bounds.umin, bounds.umax);
        if (tnum_conflict(tnum, range)) {
            dead = true;
            return;
        }
        tnum = tnum_intersect(tnum, range);
        // Unsigned bounds from tnum.
        bounds.umin = std::max(bounds.umin, tnum.umin());
        bounds.umax = std::min(bounds.umax, tnum.umax());
        // Signed bounds from tnum: pin the sign bit when known, otherwise
        // assume the worst in each direction.
        uint64_t lo = tnum.value | (tnum.mask & kSignBit64);
        uint64_t hi = (tnum.value | tnum.mask) & ~(tnum.mask & kSignBit64);
        bounds.smin = std::max(bounds.smin, static_cast<int64_t>(lo));
        bounds.smax = std::min(bounds.smax, static_cast<int64_t>(hi));
        // Cross-deduce signed and unsigned pairs when the range does not
        // straddle the sign boundary; a straddling pair contributes nothing.
        if (bounds.umax < kSignBit64 || bounds.umin >= kSignBit64) {
            bounds.smin = std::max(bounds.smin, static_cast<int64_t>(bounds.umin));
            bounds.smax = std::min(bounds.smax, static_cast<int64_t>(bounds.umax));
        }
        if (bounds.smin >= 0) {
            bounds.umin = std::max(bounds.umin, static_cast<uint64_t>(bounds.smin));
            bounds.umax = std::min(bounds.umax, static_cast<uint64_t>(bounds.smax));
        } else if (bounds.smax < 0) {
            bounds.umin = std::max(bounds.umin, static_cast<uint64_t>(bounds.smin));
            bounds.umax = std::min(bounds.umax, static_cast<uint64_t>(bounds.smax));
        }

        // 32-bit sub-bounds from the low word of the tnum.
        Tnum t32 = tnum.truncate(32);
        bounds.u32min = std::max(bounds.u32min, static_cast<uint32_t>(t32.umin()));
        bounds.u32max = std::min(bounds.u32max, static_cast<uint32_t>(t32.umax()));
        bool high_known_zero = ((tnum.value | tnum.mask) >> 32) == 0;
        if (high_known_zero) {
            bounds.u32min = std::max(bounds.u32min, static_cast<uint32_t>(bounds.umin));
            bounds.u32max = std::min(bounds.u32max, static_cast<uint32_t>(bounds.umax));
            bounds.umin = std::max(bounds.umin, static_cast<uint64_t>(bounds.u32min));
            bounds.umax = std::min(bounds.umax, static_cast<uint64_t>(bounds.u32max));
        }
        if (bounds.u32max < kSignBit32 || bounds.u32min >= kSignBit32) {
            bounds.s32min = std::max(bounds.s32min, static_cast<int32_t>(bounds.u32min));
            bounds.s32max = std::min(bounds.s32max, static_cast<int32_t>(bounds.u32max));
        }
        if (bounds.s32min >= 0) {
            bounds.u32min = std::max(bounds.u32min, static_cast<uint32_t>(bounds.s32min));
            bounds.u32max = std::min(bounds.u32max, static_cast<uint32_t>(bounds.s32max));
        } else if (bounds.s32max < 0) {
            bounds.u32min = std::max(bounds.u32min, static_cast<uint32_t>(bounds.s32min));
            bounds.u32max = std::min(bounds.u32max, static_cast<uint32_t>(bounds.s32max));
        }
        // Fold 32-bit range knowledge back into the tnum's low word.
        Tnum r32 = Tnum::range(bounds.u32min, bounds.u32max);
        Tnum lifted{r32.value, r32.mask | ~0xffffffffull};
        if (tnum_conflict(tnum, lifted)) {
            dead = true;
            return;
        }
        tnum = tnum_intersect(tnum, lifted);

        if (bounds.umin > bounds.umax || bounds.smin > bounds.smax || bounds.u32min > bounds.u32max ||
            bounds.s32min > bounds.s32max) {
            dead = true;
            return;
        }
    }
}

ScalarAbs abs_const(uint64_t v) {
    ScalarAbs a;
    a.tnum = Tnum::make_const(v);
    a.bounds.umin = a.bounds.umax = v;
    a.bounds.smin = a.bounds.smax = static_cast<int64_t>(v);
    a.normalize();
    return a;
}

ScalarAbs abs_const32(uint32_t v) { return abs_const(v); }

ScalarAbs abs_unknown() { return ScalarAbs{}; }

namespace {

// Builds a zero-extended abstraction from 32-bit pieces.
ScalarAbs zext32(Tnum t32, uint32_t u32min, uint32_t u32max) {
    ScalarAbs a;
    a.tnum = t32.truncate(32);
    a.bounds.umin = u32min;
    a.bounds.umax = u32max;
    a.bounds.u32min = u32min;
    a.bounds.u32max = u32max;
    a.normalize();
    return a;
}

// Effective shift amounts under the runtime's masking rule. Returns an empty
// list when every amount is possible.
std::vector<uint8_t> shift_amounts(const ScalarAbs& b, uint32_t width) {
    uint64_t m = width - 1;
    std::vector<uint8_t> out;
    if (b.is_const()) {
        out.push_back(static_cast<uint8_t>(b.const_value() & m));
        return out;
    }
    if (b.bounds.umax - b.bounds.umin >= width)
        return out;
    for (uint64_t k = b.bounds.umin; k <= b.bounds.umax; ++k)
        out.push_back(static_cast<uint8_t>(k & m));
    return out;
}

ScalarAbs alu64(AluOp op, const ScalarAbs& a, const ScalarAbs& b) {
    ScalarAbs r;
    const Bounds& ab = a.bounds;
    const Bounds& bb = b.bounds;
    switch (op) {
    case AluOp::MOV:
        return b;
    case AluOp::ADD: {
        r.tnum = tnum_add(a.tnum, b.tnum);
        if (!add_overflows_u64(ab.umin, bb.umin) && !add_overflows_u64(ab.umax, bb.umax)) {
            r.bounds.umin = ab.umin + bb.umin;
            r.bounds.umax = ab.umax + bb.umax;
        }
        if (!add_overflows_s64(ab.smin, bb.smin) && !add_overflows_s64(ab.smax, bb.smax)) {
            r.bounds.smin = ab.smin + bb.smin;
            r.bounds.smax = ab.smax + bb.smax;
        }
        break;
    }
    case AluOp::SUB: {
        r.tnum = tnum_sub(a.tnum, b.tnum);
        if (ab.umin >= bb.umax) {
            r.bounds.umin = ab.umin - bb.umax;
            r.bounds.umax = ab.umax - bb.umin;
        }
        if (!sub_overflows_s64(ab.smin, bb.smax) && !sub_overflows_s64(ab.smax, bb.smin)) {
            r.bounds.smin = ab.smin - bb.smax;
            r.bounds.smax = ab.smax - bb.smin;
        }
        break;
    }
    case AluOp::MUL: {
        r.tnum = tnum_mul(a.tnum, b.tnum);
        if (!mul_overflows_u64(ab.umax, bb.umax)) {
            r.bounds.umin = ab.umin * bb.umin;
            r.bounds.umax = ab.umax * bb.umax;
        }
        break;
    }
    case AluOp::DIV: {
        if (b.is_const()) {
            uint64_t c = b.const_value();
            if (c == 0)
                return abs_const(0); // runtime defines x/0 = 0
            if (a.is_const())
                return abs_const(a.const_value() / c);
            r.bounds.umin = ab.umin / c;
            r.bounds.umax = ab.umax / c;
        }
        break;
    }
    case AluOp::MOD: {
        if (b.is_const()) {
            uint64_t c = b.const_value();
            if (c == 0)
                return a; // runtime defines x%0 = x
            if (a.is_const())
                return abs_const(a.const_value() % c);
            if (ab.umax < c)
                return a;
            r.bounds.umin = 0;
            r.bounds.umax = c - 1;
        }
        break;
    }
    case AluOp::AND:
        r.tnum = tnum_and(a.tnum, b.tnum);
        r.bounds.umax = std::min(ab.umax, bb.umax);
        break;
    case AluOp::OR:
        r.tnum = tnum_or(a.tnum, b.tnum);
        r.bounds.umin = std::max(ab.umin, bb.umin);
        break;
    case AluOp::XOR:
        r.tnum = tnum_xor(a.tnum, b.tnum);
        break;
    case AluOp::LSH: {
        auto ks = shift_amounts(b, 64);
        if (ks.empty())
            return abs_unknown();
        std::optional<ScalarAbs> acc;
        for (uint8_t k : ks) {
            ScalarAbs one;
            one.tnum = tnum_lshift(a.tnum, k);
            if (k == 0 || ab.umax <= (~0ull >> k)) {
                one.bounds.umin = ab.umin << k;
                one.bounds.umax = ab.umax << k;
            }
            one.normalize();
            acc = acc ? abs_join(*acc, one) : one;
        }
        return *acc;
    }
    case AluOp::RSH: {
        auto ks = shift_amounts(b, 64);
        if (ks.empty())
            return abs_unknown();
        std::optional<ScalarAbs> acc;
        for (uint8_t k : ks) {
            ScalarAbs one;
            one.tnum = tnum_rshift(a.tnum, k);
            one.bounds.umin = ab.umin >> k;
            one.bounds.umax = ab.umax >> k;
            one.normalize();
            acc = acc ? abs_join(*acc, one) : one;
        }
        return *acc;
    }
    case AluOp::ARSH: {
        auto ks = shift_amounts(b, 64);
        if (ks.empty())
            return abs_unknown();
        std::optional<ScalarAbs> acc;
        for (uint8_t k : ks) {
            ScalarAbs one;
            one.tnum = tnum_arshift(a.tnum, k);
            one.bounds.smin = ab.smin >> k;
            one.bounds.smax = ab.smax >> k;
            one.normalize();
            acc = acc ? abs_join(*acc, one) : one;
        }
        return *acc;
    }
    case AluOp::NEG:
        return alu64(AluOp::SUB, abs_const(0), a);
    case AluOp::END:
        break; // handled by abs_alu_end
    }
    r.normalize();
    return r;
}

ScalarAbs alu32(AluOp op, const ScalarAbs& a, const ScalarAbs& b) {
    Tnum at = a.tnum.truncate(32);
    Tnum bt = b.tnum.truncate(32);
    const Bounds& ab = a.bounds;
    const Bounds& bb = b.bounds;
    switch (op) {
    case AluOp::MOV:
        return zext32(bt, bb.u32min, bb.u32max);
    case AluOp::ADD: {
        Tnum t = tnum_add(at, bt).truncate(32);
        uint64_t lo = static_cast<uint64_t>(ab.u32min) + bb.u32min;
        uint64_t hi = static_cast<uint64_t>(ab.u32max) + bb.u32max;
        if (hi <= ~0u)
            return zext32(t, static_cast<uint32_t>(lo), static_cast<uint32_t>(hi));
        return zext32(t, 0, ~0u);
    }
    case AluOp::SUB: {
        Tnum t = tnum_sub(at, bt).truncate(32);
        if (ab.u32min >= bb.u32max)
            return zext32(t, ab.u32min - bb.u32max, ab.u32max - bb.u32min);
        return zext32(t, 0, ~0u);
    }
    case AluOp::MUL: {
        Tnum t = tnum_mul(at, bt).truncate(32);
        uint64_t hi = static_cast<uint64_t>(ab.u32max) * bb.u32max;
        if (hi <= ~0u)
            return zext32(t, ab.u32min * bb.u32min, static_cast<uint32_t>(hi));
        return zext32(t, 0, ~0u);
    }
    case AluOp::DIV: {
        if (b.is_const()) {
            uint32_t c = static_cast<uint32_t>(b.const_value());
            if (c == 0)
                return abs_const(0);
            return zext32(at.is_const() ? Tnum::make_const(at.value / c) : Tnum::unknown(), ab.u32min / c,
                          ab.u32max / c);
        }
        return abs_unknown();
    }
    case AluOp::MOD: {
        if (b.is_const()) {
            uint32_t c = static_cast<uint32_t>(b.const_value());
            if (c == 0)
                return zext32(at, ab.u32min, ab.u32max); // x%0 = x at 32 bits
            if (at.is_const())
                return abs_const(at.value % c);
            if (ab.u32max < c)
                return zext32(at, ab.u32min, ab.u32max);
            return zext32(Tnum::unknown(), 0, c - 1);
        }
        return abs_unknown();
    }
    case AluOp::AND: {
        Tnum t = tnum_and(at, bt);
        return zext32(t, 0, std::min(ab.u32max, bb.u32max));
    }
    case AluOp::OR: {
        Tnum t = tnum_or(at, bt);
        return zext32(t, std::max(ab.u32min, bb.u32min), ~0u);
    }
    case AluOp::XOR:
        return zext32(tnum_xor(at, bt), 0, ~0u);
    case AluOp::LSH: {
        auto ks = shift_amounts(b, 32);
        if (ks.empty())
            return zext32(Tnum::unknown(), 0, ~0u);
        std::optional<ScalarAbs> acc;
        for (uint8_t k : ks) {
            Tnum t = tnum_lshift(at, k).truncate(32);
            ScalarAbs one;
            if (k == 0 || ab.u32max <= (~0u >> k))
                one = zext32(t, ab.u32min << k, ab.u32max << k);
            else
                one = zext32(t, 0, ~0u);
            acc = acc ? abs_join(*acc, one) : one;
        }
        return *acc;
    }
    case AluOp::RSH: {
        auto ks = shift_amounts(b, 32);
        if (ks.empty())
            return zext32(Tnum::unknown(), 0, ~0u);
        std::optional<ScalarAbs> acc;
        for (uint8_t k : ks) {
            ScalarAbs one = zext32(tnum_rshift(at, k), ab.u32min >> k, ab.u32max >> k);
            acc = acc ? abs_join(*acc, one) : one;
        }
        return *acc;
    }
    case AluOp::ARSH: {
        auto ks = shift_amounts(b, 32);
        if (ks.empty())
            return zext32(Tnum::unknown(), 0, ~0u);
        std::optional<ScalarAbs> acc;
        for (uint8_t k : ks) {
            // Arithmetic shift of the low word; recompute the tnum in 32 bits.
            uint64_t sv = static_cast<uint64_t>(static_cast<int64_t>(static_cast<int32_t>(at.value)) >> k);
            uint64_t sm = static_cast<uint64_t>(static_cast<int64_t>(static_cast<int32_t>(at.mask)) >> k);
            ScalarAbs one;
            one.tnum = Tnum{sv & ~sm, sm}.truncate(32);
            one.bounds.s32min = ab.s32min >> k;
            one.bounds.s32max = ab.s32max >> k;
            one.bounds.umax = 0xffffffffull;
            one.normalize();
            acc = acc ? abs_join(*acc, one) : one;
        }
        return *acc;
    }
    case AluOp::NEG:
        return alu32(AluOp::SUB, abs_const(0), a);
    case AluOp::END:
        break;
    }
    return zext32(Tnum::unknown(), 0, ~0u);
}

} // namespace

ScalarAbs abs_alu(AluOp op, const ScalarAbs& a, const ScalarAbs& b, uint32_t width) {
    if (static_cast<uint8_t>(op) > static_cast<uint8_t>(AluOp::END))
        throw UnsupportedOp{"not an ALU operation"};
    if (a.dead || b.dead) {
        ScalarAbs dead;
        dead.dead = true;
        return dead;
    }
    if (op == AluOp::END) {
        // The swap width (16/32/64) arrives in b as a constant; this entry
        // point covers the to-LE (masking) flavor, abs_alu_end covers both.
        if (!b.is_const() || (b.const_value() != 16 && b.const_value() != 32 && b.const_value() != 64))
            throw UnsupportedOp{"END takes a width of 16, 32 or 64"};
        return abs_alu_end(a, static_cast<uint32_t>(b.const_value()), false);
    }
    return width == 64 ? alu64(op, a, b) : alu32(op, a, b);
}

ScalarAbs abs_alu_end(const ScalarAbs& a, uint32_t bits, bool to_big_endian) {
    if (a.dead)
        return a;
    ScalarAbs r;
    if (to_big_endian)
        r.tnum = tnum_bswap(a.tnum, bits);
    else
        r.tnum = a.tnum.truncate(bits); // little-endian host: masking only
    r.normalize();
    return r;
}

bool abs_contains(const ScalarAbs& a, uint64_t x) {
    if (a.dead)
        return false;
    if (!a.tnum.contains(x))
        return false;
    if (x < a.bounds.umin || x > a.bounds.umax)
        return false;
    int64_t s = static_cast<int64_t>(x);
    if (s < a.bounds.smin || s > a.bounds.smax)
        return false;
    uint32_t x32 = static_cast<uint32_t>(x);
    if (x32 < a.bounds.u32min || x32 > a.bounds.u32max)
        return false;
    int32_t s32 = static_cast<int32_t>(x32);
    return s32 >= a.bounds.s32min && s32 <= a.bounds.s32max;
}

ScalarAbs abs_join(const ScalarAbs& a, const ScalarAbs& b) {
    if (a.dead)
        return b;
    if (b.dead)
        return a;
    ScalarAbs r;
    r.tnum = tnum_union(a.tnum, b.tnum);
    r.bounds.umin = std::min(a.bounds.umin, b.bounds.umin);
    r.bounds.umax = std::max(a.bounds.umax, b.bounds.umax);
    r.bounds.smin = std::min(a.bounds.smin, b.bounds.smin);
    r.bounds.smax = std::max(a.bounds.smax, b.bounds.smax);
    r.bounds.u32min = std::min(a.bounds.u32min, b.bounds.u32min);
    r.bounds.u32max = std::max(a.bounds.u32max, b.bounds.u32max);
    r.bounds.s32min = std::min(a.bounds.s32min, b.bounds.s32min);
    r.bounds.s32max = std::max(a.bounds.s32max, b.bounds.s32max);
    r.normalize();
    return r;
}

bool abs_subsumes(const ScalarAbs& outer, const ScalarAbs& inner) {
    if (inner.dead)
        return true;
    if (outer.dead)
        return false;
    return tnum_subset(outer.tnum, inner.tnum) && outer.bounds.umin <= inner.bounds.umin &&
           inner.bounds.umax <= outer.bounds.umax && outer.bounds.smin <= inner.bounds.smin &&
           inner.bounds.smax <= outer.bounds.smax && outer.bounds.u32min <= inner.bounds.u32min &&
           inner.bounds.u32max <= outer.bounds.u32max && outer.bounds.s32min <= inner.bounds.s32min &&
           inner.bounds.s32max <= outer.bounds.s32max;
}

namespace {

std::optional<RefinedPair> finish_pair(ScalarAbs a, ScalarAbs b) {
    a.normalize();
    b.normalize();
    if (a.dead || b.dead)
        return std::nullopt;
    return RefinedPair{a, b};
}

} // namespace

BranchRefinement abs_refine_branch(JmpOp cond, const ScalarAbs& a_in, const ScalarAbs& b_in, uint32_t width) {
    switch (cond) {
    case JmpOp::JEQ:
    case JmpOp::JNE:
    case JmpOp::JGT:
    case JmpOp::JGE:
    case JmpOp::JLT:
    case JmpOp::JLE:
    case JmpOp::JSGT:
    case JmpOp::JSGE:
    case JmpOp::JSLT:
    case JmpOp::JSLE:
    case JmpOp::JSET:
        break;
    default:
        throw UnsupportedOp{"not a conditional jump"};
    }
    BranchRefinement out;
    if (a_in.dead || b_in.dead)
        return out;

    bool is32 = width == 32;
    // For 32-bit compares of values whose upper word is known zero we can
    // refine the full 64-bit ranges; otherwise touch only the sub-bounds.
    auto high_zero = [](const ScalarAbs& v) { return ((v.tnum.value | v.tnum.mask) >> 32) == 0; };
    bool full_range = !is32 || (high_zero(a_in) && high_zero(b_in));

    auto u_min = [&](const ScalarAbs& v) -> uint64_t { return full_range ? v.bounds.umin : v.bounds.u32min; };
    auto u_max = [&](const ScalarAbs& v) -> uint64_t { return full_range ? v.bounds.umax : v.bounds.u32max; };
    auto set_umin = [&](ScalarAbs& v, uint64_t x) {
        if (full_range)
            v.bounds.umin = x;
        else
            v.bounds.u32min = static_cast<uint32_t>(x);
    };
    auto set_umax = [&](ScalarAbs& v, uint64_t x) {
        if (full_range)
            v.bounds.umax = x;
        else
            v.bounds.u32max = static_cast<uint32_t>(x);
    };
    auto s_min = [&](const ScalarAbs& v) -> int64_t { return is32 ? v.bounds.s32min : v.bounds.smin; };
    auto s_max = [&](const ScalarAbs& v) -> int64_t { return is32 ? v.bounds.s32max : v.bounds.smax; };
    auto set_smin = [&](ScalarAbs& v, int64_t x) {
        if (is32)
            v.bounds.s32min = static_cast<int32_t>(x);
        else
            v.bounds.smin = x;
    };
    auto set_smax = [&](ScalarAbs& v, int64_t x) {
        if (is32)
            v.bounds.s32max = static_cast<int32_t>(x);
        else
            v.bounds.smax = x;
    };
    const uint64_t umax_lim = full_range ? ~0ull : ~0u;
    const int64_t smax_lim = is32 ? INT32_MAX : INT64_MAX;
    const int64_t smin_lim = is32 ? INT32_MIN : INT64_MIN;

    auto tnum_of = [&](const ScalarAbs& v) { return is32 ? v.tnum.truncate(32) : v.tnum; };

    auto equal_side = [&]() -> std::optional<RefinedPair> {
        ScalarAbs a = a_in, b = b_in;
        Tnum ta = tnum_of(a_in), tb = tnum_of(b_in);
        if (tnum_conflict(ta, tb))
            return std::nullopt;
        Tnum t = tnum_intersect(ta, tb);
        if (is32) {
            // Merge only the low words.
            a.tnum = tnum_intersect(a.tnum, Tnum{t.value, t.mask | ~0xffffffffull});
            b.tnum = tnum_intersect(b.tnum, Tnum{t.value, t.mask | ~0xffffffffull});
            if (!a.tnum.wellformed() || !b.tnum.wellformed())
                return std::nullopt;
        } else {
            a.tnum = b.tnum = t;
        }
        set_umin(a, std::max(u_min(a_in), u_min(b_in)));
        set_umin(b, std::max(u_min(a_in), u_min(b_in)));
        set_umax(a, std::min(u_max(a_in), u_max(b_in)));
        set_umax(b, std::min(u_max(a_in), u_max(b_in)));
        set_smin(a, std::max(s_min(a_in), s_min(b_in)));
        set_smin(b, std::max(s_min(a_in), s_min(b_in)));
        set_smax(a, std::min(s_max(a_in), s_max(b_in)));
        set_smax(b, std::min(s_max(a_in), s_max(b_in)));
        return finish_pair(a, b);
    };

    // Endpoint nudge for the "not equal" outcome when one side is constant.
    auto unequal_side = [&]() -> std::optional<RefinedPair> {
        ScalarAbs a = a_in, b = b_in;
        Tnum ta = tnum_of(a_in), tb = tnum_of(b_in);
        bool a_const = ta.is_const() && u_min(a_in) == u_max(a_in);
        bool b_const = tb.is_const() && u_min(b_in) == u_max(b_in);
        if (a_const && b_const && ta.value == tb.value)
            return std::nullopt;
        auto nudge = [&](ScalarAbs& v, uint64_t c) {
            if (u_min(v) == c && u_min(v) < umax_lim)
                set_umin(v, u_min(v) + 1);
            if (u_max(v) == c && u_max(v) > 0)
                set_umax(v, u_max(v) - 1);
            int64_t cs = is32 ? static_cast<int64_t>(static_cast<int32_t>(c)) : static_cast<int64_t>(c);
            if (s_min(v) == cs && s_min(v) < smax_lim)
                set_smin(v, s_min(v) + 1);
            if (s_max(v) == cs && s_max(v) > smin_lim)
                set_smax(v, s_max(v) - 1);
        };
        if (b_const)
            nudge(a, tb.value);
        else if (a_const)
            nudge(b, ta.value);
        return finish_pair(a, b);
    };

    auto ugt_side = [&](const ScalarAbs& x_in, const ScalarAbs& y_in,
                        bool strict) -> std::optional<std::pair<ScalarAbs, ScalarAbs>> {
        // x > y (strict) or x >= y
        ScalarAbs x = x_in, y = y_in;
        if (strict) {
            if (u_min(y) == umax_lim || u_max(x) == 0)
                return std::nullopt;
            set_umin(x, std::max(u_min(x), u_min(y) + 1));
            set_umax(y, std::min(u_max(y), u_max(x_in) - 1));
        } else {
            set_umin(x, std::max(u_min(x), u_min(y)));
            set_umax(y, std::min(u_max(y), u_max(x_in)));
        }
        x.normalize();
        y.normalize();
        if (x.dead || y.dead)
            return std::nullopt;
        return std::make_pair(x, y);
    };

    auto sgt_side = [&](const ScalarAbs& x_in, const ScalarAbs& y_in,
                        bool strict) -> std::optional<std::pair<ScalarAbs, ScalarAbs>> {
        ScalarAbs x = x_in, y = y_in;
        if (strict) {
            if (s_min(y) == smax_lim || s_max(x) == smin_lim)
                return std::nullopt;
            set_smin(x, std::max(s_min(x), s_min(y) + 1));
            set_smax(y, std::min(s_max(y), s_max(x_in) - 1));
        } else {
            set_smin(x, std::max(s_min(x), s_min(y)));
            set_smax(y, std::min(s_max(y), s_max(x_in)));
        }
        x.normalize();
        y.normalize();
        if (x.dead || y.dead)
            return std::nullopt;
        return std::make_pair(x, y);
    };

    auto pack = [](std::optional<std::pair<ScalarAbs, ScalarAbs>> p, bool swapped) -> std::optional<RefinedPair> {
        if (!p)
            return std::nullopt;
        return swapped ? RefinedPair{p->second, p->first} : RefinedPair{p->first, p->second};
    };

    switch (cond) {
    case JmpOp::JEQ:
        out.taken = equal_side();
        out.not_taken = unequal_side();
        break;
    case JmpOp::JNE:
        out.taken = unequal_side();
        out.not_taken = equal_side();
        break;
    case JmpOp::JGT:
        out.taken = pack(ugt_side(a_in, b_in, true), false);
        out.not_taken = pack(ugt_side(b_in, a_in, false), true); // b >= a
        break;
    case JmpOp::JGE:
        out.taken = pack(ugt_side(a_in, b_in, false), false);
        out.not_taken = pack(ugt_side(b_in, a_in, true), true); // b > a
        break;
    case JmpOp::JLT:
        out.taken = pack(ugt_side(b_in, a_in, true), true); // b > a
        out.not_taken = pack(ugt_side(a_in, b_in, false), false);
        break;
    case JmpOp::JLE:
        out.taken = pack(ugt_side(b_in, a_in, false), true); // b >= a
        out.not_taken = pack(ugt_side(a_in, b_in, true), false);
        break;
    case JmpOp::JSGT:
        out.taken = pack(sgt_side(a_in, b_in, true), false);
        out.not_taken = pack(sgt_side(b_in, a_in, false), true);
        break;
    case JmpOp::JSGE:
        out.taken = pack(sgt_side(a_in, b_in, false), false);
        out.not_taken = pack(sgt_side(b_in, a_in, true), true);
        break;
    case JmpOp::JSLT:
        out.taken = pack(sgt_side(b_in, a_in, true), true);
        out.not_taken = pack(sgt_side(a_in, b_in, false), false);
        break;
    case JmpOp::JSLE:
        out.taken = pack(sgt_side(b_in, a_in, false), true);
        out.not_taken = pack(sgt_side(a_in, b_in, true), false);
        break;
    case JmpOp::JSET: {
        Tnum ta = tnum_of(a_in), tb = tnum_of(b_in);
        bool always = (ta.value & tb.value) != 0;
        bool never = ((ta.value | ta.mask) & (tb.value | tb.mask)) == 0;
        if (!never) {
            ScalarAbs a = a_in, b = b_in;
            // If exactly one unknown bit could satisfy the test, pin it.
            if ((ta.value & (tb.value | tb.mask)) == 0 && tb.is_const()) {
                uint64_t candidates = ta.mask & tb.value;
                if (candidates && (candidates & (candidates - 1)) == 0) {
                    uint64_t bit = candidates;
                    Tnum pinned{a.tnum.value | bit, a.tnum.mask & ~bit};
                    a.tnum = pinned;
                }
            }
            out.taken = finish_pair(a, b);
        }
        if (!always) {
            ScalarAbs a = a_in, b = b_in;
            if (tb.is_const()) {
                // Every bit tested by b must be 0 on this side.
                uint64_t clear = tb.value & a.tnum.mask;
                if (is32)
                    clear &= 0xffffffffull;
                a.tnum.mask &= ~clear;
            }
            out.not_taken = finish_pair(a, b);
        }
        break;
    }
    default:
        break;
    }
    return out;
}

std::string abs_to_string(const ScalarAbs& a) {
    std::ostringstream os;
    if (a.dead)
        return "dead";
    if (a.is_const()) {
        os << "const " << a.const_value();
        return os.str();
    }
    os << std::hex << "tnum(v=0x" << a.tnum.value << ",m=0x" << a.tnum.mask << ")" << std::dec;
    if (a.bounds.umin != 0 || a.bounds.umax != ~0ull)
        os << " u[" << a.bounds.umin << "," << a.bounds.umax << "]";
    if (a.bounds.smin != INT64_MIN || a.bounds.smax != INT64_MAX)
        os << " s[" << a.bounds.smin << "," << a.bounds.smax << "]";
    return os.str();
}

} // namespace ubpf

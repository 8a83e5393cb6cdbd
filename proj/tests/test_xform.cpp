// Copyright (c) ubpf-forge contributors.
// SPDX-License-Identifier: MIT
#include <doctest.h>

#include "corpus.hpp"
#include "ubpf/xform.hpp"

using namespace ubpf;

namespace {

VerifiedProgram verified(const std::string& src) {
    VerifyResult r = corpus::verify_src(src);
    REQUIRE(std::holds_alternative<VerifiedProgram>(r));
    return std::get<VerifiedProgram>(r);
}

} // namespace

TEST_CASE("fully live program is unchanged by dead-code elimination") {
    VerifiedProgram vp = verified(corpus::kDropUdp);
    TransformedProgram t = eliminate_dead_code(vp.prog, vp.notes);
    CHECK(t.prog == vp.prog);
}

TEST_CASE("always-taken branch becomes an unconditional jump and the arm disappears") {
    VerifiedProgram vp = verified(
        "mov64 r1, 5\n"
        "jeq r1, 5, A\n"
        "mov64 r0, 9\n" // never simulated
        "A:\n"
        "mov64 r0, 0\n"
        "exit\n");
    TransformedProgram t = eliminate_dead_code(vp.prog, vp.notes);
    REQUIRE(t.prog.insns.size() == 4);
    CHECK(t.prog.insns[1].is_uncond_jump());
    CHECK(t.prog.insns[1].offset == 0); // the arm between jump and target vanished
}

TEST_CASE("never-taken branch is removed entirely") {
    VerifiedProgram vp = verified(
        "mov64 r1, 5\n"
        "jeq r1, 6, A\n"
        "mov64 r0, 0\n"
        "exit\n"
        "A:\n"
        "mov64 r0, 9\n"
        "exit\n");
    TransformedProgram t = eliminate_dead_code(vp.prog, vp.notes);
    REQUIRE(t.prog.insns.size() == 3);
    CHECK(t.prog.insns[0].alu_op() == AluOp::MOV);
    CHECK(t.prog.insns[1].alu_op() == AluOp::MOV);
    CHECK(t.prog.insns[2].is_exit());
}

TEST_CASE("load-time-constant guard folds away the fallback block") {
    // A configuration constant resolved at verification time guards a
    // fallback path; the whole block is removed.
    VerifiedProgram vp = verified(
        "lddw r6, 1\n" // config flag
        "jeq r6, 0, fallback\n"
        "mov64 r0, 2\n"
        "exit\n"
        "fallback:\n"
        "mov64 r0, 1\n"
        "exit\n");
    TransformedProgram t = eliminate_dead_code(vp.prog, vp.notes);
    CHECK(t.prog.insns.size() == 4); // lddw(2) + mov + exit
    for (const Instruction& i : t.prog.insns)
        CHECK(!i.is_cond_jump());
}

TEST_CASE("DCE is idempotent and never grows the program") {
    for (const auto& [name, src] : corpus::accepted_cases()) {
        CAPTURE(name);
        VerifiedProgram vp = verified(src);
        TransformedProgram once = eliminate_dead_code(vp.prog, vp.notes);
        CHECK(once.prog.insns.size() <= vp.prog.insns.size());
        TransformedProgram twice = eliminate_dead_code(once.prog, once.notes);
        CHECK(twice.prog == once.prog);
    }
}

TEST_CASE("jump offsets survive removal of instructions in between") {
    VerifiedProgram vp = verified(
        "mov64 r1, 1\n"
        "mov64 r2, 2\n"
        "jeq r1, 1, T\n" // always taken; the next two are dead
        "mov64 r3, 3\n"
        "mov64 r4, 4\n"
        "T:\n"
        "mov64 r0, r2\n"
        "exit\n");
    TransformedProgram t = eliminate_dead_code(vp.prog, vp.notes);
    // mov, mov, ja, mov, exit
    REQUIRE(t.prog.insns.size() == 5);
    CHECK(t.prog.insns[2].is_uncond_jump());
    CHECK(t.prog.insns[2].offset == 0);
}

TEST_CASE("array lookup is inlined to a bounds check plus address computation") {
    VerifiedProgram vp = verified(
        ".map m array 4 8 4\n"
        "mov64 r9, 3\n"
        "stxw [r10-4], r9\n"
        "lddw r1, m\n"
        "mov64 r2, r10\n"
        "add64 r2, -4\n"
        "call map_lookup_elem\n"
        "jeq r0, 0, out\n"
        "ldxdw r8, [r0+0]\n"
        "out:\n"
        "mov64 r0, 0\n"
        "exit\n");
    std::vector<MapDef> maps = corpus::map_defs(vp.prog);
    TransformedProgram t = rewrite_map_helpers(vp.prog, vp.notes, maps);
    bool has_base = false, has_call = false;
    for (const Instruction& i : t.prog.insns) {
        if (i.cls == InsnClass::LD && i.pseudo == Pseudo::MapValueBase)
            has_base = true;
        if (i.is_call() && i.pseudo == Pseudo::None && i.imm == 1)
            has_call = true;
    }
    CHECK(has_base);
    CHECK(!has_call);
    CHECK(t.prog.insns.size() > vp.prog.insns.size());
}

TEST_CASE("hash lookup becomes a direct call") {
    VerifiedProgram vp = verified(
        ".map m hash 4 8 4\n"
        "mov64 r9, 3\n"
        "stxw [r10-4], r9\n"
        "lddw r1, m\n"
        "mov64 r2, r10\n"
        "add64 r2, -4\n"
        "call map_lookup_elem\n"
        "jeq r0, 0, out\n"
        "ldxdw r8, [r0+0]\n"
        "out:\n"
        "mov64 r0, 0\n"
        "exit\n");
    std::vector<MapDef> maps = corpus::map_defs(vp.prog);
    TransformedProgram t = rewrite_map_helpers(vp.prog, vp.notes, maps);
    bool has_direct = false;
    for (const Instruction& i : t.prog.insns)
        if (i.is_call() && i.pseudo == Pseudo::DirectCall)
            has_direct = true;
    CHECK(has_direct);
    CHECK(t.prog.insns.size() == vp.prog.insns.size());
}

TEST_CASE("programs without map calls pass through the rewriter unchanged") {
    VerifiedProgram vp = verified(corpus::kDropUdp);
    TransformedProgram t = rewrite_map_helpers(vp.prog, vp.notes, {});
    CHECK(t.prog == vp.prog);
}

TEST_CASE("untrusted-load notes survive both transforms") {
    VerifiedProgram vp = verified(
        ".map m hash 4 8 4\n"
        "mov64 r9, 3\n"
        "stxw [r10-4], r9\n"
        "lddw r1, m\n"
        "mov64 r2, r10\n"
        "add64 r2, -4\n"
        "call map_lookup_elem\n"
        "jeq r0, 0, out\n"
        "ldxdw r8, [r0+0]\n"
        "out:\n"
        "mov64 r0, 0\n"
        "exit\n");
    std::vector<MapDef> maps = corpus::map_defs(vp.prog);
    TransformedProgram t = transform(vp, maps);
    int untrusted = 0;
    for (size_t k = 0; k < t.prog.insns.size(); ++k)
        if (t.notes[k].untrusted_load) {
            ++untrusted;
            CHECK(t.prog.insns[k].cls == InsnClass::LDX);
        }
    CHECK(untrusted == 1);
}

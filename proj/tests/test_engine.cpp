// Copyright (c) ubpf-forge contributors.
// SPDX-License-Identifier: MIT
#include <doctest.h>

#include <random>

#include "corpus.hpp"
#include "differential.hpp"
#include "progen.hpp"
#include "ubpf/engine.hpp"
#include "ubpf/runtime.hpp"

using namespace ubpf;

namespace {

Handle load_or_fail(Runtime& rt, const std::string& src, LoadOptions opts = {}) {
    auto r = rt.prog_load(src, ProgType::Xdp, opts);
    if (std::holds_alternative<Rejection>(r)) {
        const Rejection& rej = std::get<Rejection>(r);
        CAPTURE(rej.detail);
        CAPTURE(rej.insn);
        CAPTURE(rej.log);
        REQUIRE(std::holds_alternative<Handle>(r));
    }
    return std::get<Handle>(r);
}

// A 48-byte Ethernet+IPv4 frame with the protocol byte at offset 23.
std::vector<uint8_t> ip_frame(uint8_t protocol) {
    std::vector<uint8_t> f(48, 0);
    f[12] = 0x08; // ethertype IPv4, network byte order
    f[13] = 0x00;
    f[23] = protocol;
    return f;
}

} // namespace

TEST_CASE("interpreter returns the constant") {
    Runtime rt;
    Handle h = load_or_fail(rt, "mov64 r0, 7\nexit\n");
    auto ctx = rt.make_context(h, {});
    ExecResult r = rt.run_program(h, *ctx, false, 1000);
    CHECK(r.r0 == 7);
    CHECK(r.instructions == 2);
}

TEST_CASE("the packet filter drops UDP, passes TCP and runts on both engines") {
    Runtime rt;
    Handle h = load_or_fail(rt, corpus::kDropUdp);
    for (bool image : {false, true}) {
        CAPTURE(image);
        auto udp = rt.make_context(h, ip_frame(17));
        CHECK(rt.run_program(h, *udp, image, 10000).r0 == 1); // DROP
        auto tcp = rt.make_context(h, ip_frame(6));
        CHECK(rt.run_program(h, *tcp, image, 10000).r0 == 2); // PASS
        auto runt = rt.make_context(h, std::vector<uint8_t>(10, 0xaa));
        CHECK(rt.run_program(h, *runt, image, 10000).r0 == 2); // PASS
    }
}

TEST_CASE("wide load carries its 64-bit constant into execution") {
    Runtime rt;
    Handle h = load_or_fail(rt, "lddw r0, 0x100000001\nexit\n");
    for (bool image : {false, true}) {
        auto ctx = rt.make_context(h, {});
        CHECK(rt.run_program(h, *ctx, image, 100).r0 == 0x100000001ull);
    }
}

TEST_CASE("division and modulo by zero have defined results") {
    Runtime rt;
    Handle h = load_or_fail(rt,
                            "mov64 r6, 100\n"
                            "mov64 r7, 0\n"
                            "div64 r6, r7\n" // 100 / 0 = 0
                            "mov64 r8, 55\n"
                            "mod64 r8, r7\n" // 55 % 0 = 55
                            "mov64 r0, r6\n"
                            "add64 r0, r8\n"
                            "exit\n");
    for (bool image : {false, true}) {
        auto ctx = rt.make_context(h, {});
        CHECK(rt.run_program(h, *ctx, image, 1000).r0 == 55);
    }
}

TEST_CASE("fuel exhaustion raises an error") {
    Runtime rt;
    Handle h = load_or_fail(rt, "mov64 r0, 7\nexit\n");
    auto ctx = rt.make_context(h, {});
    CHECK_THROWS_AS(rt.run_program(h, *ctx, false, 1), EngineError);
}

TEST_CASE("lowered body maps one-to-one for simple programs") {
    Runtime rt;
    Handle h = load_or_fail(rt, "mov64 r0, 7\nexit\n");
    const JitImage& img = rt.prog_of(h).image;
    REQUIRE(img.subs().size() == 1);
    CHECK(img.main().body.size() == 2);
    CHECK(img.main().prologue.size() == 3);
    CHECK(img.main().epilogue.size() == 2);
    CHECK(img.read_only());
}

TEST_CASE("finalized images refuse mutation") {
    Runtime rt;
    Handle h = load_or_fail(rt, "mov64 r0, 7\nexit\n");
    JitImage img = rt.prog_of(h).image;
    CHECK_THROWS_AS(img.patch_op(0, 0, LoweredOp{}), EngineError);
    try {
        img.patch_op(0, 0, LoweredOp{});
    } catch (const EngineError& e) {
        CHECK(e.kind == EngineError::Kind::ReadOnlyImage);
    }
}

TEST_CASE("blinding hides the immediate behind the scratch register") {
    Program p = parse_asm("mov64 r0, 0x1234\nexit\n");
    std::vector<InsnNotes> notes(p.insns.size());
    for (auto& n : notes)
        n.seen = true;
    JitImage plain = lower(p, notes, false, 1);
    JitImage blind = lower(p, notes, true, 1);
    CHECK(plain.main().body.size() == 2);
    REQUIRE(blind.main().body.size() == 4); // blind-mov, blind-xor, mov, exit
    CHECK(blind.main().body[0].kind == LKind::BlindMov);
    CHECK(blind.main().body[1].kind == LKind::BlindXor);
    CHECK(blind.main().body[2].reg_operand);
    CHECK(blind.main().body[2].src == kBlindReg);
    for (const LoweredOp& op : blind.main().body)
        CHECK(op.imm != 0x1234);
    // The two halves recombine to the original immediate.
    CHECK((blind.main().body[0].imm ^ blind.main().body[1].imm) == 0x1234);
}

TEST_CASE("identical seeds produce identical images") {
    Program p = parse_asm("mov64 r0, 0x1234\nadd64 r0, 0x777\nexit\n");
    std::vector<InsnNotes> notes(p.insns.size());
    for (auto& n : notes)
        n.seen = true;
    JitImage a = lower(p, notes, true, 42);
    JitImage b = lower(p, notes, true, 42);
    JitImage c = lower(p, notes, true, 43);
    REQUIRE(a.main().body.size() == b.main().body.size());
    for (size_t k = 0; k < a.main().body.size(); ++k)
        CHECK(a.main().body[k] == b.main().body[k]);
    bool differs = a.main().body.size() != c.main().body.size();
    for (size_t k = 0; !differs && k < a.main().body.size(); ++k)
        differs = !(a.main().body[k] == c.main().body[k]);
    CHECK(differs);
}

TEST_CASE("blinded and unblinded images agree on results") {
    Runtime rt;
    Handle plain = load_or_fail(rt, corpus::kDropUdp);
    Handle blinded = load_or_fail(rt, corpus::kDropUdp, LoadOptions{.blind = true, .seed = 99});
    for (uint8_t proto : {17, 6}) {
        auto c1 = rt.make_context(plain, ip_frame(proto));
        auto c2 = rt.make_context(blinded, ip_frame(proto));
        CHECK(rt.run_program(plain, *c1, true, 10000).r0 == rt.run_program(blinded, *c2, true, 10000).r0);
    }
}

TEST_CASE("callee-saved registers are restored around an image call") {
    Runtime rt;
    Handle h = load_or_fail(rt,
                            "mov64 r6, 1\n"
                            "mov64 r7, 2\n"
                            "mov64 r8, 3\n"
                            "mov64 r9, 4\n"
                            "mov64 r0, 0\n"
                            "exit\n");
    auto ctx = rt.make_context(h, {});
    auto env = rt.make_env(h);
    std::array<uint64_t, 12> regs{};
    regs[1] = kCtxBase;
    regs[6] = 0xaaaa;
    regs[7] = 0xbbbb;
    regs[8] = 0xcccc;
    regs[9] = 0xdddd;
    regs[10] = 0x9999;
    exec_image_regs(rt.prog_of(h).image, *ctx, *env, 1000, regs);
    CHECK(regs[6] == 0xaaaa);
    CHECK(regs[7] == 0xbbbb);
    CHECK(regs[8] == 0xcccc);
    CHECK(regs[9] == 0xdddd);
    CHECK(regs[10] == 0x9999);
}

TEST_CASE("a faulting untrusted load zero-fills and execution continues") {
    // Craft an image by hand: the load is marked checked, but its pointer is
    // garbage, so translation faults and the destination reads zero.
    Program p = parse_asm(
        "lddw r2, 0x7f000000\n" // no region there
        "ldxdw r3, [r2+0]\n"
        "mov64 r0, 41\n"
        "add64 r0, r3\n"
        "add64 r0, 1\n"
        "exit\n");
    std::vector<InsnNotes> notes(p.insns.size());
    for (auto& n : notes)
        n.seen = true;
    notes[2].untrusted_load = true; // the ldxdw (slots 0-1 are the wide load)
    JitImage img = lower(p, notes, false, 1);
    REQUIRE(img.exception_table().size() == 1);
    Runtime rt;
    Handle dummy = load_or_fail(rt, "mov64 r0, 0\nexit\n");
    auto ctx = rt.make_context(dummy, {});
    auto env = rt.make_env(dummy);
    ExecResult r = exec_image(img, *ctx, *env, kCtxBase, 1000);
    CHECK(r.r0 == 42); // r3 read as zero, execution completed
    CHECK(ctx->faults == 1);
}

TEST_CASE("a faulting load without an exception entry is an invariant breach") {
    Program p = parse_asm(
        "lddw r2, 0x7f000000\n"
        "ldxdw r3, [r2+0]\n"
        "mov64 r0, 0\n"
        "exit\n");
    std::vector<InsnNotes> notes(p.insns.size());
    for (auto& n : notes)
        n.seen = true;
    JitImage img = lower(p, notes, false, 1);
    Runtime rt;
    Handle dummy = load_or_fail(rt, "mov64 r0, 0\nexit\n");
    auto ctx = rt.make_context(dummy, {});
    auto env = rt.make_env(dummy);
    CHECK_THROWS_AS(exec_image(img, *ctx, *env, kCtxBase, 1000), EngineError);
}

TEST_CASE("subprog calls run through prologue and epilogue on both engines") {
    Runtime rt;
    Handle h = load_or_fail(rt,
                            "mov64 r6, 7\n"
                            "mov64 r1, 5\n"
                            "call double_it\n"
                            "add64 r0, r6\n"
                            "exit\n"
                            ".subprog double_it\n"
                            "mov64 r6, 1000\n" // clobbers its own r6
                            "mov64 r0, r1\n"
                            "add64 r0, r0\n"
                            "exit\n");
    for (bool image : {false, true}) {
        auto ctx = rt.make_context(h, {});
        CHECK(rt.run_program(h, *ctx, image, 1000).r0 == 17);
    }
}

TEST_CASE("differential: all routes agree over random verified programs") {
    std::mt19937_64 rng{0xd1ff};
    Runtime rt;
    int programs = 60;
    for (int k = 0; k < programs; ++k) {
        std::string src = progen::generate(rng);
        CAPTURE(k);
        CAPTURE(src);
        Handle h = load_or_fail(rt, src);
        for (int input = 0; input < 4; ++input) {
            std::vector<uint8_t> packet = differential::random_packet(rng);
            auto diverged = differential::check_all_routes(rt, h, packet, rng(), {3, 17});
            if (diverged) {
                CAPTURE(*diverged);
                CAPTURE(input);
                REQUIRE(!diverged);
            }
        }
        rt.obj_put(h);
    }
}

TEST_CASE("interpreter instrumentation reports no faults for verified programs") {
    std::mt19937_64 rng{0xfa137};
    Runtime rt;
    for (int k = 0; k < 20; ++k) {
        std::string src = progen::generate(rng);
        Handle h = load_or_fail(rt, src);
        for (int input = 0; input < 3; ++input) {
            auto ctx = rt.make_context(h, differential::random_packet(rng));
            rt.run_program(h, *ctx, input % 2 == 0, 1 << 20);
            CHECK(ctx->faults == 0);
        }
        rt.obj_put(h);
    }
}

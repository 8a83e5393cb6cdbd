// Copyright (c) ubpf-forge contributors.
// SPDX-License-Identifier: MIT
#include <doctest.h>

#include <random>

#include "ubpf/helper_ids.hpp"
#include "ubpf/isa.hpp"

using namespace ubpf;

TEST_CASE("decode rejects the all-zero slot") {
    std::vector<uint8_t> zeros(8, 0);
    CHECK_THROWS_AS(decode(zeros), DecodeError);
    try {
        decode(zeros);
    } catch (const DecodeError& e) {
        CHECK(e.kind == DecodeError::Kind::UnknownOpcode);
    }
}

TEST_CASE("decode rejects badly sized input") {
    std::vector<uint8_t> bytes(9, 0);
    CHECK_THROWS_AS(decode(bytes), DecodeError);
}

TEST_CASE("single exit encodes to exactly 8 octets") {
    Program p = parse_asm("exit");
    CHECK(p.insns.size() == 1);
    auto bytes = encode(p);
    CHECK(bytes.size() == 8);
    CHECK(bytes[0] == 0x95); // JMP | EXIT<<4
}

TEST_CASE("empty program encodes to an empty sequence") {
    Program p;
    CHECK(encode(p).empty());
}

TEST_CASE("mov64/exit assembles and roundtrips through the binary form") {
    Program p = parse_asm("mov64 r0, 7 ; set return\nexit");
    CHECK(p.insns.size() == 2);
    CHECK(p.insns[0].alu_op() == AluOp::MOV);
    CHECK(p.insns[0].imm == 7);
    Program q = decode(encode(p));
    CHECK(p == q);
}

TEST_CASE("mov64 then exit parses weird whitespace and comments") {
    Program p = parse_asm("  mov64   r0 ,1\n; nothing\n exit ; done\n");
    CHECK(p.insns.size() == 2);
    CHECK(p.insns[0].imm == 1);
}

TEST_CASE("wide load carries a 64-bit constant across two slots") {
    Program p = parse_asm("lddw r1, 0x100000001\nmov64 r0, 0\nexit");
    REQUIRE(p.insns.size() == 4);
    CHECK(p.insns[0].is_wide());
    CHECK(p.insns[1].wide_cont);
    CHECK(p.insns[0].imm64() == 0x100000001ull);
    auto bytes = encode(p);
    CHECK(bytes.size() == 32);
    Program q = decode(bytes);
    CHECK(q == p);
    CHECK(q.insns[0].imm64() == 0x100000001ull);
}

TEST_CASE("truncated wide load is rejected") {
    Program p = parse_asm("lddw r1, 0x100000001\nexit");
    auto bytes = encode(p);
    bytes.resize(8); // drop the continuation slot
    CHECK_THROWS_AS(decode(bytes), DecodeError);
    try {
        decode(bytes);
    } catch (const DecodeError& e) {
        CHECK(e.kind == DecodeError::Kind::TruncatedWideInstruction);
    }
}

TEST_CASE("register indices above r10 are rejected by decode") {
    Program p = parse_asm("mov64 r0, 0\nexit");
    auto bytes = encode(p);
    bytes[1] = 0x0b; // dst = r11
    CHECK_THROWS_AS(decode(bytes), DecodeError);
}

TEST_CASE("assembler reports syntax errors with position") {
    CHECK_THROWS_AS(parse_asm("bogus r1, 2"), AsmError);
    try {
        parse_asm("mov64 r0, 0\nbogus r1, 2");
    } catch (const AsmError& e) {
        CHECK(e.kind == AsmError::Kind::Syntax);
        CHECK(e.line == 2);
    }
    CHECK_THROWS_AS(parse_asm("jeq r1, 0, nowhere\nexit"), AsmError);
    CHECK_THROWS_AS(parse_asm("a:\na:\nexit"), AsmError);
}

TEST_CASE("labels resolve to slot offsets") {
    Program p = parse_asm(R"(
        mov64 r1, 3
    loop:
        sub64 r1, 1
        jne r1, 0, loop
        mov64 r0, 0
        exit
    )");
    REQUIRE(p.insns.size() == 5);
    CHECK(p.insns[2].offset == -2);
}

TEST_CASE("subprog calls use slot deltas and partition the program") {
    Program p = parse_asm(R"(
        mov64 r1, 1
        call helper_like
        mov64 r0, 0
        exit
        .subprog helper_like
        mov64 r0, 2
        exit
    )");
    REQUIRE(p.subprogs.size() == 2);
    CHECK(p.subprogs[1].start == 4);
    CHECK(p.insns[1].pseudo == Pseudo::LocalCall);
    CHECK(p.insns[1].imm == 2);
    Program q = decode(encode(p));
    CHECK(q == p);
}

TEST_CASE("map declarations resolve through lddw") {
    Program p = parse_asm(R"(
        .map counters array 4 8 16
        lddw r1, counters
        mov64 r0, 0
        exit
    )");
    REQUIRE(p.map_refs.size() == 1);
    CHECK(p.map_refs[0].def->max_entries == 16);
    CHECK(p.insns[0].pseudo == Pseudo::MapRef);
    CHECK(p.insns[0].imm == 0);
}

TEST_CASE("helper calls resolve by name") {
    Program p = parse_asm("call trace_emit\nexit");
    CHECK(p.insns[0].imm == HELPER_TRACE_EMIT);
    CHECK(p.insns[0].pseudo == Pseudo::None);
}

TEST_CASE("format_asm is a parse fixed point for representative programs") {
    const char* sources[] = {
        "exit",
        "mov64 r0, 1\nexit",
        "mov64 r1, 3\nL: sub64 r1, 1\njne r1, 0, L\nmov64 r0, 0\nexit",
        ".map m hash 4 8 8\nlddw r1, m\nmov64 r0, 0\nexit",
        "le16 r1\nbe64 r2\nneg64 r3\nldxdw r4, [r1+8]\nstxw [r10-8], r4\nstb [r10-1], 255\nexit",
    };
    for (const char* src : sources) {
        Program p = parse_asm(src);
        Program q = parse_asm(format_asm(p));
        CHECK(q == p);
    }
}

namespace {

// Random straight-line-plus-jumps generator for the roundtrip property.
Program random_program(std::mt19937_64& rng) {
    Program p;
    std::uniform_int_distribution<int> len_dist(1, 24);
    int n = len_dist(rng);
    auto reg = [&] { return static_cast<uint8_t>(rng() % 10); };
    for (int k = 0; k < n; ++k) {
        Instruction i;
        switch (rng() % 6) {
        case 0:
            i.cls = InsnClass::ALU64;
            i.op = static_cast<uint8_t>(AluOp::MOV);
            i.dst = reg();
            i.imm = static_cast<int32_t>(rng());
            break;
        case 1:
            i.cls = InsnClass::ALU32;
            i.op = static_cast<uint8_t>(rng() % 8); // ADD..RSH
            i.dst = reg();
            i.src = reg();
            i.src_kind = SrcKind::Reg;
            break;
        case 2:
            i.cls = InsnClass::LDX;
            i.op = static_cast<uint8_t>(rng() % 4);
            i.dst = reg();
            i.src = reg();
            i.offset = static_cast<int16_t>(rng() % 128);
            break;
        case 3:
            i.cls = InsnClass::STX;
            i.op = static_cast<uint8_t>(rng() % 4);
            i.dst = reg();
            i.src = reg();
            i.offset = static_cast<int16_t>(-(rng() % 64) - 1);
            break;
        case 4: {
            i.cls = InsnClass::JMP;
            i.op = static_cast<uint8_t>(JmpOp::JEQ);
            i.dst = reg();
            i.imm = static_cast<int32_t>(rng() % 100);
            // Forward target inside the program; patched after layout below.
            i.offset = 0;
            break;
        }
        case 5: {
            i.cls = InsnClass::LD;
            i.op = static_cast<uint8_t>(MemSize::DW);
            i.dst = reg();
            i.imm = static_cast<int32_t>(rng());
            i.wide_imm = static_cast<uint32_t>(rng());
            break;
        }
        }
        p.insns.push_back(i);
        if (i.is_wide()) {
            Instruction cont;
            cont.cls = InsnClass::LD;
            cont.op = static_cast<uint8_t>(MemSize::DW);
            cont.wide_cont = true;
            cont.imm = static_cast<int32_t>(*i.wide_imm);
            p.insns.push_back(cont);
        }
    }
    {
        Instruction i;
        i.cls = InsnClass::JMP;
        i.op = static_cast<uint8_t>(JmpOp::EXIT);
        p.insns.push_back(i);
    }
    // Point every conditional jump at the final exit.
    for (size_t s = 0; s < p.insns.size(); ++s)
        if (p.insns[s].is_cond_jump())
            p.insns[s].offset = static_cast<int16_t>(p.insns.size() - 1 - s - 1);
    p.subprogs[0].len = static_cast<uint32_t>(p.insns.size());
    return p;
}

} // namespace

TEST_CASE("parse/format and encode/decode are fixed points over random programs") {
    std::mt19937_64 rng{0x5eed};
    for (int iter = 0; iter < 1000; ++iter) {
        Program p = random_program(rng);
        CAPTURE(iter);
        Program q = decode(encode(p));
        REQUIRE(q == p);
        Program r = parse_asm(format_asm(p));
        REQUIRE(r == p);
    }
}

TEST_CASE("every defined opcode decodes and every decoded opcode is defined") {
    int defined = 0;
    for (int op = 0; op < 256; ++op)
        if (opcode_is_valid(static_cast<uint8_t>(op)))
            ++defined;
    // 14 ALU ops in two classes with reg/imm forms (NEG imm-only, END in
    // ALU32 with two flavors), 10+3 jumps with forms, 12 memory opcodes and
    // the wide load.
    CHECK(defined > 60);
    // Spot checks against the fixed layout.
    CHECK(opcode_is_valid(0x07)); // add64 imm
    CHECK(opcode_is_valid(0x0f)); // add64 reg
    CHECK(opcode_is_valid(0x18)); // lddw
    CHECK(opcode_is_valid(0x61)); // ldxw
    CHECK(opcode_is_valid(0x95)); // exit
    CHECK(!opcode_is_valid(0x00));
    CHECK(!opcode_is_valid(0xf8));
}

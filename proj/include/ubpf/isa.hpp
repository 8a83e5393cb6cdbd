// Copyright (c) ubpf-forge contributors.
// SPDX-License-Identifier: MIT
#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ubpf {

// Instruction classes, encoded in the low 3 bits of the opcode byte.
enum class InsnClass : uint8_t {
    LD = 0x0,
    LDX = 0x1,
    ST = 0x2,
    STX = 0x3,
    ALU32 = 0x4,
    JMP = 0x5,
    JMP32 = 0x6,
    ALU64 = 0x7,
};

// ALU operation, encoded in the high 4 bits of the opcode byte.
enum class AluOp : uint8_t {
    ADD = 0x0,
    SUB = 0x1,
    MUL = 0x2,
    DIV = 0x3,
    OR = 0x4,
    AND = 0x5,
    LSH = 0x6,
    RSH = 0x7,
    NEG = 0x8,
    MOD = 0x9,
    XOR = 0xa,
    MOV = 0xb,
    ARSH = 0xc,
    END = 0xd,
};

// Jump operation, encoded in the high 4 bits of the opcode byte.
enum class JmpOp : uint8_t {
    JA = 0x0,
    JEQ = 0x1,
    JGT = 0x2,
    JGE = 0x3,
    JSET = 0x4,
    JNE = 0x5,
    JSGT = 0x6,
    JSGE = 0x7,
    CALL = 0x8,
    EXIT = 0x9,
    JLT = 0xa,
    JLE = 0xb,
    JSLT = 0xc,
    JSLE = 0xd,
};

// Memory access width for LD/LDX/ST/STX.
enum class MemSize : uint8_t {
    W = 0x0,  // 4 bytes
    H = 0x1,  // 2 bytes
    B = 0x2,  // 1 byte
    DW = 0x3, // 8 bytes
};

constexpr uint32_t mem_size_bytes(MemSize s) {
    switch (s) {
    case MemSize::W: return 4;
    case MemSize::H: return 2;
    case MemSize::B: return 1;
    case MemSize::DW: return 8;
    }
    return 0;
}

enum class SrcKind : uint8_t {
    Imm, // operand is the immediate field (for END: to-little-endian)
    Reg, // operand is the src register (for END: to-big-endian)
};

// Pseudo forms carried in the src register field of CALL and the wide load.
enum class Pseudo : uint8_t {
    None = 0,
    MapRef = 1,       // wide load: imm names an entry in Program::map_refs
    LocalCall = 1,    // call: imm is a slot delta to the callee entry
    MapValueBase = 2, // wide load: address of a map's value storage (post-rewrite internal)
    DirectCall = 2,   // call: direct map-implementation call (post-rewrite internal)
};

constexpr uint8_t kMaxReg = 10;        // r0..r10; r10 is the frame pointer
constexpr uint8_t kFramePointerReg = 10;

// One decoded instruction slot. A wide (two-slot) load carries its upper 32
// bits in wide_imm and is followed by a slot with wide_cont set; that slot is
// never executed on its own.
struct Instruction {
    InsnClass cls{InsnClass::ALU64};
    uint8_t op{};                     // AluOp for ALU classes, JmpOp for JMP classes, MemSize for memory classes
    uint8_t dst{};
    uint8_t src{};
    int16_t offset{};                 // jump delta in slots, or memory displacement in bytes
    int32_t imm{};
    std::optional<uint32_t> wide_imm{};
    SrcKind src_kind{SrcKind::Imm};
    Pseudo pseudo{Pseudo::None};
    bool wide_cont{false};

    bool operator==(const Instruction&) const = default;

    bool is_wide() const { return wide_imm.has_value(); }
    bool is_alu() const { return cls == InsnClass::ALU32 || cls == InsnClass::ALU64; }
    bool is_jump_class() const { return cls == InsnClass::JMP || cls == InsnClass::JMP32; }
    bool is_mem() const {
        return cls == InsnClass::LD || cls == InsnClass::LDX || cls == InsnClass::ST || cls == InsnClass::STX;
    }
    AluOp alu_op() const { return static_cast<AluOp>(op); }
    JmpOp jmp_op() const { return static_cast<JmpOp>(op); }
    MemSize mem_size() const { return static_cast<MemSize>(op); }
    uint32_t access_size() const { return mem_size_bytes(mem_size()); }

    bool is_exit() const { return is_jump_class() && jmp_op() == JmpOp::EXIT; }
    bool is_call() const { return is_jump_class() && jmp_op() == JmpOp::CALL; }
    bool is_uncond_jump() const { return cls == InsnClass::JMP && jmp_op() == JmpOp::JA; }
    bool is_cond_jump() const {
        if (!is_jump_class())
            return false;
        JmpOp j = jmp_op();
        return j != JmpOp::JA && j != JmpOp::CALL && j != JmpOp::EXIT;
    }
    // Slots this instruction occupies (1, or 2 for the wide load).
    uint32_t slots() const { return is_wide() ? 2 : 1; }

    uint64_t imm64() const {
        return static_cast<uint32_t>(imm) | (static_cast<uint64_t>(wide_imm.value_or(0)) << 32);
    }
};

enum class ProgType : uint8_t { Xdp };

enum class MapType : uint8_t { Array, Hash };

struct MapDef {
    MapType type{MapType::Array};
    uint32_t key_size{};
    uint32_t value_size{};
    uint32_t max_entries{};
    int32_t lock_off{-1}; // byte offset of an embedded lock field, -1 if none

    bool operator==(const MapDef&) const = default;
};

// A map named by wide pseudo loads; def is present when the source text
// declared it and the loader should create the map.
struct MapRef {
    std::string name;
    std::optional<MapDef> def;
};

struct Subprog {
    std::string name;
    uint32_t start{}; // slot index
    uint32_t len{};   // in slots
};

// A finite sequence of instructions, partitioned into subprograms.
// Subprog 0 is main. insns is slot-indexed: a wide load is immediately
// followed by its continuation slot.
struct Program {
    std::vector<Instruction> insns;
    std::vector<Subprog> subprogs{{"main", 0, 0}};
    std::vector<MapRef> map_refs;
    ProgType prog_type{ProgType::Xdp};

    uint32_t size() const { return static_cast<uint32_t>(insns.size()); }

    // Subprog containing a slot, or -1.
    int subprog_of(uint32_t slot) const {
        for (size_t i = 0; i < subprogs.size(); ++i)
            if (slot >= subprogs[i].start && slot < subprogs[i].start + subprogs[i].len)
                return static_cast<int>(i);
        return -1;
    }

    // Structural equality: names are presentation metadata and not compared.
    friend bool operator==(const Program& a, const Program& b) {
        if (a.insns != b.insns || a.prog_type != b.prog_type)
            return false;
        if (a.subprogs.size() != b.subprogs.size() || a.map_refs.size() != b.map_refs.size())
            return false;
        for (size_t i = 0; i < a.subprogs.size(); ++i)
            if (a.subprogs[i].start != b.subprogs[i].start || a.subprogs[i].len != b.subprogs[i].len)
                return false;
        return true;
    }
};

struct DecodeError : std::runtime_error {
    enum class Kind { UnknownOpcode, TruncatedWideInstruction, BadRegisterIndex, BadLength };
    Kind kind;
    size_t slot;
    DecodeError(Kind kind, size_t slot, const std::string& what) : std::runtime_error{what}, kind{kind}, slot{slot} {}
};

struct AsmError : std::runtime_error {
    enum class Kind { Syntax, UndefinedLabel, DuplicateLabel };
    Kind kind;
    int line;
    int column;
    AsmError(Kind kind, int line, int column, const std::string& what)
        : std::runtime_error{what}, kind{kind}, line{line}, column{column} {}
};

// Binary slot layout: opcode:8 | dst:4 | src:4 | offset:16 | imm:32, all
// little-endian. The second slot of a wide load carries the upper 32 bits in
// its imm field. Numeric opcode values follow the de-facto eBPF encoding.
std::vector<uint8_t> encode(const Program& p);
Program decode(const std::vector<uint8_t>& bytes);

Program parse_asm(const std::string& text);
std::string format_asm(const Program& p);

// Rendering of a single instruction, used by format_asm and the verifier log.
std::string format_insn(const Program& p, uint32_t slot);

// True iff the opcode byte denotes an operation this ISA defines.
bool opcode_is_valid(uint8_t opcode);

} // namespace ubpf

// Copyright (c) ubpf-forge contributors.
// SPDX-License-Identifier: MIT
#include "ubpf/isa.hpp"

#include <algorithm>

namespace ubpf {

namespace {

constexpr uint8_t kClassMask = 0x07;
constexpr uint8_t kSrcBit = 0x08;
constexpr uint8_t kOpMask = 0xf0;
constexpr uint8_t kSizeMask = 0x18;
constexpr uint8_t kModeMask = 0xe0;
constexpr uint8_t kModeImm = 0x00;
constexpr uint8_t kModeMem = 0x60;

bool alu_op_valid(uint8_t op) { return op <= static_cast<uint8_t>(AluOp::END); }
bool jmp_op_valid(uint8_t op) { return op <= static_cast<uint8_t>(JmpOp::JSLE); }

// MemSize enum value from the size bits of a memory opcode.
MemSize size_from_bits(uint8_t opcode) { return static_cast<MemSize>((opcode & kSizeMask) >> 3); }
uint8_t size_to_bits(MemSize s) { return static_cast<uint8_t>(static_cast<uint8_t>(s) << 3); }

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xff));
    out.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    put_u16(out, static_cast<uint16_t>(v & 0xffff));
    put_u16(out, static_cast<uint16_t>(v >> 16));
}

uint16_t get_u16(const std::vector<uint8_t>& b, size_t off) {
    return static_cast<uint16_t>(b[off] | (static_cast<uint16_t>(b[off + 1]) << 8));
}

uint32_t get_u32(const std::vector<uint8_t>& b, size_t off) {
    return get_u16(b, off) | (static_cast<uint32_t>(get_u16(b, off + 2)) << 16);
}

} // namespace

bool opcode_is_valid(uint8_t opcode) {
    auto cls = static_cast<InsnClass>(opcode & kClassMask);
    uint8_t op = (opcode & kOpMask) >> 4;
    switch (cls) {
    case InsnClass::ALU32:
    case InsnClass::ALU64: {
        if (!alu_op_valid(op))
            return false;
        auto a = static_cast<AluOp>(op);
        if (a == AluOp::NEG)
            return (opcode & kSrcBit) == 0;
        if (a == AluOp::END)
            return cls == InsnClass::ALU32; // byte-swap lives in the 32-bit class
        return true;
    }
    case InsnClass::JMP: {
        if (!jmp_op_valid(op))
            return false;
        auto j = static_cast<JmpOp>(op);
        if (j == JmpOp::JA || j == JmpOp::CALL || j == JmpOp::EXIT)
            return (opcode & kSrcBit) == 0;
        return true;
    }
    case InsnClass::JMP32: {
        if (!jmp_op_valid(op))
            return false;
        auto j = static_cast<JmpOp>(op);
        return j != JmpOp::JA && j != JmpOp::CALL && j != JmpOp::EXIT;
    }
    case InsnClass::LD:
        // Only the wide immediate load.
        return (opcode & (kModeMask | kSizeMask)) == (kModeImm | size_to_bits(MemSize::DW));
    case InsnClass::LDX:
    case InsnClass::ST:
    case InsnClass::STX:
        return (opcode & kModeMask) == kModeMem;
    }
    return false;
}

static uint8_t opcode_of(const Instruction& i) {
    uint8_t cls = static_cast<uint8_t>(i.cls);
    switch (i.cls) {
    case InsnClass::ALU32:
    case InsnClass::ALU64:
    case InsnClass::JMP:
    case InsnClass::JMP32: {
        uint8_t src = i.src_kind == SrcKind::Reg ? kSrcBit : 0;
        return static_cast<uint8_t>(cls | src | (i.op << 4));
    }
    case InsnClass::LD:
        return static_cast<uint8_t>(cls | kModeImm | size_to_bits(MemSize::DW));
    case InsnClass::LDX:
    case InsnClass::ST:
    case InsnClass::STX:
        return static_cast<uint8_t>(cls | kModeMem | size_to_bits(i.mem_size()));
    }
    return 0;
}

std::vector<uint8_t> encode(const Program& p) {
    std::vector<uint8_t> out;
    out.reserve(p.insns.size() * 8);
    for (const Instruction& i : p.insns) {
        if (i.wide_cont)
            continue; // emitted with its parent slot
        out.push_back(opcode_of(i));
        uint8_t src_field = i.src;
        if (i.is_call() && i.pseudo != Pseudo::None)
            src_field = static_cast<uint8_t>(i.pseudo);
        if (i.cls == InsnClass::LD && i.pseudo != Pseudo::None)
            src_field = static_cast<uint8_t>(i.pseudo);
        out.push_back(static_cast<uint8_t>((i.dst & 0x0f) | (src_field << 4)));
        put_u16(out, static_cast<uint16_t>(i.offset));
        put_u32(out, static_cast<uint32_t>(i.imm));
        if (i.is_wide()) {
            // Continuation slot: opcode 0, regs 0, offset 0, imm = upper half.
            out.push_back(0);
            out.push_back(0);
            put_u16(out, 0);
            put_u32(out, *i.wide_imm);
        }
    }
    return out;
}

Program decode(const std::vector<uint8_t>& bytes) {
    if (bytes.size() % 8 != 0)
        throw DecodeError{DecodeError::Kind::BadLength, bytes.size() / 8,
                          "byte length is not a multiple of the 8-byte slot size"};
    Program p;
    size_t nslots = bytes.size() / 8;
    p.insns.reserve(nslots);
    std::vector<uint32_t> callee_entries;
    size_t max_map_ref = 0;
    bool any_map_ref = false;

    for (size_t slot = 0; slot < nslots; ++slot) {
        size_t off = slot * 8;
        uint8_t opcode = bytes[off];
        if (!opcode_is_valid(opcode))
            throw DecodeError{DecodeError::Kind::UnknownOpcode, slot,
                              "unknown opcode 0x" + std::to_string(opcode) + " at slot " + std::to_string(slot)};
        Instruction i;
        i.cls = static_cast<InsnClass>(opcode & kClassMask);
        i.dst = bytes[off + 1] & 0x0f;
        uint8_t src_field = bytes[off + 1] >> 4;
        i.offset = static_cast<int16_t>(get_u16(bytes, off + 2));
        i.imm = static_cast<int32_t>(get_u32(bytes, off + 4));
        if (i.dst > kMaxReg)
            throw DecodeError{DecodeError::Kind::BadRegisterIndex, slot, "dst register out of range"};

        switch (i.cls) {
        case InsnClass::ALU32:
        case InsnClass::ALU64:
        case InsnClass::JMP:
        case InsnClass::JMP32:
            i.op = (opcode & kOpMask) >> 4;
            i.src_kind = (opcode & kSrcBit) ? SrcKind::Reg : SrcKind::Imm;
            if (i.is_call()) {
                if (src_field > 2)
                    throw DecodeError{DecodeError::Kind::UnknownOpcode, slot, "bad call pseudo code"};
                i.pseudo = static_cast<Pseudo>(src_field);
                if (i.pseudo == Pseudo::LocalCall)
                    callee_entries.push_back(static_cast<uint32_t>(static_cast<int64_t>(slot) + 1 + i.imm));
            } else {
                i.src = src_field;
                if (i.src > kMaxReg)
                    throw DecodeError{DecodeError::Kind::BadRegisterIndex, slot, "src register out of range"};
            }
            break;
        case InsnClass::LD: {
            i.op = static_cast<uint8_t>(MemSize::DW);
            if (src_field > 2)
                throw DecodeError{DecodeError::Kind::UnknownOpcode, slot, "bad wide-load pseudo code"};
            i.pseudo = static_cast<Pseudo>(src_field);
            if (slot + 1 >= nslots)
                throw DecodeError{DecodeError::Kind::TruncatedWideInstruction, slot,
                                  "wide load at slot " + std::to_string(slot) + " has no second slot"};
            size_t off2 = (slot + 1) * 8;
            if (bytes[off2] != 0 || bytes[off2 + 1] != 0 || get_u16(bytes, off2 + 2) != 0)
                throw DecodeError{DecodeError::Kind::TruncatedWideInstruction, slot,
                                  "wide-load continuation slot has nonzero fields"};
            i.wide_imm = get_u32(bytes, off2 + 4);
            if (i.pseudo == Pseudo::MapRef) {
                any_map_ref = true;
                max_map_ref = std::max(max_map_ref, static_cast<size_t>(static_cast<uint32_t>(i.imm)));
            }
            p.insns.push_back(i);
            Instruction cont;
            cont.cls = InsnClass::LD;
            cont.op = static_cast<uint8_t>(MemSize::DW);
            cont.wide_cont = true;
            cont.imm = static_cast<int32_t>(*i.wide_imm);
            p.insns.push_back(cont);
            ++slot;
            continue;
        }
        case InsnClass::LDX:
        case InsnClass::ST:
        case InsnClass::STX:
            i.op = static_cast<uint8_t>(size_from_bits(opcode));
            if (i.cls == InsnClass::ST) {
                if (src_field != 0)
                    throw DecodeError{DecodeError::Kind::BadRegisterIndex, slot, "ST does not take a src register"};
            } else {
                i.src = src_field;
                if (i.src > kMaxReg)
                    throw DecodeError{DecodeError::Kind::BadRegisterIndex, slot, "src register out of range"};
            }
            break;
        }
        p.insns.push_back(i);
    }

    // Recover the subprog partition from local-call targets.
    std::vector<uint32_t> entries{0};
    for (uint32_t e : callee_entries)
        if (e < p.insns.size() && e != 0)
            entries.push_back(e);
    std::sort(entries.begin(), entries.end());
    entries.erase(std::unique(entries.begin(), entries.end()), entries.end());
    p.subprogs.clear();
    for (size_t k = 0; k < entries.size(); ++k) {
        uint32_t start = entries[k];
        uint32_t end = k + 1 < entries.size() ? entries[k + 1] : static_cast<uint32_t>(p.insns.size());
        std::string name = k == 0 ? "main" : "sub" + std::to_string(k);
        p.subprogs.push_back({name, start, end - start});
    }
    if (any_map_ref)
        for (size_t k = 0; k <= max_map_ref; ++k)
            p.map_refs.push_back({"map" + std::to_string(k), std::nullopt});
    return p;
}

} // namespace ubpf

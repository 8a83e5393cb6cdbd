// Copyright (c) ubpf-forge contributors.
// SPDX-License-Identifier: MIT
#include "ubpf/engine.hpp"

#include <cstring>

namespace ubpf {

ExecContext::ExecContext(uint32_t stack_size, uint32_t max_call_depth, const std::vector<uint8_t>& packet)
    : stack_size_{stack_size}, max_depth_{max_call_depth}, packet_{packet} {
    stack_mem_.assign(static_cast<size_t>(stack_size_) * max_depth_, 0);
    ctx_mem_.assign(16, 0);
    scratch_mem_.assign(kScratchSize, 0);
    uint64_t data = kPacketBase;
    uint64_t data_end = kPacketBase + packet_.size();
    std::memcpy(ctx_mem_.data(), &data, 8);
    std::memcpy(ctx_mem_.data() + 8, &data_end, 8);
    add_region(kCtxBase, ctx_mem_.size(), ctx_mem_.data(), false);
    add_region(kStackBase, stack_mem_.size(), stack_mem_.data(), true);
    if (!packet_.empty())
        add_region(kPacketBase, packet_.size(), packet_.data(), true);
    add_region(kScratchBase, scratch_mem_.size(), scratch_mem_.data(), true);
}

void ExecContext::add_region(uint64_t base, uint64_t size, uint8_t* data, bool writable) {
    regions_.push_back({base, size, data, writable});
}

uint8_t* ExecContext::translate(uint64_t addr, uint64_t size, bool write) {
    for (const Region& r : regions_) {
        if (addr >= r.base && size <= r.size && addr - r.base <= r.size - size) {
            if (write && !r.writable)
                break;
            return r.data + (addr - r.base);
        }
    }
    ++faults;
    return nullptr;
}

uint64_t ExecContext::scratch_alloc(uint64_t size) {
    size = (size + 7) & ~uint64_t{7};
    if (scratch_used_ + size > scratch_mem_.size())
        throw EngineError{EngineError::Kind::ScratchExhausted, "scratch arena exhausted"};
    uint64_t addr = kScratchBase + scratch_used_;
    scratch_used_ += size;
    return addr;
}

namespace {

uint64_t alu_eval64(AluOp op, uint64_t x, uint64_t y) {
    switch (op) {
    case AluOp::ADD: return x + y;
    case AluOp::SUB: return x - y;
    case AluOp::MUL: return x * y;
    case AluOp::DIV: return y ? x / y : 0;
    case AluOp::MOD: return y ? x % y : x;
    case AluOp::OR: return x | y;
    case AluOp::AND: return x & y;
    case AluOp::LSH: return x << (y & 63);
    case AluOp::RSH: return x >> (y & 63);
    case AluOp::ARSH: return static_cast<uint64_t>(static_cast<int64_t>(x) >> (y & 63));
    case AluOp::NEG: return 0 - x;
    case AluOp::XOR: return x ^ y;
    case AluOp::MOV: return y;
    case AluOp::END: return x;
    }
    return 0;
}

uint64_t alu_eval32(AluOp op, uint64_t x64, uint64_t y64) {
    uint32_t x = static_cast<uint32_t>(x64);
    uint32_t y = static_cast<uint32_t>(y64);
    switch (op) {
    case AluOp::ADD: return x + y;
    case AluOp::SUB: return x - y;
    case AluOp::MUL: return x * y;
    case AluOp::DIV: return y ? x / y : 0;
    case AluOp::MOD: return y ? x % y : x;
    case AluOp::OR: return x | y;
    case AluOp::AND: return x & y;
    case AluOp::LSH: return x << (y & 31);
    case AluOp::RSH: return x >> (y & 31);
    case AluOp::ARSH: return static_cast<uint32_t>(static_cast<int32_t>(x) >> (y & 31));
    case AluOp::NEG: return static_cast<uint32_t>(0 - x);
    case AluOp::XOR: return x ^ y;
    case AluOp::MOV: return y;
    case AluOp::END: return x;
    }
    return 0;
}

uint64_t bswap_bits(uint64_t x, uint32_t bits) {
    uint64_t out = 0;
    for (uint32_t k = 0; k < bits / 8; ++k)
        out |= ((x >> (8 * k)) & 0xff) << (8 * (bits / 8 - 1 - k));
    return out;
}

uint64_t end_eval(uint64_t x, uint32_t bits, bool to_big) {
    if (to_big)
        return bswap_bits(x, bits);
    return bits >= 64 ? x : x & ((1ull << bits) - 1); // little-endian host
}

bool jump_taken(JmpOp op, uint64_t x, uint64_t y, bool wide) {
    if (!wide) {
        x = static_cast<uint32_t>(x);
        y = static_cast<uint32_t>(y);
    }
    int64_t sx = wide ? static_cast<int64_t>(x) : static_cast<int32_t>(static_cast<uint32_t>(x));
    int64_t sy = wide ? static_cast<int64_t>(y) : static_cast<int32_t>(static_cast<uint32_t>(y));
    switch (op) {
    case JmpOp::JEQ: return x == y;
    case JmpOp::JNE: return x != y;
    case JmpOp::JGT: return x > y;
    case JmpOp::JGE: return x >= y;
    case JmpOp::JLT: return x < y;
    case JmpOp::JLE: return x <= y;
    case JmpOp::JSET: return (x & y) != 0;
    case JmpOp::JSGT: return sx > sy;
    case JmpOp::JSGE: return sx >= sy;
    case JmpOp::JSLT: return sx < sy;
    case JmpOp::JSLE: return sx <= sy;
    default: return false;
    }
}

uint64_t load_sized(const uint8_t* p, uint32_t size) {
    uint64_t v = 0;
    std::memcpy(&v, p, size);
    return v;
}

void store_sized(uint8_t* p, uint32_t size, uint64_t v) { std::memcpy(p, &v, size); }

struct InterpFrame {
    uint32_t ret_pc;
    std::array<uint64_t, 4> saved; // r6..r9
    uint64_t saved_fp;
};

} // namespace

ExecResult interpret(const Program& p, ExecContext& ctx, EngineEnv& env, uint64_t ctx_vaddr, uint64_t fuel) {
    std::array<uint64_t, 11> r{};
    r[1] = ctx_vaddr;
    r[10] = ctx.frame_top(0);
    std::vector<InterpFrame> frames;
    uint64_t executed = 0;
    uint32_t pc = p.subprogs[0].start;

    auto fault = [&](uint64_t addr) -> EngineError {
        return EngineError{EngineError::Kind::BoundsViolation,
                           "out-of-bounds access at 0x" + std::to_string(addr) + " (pc " + std::to_string(pc) +
                               ")"};
    };

    for (;;) {
        if (executed >= fuel)
            throw EngineError{EngineError::Kind::FuelExhausted, "interpreter fuel exhausted"};
        if (pc >= p.insns.size())
            throw EngineError{EngineError::Kind::BadProgram, "pc out of range"};
        const Instruction& i = p.insns[pc];
        ++executed;
        ++ctx.instruction_count;

        switch (i.cls) {
        case InsnClass::ALU32:
        case InsnClass::ALU64: {
            bool wide = i.cls == InsnClass::ALU64;
            AluOp op = i.alu_op();
            if (op == AluOp::END) {
                r[i.dst] = end_eval(r[i.dst], static_cast<uint32_t>(i.imm), i.src_kind == SrcKind::Reg);
            } else if (op == AluOp::NEG) {
                r[i.dst] = wide ? alu_eval64(op, r[i.dst], 0) : alu_eval32(op, r[i.dst], 0);
            } else {
                uint64_t operand = i.src_kind == SrcKind::Reg
                                       ? r[i.src]
                                       : static_cast<uint64_t>(static_cast<int64_t>(i.imm));
                r[i.dst] = wide ? alu_eval64(op, r[i.dst], operand) : alu_eval32(op, r[i.dst], operand);
            }
            ++pc;
            break;
        }
        case InsnClass::LD: {
            if (i.wide_cont)
                throw EngineError{EngineError::Kind::BadProgram, "jumped into a wide instruction"};
            if (i.pseudo == Pseudo::MapRef)
                r[i.dst] = map_handle_vaddr(static_cast<uint32_t>(i.imm));
            else if (i.pseudo == Pseudo::MapValueBase)
                r[i.dst] = map_region_vaddr(static_cast<uint32_t>(i.imm));
            else
                r[i.dst] = i.imm64();
            pc += 2;
            break;
        }
        case InsnClass::LDX: {
            uint64_t addr = r[i.src] + static_cast<int64_t>(i.offset);
            uint8_t* host = ctx.translate(addr, i.access_size(), false);
            if (!host)
                throw fault(addr);
            r[i.dst] = load_sized(host, i.access_size());
            ++pc;
            break;
        }
        case InsnClass::ST:
        case InsnClass::STX: {
            uint64_t addr = r[i.dst] + static_cast<int64_t>(i.offset);
            uint8_t* host = ctx.translate(addr, i.access_size(), true);
            if (!host)
                throw fault(addr);
            uint64_t v = i.cls == InsnClass::STX ? r[i.src] : static_cast<uint64_t>(static_cast<int64_t>(i.imm));
            store_sized(host, i.access_size(), v);
            ++pc;
            break;
        }
        case InsnClass::JMP:
        case InsnClass::JMP32: {
            JmpOp op = i.jmp_op();
            if (op == JmpOp::JA) {
                pc = static_cast<uint32_t>(static_cast<int64_t>(pc) + 1 + i.offset);
                break;
            }
            if (op == JmpOp::EXIT) {
                if (frames.empty())
                    return {r[0], executed};
                InterpFrame f = frames.back();
                frames.pop_back();
                r[6] = f.saved[0];
                r[7] = f.saved[1];
                r[8] = f.saved[2];
                r[9] = f.saved[3];
                r[10] = f.saved_fp;
                pc = f.ret_pc;
                break;
            }
            if (op == JmpOp::CALL) {
                if (i.pseudo == Pseudo::LocalCall) {
                    if (frames.size() + 1 >= ctx.max_call_depth())
                        throw EngineError{EngineError::Kind::BadProgram, "call depth exceeded"};
                    frames.push_back({pc + 1, {r[6], r[7], r[8], r[9]}, r[10]});
                    r[10] = ctx.frame_top(static_cast<uint32_t>(frames.size()));
                    pc = static_cast<uint32_t>(static_cast<int64_t>(pc) + 1 + i.imm);
                    break;
                }
                if (i.pseudo == Pseudo::DirectCall) {
                    uint32_t map_idx = static_cast<uint32_t>(i.imm) >> 8;
                    int32_t fn = i.imm & 0xff;
                    r[0] = env.direct_map_call(ctx, map_idx, fn, {r[1], r[2], r[3], r[4], r[5]});
                    ++pc;
                    break;
                }
                r[0] = env.call_helper(ctx, i.imm, {r[1], r[2], r[3], r[4], r[5]});
                ++pc;
                break;
            }
            uint64_t y = i.src_kind == SrcKind::Reg ? r[i.src]
                                                    : static_cast<uint64_t>(static_cast<int64_t>(i.imm));
            bool taken = jump_taken(op, r[i.dst], y, i.cls == InsnClass::JMP);
            pc = taken ? static_cast<uint32_t>(static_cast<int64_t>(pc) + 1 + i.offset) : pc + 1;
            break;
        }
        }
    }
}

} // namespace ubpf

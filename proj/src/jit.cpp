// Copyright (c) ubpf-forge contributors.
// SPDX-License-Identifier: MIT
//
// JIT-style lowering: per-subprog prologue/epilogue, a body translated mostly
// one-to-one, an exception table for untrusted loads, optional constant
// blinding, and a finalize step that makes the image read-only. The lowered
// form is an internal op list executed by a second evaluator.
#include "ubpf/engine.hpp"

#include <cstring>
#include <random>

namespace ubpf {

void JitImage::patch_op(uint32_t sub, uint32_t body_idx, const LoweredOp& op) {
    if (read_only_)
        throw EngineError{EngineError::Kind::ReadOnlyImage, "image is finalized"};
    subs_.at(sub).body.at(body_idx) = op;
}

void JitImage::add_exception_entry(uint32_t sub, uint32_t body_idx) {
    if (read_only_)
        throw EngineError{EngineError::Kind::ReadOnlyImage, "image is finalized"};
    exception_table_[{sub, body_idx}] = true;
}

namespace {

std::vector<LoweredOp> make_prologue() {
    return {
        {.kind = LKind::SaveFp},
        {.kind = LKind::PushCsr},
        {.kind = LKind::InitFrame},
    };
}

std::vector<LoweredOp> make_epilogue() {
    return {
        {.kind = LKind::PopCsr},
        {.kind = LKind::RestoreFp},
    };
}

struct BodyInsn {
    LoweredOp op;
    int64_t jump_target_slot{-1}; // pre-resolution slot target
    bool blindable{};
};

} // namespace

JitImage lower(const Program& p, const std::vector<InsnNotes>& notes, bool blind, uint64_t seed,
               uint64_t blind_threshold) {
    JitImage img;
    std::mt19937_64 rng{seed};

    for (size_t spi = 0; spi < p.subprogs.size(); ++spi) {
        const Subprog& sp = p.subprogs[spi];
        LoweredSub sub;
        sub.prologue = make_prologue();
        sub.epilogue = make_epilogue();

        // First pass: translate slots to body ops one-to-one.
        std::vector<BodyInsn> body;
        std::vector<int32_t> body_of_slot(p.insns.size(), -1);
        std::vector<std::pair<uint32_t, bool>> checked_sites; // pre-blind body idx
        for (uint32_t s = sp.start; s < sp.start + sp.len; ++s) {
            const Instruction& i = p.insns[s];
            if (i.wide_cont)
                continue;
            body_of_slot[s] = static_cast<int32_t>(body.size());
            BodyInsn b;
            switch (i.cls) {
            case InsnClass::ALU32:
            case InsnClass::ALU64: {
                b.op.kind = LKind::Alu;
                b.op.sub = i.op;
                b.op.wide = i.cls == InsnClass::ALU64;
                b.op.dst = i.dst;
                b.op.src = i.src;
                b.op.reg_operand = i.src_kind == SrcKind::Reg;
                b.op.imm = static_cast<uint64_t>(static_cast<int64_t>(i.imm));
                // END encodes its flavor in the operand kind and width in imm.
                AluOp ao = i.alu_op();
                b.blindable = !b.op.reg_operand && ao != AluOp::NEG && ao != AluOp::END;
                break;
            }
            case InsnClass::LD:
                b.op.kind = LKind::LoadImm64;
                b.op.dst = i.dst;
                if (i.pseudo == Pseudo::MapRef)
                    b.op.imm = map_handle_vaddr(static_cast<uint32_t>(i.imm));
                else if (i.pseudo == Pseudo::MapValueBase)
                    b.op.imm = map_region_vaddr(static_cast<uint32_t>(i.imm));
                else
                    b.op.imm = i.imm64();
                b.blindable = i.pseudo == Pseudo::None;
                break;
            case InsnClass::LDX:
                b.op.kind = LKind::Load;
                b.op.sub = i.op;
                b.op.dst = i.dst;
                b.op.src = i.src;
                b.op.off = i.offset;
                if (notes[s].untrusted_load) {
                    b.op.checked = true;
                    checked_sites.emplace_back(static_cast<uint32_t>(body.size()), true);
                }
                break;
            case InsnClass::ST:
                b.op.kind = LKind::StoreImm;
                b.op.sub = i.op;
                b.op.dst = i.dst;
                b.op.off = i.offset;
                b.op.imm = static_cast<uint64_t>(static_cast<int64_t>(i.imm));
                b.blindable = true;
                break;
            case InsnClass::STX:
                b.op.kind = LKind::StoreReg;
                b.op.sub = i.op;
                b.op.dst = i.dst;
                b.op.src = i.src;
                b.op.off = i.offset;
                break;
            case InsnClass::JMP:
            case InsnClass::JMP32: {
                JmpOp j = i.jmp_op();
                if (j == JmpOp::EXIT) {
                    b.op.kind = LKind::Exit;
                } else if (j == JmpOp::CALL) {
                    if (i.pseudo == Pseudo::LocalCall) {
                        b.op.kind = LKind::LocalCall;
                        int callee = p.subprog_of(static_cast<uint32_t>(static_cast<int64_t>(s) + 1 + i.imm));
                        b.op.aux = static_cast<uint32_t>(callee);
                    } else if (i.pseudo == Pseudo::DirectCall) {
                        b.op.kind = LKind::DirectMapCall;
                        b.op.aux = static_cast<uint32_t>(i.imm);
                    } else {
                        b.op.kind = LKind::HelperCall;
                        b.op.aux = static_cast<uint32_t>(i.imm);
                    }
                } else {
                    b.op.kind = LKind::Jump;
                    b.op.sub = i.op;
                    b.op.wide = i.cls == InsnClass::JMP;
                    b.op.dst = i.dst;
                    b.op.src = i.src;
                    b.op.reg_operand = i.src_kind == SrcKind::Reg;
                    b.op.imm = static_cast<uint64_t>(static_cast<int64_t>(i.imm));
                    b.jump_target_slot = static_cast<int64_t>(s) + 1 + i.offset;
                    b.blindable = j != JmpOp::JA && !b.op.reg_operand;
                }
                break;
            }
            }
            body.push_back(std::move(b));
        }

        // Second pass: blinding expansion with an index remap.
        std::vector<uint32_t> final_of_pre(body.size());
        std::vector<LoweredOp> out;
        std::vector<int64_t> out_jump_slot; // parallel to out
        auto magnitude = [](uint64_t imm) {
            int64_t s = static_cast<int64_t>(imm);
            return static_cast<uint64_t>(s < 0 ? -s : s);
        };
        for (uint32_t k = 0; k < body.size(); ++k) {
            final_of_pre[k] = static_cast<uint32_t>(out.size());
            BodyInsn& b = body[k];
            bool do_blind = blind && b.blindable && magnitude(b.op.imm) > blind_threshold;
            if (!do_blind) {
                out.push_back(b.op);
                out_jump_slot.push_back(b.jump_target_slot);
                continue;
            }
            uint64_t key = rng();
            out.push_back({.kind = LKind::BlindMov, .imm = b.op.imm ^ key});
            out_jump_slot.push_back(-1);
            out.push_back({.kind = LKind::BlindXor, .imm = key});
            out_jump_slot.push_back(-1);
            LoweredOp patched = b.op;
            patched.imm = 0;
            switch (b.op.kind) {
            case LKind::Alu:
            case LKind::Jump:
                patched.reg_operand = true;
                patched.src = kBlindReg;
                break;
            case LKind::LoadImm64:
                patched.kind = LKind::Alu;
                patched.sub = static_cast<uint8_t>(AluOp::MOV);
                patched.wide = true;
                patched.reg_operand = true;
                patched.src = kBlindReg;
                break;
            case LKind::StoreImm:
                patched.kind = LKind::StoreReg;
                patched.src = kBlindReg;
                break;
            default:
                break;
            }
            out.push_back(patched);
            out_jump_slot.push_back(b.jump_target_slot);
        }

        // Resolve jump targets to final body indices.
        for (size_t k = 0; k < out.size(); ++k) {
            if (out_jump_slot[k] < 0)
                continue;
            int32_t pre = body_of_slot[out_jump_slot[k]];
            if (pre < 0)
                throw EngineError{EngineError::Kind::BadProgram, "jump target outside the subprog"};
            out[k].target = final_of_pre[pre];
        }

        sub.body = std::move(out);
        img.subs_.push_back(std::move(sub));

        for (auto [pre_idx, zero] : checked_sites)
            img.exception_table_[{static_cast<uint32_t>(spi), final_of_pre[pre_idx]}] = zero;
    }
    img.finalize();
    return img;
}

namespace {

uint64_t l_alu64(AluOp op, uint64_t x, uint64_t y) {
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

uint64_t l_alu32(AluOp op, uint64_t x64, uint64_t y64) {
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

uint64_t l_bswap(uint64_t x, uint32_t bits, bool to_big) {
    if (!to_big)
        return bits >= 64 ? x : x & ((1ull << bits) - 1);
    uint64_t out = 0;
    for (uint32_t k = 0; k < bits / 8; ++k)
        out |= ((x >> (8 * k)) & 0xff) << (8 * (bits / 8 - 1 - k));
    return out;
}

bool l_taken(JmpOp op, uint64_t x, uint64_t y, bool wide) {
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

uint32_t mem_bytes(uint8_t sub) { return mem_size_bytes(static_cast<MemSize>(sub)); }

struct ImageFrame {
    uint32_t sub;
    uint32_t resume;
};

} // namespace

ExecResult exec_image(const JitImage& img, ExecContext& ctx, EngineEnv& env, uint64_t ctx_vaddr, uint64_t fuel) {
    std::array<uint64_t, 12> regs{};
    regs[1] = ctx_vaddr;
    return exec_image_regs(img, ctx, env, fuel, regs);
}

ExecResult exec_image_regs(const JitImage& img, ExecContext& ctx, EngineEnv& env, uint64_t fuel,
                           std::array<uint64_t, 12>& r) {
    if (!img.read_only())
        throw EngineError{EngineError::Kind::BadProgram, "image must be finalized before execution"};
    std::vector<uint64_t> control; // saved frame pointers and callee-saved regs
    std::vector<ImageFrame> calls;
    uint32_t depth = 0;
    uint64_t executed = 0;

    auto run_seq = [&](const std::vector<LoweredOp>& ops) {
        for (const LoweredOp& op : ops) {
            switch (op.kind) {
            case LKind::SaveFp:
                control.push_back(r[10]);
                break;
            case LKind::PushCsr:
                control.push_back(r[6]);
                control.push_back(r[7]);
                control.push_back(r[8]);
                control.push_back(r[9]);
                break;
            case LKind::InitFrame:
                r[10] = ctx.frame_top(depth);
                ++depth;
                break;
            case LKind::PopCsr:
                r[9] = control.back(); control.pop_back();
                r[8] = control.back(); control.pop_back();
                r[7] = control.back(); control.pop_back();
                r[6] = control.back(); control.pop_back();
                break;
            case LKind::RestoreFp:
                r[10] = control.back();
                control.pop_back();
                --depth;
                break;
            default:
                throw EngineError{EngineError::Kind::BadProgram, "body op in prologue/epilogue"};
            }
        }
    };

    uint32_t cur = 0;
    run_seq(img.subs()[cur].prologue);
    uint32_t pc = 0;

    for (;;) {
        if (executed >= fuel)
            throw EngineError{EngineError::Kind::FuelExhausted, "image fuel exhausted"};
        const auto& body = img.subs()[cur].body;
        if (pc >= body.size())
            throw EngineError{EngineError::Kind::BadProgram, "body index out of range"};
        const LoweredOp& op = body[pc];
        ++executed;
        ++ctx.instruction_count;

        switch (op.kind) {
        case LKind::Alu: {
            AluOp ao = static_cast<AluOp>(op.sub);
            if (ao == AluOp::END) {
                r[op.dst] = l_bswap(r[op.dst], static_cast<uint32_t>(op.imm), op.reg_operand);
            } else if (ao == AluOp::NEG) {
                r[op.dst] = op.wide ? l_alu64(ao, r[op.dst], 0) : l_alu32(ao, r[op.dst], 0);
            } else {
                uint64_t y = op.reg_operand ? r[op.src] : op.imm;
                r[op.dst] = op.wide ? l_alu64(ao, r[op.dst], y) : l_alu32(ao, r[op.dst], y);
            }
            ++pc;
            break;
        }
        case LKind::LoadImm64:
            r[op.dst] = op.imm;
            ++pc;
            break;
        case LKind::BlindMov:
            r[kBlindReg] = op.imm;
            ++pc;
            break;
        case LKind::BlindXor:
            r[kBlindReg] ^= op.imm;
            ++pc;
            break;
        case LKind::Load: {
            uint64_t addr = r[op.src] + static_cast<int64_t>(op.off);
            uint8_t* host = ctx.translate(addr, mem_bytes(op.sub), false);
            if (!host) {
                // An untrusted load that faults reads as zeroed memory.
                auto it = img.exception_table().find({cur, pc});
                if (op.checked && it != img.exception_table().end()) {
                    r[op.dst] = 0;
                    ++pc;
                    break;
                }
                throw EngineError{EngineError::Kind::MissingExceptionEntry,
                                  "fault without an exception-table entry"};
            }
            uint64_t v = 0;
            std::memcpy(&v, host, mem_bytes(op.sub));
            r[op.dst] = v;
            ++pc;
            break;
        }
        case LKind::StoreReg:
        case LKind::StoreImm: {
            uint64_t addr = r[op.dst] + static_cast<int64_t>(op.off);
            uint8_t* host = ctx.translate(addr, mem_bytes(op.sub), true);
            if (!host)
                throw EngineError{EngineError::Kind::BoundsViolation, "store fault"};
            uint64_t v = op.kind == LKind::StoreReg ? r[op.src] : op.imm;
            std::memcpy(host, &v, mem_bytes(op.sub));
            ++pc;
            break;
        }
        case LKind::Jump: {
            JmpOp j = static_cast<JmpOp>(op.sub);
            if (j == JmpOp::JA) {
                pc = op.target;
                break;
            }
            uint64_t y = op.reg_operand ? r[op.src] : op.imm;
            pc = l_taken(j, r[op.dst], y, op.wide) ? op.target : pc + 1;
            break;
        }
        case LKind::HelperCall:
            r[0] = env.call_helper(ctx, static_cast<int32_t>(op.aux), {r[1], r[2], r[3], r[4], r[5]});
            ++pc;
            break;
        case LKind::DirectMapCall:
            r[0] = env.direct_map_call(ctx, op.aux >> 8, static_cast<int32_t>(op.aux & 0xff),
                                       {r[1], r[2], r[3], r[4], r[5]});
            ++pc;
            break;
        case LKind::LocalCall: {
            if (depth >= ctx.max_call_depth())
                throw EngineError{EngineError::Kind::BadProgram, "call depth exceeded"};
            calls.push_back({cur, pc + 1});
            cur = op.aux;
            run_seq(img.subs()[cur].prologue);
            pc = 0;
            break;
        }
        case LKind::Exit:
            run_seq(img.subs()[cur].epilogue);
            if (calls.empty())
                return {r[0], executed};
            cur = calls.back().sub;
            pc = calls.back().resume;
            calls.pop_back();
            break;
        default:
            throw EngineError{EngineError::Kind::BadProgram, "prologue op in body"};
        }
    }
}

} // namespace ubpf

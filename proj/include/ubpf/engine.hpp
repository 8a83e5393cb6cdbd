// Copyright (c) ubpf-forge contributors.
// SPDX-License-Identifier: MIT
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "ubpf/isa.hpp"
#include "ubpf/verifier.hpp"

namespace ubpf {

// Virtual address space layout shared by both evaluators. Programs hold
// virtual addresses in registers; every access is translated and
// bounds-instrumented.
constexpr uint64_t kCtxBase = 0x10000;
constexpr uint64_t kStackBase = 0x20000;
constexpr uint64_t kPacketBase = 0x100000;
constexpr uint64_t kScratchBase = 0x200000;
constexpr uint64_t kScratchSize = 0x10000;
constexpr uint64_t kMapHandleBase = 0x4000000;
constexpr uint64_t kMapRegionBase = 0x10000000;
constexpr uint64_t kMapRegionStride = 0x100000;

constexpr uint64_t map_handle_vaddr(uint32_t map_idx) { return kMapHandleBase + map_idx; }
constexpr uint64_t map_region_vaddr(uint32_t map_idx) { return kMapRegionBase + map_idx * kMapRegionStride; }

struct EngineError : std::runtime_error {
    enum class Kind {
        FuelExhausted,
        BoundsViolation,
        MissingExceptionEntry,
        ReadOnlyImage,
        BadProgram,
        ScratchExhausted,
    };
    Kind kind;
    EngineError(Kind kind, const std::string& what) : std::runtime_error{what}, kind{kind} {}
};

// Execution memory: named regions over host buffers, a scratch arena for
// runtime-allocated cells, and the trace sink.
class ExecContext {
  public:
    struct Region {
        uint64_t base;
        uint64_t size;
        uint8_t* data;
        bool writable;
    };

    ExecContext(uint32_t stack_size, uint32_t max_call_depth, const std::vector<uint8_t>& packet);

    void add_region(uint64_t base, uint64_t size, uint8_t* data, bool writable);

    // nullptr when [addr, addr+size) is not inside a single region (or the
    // region is read-only for writes); every miss is counted.
    uint8_t* translate(uint64_t addr, uint64_t size, bool write);

    uint64_t scratch_alloc(uint64_t size);

    uint64_t packet_len() const { return packet_.size(); }
    uint32_t stack_size() const { return stack_size_; }
    uint32_t max_call_depth() const { return max_depth_; }

    // Top of stack frame `depth` (frames grow downward from their top).
    uint64_t frame_top(uint32_t depth) const { return kStackBase + (depth + 1) * uint64_t{stack_size_}; }

    std::vector<std::string> trace;   // trace_emit output, hex encoded
    uint64_t faults{};                // translation misses (instrumentation)
    uint64_t instruction_count{};

  private:
    uint32_t stack_size_;
    uint32_t max_depth_;
    std::vector<uint8_t> packet_;
    std::vector<uint8_t> stack_mem_;
    std::vector<uint8_t> ctx_mem_;
    std::vector<uint8_t> scratch_mem_;
    uint64_t scratch_used_{};
    std::vector<Region> regions_;
};

// Runtime services the evaluators call out to.
class EngineEnv {
  public:
    virtual ~EngineEnv() = default;
    virtual uint64_t call_helper(ExecContext& ctx, int32_t helper_id, std::array<uint64_t, 5> args) = 0;
    virtual uint64_t direct_map_call(ExecContext& ctx, uint32_t map_idx, int32_t op,
                                     std::array<uint64_t, 5> args) = 0;
};

struct ExecResult {
    uint64_t r0;
    uint64_t instructions;
};

// Reference interpreter: decodes and executes the instruction stream
// directly. ctx_vaddr lands in r1.
ExecResult interpret(const Program& p, ExecContext& ctx, EngineEnv& env, uint64_t ctx_vaddr, uint64_t fuel);

// ---- lowered form ----------------------------------------------------------

enum class LKind : uint8_t {
    Alu,          // dst = dst op operand (sub = AluOp, wide (64-bit) flag)
    LoadImm64,    // dst = imm
    Load,         // dst = *(size*)(src + off); checked loads zero-fill on fault
    StoreReg,     // *(size*)(dst + off) = src
    StoreImm,     // *(size*)(dst + off) = imm
    Jump,         // conditional or unconditional; target is a body index
    HelperCall,   // aux = helper id
    LocalCall,    // aux = callee subprog index
    DirectMapCall,// aux = (map_idx << 8) | helper id
    Exit,
    BlindMov,     // blind = imm (a blinded constant)
    BlindXor,     // blind ^= imm (the per-site key)
    SaveFp,       // prologue: push the frame pointer
    PushCsr,      // prologue: push r6..r9
    InitFrame,    // prologue: point r10 at the new frame top
    PopCsr,       // epilogue: restore r6..r9
    RestoreFp,    // epilogue: restore the frame pointer and leave the frame
};

// Register file index of the internal blinding scratch register.
constexpr uint8_t kBlindReg = 11;

struct LoweredOp {
    LKind kind{LKind::Exit};
    uint8_t sub{};      // AluOp / JmpOp / MemSize, depending on kind
    bool wide{true};    // 64-bit ALU / 64-bit jump compare
    bool reg_operand{}; // ALU/Jump use src register instead of imm
    bool checked{};     // Load: has an exception-table entry
    uint8_t dst{};
    uint8_t src{};
    int32_t off{};
    uint64_t imm{};     // operand immediates (the blinding target)
    uint32_t target{};  // Jump: absolute body index
    uint32_t aux{};     // call ids

    bool operator==(const LoweredOp&) const = default;
};

struct LoweredSub {
    std::vector<LoweredOp> prologue;
    std::vector<LoweredOp> body;
    std::vector<LoweredOp> epilogue;
};

class JitImage {
  public:
    const std::vector<LoweredSub>& subs() const { return subs_; }
    const LoweredSub& main() const { return subs_[0]; }
    // (subprog, body index) -> zero-fill-and-continue handler exists.
    const std::map<std::pair<uint32_t, uint32_t>, bool>& exception_table() const { return exception_table_; }
    bool read_only() const { return read_only_; }

    void finalize() { read_only_ = true; }

    // Post-finalize mutation is refused.
    void patch_op(uint32_t sub, uint32_t body_idx, const LoweredOp& op);
    void add_exception_entry(uint32_t sub, uint32_t body_idx);

  private:
    friend JitImage lower(const Program&, const std::vector<InsnNotes>&, bool, uint64_t, uint64_t);
    friend class ImageBuilder;
    std::vector<LoweredSub> subs_;
    std::map<std::pair<uint32_t, uint32_t>, bool> exception_table_;
    bool read_only_{false};
};

// Lowers a verified, transformed program: per-subprog prologue/body/epilogue,
// exception-table entries for untrusted loads, and (optionally) constant
// blinding of every immediate operand with |imm| > blind_threshold.
JitImage lower(const Program& p, const std::vector<InsnNotes>& notes, bool blind, uint64_t seed,
               uint64_t blind_threshold = 0);

// Second evaluator over the lowered form. Checked loads that fault read as
// zero; any other fault is an error.
ExecResult exec_image(const JitImage& img, ExecContext& ctx, EngineEnv& env, uint64_t ctx_vaddr, uint64_t fuel);

// Variant exposing the caller's register file: the prologue/epilogue pair
// restores r6..r9 and r10 to their entry values by the time it returns.
ExecResult exec_image_regs(const JitImage& img, ExecContext& ctx, EngineEnv& env, uint64_t fuel,
                           std::array<uint64_t, 12>& regs);

} // namespace ubpf

// Copyright (c) ubpf-forge contributors.
// SPDX-License-Identifier: MIT
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ubpf/absdom.hpp"
#include "ubpf/cfg.hpp"
#include "ubpf/isa.hpp"

namespace ubpf {

// The eight safety properties every rejection is classified under.
enum class SafetyProperty : uint8_t {
    MemorySafety,
    TypeSafety,
    ResourceSafety,
    InformationLeakSafety,
    DataRaceFreedom,
    Termination,
    DeadlockFreedom,
    ExecutionContextInvariants,
};

const char* safety_property_name(SafetyProperty p);

enum class ViolationCode : uint8_t {
    // Memory Safety
    OutOfBounds,
    MisalignedAccess,
    NullDeref,
    ScalarAsPointer,
    UseAfterFree,
    // Type Safety
    BadPointerArithmetic,
    PartialPointerCopy,
    BadPointerComparison,
    ArgTypeMismatch,
    // Resource Safety
    ResourceLeak,
    ExitWhileLocked,
    ReleaseOfUnownedRef,
    DoubleRelease,
    IterMisuse,
    // Information Leak Safety
    UninitializedRead,
    UninitializedStackRead,
    PointerLeak,
    // Data Race Freedom
    LockRegionAccess,
    // Termination
    ComplexityLimitExceeded,
    // Deadlock Freedom
    SecondLockHeld,
    UnlockWithoutLock,
    LockRegionMismatch,
    // Upholding Execution Context Invariants
    WriteToR10,
    CtxWrite,
    UninitializedReturn,
    UnknownHelper,
    CallDepthExceeded,
};

SafetyProperty violation_property(ViolationCode c);
const char* violation_code_name(ViolationCode c);

enum class RegType : uint8_t {
    NOT_INIT,
    SCALAR_VALUE,
    PTR_TO_CTX,
    PTR_TO_STACK,
    PTR_TO_PACKET,
    PTR_TO_PACKET_END,
    PTR_TO_MAP_VALUE,
    PTR_TO_MAP_VALUE_OR_NULL,
    CONST_MAP_PTR,
};

const char* reg_type_name(RegType t);

// Provenance tags for PTR_TO_MAP_VALUE-shaped memory that is not a real map.
constexpr int32_t kIterItemProvenance = -2;   // cell returned by iter_next
constexpr int32_t kScratchMemProvenance = -3; // object returned by acquire_test_ref

struct RegState {
    RegType rtype{RegType::NOT_INIT};
    ScalarAbs scalar{};  // value for scalars, variable byte offset for pointers
    int64_t fixed_off{}; // fixed byte offset for pointers
    uint32_t mem_len{};  // dereference window (ctx size / map value size / cell size)
    int32_t map_idx{-1}; // provenance: map_refs index, or a negative tag above
    uint32_t frame{};    // provenance for stack pointers
    int32_t ref_id{};    // owned-resource id, 0 = none
    int32_t id{};        // identity group: or-null propagation, lock regions
    bool precise{false};
    bool live_written{false}; // written since the last checkpoint
    bool live_read{false};    // read by the subtree below the checkpoint snapshot

    bool is_pointer() const { return rtype != RegType::NOT_INIT && rtype != RegType::SCALAR_VALUE; }
};

enum class SlotTag : uint8_t { INVALID, MISC, ZERO, SPILL };

struct StackSlot {
    std::array<SlotTag, 8> tags{}; // per byte, SlotTag::INVALID default
    RegState spill{};              // valid iff some tag is SPILL
    bool live_written{false};
    bool live_read{false};
};

// Per-frame stack knowledge; keys are 8-byte-aligned offsets below the frame
// top (-8, -16, ...). Absent slots are uninitialized.
struct StackState {
    std::map<int32_t, StackSlot> slots;
};

struct RefInfo {
    int32_t ref_id;
    int32_t origin_helper;
    uint32_t acquire_insn;
};

struct IterInfo {
    uint32_t frame;
    int32_t slot_off;
};

struct LockInfo {
    int32_t map_idx;
    int32_t reg_id;
    int64_t off;
};

struct PathState {
    std::vector<RefInfo> acquired_refs;
    std::optional<LockInfo> lock;
    std::vector<IterInfo> iters;
    uint64_t branch_count{};
};

struct Frame {
    std::array<RegState, 11> regs{};
    StackState stack;
    uint32_t subprog{};
    uint32_t ret_pc{}; // resume slot in the caller
};

struct Checkpoint; // one checkpointed, possibly still in-flight verifier state

struct TraceStep {
    std::shared_ptr<const TraceStep> prev;
    uint32_t insn;
    uint16_t frame;
    Checkpoint* node; // checkpoint active when the step executed (may be null)
};

struct VerifierState {
    std::vector<Frame> frames;
    PathState path;
    uint32_t pc{};
    uint32_t pkt_range{}; // packet bytes proven readable on this path
    int32_t next_id{1};   // fresh id source for refs and identity groups
    std::shared_ptr<Checkpoint> parent;
    std::shared_ptr<const TraceStep> trace;

    Frame& frame() { return frames.back(); }
    const Frame& frame() const { return frames.back(); }
    uint32_t depth() const { return static_cast<uint32_t>(frames.size()); }
};

struct Checkpoint {
    VerifierState state; // snapshot; live/precise marks mutate during exploration
    uint32_t pc;
    int branches{1}; // live paths beneath this node; 0 = fully explored
    std::shared_ptr<Checkpoint> parent;
};

// Argument contract for one helper parameter.
enum class ArgKind : uint8_t {
    None,
    AnyScalar,
    ConstMapPtr,       // r holds a map handle loaded by the wide pseudo load
    MapKeyPtr,         // readable region of the preceding map's key_size
    MapValuePtr,       // readable region of the preceding map's value_size
    MemPtr,            // readable region sized by the following Size argument
    Size,              // bounded scalar paired with the preceding MemPtr
    LockedMapValuePtr, // map value pointer aimed exactly at the lock field
    StackIterSlot,     // stack pointer to a 16-byte aligned iterator slot
    ReleasableRef,     // pointer carrying an acquired reference
};

enum class RetKind : uint8_t {
    Scalar,
    ScalarZero,
    MapValueOrNull,      // provenance of the map passed in r1
    AcquiredMemOrNull,   // 8-byte scratch object with a fresh reference
    IterItemOrEnd,       // forked: item cell pointer / end of iteration
};

enum class HelperEffect : uint8_t { None, Acquire, Release, Lock, Unlock, IterNew, IterNext, IterDestroy };

struct HelperSpec {
    int32_t id{};
    std::string name;
    std::array<ArgKind, 5> args{};
    RetKind ret{RetKind::Scalar};
    HelperEffect effect{HelperEffect::None};
    // Rewriting of map helpers is keyed off the helper id in the xform pass.
};

// Helper contracts for the default runtime; indexable by helper id.
std::vector<HelperSpec> default_helper_specs();

struct VerifierConfig {
    uint64_t complexity_limit{100000};
    uint32_t stack_size{512};
    uint32_t max_call_depth{8};
    bool pruning_enabled{true};
    int log_level{1}; // 0: verdict only, 1: per-instruction lines
};

struct VerifierStats {
    uint64_t insns_processed{};
    uint64_t states_created{1}; // includes the initial state
    uint64_t states_pruned{};
    uint64_t checkpoints{};
};

enum class BranchPrediction : uint8_t { None, AlwaysTaken, AlwaysFallthrough, Both };

struct InsnNotes {
    bool seen{false};
    BranchPrediction pred{BranchPrediction::None};
    bool untrusted_load{false}; // load through a map-value pointer
    int32_t call_map_idx{-1};   // map operand of a map helper call, if static
};

struct VerifiedProgram {
    Program prog;
    std::vector<InsnNotes> notes;
    VerifierStats stats;
    std::string log;
};

struct Rejection {
    ViolationCode code;
    SafetyProperty property;
    uint32_t insn;
    std::string detail;
    VerifierStats stats;
    std::string log;
};

using VerifyResult = std::variant<VerifiedProgram, Rejection>;

struct Violation {
    ViolationCode code;
    std::string detail;
};

// Second verifier pass: exhaustive symbolic execution over all feasible
// paths with state pruning at the CFG's pruning points.
VerifyResult verify(const Program& p, const std::vector<HelperSpec>& helpers, const std::vector<MapDef>& maps,
                    const CfgReport& cfg, const VerifierConfig& config);

// Exposed engine for the pipeline and for tests that drive single steps.
class Verifier {
  public:
    Verifier(const Program& p, const std::vector<HelperSpec>& helpers, const std::vector<MapDef>& maps,
             const CfgReport& cfg, const VerifierConfig& config);
    ~Verifier();

    VerifyResult run();

    VerifierState initial_state() const;

    struct StepResult {
        std::vector<VerifierState> successors; // empty on a clean path end
        std::optional<Violation> violation;
    };
    // Simulates the instruction at s.pc, yielding one or two successor states.
    StepResult simulate_insn(VerifierState s);

    // Memory access check against the pointer in `reg` (register index);
    // nullopt means the access is fine.
    std::optional<Violation> check_mem_access(VerifierState& s, uint8_t reg, int64_t off, uint32_t size,
                                              bool is_write);

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace ubpf

// Copyright (c) ubpf-forge contributors.
// SPDX-License-Identifier: MIT
//
// Second verifier pass: worklist-driven symbolic execution. Each feasible
// path is explored depth-first; conditional jumps whose outcome the abstract
// domain cannot decide fork the state. States are checkpointed at theCFG's
// pruning points and compared for subsumption against fully-explored
// checkpoints (and, for iterator loops, against in-flight ancestors).
#include "ubpf/verifier.hpp"

#include <algorithm>
#include <sstream>

#include "ubpf/helper_ids.hpp"

namespace ubpf {

const char* safety_property_name(SafetyProperty p) {
    switch (p) {
    case SafetyProperty::MemorySafety: return "Memory Safety";
    case SafetyProperty::TypeSafety: return "Type Safety";
    case SafetyProperty::ResourceSafety: return "Resource Safety";
    case SafetyProperty::InformationLeakSafety: return "Information Leak Safety";
    case SafetyProperty::DataRaceFreedom: return "Data Race Freedom";
    case SafetyProperty::Termination: return "Termination";
    case SafetyProperty::DeadlockFreedom: return "Deadlock Freedom";
    case SafetyProperty::ExecutionContextInvariants: return "Upholding Execution Context Invariants";
    }
    return "?";
}

SafetyProperty violation_property(ViolationCode c) {
    switch (c) {
    case ViolationCode::OutOfBounds:
    case ViolationCode::MisalignedAccess:
    case ViolationCode::NullDeref:
    case ViolationCode::ScalarAsPointer:
    case ViolationCode::UseAfterFree:
        return SafetyProperty::MemorySafety;
    case ViolationCode::BadPointerArithmetic:
    case ViolationCode::PartialPointerCopy:
    case ViolationCode::BadPointerComparison:
    case ViolationCode::ArgTypeMismatch:
        return SafetyProperty::TypeSafety;
    case ViolationCode::ResourceLeak:
    case ViolationCode::ExitWhileLocked:
    case ViolationCode::ReleaseOfUnownedRef:
    case ViolationCode::DoubleRelease:
    case ViolationCode::IterMisuse:
        return SafetyProperty::ResourceSafety;
    case ViolationCode::UninitializedRead:
    case ViolationCode::UninitializedStackRead:
    case ViolationCode::PointerLeak:
        return SafetyProperty::InformationLeakSafety;
    case ViolationCode::LockRegionAccess:
        return SafetyProperty::DataRaceFreedom;
    case ViolationCode::ComplexityLimitExceeded:
        return SafetyProperty::Termination;
    case ViolationCode::SecondLockHeld:
    case ViolationCode::UnlockWithoutLock:
    case ViolationCode::LockRegionMismatch:
        return SafetyProperty::DeadlockFreedom;
    case ViolationCode::WriteToR10:
    case ViolationCode::CtxWrite:
    case ViolationCode::UninitializedReturn:
    case ViolationCode::UnknownHelper:
    case ViolationCode::CallDepthExceeded:
        return SafetyProperty::ExecutionContextInvariants;
    }
    return SafetyProperty::MemorySafety;
}

const char* violation_code_name(ViolationCode c) {
    switch (c) {
    case ViolationCode::OutOfBounds: return "OutOfBounds";
    case ViolationCode::MisalignedAccess: return "MisalignedAccess";
    case ViolationCode::NullDeref: return "NullDeref";
    case ViolationCode::ScalarAsPointer: return "ScalarAsPointer";
    case ViolationCode::UseAfterFree: return "UseAfterFree";
    case ViolationCode::BadPointerArithmetic: return "BadPointerArithmetic";
    case ViolationCode::PartialPointerCopy: return "PartialPointerCopy";
    case ViolationCode::BadPointerComparison: return "BadPointerComparison";
    case ViolationCode::ArgTypeMismatch: return "ArgTypeMismatch";
    case ViolationCode::ResourceLeak: return "ResourceLeak";
    case ViolationCode::ExitWhileLocked: return "ExitWhileLocked";
    case ViolationCode::ReleaseOfUnownedRef: return "ReleaseOfUnownedRef";
    case ViolationCode::DoubleRelease: return "DoubleRelease";
    case ViolationCode::IterMisuse: return "IterMisuse";
    case ViolationCode::UninitializedRead: return "UninitializedRead";
    case ViolationCode::UninitializedStackRead: return "UninitializedStackRead";
    case ViolationCode::PointerLeak: return "PointerLeak";
    case ViolationCode::LockRegionAccess: return "LockRegionAccess";
    case ViolationCode::ComplexityLimitExceeded: return "ComplexityLimitExceeded";
    case ViolationCode::SecondLockHeld: return "SecondLockHeld";
    case ViolationCode::UnlockWithoutLock: return "UnlockWithoutLock";
    case ViolationCode::LockRegionMismatch: return "LockRegionMismatch";
    case ViolationCode::WriteToR10: return "WriteToR10";
    case ViolationCode::CtxWrite: return "CtxWrite";
    case ViolationCode::UninitializedReturn: return "UninitializedReturn";
    case ViolationCode::UnknownHelper: return "UnknownHelper";
    case ViolationCode::CallDepthExceeded: return "CallDepthExceeded";
    }
    return "?";
}

const char* reg_type_name(RegType t) {
    switch (t) {
    case RegType::NOT_INIT: return "not_init";
    case RegType::SCALAR_VALUE: return "scalar";
    case RegType::PTR_TO_CTX: return "ctx";
    case RegType::PTR_TO_STACK: return "stack";
    case RegType::PTR_TO_PACKET: return "pkt";
    case RegType::PTR_TO_PACKET_END: return "pkt_end";
    case RegType::PTR_TO_MAP_VALUE: return "map_value";
    case RegType::PTR_TO_MAP_VALUE_OR_NULL: return "map_value_or_null";
    case RegType::CONST_MAP_PTR: return "map_ptr";
    }
    return "?";
}

std::vector<HelperSpec> default_helper_specs() {
    using AK = ArgKind;
    std::vector<HelperSpec> specs;
    specs.push_back({HELPER_MAP_LOOKUP_ELEM, "map_lookup_elem",
                     {AK::ConstMapPtr, AK::MapKeyPtr}, RetKind::MapValueOrNull, HelperEffect::None});
    specs.push_back({HELPER_MAP_UPDATE_ELEM, "map_update_elem",
                     {AK::ConstMapPtr, AK::MapKeyPtr, AK::MapValuePtr, AK::AnyScalar}, RetKind::Scalar,
                     HelperEffect::None});
    specs.push_back({HELPER_MAP_DELETE_ELEM, "map_delete_elem",
                     {AK::ConstMapPtr, AK::MapKeyPtr}, RetKind::Scalar, HelperEffect::None});
    specs.push_back({HELPER_TRACE_EMIT, "trace_emit", {AK::MemPtr, AK::Size}, RetKind::ScalarZero,
                     HelperEffect::None});
    specs.push_back({HELPER_ACQUIRE_TEST_REF, "acquire_test_ref", {}, RetKind::AcquiredMemOrNull,
                     HelperEffect::Acquire});
    specs.push_back({HELPER_RELEASE_TEST_REF, "release_test_ref", {AK::ReleasableRef}, RetKind::ScalarZero,
                     HelperEffect::Release});
    specs.push_back({HELPER_SPIN_LOCK, "spin_lock", {AK::LockedMapValuePtr}, RetKind::ScalarZero,
                     HelperEffect::Lock});
    specs.push_back({HELPER_SPIN_UNLOCK, "spin_unlock", {AK::LockedMapValuePtr}, RetKind::ScalarZero,
                     HelperEffect::Unlock});
    specs.push_back({HELPER_ITER_NEW, "iter_new", {AK::StackIterSlot, AK::AnyScalar}, RetKind::ScalarZero,
                     HelperEffect::IterNew});
    specs.push_back({HELPER_ITER_NEXT, "iter_next", {AK::StackIterSlot}, RetKind::IterItemOrEnd,
                     HelperEffect::IterNext});
    specs.push_back({HELPER_ITER_DESTROY, "iter_destroy", {AK::StackIterSlot}, RetKind::ScalarZero,
                     HelperEffect::IterDestroy});
    return specs;
}

namespace {

constexpr uint32_t kCtxSize = 16;      // XDP-like: data at 0, data_end at 8
constexpr int64_t kCtxDataOff = 0;
constexpr int64_t kCtxDataEndOff = 8;
constexpr int64_t kMaxVarOffset = 1 << 29;
constexpr uint32_t kMaxHelperRegion = 1 << 20;

int64_t sext32(int32_t v) { return static_cast<int64_t>(v); }

RegState make_scalar(const ScalarAbs& a) {
    RegState r;
    r.rtype = RegType::SCALAR_VALUE;
    r.scalar = a;
    return r;
}

RegState make_unknown_scalar_of_size(uint32_t bytes) {
    ScalarAbs a;
    if (bytes < 8) {
        a.tnum = Tnum{0, (1ull << (bytes * 8)) - 1};
        a.normalize();
    }
    return make_scalar(a);
}

bool is_packet_family(RegType t) { return t == RegType::PTR_TO_PACKET || t == RegType::PTR_TO_PACKET_END; }

struct PrecisionTarget {
    uint16_t frame;
    bool is_slot;
    uint8_t reg;      // when !is_slot
    int32_t slot_off; // when is_slot

    bool operator==(const PrecisionTarget&) const = default;
};

} // namespace

struct Verifier::Impl {
    Program prog;
    std::vector<HelperSpec> helpers;
    std::vector<MapDef> maps;
    CfgReport cfg;
    VerifierConfig config;

    std::vector<InsnNotes> notes;
    VerifierStats stats;
    std::ostringstream log;
    std::map<uint32_t, std::vector<std::shared_ptr<Checkpoint>>> cache;
    std::optional<Rejection> rejection;

    Impl(const Program& p, const std::vector<HelperSpec>& h, const std::vector<MapDef>& m, const CfgReport& c,
         const VerifierConfig& cfgc)
        : prog{p}, helpers{h}, maps{m}, cfg{c}, config{cfgc} {
        notes.resize(prog.insns.size());
    }

    const HelperSpec* find_helper(int32_t id) const {
        for (const HelperSpec& s : helpers)
            if (s.id == id)
                return &s;
        return nullptr;
    }

    // ---- liveness ------------------------------------------------------

    void mark_reg_read(VerifierState& s, uint32_t frame, uint8_t reg) {
        if (reg >= kFramePointerReg)
            return; // r10 is a constant
        if (s.frames[frame].regs[reg].live_written)
            return;
        for (Checkpoint* node = s.parent.get(); node; node = node->parent.get()) {
            if (frame >= node->state.frames.size())
                break;
            RegState& r = node->state.frames[frame].regs[reg];
            r.live_read = true;
            if (r.live_written)
                break;
        }
    }

    void mark_reg_written(VerifierState& s, uint32_t frame, uint8_t reg) {
        RegState& r = s.frames[frame].regs[reg];
        r.live_written = true;
        r.precise = false;
    }

    void mark_stack_read(VerifierState& s, uint32_t frame, int32_t slot_off) {
        auto it = s.frames[frame].stack.slots.find(slot_off);
        if (it != s.frames[frame].stack.slots.end() && it->second.live_written)
            return;
        for (Checkpoint* node = s.parent.get(); node; node = node->parent.get()) {
            if (frame >= node->state.frames.size())
                break;
            auto& slots = node->state.frames[frame].stack.slots;
            auto sit = slots.find(slot_off);
            if (sit == slots.end()) {
                StackSlot blank;
                blank.live_read = true;
                slots.emplace(slot_off, blank);
                continue;
            }
            sit->second.live_read = true;
            if (sit->second.live_written)
                break;
        }
    }

    // ---- precision back-propagation -------------------------------------

    void apply_precision_marks(Checkpoint* node, const std::vector<PrecisionTarget>& tracked) {
        if (!node)
            return;
        for (const PrecisionTarget& t : tracked) {
            if (t.frame >= node->state.frames.size())
                continue;
            Frame& fr = node->state.frames[t.frame];
            if (t.is_slot) {
                auto it = fr.stack.slots.find(t.slot_off);
                if (it != fr.stack.slots.end())
                    it->second.spill.precise = true;
            } else {
                fr.regs[t.reg].precise = true;
            }
        }
    }

    static void track_reg(std::vector<PrecisionTarget>& v, uint16_t f, uint8_t r) {
        PrecisionTarget t{f, false, r, 0};
        if (std::find(v.begin(), v.end(), t) == v.end())
            v.push_back(t);
    }

    static void track_slot(std::vector<PrecisionTarget>& v, uint16_t f, int32_t off) {
        PrecisionTarget t{f, true, 0, off};
        if (std::find(v.begin(), v.end(), t) == v.end())
            v.push_back(t);
    }

    static bool untrack_reg(std::vector<PrecisionTarget>& v, uint16_t f, uint8_t r) {
        PrecisionTarget t{f, false, r, 0};
        auto it = std::find(v.begin(), v.end(), t);
        if (it == v.end())
            return false;
        v.erase(it);
        return true;
    }

    static bool untrack_slot(std::vector<PrecisionTarget>& v, uint16_t f, int32_t off) {
        PrecisionTarget t{f, true, 0, off};
        auto it = std::find(v.begin(), v.end(), t);
        if (it == v.end())
            return false;
        v.erase(it);
        return true;
    }

    // Walks the trace backwards marking the sources that define the targets,
    // through moves, ALU chains and spill/fill pairs. Marks land in every
    // checkpoint created between a definition and the demanding use.
    void propagate_precision(VerifierState& s, std::vector<PrecisionTarget> tracked) {
        // Newly tracked sources also carry the mark in the live state, so a
        // copy chain leaves every register on it flagged.
        auto mark_live = [&](const PrecisionTarget& t) {
            if (t.frame >= s.frames.size())
                return;
            if (t.is_slot) {
                auto it = s.frames[t.frame].stack.slots.find(t.slot_off);
                if (it != s.frames[t.frame].stack.slots.end())
                    it->second.spill.precise = true;
            } else {
                s.frames[t.frame].regs[t.reg].precise = true;
            }
        };
        auto track_reg_live = [&](std::vector<PrecisionTarget>& v, uint16_t f, uint8_t r) {
            track_reg(v, f, r);
            mark_live({f, false, r, 0});
        };
        auto track_slot_live = [&](std::vector<PrecisionTarget>& v, uint16_t f, int32_t off) {
            track_slot(v, f, off);
            mark_live({f, true, 0, off});
        };
        for (const PrecisionTarget& t : tracked)
            mark_live(t);
        const TraceStep* step = s.trace.get();
        Checkpoint* cur_node = step ? step->node : s.parent.get();
        while (step && !tracked.empty()) {
            if (step->node != cur_node) {
                apply_precision_marks(cur_node, tracked);
                cur_node = step->node;
            }
            const Instruction& i = prog.insns[step->insn];
            uint16_t f = step->frame;
            switch (i.cls) {
            case InsnClass::ALU32:
            case InsnClass::ALU64: {
                if (untrack_reg(tracked, f, i.dst)) {
                    AluOp op = i.alu_op();
                    if (op == AluOp::MOV) {
                        if (i.src_kind == SrcKind::Reg)
                            track_reg_live(tracked, f, i.src);
                    } else if (op == AluOp::NEG || op == AluOp::END) {
                        track_reg(tracked, f, i.dst);
                    } else {
                        track_reg(tracked, f, i.dst);
                        if (i.src_kind == SrcKind::Reg)
                            track_reg_live(tracked, f, i.src);
                    }
                }
                break;
            }
            case InsnClass::LD:
                if (!i.wide_cont)
                    untrack_reg(tracked, f, i.dst);
                break;
            case InsnClass::LDX:
                if (untrack_reg(tracked, f, i.dst)) {
                    if (i.src == kFramePointerReg)
                        track_slot_live(tracked, f, static_cast<int32_t>(i.offset) & ~7);
                }
                break;
            case InsnClass::STX:
                if (i.dst == kFramePointerReg) {
                    int32_t base = static_cast<int32_t>(i.offset) & ~7;
                    if (untrack_slot(tracked, f, base)) {
                        if (i.access_size() == 8 && (i.offset & 7) == 0)
                            track_reg_live(tracked, f, i.src);
                    }
                }
                break;
            case InsnClass::ST:
                if (i.dst == kFramePointerReg)
                    untrack_slot(tracked, f, static_cast<int32_t>(i.offset) & ~7);
                break;
            case InsnClass::JMP:
            case InsnClass::JMP32: {
                JmpOp j = i.jmp_op();
                if (j == JmpOp::CALL && i.pseudo == Pseudo::LocalCall) {
                    // Backward crossing of a frame push: callee args map to
                    // the caller's r1..r5, everything else in the callee
                    // frame was born here.
                    std::vector<PrecisionTarget> out;
                    for (PrecisionTarget& t : tracked) {
                        if (t.frame == f + 1) {
                            if (!t.is_slot && t.reg >= 1 && t.reg <= 5)
                                out.push_back({f, false, t.reg, 0});
                        } else {
                            out.push_back(t);
                        }
                    }
                    tracked = std::move(out);
                } else if (j == JmpOp::CALL && i.pseudo == Pseudo::None) {
                    untrack_reg(tracked, f, 0);
                } else if (j == JmpOp::EXIT) {
                    // Backward crossing of a frame pop: the caller's r0 came
                    // from the callee.
                    if (untrack_reg(tracked, static_cast<uint16_t>(f - 1), 0))
                        track_reg(tracked, f, 0);
                }
                break;
            }
            }
            step = step->prev.get();
        }
        if (!tracked.empty())
            apply_precision_marks(cur_node, tracked);
    }

    void precise_reg(VerifierState& s, uint8_t reg) {
        std::vector<PrecisionTarget> t;
        track_reg(t, static_cast<uint16_t>(s.frames.size() - 1), reg);
        propagate_precision(s, std::move(t));
    }

    // ---- branch accounting ----------------------------------------------

    static void bump_chain(Checkpoint* head, int delta) {
        for (Checkpoint* node = head; node; node = node->parent.get())
            node->branches += delta;
    }

    static void bump_branches(VerifierState& s, int delta) { bump_chain(s.parent.get(), delta); }

    // ---- logging ---------------------------------------------------------

    void log_insn(uint32_t pc, const std::string& delta) {
        if (config.log_level < 1)
            return;
        log << pc << ": " << format_insn(prog, pc) << " ; " << delta << "\n";
    }

    // ---- state pruning ----------------------------------------------------

    struct IdMap {
        std::vector<std::pair<int32_t, int32_t>> pairs;
        bool match(int32_t old_id, int32_t cur_id) {
            if (old_id == 0 || cur_id == 0)
                return old_id == cur_id;
            for (auto [o, c] : pairs) {
                if (o == old_id)
                    return c == cur_id;
                if (c == cur_id)
                    return false;
            }
            pairs.emplace_back(old_id, cur_id);
            return true;
        }
    };

    bool regsafe(const RegState& old, const RegState& cur, IdMap& idmap) {
        if (!old.live_read)
            return true;
        if (old.rtype == RegType::NOT_INIT)
            return true;
        if (old.rtype == RegType::SCALAR_VALUE) {
            if (cur.rtype != RegType::SCALAR_VALUE)
                return false;
            return !old.precise || abs_subsumes(old.scalar, cur.scalar);
        }
        if (cur.rtype != old.rtype)
            return false;
        return old.map_idx == cur.map_idx && old.frame == cur.frame && old.fixed_off == cur.fixed_off &&
               old.mem_len == cur.mem_len && abs_subsumes(old.scalar, cur.scalar) &&
               idmap.match(old.id, cur.id) && idmap.match(old.ref_id, cur.ref_id);
    }

    bool stacksafe(const StackSlot& old, const StackSlot* cur, IdMap& idmap) {
        if (!old.live_read)
            return true;
        bool old_has_spill = std::find(old.tags.begin(), old.tags.end(), SlotTag::SPILL) != old.tags.end();
        for (int b = 0; b < 8; ++b) {
            SlotTag ot = old.tags[b];
            if (ot == SlotTag::INVALID)
                continue;
            SlotTag ct = cur ? cur->tags[b] : SlotTag::INVALID;
            if (ot == SlotTag::MISC) {
                if (ct == SlotTag::MISC || ct == SlotTag::ZERO)
                    continue;
                if (ct == SlotTag::SPILL && cur && cur->spill.rtype == RegType::SCALAR_VALUE)
                    continue;
                return false;
            }
            if (ot == SlotTag::ZERO) {
                if (ct != SlotTag::ZERO)
                    return false;
                continue;
            }
            // SPILL byte: require a spill in cur and compare the registers.
            if (ct != SlotTag::SPILL)
                return false;
        }
        if (old_has_spill) {
            if (!cur)
                return false;
            RegState old_spill = old.spill;
            old_spill.live_read = true; // slot-level liveness gates the compare
            return regsafe(old_spill, cur->spill, idmap);
        }
        return true;
    }

    // True when the fully-explored snapshot subsumes the current state.
    bool states_subsume(const VerifierState& old, const VerifierState& cur) {
        if (old.frames.size() != cur.frames.size())
            return false;
        for (size_t f = 0; f < old.frames.size(); ++f)
            if (old.frames[f].subprog != cur.frames[f].subprog || old.frames[f].ret_pc != cur.frames[f].ret_pc)
                return false;
        if (old.pkt_range > cur.pkt_range)
            return false;
        IdMap idmap;
        // Path state: resources must correspond exactly.
        if (old.path.acquired_refs.size() != cur.path.acquired_refs.size())
            return false;
        for (size_t k = 0; k < old.path.acquired_refs.size(); ++k) {
            if (old.path.acquired_refs[k].origin_helper != cur.path.acquired_refs[k].origin_helper)
                return false;
            if (!idmap.match(old.path.acquired_refs[k].ref_id, cur.path.acquired_refs[k].ref_id))
                return false;
        }
        if (old.path.lock.has_value() != cur.path.lock.has_value())
            return false;
        if (old.path.lock) {
            if (old.path.lock->map_idx != cur.path.lock->map_idx || old.path.lock->off != cur.path.lock->off)
                return false;
            if (!idmap.match(old.path.lock->reg_id, cur.path.lock->reg_id))
                return false;
        }
        if (old.path.iters.size() != cur.path.iters.size())
            return false;
        for (size_t k = 0; k < old.path.iters.size(); ++k)
            if (old.path.iters[k].frame != cur.path.iters[k].frame ||
                old.path.iters[k].slot_off != cur.path.iters[k].slot_off)
                return false;

        for (size_t f = 0; f < old.frames.size(); ++f) {
            for (uint8_t r = 0; r < 10; ++r)
                if (!regsafe(old.frames[f].regs[r], cur.frames[f].regs[r], idmap))
                    return false;
            for (const auto& [off, slot] : old.frames[f].stack.slots) {
                auto it = cur.frames[f].stack.slots.find(off);
                const StackSlot* cs = it == cur.frames[f].stack.slots.end() ? nullptr : &it->second;
                if (!stacksafe(slot, cs, idmap))
                    return false;
            }
        }
        return true;
    }

    // After pruning against a checkpoint, its liveness and precision demands
    // carry over to the current path's ancestors.
    void propagate_from_checkpoint(const Checkpoint& node, VerifierState& cur) {
        std::vector<PrecisionTarget> precise;
        for (size_t f = 0; f < node.state.frames.size() && f < cur.frames.size(); ++f) {
            for (uint8_t r = 0; r < 10; ++r) {
                const RegState& rr = node.state.frames[f].regs[r];
                if (rr.live_read)
                    mark_reg_read(cur, static_cast<uint32_t>(f), r);
                if (rr.precise)
                    track_reg(precise, static_cast<uint16_t>(f), r);
            }
            for (const auto& [off, slot] : node.state.frames[f].stack.slots) {
                if (slot.live_read)
                    mark_stack_read(cur, static_cast<uint32_t>(f), off);
                if (slot.spill.precise)
                    track_slot(precise, static_cast<uint16_t>(f), off);
            }
        }
        if (!precise.empty())
            propagate_precision(cur, std::move(precise));
    }

    // ---- checkpoints -------------------------------------------------------

    std::shared_ptr<Checkpoint> make_checkpoint(VerifierState& cur) {
        auto node = std::make_shared<Checkpoint>();
        node->state = cur;
        node->state.trace = nullptr;
        node->pc = cur.pc;
        node->parent = cur.parent;
        node->branches = 1;
        for (Frame& fr : node->state.frames) {
            for (RegState& r : fr.regs) {
                r.live_read = false;
                r.precise = false;
            }
            for (auto& [off, slot] : fr.stack.slots) {
                slot.live_read = false;
                slot.spill.precise = false;
            }
        }
        for (Frame& fr : cur.frames) {
            for (RegState& r : fr.regs)
                r.live_written = false;
            for (auto& [off, slot] : fr.stack.slots)
                slot.live_written = false;
        }
        cur.parent = node;
        cache[cur.pc].push_back(node);
        ++stats.checkpoints;
        return node;
    }

    // ---- reading and writing registers -------------------------------------

    std::optional<Violation> read_reg(VerifierState& s, uint8_t r) {
        RegState& reg = s.frame().regs[r];
        if (reg.rtype == RegType::NOT_INIT)
            return Violation{ViolationCode::UninitializedRead, "r" + std::to_string(r) + " is not initialized"};
        mark_reg_read(s, s.depth() - 1, r);
        return std::nullopt;
    }

    std::optional<Violation> write_reg(VerifierState& s, uint8_t r, RegState value) {
        if (r == kFramePointerReg)
            return Violation{ViolationCode::WriteToR10, "r10 is read-only"};
        value.live_written = true;
        value.live_read = false;
        value.precise = false;
        s.frame().regs[r] = value;
        return std::nullopt;
    }

    // ---- memory access -----------------------------------------------------

    struct AccessResult {
        std::optional<Violation> violation;
        RegState loaded; // meaningful for reads
    };

    static int32_t slot_base(int64_t byte_off) { return static_cast<int32_t>(byte_off & ~int64_t{7}); }

    // Validates a variable offset for non-stack pointers.
    static std::optional<Violation> check_var_off(const ScalarAbs& var) {
        if (var.is_const() && var.const_value() == 0)
            return std::nullopt;
        if (var.bounds.smin < 0)
            return Violation{ViolationCode::OutOfBounds, "variable offset may be negative"};
        if (var.bounds.umax > static_cast<uint64_t>(kMaxVarOffset))
            return Violation{ViolationCode::OutOfBounds, "variable offset is unbounded"};
        return std::nullopt;
    }

    static bool var_aligned(const ScalarAbs& var, uint32_t size) {
        return ((var.tnum.value | var.tnum.mask) & (size - 1)) == 0;
    }

    AccessResult stack_read(VerifierState& s, uint32_t frame, int64_t off, uint32_t size) {
        // Full-width aligned read of a spill restores the register.
        int32_t base = slot_base(off);
        auto& slots = s.frames[frame].stack.slots;
        if (size == 8 && (off & 7) == 0) {
            auto it = slots.find(base);
            if (it != slots.end() && it->second.tags[0] == SlotTag::SPILL) {
                bool all_spill = std::all_of(it->second.tags.begin(), it->second.tags.end(),
                                             [](SlotTag t) { return t == SlotTag::SPILL; });
                if (all_spill) {
                    mark_stack_read(s, frame, base);
                    RegState out = it->second.spill;
                    out.live_written = false;
                    out.live_read = false;
                    return {std::nullopt, out};
                }
            }
        }
        bool all_zero = true;
        for (int64_t b = off; b < off + size; ++b) {
            auto it = slots.find(slot_base(b));
            SlotTag tag = SlotTag::INVALID;
            const StackSlot* slot = nullptr;
            if (it != slots.end()) {
                slot = &it->second;
                tag = slot->tags[b & 7];
            }
            if (tag == SlotTag::INVALID)
                return {Violation{ViolationCode::UninitializedStackRead,
                                  "read of uninitialized stack byte at " + std::to_string(b)},
                        {}};
            if (tag == SlotTag::SPILL && slot->spill.is_pointer())
                return {Violation{ViolationCode::PointerLeak, "partial read of a spilled pointer"}, {}};
            if (tag != SlotTag::ZERO)
                all_zero = false;
        }
        for (int64_t b = slot_base(off); b <= slot_base(off + size - 1); b += 8)
            mark_stack_read(s, frame, static_cast<int32_t>(b));
        return {std::nullopt, all_zero ? make_scalar(abs_const(0)) : make_unknown_scalar_of_size(size)};
    }

    std::optional<Violation> stack_write(VerifierState& s, uint32_t frame, int64_t off, uint32_t size,
                                         const RegState* src_reg, bool zero_imm) {
        auto& slots = s.frames[frame].stack.slots;
        if (src_reg && src_reg->is_pointer()) {
            if (size != 8 || (off & 7) != 0)
                return Violation{ViolationCode::PartialPointerCopy, "pointers spill only as aligned 8 bytes"};
            StackSlot& slot = slots[slot_base(off)];
            slot.tags.fill(SlotTag::SPILL);
            slot.spill = *src_reg;
            slot.spill.live_written = false;
            slot.spill.live_read = false;
            slot.live_written = true;
            return std::nullopt;
        }
        if (size == 8 && (off & 7) == 0 && src_reg) {
            StackSlot& slot = slots[slot_base(off)];
            slot.tags.fill(SlotTag::SPILL);
            slot.spill = *src_reg;
            slot.spill.live_written = false;
            slot.spill.live_read = false;
            slot.live_written = true;
            return std::nullopt;
        }
        bool zero = zero_imm || (src_reg && src_reg->scalar.is_const() && src_reg->scalar.const_value() == 0);
        for (int64_t b = off; b < off + size; ++b) {
            StackSlot& slot = slots[slot_base(b)];
            // A partial overwrite of a spill demotes the surviving bytes.
            if (slot.tags[b & 7] == SlotTag::SPILL) {
                for (SlotTag& t : slot.tags)
                    if (t == SlotTag::SPILL)
                        t = SlotTag::MISC;
                slot.spill = RegState{};
            }
            slot.tags[b & 7] = zero ? SlotTag::ZERO : SlotTag::MISC;
        }
        if (size == 8 && (off & 7) == 0)
            slots[slot_base(off)].live_written = true;
        return std::nullopt;
    }

    // Bounds/alignment of an access through `reg`; for reads the loaded value
    // is produced. Stores go through do_store for the leak checks.
    AccessResult mem_access(VerifierState& s, uint8_t regidx, int64_t insn_off, uint32_t size, bool is_write,
                            const RegState* store_src, bool store_zero_imm) {
        RegState& reg = s.frame().regs[regidx];
        switch (reg.rtype) {
        case RegType::NOT_INIT:
            return {Violation{ViolationCode::UninitializedRead, "r" + std::to_string(regidx) + " is not initialized"},
                    {}};
        case RegType::SCALAR_VALUE:
            return {Violation{ViolationCode::ScalarAsPointer, "arbitrary value used as a pointer"}, {}};
        case RegType::PTR_TO_MAP_VALUE_OR_NULL:
            return {Violation{ViolationCode::NullDeref, "map value pointer may be null; check it first"}, {}};
        case RegType::CONST_MAP_PTR:
            return {Violation{ViolationCode::BadPointerArithmetic, "map handle is not a data pointer"}, {}};
        case RegType::PTR_TO_PACKET_END:
            return {Violation{ViolationCode::OutOfBounds, "the end-of-packet pointer cannot be dereferenced"}, {}};
        case RegType::PTR_TO_CTX: {
            if (is_write)
                return {Violation{ViolationCode::CtxWrite, "the context object is read-only"}, {}};
            if (!(reg.scalar.is_const() && reg.scalar.const_value() == 0))
                return {Violation{ViolationCode::OutOfBounds, "variable context offset"}, {}};
            int64_t e = reg.fixed_off + insn_off;
            if (e < 0 || e + size > kCtxSize)
                return {Violation{ViolationCode::OutOfBounds, "context access outside the object"}, {}};
            if ((e != kCtxDataOff && e != kCtxDataEndOff) || size != 8)
                return {Violation{ViolationCode::MisalignedAccess, "context fields are 8-byte loads at 0 and 8"},
                        {}};
            RegState out;
            out.rtype = e == kCtxDataOff ? RegType::PTR_TO_PACKET : RegType::PTR_TO_PACKET_END;
            out.scalar = abs_const(0);
            return {std::nullopt, out};
        }
        case RegType::PTR_TO_STACK: {
            if (!(reg.scalar.is_const() && reg.scalar.const_value() == 0))
                return {Violation{ViolationCode::OutOfBounds, "variable stack offset"}, {}};
            int64_t e = reg.fixed_off + insn_off;
            if (e < -static_cast<int64_t>(config.stack_size) || e + size > 0)
                return {Violation{ViolationCode::OutOfBounds, "stack access outside the frame"}, {}};
            if (e & (size - 1))
                return {Violation{ViolationCode::MisalignedAccess, "misaligned stack access"}, {}};
            if (is_write) {
                auto v = stack_write(s, reg.frame, e, size, store_src, store_zero_imm);
                return {v, {}};
            }
            return stack_read(s, reg.frame, e, size);
        }
        case RegType::PTR_TO_PACKET:
        case RegType::PTR_TO_MAP_VALUE: {
            if (auto v = check_var_off(reg.scalar))
                return {v, {}};
            int64_t lo = reg.fixed_off + insn_off + static_cast<int64_t>(reg.scalar.bounds.umin);
            int64_t hi = reg.fixed_off + insn_off + static_cast<int64_t>(reg.scalar.bounds.umax);
            uint64_t limit;
            if (reg.rtype == RegType::PTR_TO_PACKET) {
                limit = s.pkt_range;
            } else if (reg.map_idx >= 0) {
                limit = maps[reg.map_idx].value_size;
            } else {
                // Scratch or iterator cell; a freed scratch object is gone.
                if (reg.map_idx == kScratchMemProvenance) {
                    bool live = false;
                    for (const RefInfo& ri : s.path.acquired_refs)
                        if (ri.ref_id == reg.ref_id)
                            live = true;
                    if (!live)
                        return {Violation{ViolationCode::UseAfterFree, "object was already released"}, {}};
                }
                limit = reg.mem_len;
            }
            if (lo < 0 || static_cast<uint64_t>(hi) + size > limit) {
                const char* what = reg.rtype == RegType::PTR_TO_PACKET ? "packet access out of verified range"
                                                                       : "map value access out of bounds";
                return {Violation{ViolationCode::OutOfBounds, what}, {}};
            }
            if (((reg.fixed_off + insn_off) & (size - 1)) || !var_aligned(reg.scalar, size))
                return {Violation{ViolationCode::MisalignedAccess, "misaligned access"}, {}};
            if (reg.rtype == RegType::PTR_TO_MAP_VALUE && reg.map_idx >= 0) {
                int32_t lk = maps[reg.map_idx].lock_off;
                if (lk >= 0 && lo < lk + 8 && hi + size > lk)
                    return {Violation{ViolationCode::LockRegionAccess,
                                      "the lock field may only be touched through the lock helpers"},
                            {}};
            }
            if (is_write && store_src && store_src->is_pointer())
                return {Violation{ViolationCode::PointerLeak, "pointer stored into shared memory"}, {}};
            if (!is_write && reg.rtype == RegType::PTR_TO_MAP_VALUE && reg.map_idx >= 0)
                notes[s.pc].untrusted_load = true;
            return {std::nullopt, make_unknown_scalar_of_size(size)};
        }
        }
        return {Violation{ViolationCode::ScalarAsPointer, "bad pointer"}, {}};
    }

    // Readable-region check for helper arguments (byte granularity, no fill).
    std::optional<Violation> region_readable(VerifierState& s, uint8_t regidx, uint64_t nbytes) {
        if (nbytes == 0)
            return std::nullopt;
        RegState& reg = s.frame().regs[regidx];
        switch (reg.rtype) {
        case RegType::PTR_TO_STACK: {
            if (!(reg.scalar.is_const() && reg.scalar.const_value() == 0))
                return Violation{ViolationCode::OutOfBounds, "variable stack offset"};
            int64_t e = reg.fixed_off;
            if (e < -static_cast<int64_t>(config.stack_size) || e + static_cast<int64_t>(nbytes) > 0)
                return Violation{ViolationCode::OutOfBounds, "stack region outside the frame"};
            auto& slots = s.frames[reg.frame].stack.slots;
            for (int64_t b = e; b < e + static_cast<int64_t>(nbytes); ++b) {
                auto it = slots.find(slot_base(b));
                SlotTag tag = it == slots.end() ? SlotTag::INVALID : it->second.tags[b & 7];
                if (tag == SlotTag::INVALID)
                    return Violation{ViolationCode::UninitializedStackRead, "helper reads uninitialized stack"};
                if (tag == SlotTag::SPILL && it->second.spill.is_pointer())
                    return Violation{ViolationCode::PointerLeak, "helper would read a spilled pointer"};
            }
            for (int64_t b = slot_base(e); b <= slot_base(e + nbytes - 1); b += 8)
                mark_stack_read(s, reg.frame, static_cast<int32_t>(b));
            return std::nullopt;
        }
        case RegType::PTR_TO_PACKET:
        case RegType::PTR_TO_MAP_VALUE: {
            if (auto v = check_var_off(reg.scalar))
                return v;
            int64_t lo = reg.fixed_off + static_cast<int64_t>(reg.scalar.bounds.umin);
            int64_t hi = reg.fixed_off + static_cast<int64_t>(reg.scalar.bounds.umax);
            uint64_t limit = reg.rtype == RegType::PTR_TO_PACKET
                                 ? s.pkt_range
                                 : (reg.map_idx >= 0 ? maps[reg.map_idx].value_size : reg.mem_len);
            if (lo < 0 || static_cast<uint64_t>(hi) + nbytes > limit)
                return Violation{ViolationCode::OutOfBounds, "helper region out of bounds"};
            if (reg.rtype == RegType::PTR_TO_MAP_VALUE && reg.map_idx >= 0) {
                int32_t lk = maps[reg.map_idx].lock_off;
                if (lk >= 0 && lo < lk + 8 && hi + static_cast<int64_t>(nbytes) > lk)
                    return Violation{ViolationCode::LockRegionAccess, "helper region overlaps the lock field"};
            }
            return std::nullopt;
        }
        case RegType::PTR_TO_MAP_VALUE_OR_NULL:
            return Violation{ViolationCode::NullDeref, "helper argument may be null"};
        case RegType::NOT_INIT:
            return Violation{ViolationCode::UninitializedRead, "helper argument is not initialized"};
        default:
            return Violation{ViolationCode::ArgTypeMismatch, "helper argument is not a data region"};
        }
    }

    // ---- instruction simulation ---------------------------------------------

    struct StepOut {
        std::vector<VerifierState> succ;
        std::optional<Violation> violation;

        static StepOut fail(Violation v) { return {{}, std::move(v)}; }
        static StepOut one(VerifierState s) {
            StepOut o;
            o.succ.push_back(std::move(s));
            return o;
        }
        static StepOut end() { return {}; }
    };

    void push_trace(VerifierState& s) {
        auto step = std::make_shared<TraceStep>();
        step->prev = s.trace;
        step->insn = s.pc;
        step->frame = static_cast<uint16_t>(s.frames.size() - 1);
        step->node = s.parent.get();
        s.trace = std::move(step);
    }

    void merge_prediction(uint32_t pc, BranchPrediction p) {
        BranchPrediction cur = notes[pc].pred;
        notes[pc].pred = (cur == BranchPrediction::None || cur == p) ? p : BranchPrediction::Both;
    }

    StepOut step_alu(VerifierState s, const Instruction& i) {
        bool is64 = i.cls == InsnClass::ALU64;
        uint32_t width = is64 ? 64 : 32;
        AluOp op = i.alu_op();

        if (op == AluOp::END || op == AluOp::NEG) {
            if (auto v = read_reg(s, i.dst))
                return StepOut::fail(*v);
            RegState& rd = s.frame().regs[i.dst];
            if (rd.is_pointer())
                return StepOut::fail({ViolationCode::BadPointerArithmetic, "unary ALU on a pointer"});
            ScalarAbs out = op == AluOp::END
                                ? abs_alu_end(rd.scalar, static_cast<uint32_t>(i.imm), i.src_kind == SrcKind::Reg)
                                : abs_alu(AluOp::NEG, rd.scalar, abs_const(0), width);
            if (auto v = write_reg(s, i.dst, make_scalar(out)))
                return StepOut::fail(*v);
            log_insn(s.pc, "r" + std::to_string(i.dst) + "=" + abs_to_string(out));
            s.pc += 1;
            return StepOut::one(std::move(s));
        }

        if (op == AluOp::MOV) {
            RegState value;
            if (i.src_kind == SrcKind::Imm) {
                value = make_scalar(is64 ? abs_const(static_cast<uint64_t>(sext32(i.imm)))
                                         : abs_const(static_cast<uint32_t>(i.imm)));
            } else {
                if (auto v = read_reg(s, i.src))
                    return StepOut::fail(*v);
                RegState& rs = s.frame().regs[i.src];
                if (rs.is_pointer()) {
                    if (!is64)
                        return StepOut::fail({ViolationCode::PartialPointerCopy, "32-bit copy of a pointer"});
                    value = rs;
                } else {
                    value = make_scalar(abs_alu(AluOp::MOV, rs.scalar, rs.scalar, width));
                }
            }
            if (auto v = write_reg(s, i.dst, value))
                return StepOut::fail(*v);
            log_insn(s.pc, "r" + std::to_string(i.dst) + "=" +
                            (value.is_pointer() ? reg_type_name(value.rtype) : abs_to_string(value.scalar)));
            s.pc += 1;
            return StepOut::one(std::move(s));
        }

        // Binary ALU: dst is both source and destination.
        if (auto v = read_reg(s, i.dst))
            return StepOut::fail(*v);
        if (i.src_kind == SrcKind::Reg)
            if (auto v = read_reg(s, i.src))
                return StepOut::fail(*v);

        RegState& rd = s.frame().regs[i.dst];
        const RegState* rs = i.src_kind == SrcKind::Reg ? &s.frame().regs[i.src] : nullptr;
        bool dst_ptr = rd.is_pointer();
        bool src_ptr = rs && rs->is_pointer();

        if (!dst_ptr && !src_ptr) {
            ScalarAbs b = rs ? rs->scalar
                             : (is64 ? abs_const(static_cast<uint64_t>(sext32(i.imm)))
                                     : abs_const(static_cast<uint32_t>(i.imm)));
            ScalarAbs out = abs_alu(op, rd.scalar, b, width);
            if (auto v = write_reg(s, i.dst, make_scalar(out)))
                return StepOut::fail(*v);
            log_insn(s.pc, "r" + std::to_string(i.dst) + "=" + abs_to_string(out));
            s.pc += 1;
            return StepOut::one(std::move(s));
        }

        // Pointer arithmetic: 64-bit ADD/SUB only.
        if (!is64)
            return StepOut::fail({ViolationCode::BadPointerArithmetic, "32-bit arithmetic on a pointer"});
        if (op != AluOp::ADD && op != AluOp::SUB)
            return StepOut::fail({ViolationCode::BadPointerArithmetic, "only +/- are defined on pointers"});

        auto arith_ok = [](RegType t) {
            return t == RegType::PTR_TO_STACK || t == RegType::PTR_TO_PACKET || t == RegType::PTR_TO_MAP_VALUE ||
                   t == RegType::PTR_TO_CTX;
        };

        if (dst_ptr && src_ptr) {
            if (op != AluOp::SUB)
                return StepOut::fail({ViolationCode::BadPointerArithmetic, "pointer + pointer"});
            bool same_family =
                (is_packet_family(rd.rtype) && is_packet_family(rs->rtype)) ||
                (rd.rtype == rs->rtype && rd.map_idx == rs->map_idx && rd.frame == rs->frame);
            if (!same_family)
                return StepOut::fail(
                    {ViolationCode::BadPointerArithmetic, "subtraction of pointers with different provenance"});
            if (auto v = write_reg(s, i.dst, make_scalar(abs_unknown())))
                return StepOut::fail(*v);
            log_insn(s.pc, "r" + std::to_string(i.dst) + "=scalar (pointer difference)");
            s.pc += 1;
            return StepOut::one(std::move(s));
        }

        // Exactly one side is a pointer.
        const RegState& ptr = dst_ptr ? rd : *rs;
        if (dst_ptr && op == AluOp::SUB && src_ptr)
            return StepOut::fail({ViolationCode::BadPointerArithmetic, "unreachable"});
        if (!dst_ptr && op == AluOp::SUB)
            return StepOut::fail({ViolationCode::BadPointerArithmetic, "scalar minus pointer"});
        if (!arith_ok(ptr.rtype))
            return StepOut::fail({ViolationCode::BadPointerArithmetic,
                                  std::string{"arithmetic on "} + reg_type_name(ptr.rtype)});

        ScalarAbs delta;
        if (dst_ptr) {
            if (rs) {
                delta = rs->scalar;
                precise_reg(s, i.src);
            } else {
                delta = abs_const(static_cast<uint64_t>(sext32(i.imm)));
            }
        } else {
            delta = rd.scalar; // scalar += pointer form: dst becomes the pointer
            precise_reg(s, i.dst);
        }
        RegState out = ptr;
        if (delta.is_const()) {
            int64_t c = static_cast<int64_t>(delta.const_value());
            out.fixed_off += op == AluOp::ADD ? c : -c;
            if (out.fixed_off > kMaxVarOffset || out.fixed_off < -kMaxVarOffset)
                return StepOut::fail({ViolationCode::OutOfBounds, "pointer offset out of range"});
        } else {
            out.scalar = abs_alu(op, out.scalar, delta, 64);
        }
        if (auto v = write_reg(s, i.dst, out))
            return StepOut::fail(*v);
        log_insn(s.pc, "r" + std::to_string(i.dst) + "=" + reg_type_name(out.rtype) + "+" +
                        std::to_string(out.fixed_off));
        s.pc += 1;
        return StepOut::one(std::move(s));
    }

    StepOut step_mem(VerifierState s, const Instruction& i) {
        uint32_t size = i.access_size();
        if (i.cls == InsnClass::LDX) {
            if (auto v = read_reg(s, i.src))
                return StepOut::fail(*v);
            AccessResult ar = mem_access(s, i.src, i.offset, size, false, nullptr, false);
            if (ar.violation)
                return StepOut::fail(*ar.violation);
            if (auto v = write_reg(s, i.dst, ar.loaded))
                return StepOut::fail(*v);
            log_insn(s.pc, "r" + std::to_string(i.dst) + "=" +
                            (ar.loaded.is_pointer() ? reg_type_name(ar.loaded.rtype) : abs_to_string(ar.loaded.scalar)));
            s.pc += 1;
            return StepOut::one(std::move(s));
        }
        // ST / STX
        if (auto v = read_reg(s, i.dst))
            return StepOut::fail(*v);
        const RegState* src = nullptr;
        if (i.cls == InsnClass::STX) {
            if (auto v = read_reg(s, i.src))
                return StepOut::fail(*v);
            src = &s.frame().regs[i.src];
        }
        RegState imm_val = make_scalar(abs_const(static_cast<uint64_t>(sext32(i.imm))));
        const RegState* stored = src ? src : &imm_val;
        AccessResult ar = mem_access(s, i.dst, i.offset, size, true, stored, i.cls == InsnClass::ST && i.imm == 0);
        if (ar.violation)
            return StepOut::fail(*ar.violation);
        log_insn(s.pc, "store ok");
        s.pc += 1;
        return StepOut::one(std::move(s));
    }

    StepOut step_lddw(VerifierState s, const Instruction& i) {
        RegState value;
        if (i.pseudo == Pseudo::MapRef) {
            if (i.imm < 0 || static_cast<size_t>(i.imm) >= maps.size())
                return StepOut::fail({ViolationCode::UnknownHelper, "map reference out of range"});
            value.rtype = RegType::CONST_MAP_PTR;
            value.map_idx = i.imm;
        } else {
            value = make_scalar(abs_const(i.imm64()));
        }
        if (auto v = write_reg(s, i.dst, value))
            return StepOut::fail(*v);
        notes[s.pc + 1].seen = true;
        log_insn(s.pc, "r" + std::to_string(i.dst) + "=" +
                        (value.rtype == RegType::CONST_MAP_PTR ? "map_ptr" : abs_to_string(value.scalar)));
        s.pc += 2;
        return StepOut::one(std::move(s));
    }

    // Rewrites every register sharing `id` to its null or non-null shape.
    static void mark_ptr_or_null_regs(VerifierState& s, int32_t id, bool is_null) {
        auto adjust = [&](RegState& r) {
            if (r.rtype != RegType::PTR_TO_MAP_VALUE_OR_NULL || r.id != id)
                return;
            if (is_null) {
                if (r.ref_id) {
                    // The acquisition failed on this path; the reference dies.
                    auto& refs = s.path.acquired_refs;
                    refs.erase(std::remove_if(refs.begin(), refs.end(),
                                              [&](const RefInfo& ri) { return ri.ref_id == r.ref_id; }),
                               refs.end());
                }
                r = make_scalar(abs_const(0));
            } else {
                r.rtype = RegType::PTR_TO_MAP_VALUE;
            }
        };
        for (Frame& f : s.frames) {
            for (RegState& r : f.regs)
                adjust(r);
            for (auto& [off, slot] : f.stack.slots)
                adjust(slot.spill);
        }
    }

    StepOut step_jump(VerifierState s, const Instruction& i) {
        JmpOp op = i.jmp_op();
        uint32_t pc0 = s.pc;
        if (op == JmpOp::JA) {
            log_insn(s.pc, "goto");
            s.pc = static_cast<uint32_t>(static_cast<int64_t>(s.pc) + 1 + i.offset);
            return StepOut::one(std::move(s));
        }
        if (op == JmpOp::EXIT)
            return step_exit(std::move(s));
        if (op == JmpOp::CALL)
            return step_call(std::move(s), i);

        // Conditional jump.
        if (auto v = read_reg(s, i.dst))
            return StepOut::fail(*v);
        if (i.src_kind == SrcKind::Reg)
            if (auto v = read_reg(s, i.src))
                return StepOut::fail(*v);

        uint32_t width = i.cls == InsnClass::JMP32 ? 32 : 64;
        RegState& a = s.frame().regs[i.dst];
        const RegState* b = i.src_kind == SrcKind::Reg ? &s.frame().regs[i.src] : nullptr;
        uint32_t target = static_cast<uint32_t>(static_cast<int64_t>(s.pc) + 1 + i.offset);
        uint32_t fallthrough = s.pc + 1;
        ++s.path.branch_count;

        auto decided = [&](bool taken) {
            merge_prediction(s.pc, taken ? BranchPrediction::AlwaysTaken : BranchPrediction::AlwaysFallthrough);
            log_insn(s.pc, taken ? "always taken" : "never taken");
            s.pc = taken ? target : fallthrough;
            return StepOut::one(std::move(s));
        };

        // Null check of a maybe-null map value pointer.
        if (a.rtype == RegType::PTR_TO_MAP_VALUE_OR_NULL) {
            bool is_eq = op == JmpOp::JEQ, is_ne = op == JmpOp::JNE;
            bool vs_zero = !b && i.imm == 0 && i.cls == InsnClass::JMP;
            if (!(vs_zero && (is_eq || is_ne)))
                return StepOut::fail({ViolationCode::BadPointerComparison,
                                      "maybe-null pointers support only == 0 / != 0 checks"});
            merge_prediction(s.pc, BranchPrediction::Both);
            int32_t id = a.id;
            VerifierState taken = s;
            VerifierState fall = std::move(s);
            // jeq: taken side is null; jne: taken side is the value.
            mark_ptr_or_null_regs(taken, id, is_eq);
            mark_ptr_or_null_regs(fall, id, !is_eq);
            taken.pc = target;
            fall.pc = fallthrough;
            log_insn(pc0, "null-check fork");
            StepOut out;
            out.succ.push_back(std::move(fall));
            out.succ.push_back(std::move(taken));
            return out;
        }

        bool a_ptr = a.is_pointer();
        bool b_ptr = b && b->is_pointer();
        if (a_ptr || b_ptr) {
            // Known non-null pointer against immediate zero is decidable.
            if (!b_ptr && !b && i.imm == 0 && (op == JmpOp::JEQ || op == JmpOp::JNE) && a_ptr &&
                a.rtype != RegType::PTR_TO_MAP_VALUE_OR_NULL)
                return decided(op == JmpOp::JNE);
            if (!a_ptr || !b_ptr)
                return StepOut::fail({ViolationCode::BadPointerComparison, "pointer compared against a scalar"});
            if (i.cls == InsnClass::JMP32)
                return StepOut::fail({ViolationCode::BadPointerComparison, "32-bit pointer comparison"});
            bool packet_pair = is_packet_family(a.rtype) && is_packet_family(b->rtype);
            bool same_prov = a.rtype == b->rtype && a.map_idx == b->map_idx && a.frame == b->frame;
            if (!packet_pair && !same_prov)
                return StepOut::fail({ViolationCode::BadPointerComparison,
                                      "comparison of pointers with different provenance"});
            if (op == JmpOp::JSET || op == JmpOp::JSGT || op == JmpOp::JSGE || op == JmpOp::JSLT ||
                op == JmpOp::JSLE)
                return StepOut::fail({ViolationCode::BadPointerComparison, "signed or bit test on pointers"});

            merge_prediction(s.pc, BranchPrediction::Both);
            // Packet range proof: sides where "pkt + k <= end" holds widen
            // the verified window to k (or k+1 for strict <).
            VerifierState fall = s;
            VerifierState taken = std::move(s);
            taken.pc = target;
            fall.pc = fallthrough;
            if (packet_pair && a.rtype != b->rtype) {
                bool a_is_pkt = a.rtype == RegType::PTR_TO_PACKET;
                const RegState& pkt = a_is_pkt ? a : *b;
                // Orient the relation as "pkt OP end".
                JmpOp rel = op;
                if (!a_is_pkt) {
                    switch (op) {
                    case JmpOp::JGT: rel = JmpOp::JLT; break;
                    case JmpOp::JGE: rel = JmpOp::JLE; break;
                    case JmpOp::JLT: rel = JmpOp::JGT; break;
                    case JmpOp::JLE: rel = JmpOp::JGE; break;
                    default: break;
                    }
                }
                if (pkt.scalar.bounds.smin >= 0 && pkt.fixed_off >= 0) {
                    uint64_t base = static_cast<uint64_t>(pkt.fixed_off) + pkt.scalar.bounds.umin;
                    auto widen = [&](VerifierState& st, uint64_t k) {
                        st.pkt_range = std::max<uint64_t>(st.pkt_range, std::min<uint64_t>(k, kMaxVarOffset));
                    };
                    switch (rel) {
                    case JmpOp::JLE: widen(taken, base); break;                    // pkt <= end
                    case JmpOp::JLT: widen(taken, base + 1); break;                // pkt < end
                    case JmpOp::JEQ: widen(taken, base); break;                    // pkt == end
                    case JmpOp::JGT: widen(fall, base); break;                     // !(pkt > end)
                    case JmpOp::JGE: widen(fall, base + 1); break;                 // !(pkt >= end)
                    case JmpOp::JNE: widen(fall, base); break;                     // !(pkt != end)
                    default: break;
                    }
                }
            }
            log_insn(pc0, "pointer compare fork");
            StepOut out;
            out.succ.push_back(std::move(fall));
            out.succ.push_back(std::move(taken));
            return out;
        }

        // Scalar comparison: mark precision, then decide or fork with
        // refined operand abstractions on each side.
        precise_reg(s, i.dst);
        if (b)
            precise_reg(s, i.src);
        ScalarAbs bv = b ? b->scalar
                         : (width == 64 ? abs_const(static_cast<uint64_t>(sext32(i.imm)))
                                        : abs_const(static_cast<uint32_t>(i.imm)));
        BranchRefinement refine = abs_refine_branch(op, a.scalar, bv, width);
        if (!refine.taken && !refine.not_taken)
            return StepOut::end(); // contradictory inputs: infeasible path
        if (refine.taken && !refine.not_taken)
            return decided(true);
        if (!refine.taken && refine.not_taken)
            return decided(false);

        merge_prediction(s.pc, BranchPrediction::Both);
        VerifierState taken = s;
        VerifierState fall = std::move(s);
        taken.pc = target;
        fall.pc = fallthrough;
        auto apply = [&](VerifierState& st, const RefinedPair& rp) {
            st.frame().regs[i.dst].scalar = rp.lhs;
            if (b)
                st.frame().regs[i.src].scalar = rp.rhs;
        };
        apply(taken, *refine.taken);
        apply(fall, *refine.not_taken);
        log_insn(pc0, "fork");
        StepOut out;
        out.succ.push_back(std::move(fall));
        out.succ.push_back(std::move(taken));
        return out;
    }

    StepOut step_exit(VerifierState s) {
        if (s.frames.size() == 1) {
            if (s.path.lock)
                return StepOut::fail({ViolationCode::ExitWhileLocked, "lock still held at exit"});
            if (!s.path.acquired_refs.empty())
                return StepOut::fail({ViolationCode::ResourceLeak,
                                      "unreleased reference from helper id " +
                                          std::to_string(s.path.acquired_refs.front().origin_helper)});
            if (!s.path.iters.empty())
                return StepOut::fail({ViolationCode::ResourceLeak, "iterator not destroyed"});
            RegState& r0 = s.frame().regs[0];
            if (r0.rtype == RegType::NOT_INIT)
                return StepOut::fail({ViolationCode::UninitializedReturn, "r0 is not set at exit"});
            if (r0.rtype != RegType::SCALAR_VALUE)
                return StepOut::fail({ViolationCode::PointerLeak, "returning a pointer to the caller"});
            mark_reg_read(s, s.depth() - 1, 0);
            log_insn(s.pc, "exit ok");
            return StepOut::end();
        }
        // Subprog return.
        RegState& r0 = s.frame().regs[0];
        if (r0.rtype == RegType::NOT_INIT)
            return StepOut::fail({ViolationCode::UninitializedReturn, "r0 is not set at subprog exit"});
        if (r0.rtype != RegType::SCALAR_VALUE)
            return StepOut::fail({ViolationCode::PointerLeak, "subprogs return scalars"});
        mark_reg_read(s, s.depth() - 1, 0);
        log_insn(s.pc, "return");
        RegState ret = r0;
        uint32_t ret_pc = s.frame().ret_pc;
        s.frames.pop_back();
        ret.live_written = true;
        ret.live_read = false;
        ret.precise = false;
        s.frame().regs[0] = ret;
        for (uint8_t r = 1; r <= 5; ++r) {
            s.frame().regs[r] = RegState{};
            s.frame().regs[r].live_written = true;
        }
        s.pc = ret_pc;
        return StepOut::one(std::move(s));
    }

    StepOut step_call(VerifierState s, const Instruction& i) {
        if (i.pseudo == Pseudo::LocalCall) {
            if (s.frames.size() >= config.max_call_depth)
                return StepOut::fail({ViolationCode::CallDepthExceeded, "subprog call depth limit"});
            uint32_t entry = static_cast<uint32_t>(static_cast<int64_t>(s.pc) + 1 + i.imm);
            int callee = prog.subprog_of(entry);
            Frame fr;
            fr.subprog = static_cast<uint32_t>(callee);
            fr.ret_pc = s.pc + 1;
            for (uint8_t r = 1; r <= 5; ++r) {
                if (s.frame().regs[r].rtype != RegType::NOT_INIT)
                    mark_reg_read(s, s.depth() - 1, r);
                fr.regs[r] = s.frame().regs[r];
                fr.regs[r].live_written = true;
                fr.regs[r].live_read = false;
            }
            fr.regs[kFramePointerReg].rtype = RegType::PTR_TO_STACK;
            fr.regs[kFramePointerReg].frame = static_cast<uint32_t>(s.frames.size());
            fr.regs[kFramePointerReg].scalar = abs_const(0);
            s.frames.push_back(std::move(fr));
            log_insn(s.pc, "call subprog " + std::to_string(callee));
            s.pc = entry;
            return StepOut::one(std::move(s));
        }
        if (i.pseudo == Pseudo::DirectCall)
            return StepOut::fail({ViolationCode::UnknownHelper, "direct calls exist only after rewriting"});
        return check_helper_call(std::move(s), i);
    }

    StepOut check_helper_call(VerifierState s, const Instruction& i) {
        const HelperSpec* spec = find_helper(i.imm);
        if (!spec)
            return StepOut::fail({ViolationCode::UnknownHelper, "unknown helper id " + std::to_string(i.imm)});

        int32_t cur_map = -1;
        const RegState* mem_ptr_arg = nullptr;
        uint8_t mem_ptr_idx = 0;
        int64_t iter_slot = 0;
        bool have_iter_slot = false;
        int32_t release_ref = 0;
        const RegState* lock_arg = nullptr;

        for (uint8_t a = 0; a < 5; ++a) {
            ArgKind kind = spec->args[a];
            if (kind == ArgKind::None)
                continue;
            uint8_t r = static_cast<uint8_t>(a + 1);
            if (auto v = read_reg(s, r))
                return StepOut::fail(*v);
            RegState& reg = s.frame().regs[r];
            switch (kind) {
            case ArgKind::None:
                break;
            case ArgKind::AnyScalar:
                if (reg.rtype != RegType::SCALAR_VALUE)
                    return StepOut::fail({ViolationCode::ArgTypeMismatch,
                                          spec->name + ": r" + std::to_string(r) + " must be a scalar"});
                break;
            case ArgKind::ConstMapPtr:
                if (reg.rtype != RegType::CONST_MAP_PTR)
                    return StepOut::fail({ViolationCode::ArgTypeMismatch,
                                          spec->name + ": r" + std::to_string(r) + " must be a map handle"});
                cur_map = reg.map_idx;
                break;
            case ArgKind::MapKeyPtr:
                if (auto v = region_readable(s, r, maps[cur_map].key_size))
                    return StepOut::fail(*v);
                break;
            case ArgKind::MapValuePtr:
                if (auto v = region_readable(s, r, maps[cur_map].value_size))
                    return StepOut::fail(*v);
                break;
            case ArgKind::MemPtr:
                mem_ptr_arg = &reg;
                mem_ptr_idx = r;
                break;
            case ArgKind::Size: {
                if (reg.rtype != RegType::SCALAR_VALUE)
                    return StepOut::fail({ViolationCode::ArgTypeMismatch, spec->name + ": size must be a scalar"});
                if (reg.scalar.bounds.umax > kMaxHelperRegion)
                    return StepOut::fail({ViolationCode::ArgTypeMismatch, spec->name + ": unbounded size"});
                precise_reg(s, r);
                if (!mem_ptr_arg)
                    return StepOut::fail({ViolationCode::ArgTypeMismatch, spec->name + ": size without a region"});
                if (auto v = region_readable(s, mem_ptr_idx, reg.scalar.bounds.umax))
                    return StepOut::fail(*v);
                break;
            }
            case ArgKind::LockedMapValuePtr: {
                if (reg.rtype != RegType::PTR_TO_MAP_VALUE || reg.map_idx < 0)
                    return StepOut::fail({ViolationCode::ArgTypeMismatch,
                                          spec->name + ": argument must be a non-null map value pointer"});
                if (maps[reg.map_idx].lock_off < 0)
                    return StepOut::fail({ViolationCode::ArgTypeMismatch,
                                          spec->name + ": map has no lock field"});
                if (!(reg.scalar.is_const() && reg.scalar.const_value() == 0) ||
                    reg.fixed_off != maps[reg.map_idx].lock_off)
                    return StepOut::fail({ViolationCode::ArgTypeMismatch,
                                          spec->name + ": pointer must aim exactly at the lock field"});
                lock_arg = &reg;
                break;
            }
            case ArgKind::StackIterSlot: {
                if (reg.rtype != RegType::PTR_TO_STACK ||
                    !(reg.scalar.is_const() && reg.scalar.const_value() == 0))
                    return StepOut::fail({ViolationCode::ArgTypeMismatch,
                                          spec->name + ": iterator must live on the stack"});
                int64_t e = reg.fixed_off;
                if ((e & 7) || e < -static_cast<int64_t>(config.stack_size) || e + 16 > 0)
                    return StepOut::fail({ViolationCode::ArgTypeMismatch,
                                          spec->name + ": iterator slot must be 16 aligned bytes"});
                iter_slot = e;
                have_iter_slot = true;
                break;
            }
            case ArgKind::ReleasableRef: {
                if (reg.rtype != RegType::PTR_TO_MAP_VALUE || reg.map_idx != kScratchMemProvenance)
                    return StepOut::fail({ViolationCode::ArgTypeMismatch,
                                          spec->name + ": argument is not an acquired object"});
                if (reg.ref_id == 0)
                    return StepOut::fail({ViolationCode::ReleaseOfUnownedRef, "pointer carries no reference"});
                release_ref = reg.ref_id;
                break;
            }
            }
        }
        uint32_t frame_idx = s.depth() - 1;

        // Effects. The argument contracts above populate lock_arg /
        // iter_slot / release_ref for the specs that declare them.
        bool iter_effect = spec->effect == HelperEffect::IterNew || spec->effect == HelperEffect::IterNext ||
                           spec->effect == HelperEffect::IterDestroy;
        bool lock_effect = spec->effect == HelperEffect::Lock || spec->effect == HelperEffect::Unlock;
        if ((iter_effect && !have_iter_slot) || (lock_effect && !lock_arg))
            return StepOut::fail({ViolationCode::ArgTypeMismatch, spec->name + ": malformed helper contract"});

        switch (spec->effect) {
        case HelperEffect::None:
            break;
        case HelperEffect::Lock:
            if (s.path.lock)
                return StepOut::fail({ViolationCode::SecondLockHeld, "a lock is already held"});
            s.path.lock = LockInfo{lock_arg->map_idx, lock_arg->id, lock_arg->fixed_off};
            break;
        case HelperEffect::Unlock:
            if (!s.path.lock)
                return StepOut::fail({ViolationCode::UnlockWithoutLock, "no lock is held"});
            if (s.path.lock->map_idx != lock_arg->map_idx || s.path.lock->reg_id != lock_arg->id ||
                s.path.lock->off != lock_arg->fixed_off)
                return StepOut::fail({ViolationCode::LockRegionMismatch, "unlock of a different region"});
            s.path.lock.reset();
            break;
        case HelperEffect::Acquire:
            break; // handled with the return value below
        case HelperEffect::Release: {
            auto& refs = s.path.acquired_refs;
            auto it = std::find_if(refs.begin(), refs.end(),
                                   [&](const RefInfo& ri) { return ri.ref_id == release_ref; });
            if (it == refs.end())
                return StepOut::fail({ViolationCode::DoubleRelease, "reference was already released"});
            refs.erase(it);
            break;
        }
        case HelperEffect::IterNew: {
            for (const IterInfo& it : s.path.iters)
                if (it.frame == frame_idx && it.slot_off == iter_slot)
                    return StepOut::fail({ViolationCode::IterMisuse, "iterator slot already active"});
            s.path.iters.push_back({frame_idx, static_cast<int32_t>(iter_slot)});
            // The slot's 16 bytes become opaque iterator state.
            RegState opaque = make_unknown_scalar_of_size(8);
            stack_write(s, frame_idx, iter_slot, 8, &opaque, false);
            stack_write(s, frame_idx, iter_slot + 8, 8, &opaque, false);
            break;
        }
        case HelperEffect::IterNext:
        case HelperEffect::IterDestroy: {
            auto& iters = s.path.iters;
            auto it = std::find_if(iters.begin(), iters.end(), [&](const IterInfo& ii) {
                return ii.frame == frame_idx && ii.slot_off == iter_slot;
            });
            if (it == iters.end())
                return StepOut::fail({ViolationCode::IterMisuse, "no active iterator at this slot"});
            if (spec->effect == HelperEffect::IterDestroy)
                iters.erase(it);
            break;
        }
        }

        if (cur_map >= 0) {
            if (notes[s.pc].call_map_idx == -1 || notes[s.pc].call_map_idx == cur_map)
                notes[s.pc].call_map_idx = cur_map;
            else
                notes[s.pc].call_map_idx = -2; // differs across paths; not rewritable
        }

        // Caller-saved registers are clobbered by the call.
        for (uint8_t r = 1; r <= 5; ++r) {
            s.frame().regs[r] = RegState{};
            s.frame().regs[r].live_written = true;
        }

        // Return value.
        switch (spec->ret) {
        case RetKind::Scalar:
            write_reg(s, 0, make_scalar(abs_unknown()));
            break;
        case RetKind::ScalarZero:
            write_reg(s, 0, make_scalar(abs_const(0)));
            break;
        case RetKind::MapValueOrNull: {
            RegState r0;
            r0.rtype = RegType::PTR_TO_MAP_VALUE_OR_NULL;
            r0.map_idx = cur_map;
            r0.mem_len = maps[cur_map].value_size;
            r0.scalar = abs_const(0);
            r0.id = s.next_id++;
            write_reg(s, 0, r0);
            break;
        }
        case RetKind::AcquiredMemOrNull: {
            RegState r0;
            r0.rtype = RegType::PTR_TO_MAP_VALUE_OR_NULL;
            r0.map_idx = kScratchMemProvenance;
            r0.mem_len = 8;
            r0.scalar = abs_const(0);
            r0.id = s.next_id++;
            r0.ref_id = s.next_id++;
            s.path.acquired_refs.push_back({r0.ref_id, spec->id, s.pc});
            write_reg(s, 0, r0);
            break;
        }
        case RetKind::IterItemOrEnd: {
            // Fork at the call: end-of-iteration first (the depth-first pass
            // beyond the loop seeds liveness and precision marks), then the
            // item-returned state.
            log_insn(s.pc, "iterator fork");
            VerifierState item = s;
            write_reg(s, 0, make_scalar(abs_const(0)));
            RegState cell;
            cell.rtype = RegType::PTR_TO_MAP_VALUE;
            cell.map_idx = kIterItemProvenance;
            cell.mem_len = 8;
            cell.scalar = abs_const(0);
            cell.id = item.next_id++;
            write_reg(item, 0, cell);
            s.pc += 1;
            item.pc = s.pc;
            StepOut out;
            out.succ.push_back(std::move(s));
            out.succ.push_back(std::move(item));
            return out;
        }
        }
        log_insn(s.pc, spec->name + " -> r0");
        s.pc += 1;
        return StepOut::one(std::move(s));
    }

    StepOut step(VerifierState s) {
        const Instruction& i = prog.insns[s.pc];
        notes[s.pc].seen = true;
        push_trace(s);
        if (i.wide_cont)
            return StepOut::fail({ViolationCode::UnknownHelper, "execution reached a wide continuation slot"});
        switch (i.cls) {
        case InsnClass::ALU32:
        case InsnClass::ALU64:
            return step_alu(std::move(s), i);
        case InsnClass::JMP:
        case InsnClass::JMP32:
            return step_jump(std::move(s), i);
        case InsnClass::LD:
            return step_lddw(std::move(s), i);
        case InsnClass::LDX:
        case InsnClass::ST:
        case InsnClass::STX:
            return step_mem(std::move(s), i);
        }
        return StepOut::fail({ViolationCode::UnknownHelper, "undecodable instruction"});
    }

    // ---- main loop -----------------------------------------------------------

    VerifierState initial_state() const {
        VerifierState s;
        Frame f;
        f.subprog = 0;
        f.regs[1].rtype = RegType::PTR_TO_CTX;
        f.regs[1].mem_len = kCtxSize;
        f.regs[1].scalar = abs_const(0);
        f.regs[1].live_written = true;
        f.regs[kFramePointerReg].rtype = RegType::PTR_TO_STACK;
        f.regs[kFramePointerReg].frame = 0;
        f.regs[kFramePointerReg].scalar = abs_const(0);
        s.frames.push_back(std::move(f));
        s.pc = prog.subprogs[0].start;
        return s;
    }

    Rejection make_rejection(ViolationCode code, uint32_t pc, const std::string& detail) {
        Rejection r;
        r.code = code;
        r.property = violation_property(code);
        r.insn = pc;
        r.detail = detail;
        r.stats = stats;
        log << "REJECT " << safety_property_name(r.property) << " at " << pc << ": " << detail << " ["
            << violation_code_name(code) << "]\n";
        r.log = log.str();
        return r;
    }

    VerifyResult run() {
        std::vector<VerifierState> worklist;
        worklist.push_back(initial_state());
        while (!worklist.empty()) {
            VerifierState state = std::move(worklist.back());
            worklist.pop_back();
            for (;;) {
                if (stats.insns_processed >= config.complexity_limit)
                    return make_rejection(ViolationCode::ComplexityLimitExceeded, state.pc,
                                          "instruction complexity limit of " +
                                              std::to_string(config.complexity_limit) + " reached");

                uint32_t pc = state.pc;
                if (cfg.pruning_points.count(pc) > 0) {
                    bool pruned = false;
                    // Loop convergence: an in-flight ancestor checkpoint at
                    // this point that already covers the current state means
                    // further unrolling adds nothing.
                    if (!state.path.iters.empty()) {
                        for (Checkpoint* node = state.parent.get(); node; node = node->parent.get()) {
                            if (node->pc != pc || node->branches <= 0)
                                continue;
                            if (states_subsume(node->state, state)) {
                                propagate_from_checkpoint(*node, state);
                                if (config.log_level >= 1)
                                    log << pc << ": converged against an earlier iteration\n";
                                ++stats.states_pruned;
                                pruned = true;
                                break;
                            }
                        }
                    }
                    if (!pruned && config.pruning_enabled) {
                        for (const auto& node : cache[pc]) {
                            if (node->branches != 0)
                                continue;
                            if (states_subsume(node->state, state)) {
                                propagate_from_checkpoint(*node, state);
                                if (config.log_level >= 1)
                                    log << pc << ": pruned, state already verified\n";
                                ++stats.states_pruned;
                                pruned = true;
                                break;
                            }
                        }
                    }
                    if (pruned) {
                        bump_branches(state, -1);
                        break;
                    }
                    make_checkpoint(state);
                }

                ++stats.insns_processed;
                std::shared_ptr<Checkpoint> chain = state.parent;
                StepOut out = step(std::move(state));
                if (out.violation)
                    return make_rejection(out.violation->code, pc, out.violation->detail);
                if (out.succ.empty()) {
                    bump_chain(chain.get(), -1); // clean path end (exit or infeasible)
                    break;
                }
                if (out.succ.size() == 2) {
                    bump_branches(out.succ[1], +1);
                    ++stats.states_created;
                    worklist.push_back(std::move(out.succ[1]));
                }
                state = std::move(out.succ[0]);
            }
        }
        VerifiedProgram vp;
        vp.prog = prog;
        vp.notes = notes;
        vp.stats = stats;
        if (config.log_level >= 1)
            log << "ACCEPT: " << stats.insns_processed << " instructions, " << stats.states_created
                << " states, " << stats.states_pruned << " pruned\n";
        vp.log = log.str();
        return vp;
    }
};

Verifier::Verifier(const Program& p, const std::vector<HelperSpec>& helpers, const std::vector<MapDef>& maps,
                   const CfgReport& cfg, const VerifierConfig& config)
    : impl_{std::make_unique<Impl>(p, helpers, maps, cfg, config)} {}

Verifier::~Verifier() = default;

VerifyResult Verifier::run() { return impl_->run(); }

VerifierState Verifier::initial_state() const { return impl_->initial_state(); }

Verifier::StepResult Verifier::simulate_insn(VerifierState s) {
    Impl::StepOut out = impl_->step(std::move(s));
    return {std::move(out.succ), std::move(out.violation)};
}

std::optional<Violation> Verifier::check_mem_access(VerifierState& s, uint8_t reg, int64_t off, uint32_t size,
                                                    bool is_write) {
    auto r = impl_->mem_access(s, reg, off, size, is_write, nullptr, false);
    return r.violation;
}

VerifyResult verify(const Program& p, const std::vector<HelperSpec>& helpers, const std::vector<MapDef>& maps,
                    const CfgReport& cfg, const VerifierConfig& config) {
    return Verifier{p, helpers, maps, cfg, config}.run();
}

} // namespace ubpf

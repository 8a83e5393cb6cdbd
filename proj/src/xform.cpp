// Copyright (c) ubpf-forge contributors.
// SPDX-License-Identifier: MIT
#include "ubpf/xform.hpp"

#include <algorithm>

#include "ubpf/helper_ids.hpp"

namespace ubpf {

namespace {

// Maps an old slot to its new position. Control falls through a deleted
// never-taken branch, so targets pointing at one slide forward to the next
// surviving slot; any other removed target is an invariant breach.
int32_t resolve_slot(uint32_t old_slot, const std::vector<int32_t>& new_of_old,
                     const std::vector<bool>* fall_removed, const char* what) {
    uint32_t t = old_slot;
    while (t < new_of_old.size() && new_of_old[t] < 0) {
        if (!fall_removed || !(*fall_removed)[t])
            throw XformError{std::string{what} + " targets a removed instruction (slot " + std::to_string(t) +
                             ")"};
        ++t;
    }
    if (t >= new_of_old.size())
        throw XformError{std::string{what} + " runs off the end after removal"};
    return new_of_old[t];
}

// Re-targets every jump and local call through an old-slot -> new-slot map.
// Synthetic slots (old_of_new entry < 0) carry template-internal offsets and
// are left alone.
void fixup_offsets(Program& p, const std::vector<int32_t>& new_of_old, const std::vector<int64_t>& old_of_new,
                   const std::vector<bool>* fall_removed = nullptr) {
    for (uint32_t s = 0; s < p.insns.size(); ++s) {
        Instruction& i = p.insns[s];
        if (i.wide_cont || old_of_new[s] < 0)
            continue;
        uint32_t old_slot = static_cast<uint32_t>(old_of_new[s]);
        if (i.is_cond_jump() || i.is_uncond_jump()) {
            int64_t old_target = static_cast<int64_t>(old_slot) + 1 + i.offset;
            int32_t nt = resolve_slot(static_cast<uint32_t>(old_target), new_of_old, fall_removed,
                                      "jump");
            i.offset = static_cast<int16_t>(nt - static_cast<int64_t>(s) - 1);
        } else if (i.is_call() && i.pseudo == Pseudo::LocalCall) {
            int64_t old_target = static_cast<int64_t>(old_slot) + 1 + i.imm;
            int32_t nt = resolve_slot(static_cast<uint32_t>(old_target), new_of_old, fall_removed,
                                      "call");
            i.imm = static_cast<int32_t>(nt - static_cast<int64_t>(s) - 1);
        }
    }
}

void rebuild_subprogs(const Program& old, Program& out, const std::vector<int32_t>& new_of_old,
                      uint32_t new_size, const std::vector<bool>* fall_removed = nullptr) {
    out.subprogs.clear();
    for (const Subprog& sp : old.subprogs) {
        int32_t start = resolve_slot(sp.start, new_of_old, fall_removed, "subprog entry");
        out.subprogs.push_back({sp.name, static_cast<uint32_t>(start), 0});
    }
    for (size_t k = 0; k < out.subprogs.size(); ++k) {
        uint32_t end = k + 1 < out.subprogs.size() ? out.subprogs[k + 1].start : new_size;
        out.subprogs[k].len = end - out.subprogs[k].start;
    }
}

} // namespace

TransformedProgram eliminate_dead_code(const Program& p, const std::vector<InsnNotes>& notes) {
    // Decide per slot: keep, and possibly rewrite a one-sided branch.
    std::vector<Instruction> rewritten = p.insns;
    std::vector<bool> keep(p.insns.size());
    std::vector<bool> fall_removed(p.insns.size(), false);
    for (uint32_t s = 0; s < p.insns.size(); ++s) {
        keep[s] = notes[s].seen;
        if (!keep[s] || p.insns[s].wide_cont)
            continue;
        if (p.insns[s].is_cond_jump()) {
            if (notes[s].pred == BranchPrediction::AlwaysTaken) {
                Instruction ja;
                ja.cls = InsnClass::JMP;
                ja.op = static_cast<uint8_t>(JmpOp::JA);
                ja.offset = p.insns[s].offset;
                rewritten[s] = ja;
            } else if (notes[s].pred == BranchPrediction::AlwaysFallthrough) {
                keep[s] = false;
                fall_removed[s] = true;
            }
        }
    }

    std::vector<int32_t> new_of_old(p.insns.size(), -1);
    std::vector<int64_t> old_of_new;
    TransformedProgram out;
    out.prog.prog_type = p.prog_type;
    out.prog.map_refs = p.map_refs;
    for (uint32_t s = 0; s < p.insns.size(); ++s) {
        if (!keep[s])
            continue;
        new_of_old[s] = static_cast<int32_t>(out.prog.insns.size());
        old_of_new.push_back(s);
        out.prog.insns.push_back(rewritten[s]);
        InsnNotes n = notes[s];
        if (rewritten[s].is_uncond_jump())
            n.pred = BranchPrediction::None;
        out.notes.push_back(n);
    }
    fixup_offsets(out.prog, new_of_old, old_of_new, &fall_removed);
    rebuild_subprogs(p, out.prog, new_of_old, static_cast<uint32_t>(out.prog.insns.size()), &fall_removed);
    return out;
}

namespace {

Instruction alu_imm(InsnClass cls, AluOp op, uint8_t dst, int32_t imm) {
    Instruction i;
    i.cls = cls;
    i.op = static_cast<uint8_t>(op);
    i.dst = dst;
    i.imm = imm;
    return i;
}

// Inline expansion of an array-map lookup: bounds-check the key and compute
// the element address directly. Uses only registers that are dead after the
// call (r0..r5); r2 still holds the key pointer at the call site.
std::vector<Instruction> array_lookup_template(int32_t map_idx, const MapDef& def) {
    std::vector<Instruction> seq;
    Instruction ldkey;
    ldkey.cls = InsnClass::LDX;
    ldkey.op = static_cast<uint8_t>(MemSize::W);
    ldkey.dst = 3;
    ldkey.src = 2;
    seq.push_back(ldkey); // r3 = *(u32 *)key

    Instruction bound;
    bound.cls = InsnClass::JMP;
    bound.op = static_cast<uint8_t>(JmpOp::JGE);
    bound.dst = 3;
    bound.imm = static_cast<int32_t>(def.max_entries);
    bound.offset = 5; // -> miss
    seq.push_back(bound);

    Instruction base;
    base.cls = InsnClass::LD;
    base.op = static_cast<uint8_t>(MemSize::DW);
    base.dst = 0;
    base.pseudo = Pseudo::MapValueBase;
    base.imm = map_idx;
    base.wide_imm = 0;
    seq.push_back(base);
    Instruction cont;
    cont.cls = InsnClass::LD;
    cont.op = static_cast<uint8_t>(MemSize::DW);
    cont.wide_cont = true;
    seq.push_back(cont);

    seq.push_back(alu_imm(InsnClass::ALU64, AluOp::MUL, 3, static_cast<int32_t>(def.value_size)));
    Instruction add;
    add.cls = InsnClass::ALU64;
    add.op = static_cast<uint8_t>(AluOp::ADD);
    add.dst = 0;
    add.src = 3;
    add.src_kind = SrcKind::Reg;
    seq.push_back(add);

    Instruction skip;
    skip.cls = InsnClass::JMP;
    skip.op = static_cast<uint8_t>(JmpOp::JA);
    skip.offset = 1; // over the miss arm
    seq.push_back(skip);

    seq.push_back(alu_imm(InsnClass::ALU64, AluOp::MOV, 0, 0)); // miss: null
    return seq;
}

} // namespace

TransformedProgram rewrite_map_helpers(const Program& p, const std::vector<InsnNotes>& notes,
                                       const std::vector<MapDef>& maps) {
    TransformedProgram out;
    out.prog.prog_type = p.prog_type;
    out.prog.map_refs = p.map_refs;
    std::vector<int32_t> new_of_old(p.insns.size(), -1);
    std::vector<int64_t> old_of_new;

    for (uint32_t s = 0; s < p.insns.size(); ++s) {
        const Instruction& i = p.insns[s];
        new_of_old[s] = static_cast<int32_t>(out.prog.insns.size());
        bool is_map_call = !i.wide_cont && i.is_call() && i.pseudo == Pseudo::None &&
                           (i.imm == HELPER_MAP_LOOKUP_ELEM || i.imm == HELPER_MAP_UPDATE_ELEM ||
                            i.imm == HELPER_MAP_DELETE_ELEM) &&
                           notes[s].call_map_idx >= 0;
        if (!is_map_call) {
            out.prog.insns.push_back(i);
            old_of_new.push_back(s);
            out.notes.push_back(notes[s]);
            continue;
        }
        int32_t map_idx = notes[s].call_map_idx;
        const MapDef& def = maps[map_idx];
        if (def.type == MapType::Array && i.imm == HELPER_MAP_LOOKUP_ELEM) {
            for (const Instruction& t : array_lookup_template(map_idx, def)) {
                out.prog.insns.push_back(t);
                old_of_new.push_back(-1);
                InsnNotes n;
                n.seen = true;
                out.notes.push_back(n);
            }
        } else {
            // Direct call into the map implementation.
            Instruction direct = i;
            direct.pseudo = Pseudo::DirectCall;
            direct.imm = (map_idx << 8) | i.imm;
            out.prog.insns.push_back(direct);
            old_of_new.push_back(s);
            InsnNotes n = notes[s];
            n.call_map_idx = map_idx;
            out.notes.push_back(n);
        }
    }
    fixup_offsets(out.prog, new_of_old, old_of_new);
    rebuild_subprogs(p, out.prog, new_of_old, static_cast<uint32_t>(out.prog.insns.size()));
    return out;
}

TransformedProgram transform(const VerifiedProgram& vp, const std::vector<MapDef>& maps) {
    TransformedProgram dce = eliminate_dead_code(vp.prog, vp.notes);
    return rewrite_map_helpers(dce.prog, dce.notes, maps);
}

} // namespace ubpf

// Copyright (c) ubpf-forge contributors.
// SPDX-License-Identifier: MIT
#include "ubpf/cfg.hpp"

#include <map>
#include <sstream>

namespace ubpf {

namespace {

struct Successor {
    int64_t target;
    bool is_branch; // branch edge of a conditional jump (vs fallthrough)
};

// Intra-subprog successors of the instruction at `slot`. Local-call targets
// are handled separately through the call graph.
std::vector<Successor> successors(const Program& p, uint32_t slot) {
    const Instruction& i = p.insns[slot];
    std::vector<Successor> out;
    if (i.is_exit())
        return out;
    if (i.is_uncond_jump()) {
        out.push_back({static_cast<int64_t>(slot) + 1 + i.offset, false});
        return out;
    }
    out.push_back({static_cast<int64_t>(slot) + i.slots(), false});
    if (i.is_cond_jump())
        out.push_back({static_cast<int64_t>(slot) + 1 + i.offset, true});
    return out;
}

} // namespace

CfgResult check_cfg(const Program& p) {
    CfgReport report;
    report.visited.assign(p.insns.size(), false);

    if (p.subprogs.empty() || p.subprogs[0].len == 0)
        return CfgError{CfgError::Kind::FallthroughOffSubprog, 0, "main subprog is empty"};

    // Resolve local-call targets to subprog ids up front.
    for (uint32_t s = 0; s < p.insns.size(); ++s) {
        const Instruction& i = p.insns[s];
        if (i.wide_cont || !i.is_call() || i.pseudo != Pseudo::LocalCall)
            continue;
        int64_t target = static_cast<int64_t>(s) + 1 + i.imm;
        bool ok = false;
        for (const Subprog& sp : p.subprogs)
            if (static_cast<int64_t>(sp.start) == target && sp.len > 0)
                ok = true;
        if (!ok)
            return CfgError{CfgError::Kind::RecursiveOrCrossSubprogEdge, s,
                            "call target is not a subprog entry"};
        report.subprog_call_graph.emplace_back(static_cast<uint32_t>(p.subprog_of(s)),
                                               static_cast<uint32_t>(p.subprog_of(static_cast<uint32_t>(target))));
    }

    // The call graph must be acyclic and every subprog reachable from main.
    {
        std::vector<int> color(p.subprogs.size(), 0);
        std::vector<uint32_t> stack{0};
        std::vector<bool> reach(p.subprogs.size(), false);
        reach[0] = true;
        // Reachability.
        while (!stack.empty()) {
            uint32_t u = stack.back();
            stack.pop_back();
            for (auto [from, to] : report.subprog_call_graph)
                if (from == u && !reach[to]) {
                    reach[to] = true;
                    stack.push_back(to);
                }
        }
        for (size_t k = 0; k < p.subprogs.size(); ++k)
            if (!reach[k])
                return CfgError{CfgError::Kind::UnreachableInstruction, p.subprogs[k].start,
                                "subprog '" + p.subprogs[k].name + "' is never called"};
        // Cycle check via DFS colors.
        std::vector<std::pair<uint32_t, size_t>> cstack;
        for (uint32_t root = 0; root < p.subprogs.size(); ++root) {
            if (color[root] != 0)
                continue;
            cstack.push_back({root, 0});
            color[root] = 1;
            while (!cstack.empty()) {
                auto& [u, idx] = cstack.back();
                bool advanced = false;
                for (size_t e = idx; e < report.subprog_call_graph.size(); ++e) {
                    auto [from, to] = report.subprog_call_graph[e];
                    if (from != u)
                        continue;
                    idx = e + 1;
                    if (color[to] == 1)
                        return CfgError{CfgError::Kind::RecursiveOrCrossSubprogEdge, p.subprogs[to].start,
                                        "recursive subprog call"};
                    if (color[to] == 0) {
                        color[to] = 1;
                        cstack.push_back({to, 0});
                        advanced = true;
                        break;
                    }
                }
                if (!advanced) {
                    color[u] = 2;
                    cstack.pop_back();
                }
            }
        }
    }

    // Depth-first walk per subprog with an explicit stack; classifies each
    // edge by the discovery state of its target.
    for (size_t spi = 0; spi < p.subprogs.size(); ++spi) {
        const Subprog& sp = p.subprogs[spi];
        if (sp.len == 0)
            return CfgError{CfgError::Kind::FallthroughOffSubprog, sp.start, "empty subprog"};
        uint32_t lo = sp.start, hi = sp.start + sp.len;
        std::vector<uint8_t> color(p.insns.size(), 0);
        std::vector<std::pair<uint32_t, size_t>> stack;
        color[lo] = 1;
        stack.push_back({lo, 0});
        report.visited[lo] = true;
        while (!stack.empty()) {
            uint32_t u = stack.back().first;
            size_t next = stack.back().second;
            auto succ = successors(p, u);
            if (next >= succ.size()) {
                color[u] = 2;
                stack.pop_back();
                continue;
            }
            stack.back().second = next + 1;
            Successor s = succ[next];
            bool is_jump_edge = s.is_branch || p.insns[u].is_uncond_jump();
            if (s.target < 0 || s.target >= static_cast<int64_t>(p.insns.size())) {
                if (is_jump_edge)
                    return CfgError{CfgError::Kind::JumpOutOfRange, u, "edge target outside the program"};
                return CfgError{CfgError::Kind::FallthroughOffSubprog, u,
                                "control falls through the end of the subprog"};
            }
            uint32_t v = static_cast<uint32_t>(s.target);
            if (v < lo || v >= hi) {
                if (is_jump_edge)
                    return CfgError{CfgError::Kind::RecursiveOrCrossSubprogEdge, u,
                                    "jump crosses a subprog boundary"};
                return CfgError{CfgError::Kind::FallthroughOffSubprog, u,
                                "control falls through the end of the subprog"};
            }
            if (p.insns[v].wide_cont)
                return CfgError{CfgError::Kind::JumpOutOfRange, u,
                                "edge targets the middle of a wide instruction"};
            EdgeKind kind;
            if (color[v] == 0) {
                kind = EdgeKind::TreeEdge;
                color[v] = 1;
                stack.push_back({v, 0});
                report.visited[v] = true;
            } else if (color[v] == 1) {
                kind = EdgeKind::BackEdge;
            } else {
                kind = EdgeKind::ForwardOrCrossEdge;
            }
            CfgEdge edge{u, v, kind};
            report.edges.push_back(edge);
            if (kind == EdgeKind::BackEdge)
                report.back_edges.push_back(edge);
        }
    }

    // A wide instruction's continuation slot is visited with its parent.
    for (uint32_t s = 0; s < p.insns.size(); ++s)
        if (p.insns[s].is_wide() && report.visited[s] && s + 1 < p.insns.size())
            report.visited[s + 1] = true;

    for (uint32_t s = 0; s < p.insns.size(); ++s)
        if (!report.visited[s])
            return CfgError{CfgError::Kind::UnreachableInstruction, s, "instruction is unreachable"};

    report.pruning_points = mark_pruning_points(p, report);
    return report;
}

std::set<uint32_t> mark_pruning_points(const Program& p, const CfgReport& r) {
    std::set<uint32_t> points;
    std::map<uint32_t, int> in_degree;
    for (const CfgEdge& e : r.edges)
        ++in_degree[e.to];
    for (auto [slot, deg] : in_degree)
        if (deg > 1)
            points.insert(slot);
    for (const CfgEdge& e : r.back_edges)
        points.insert(e.to);
    for (uint32_t s = 0; s < p.insns.size(); ++s)
        if (!p.insns[s].wide_cont && p.insns[s].is_call() && s + 1 < p.insns.size())
            points.insert(s + 1);
    return points;
}

std::string cfg_error_to_string(const CfgError& e) {
    std::ostringstream os;
    switch (e.kind) {
    case CfgError::Kind::UnreachableInstruction: os << "UnreachableInstruction"; break;
    case CfgError::Kind::FallthroughOffSubprog: os << "FallthroughOffSubprog"; break;
    case CfgError::Kind::JumpOutOfRange: os << "JumpOutOfRange"; break;
    case CfgError::Kind::RecursiveOrCrossSubprogEdge: os << "RecursiveOrCrossSubprogEdge"; break;
    }
    os << " at " << e.index << ": " << e.detail;
    return os.str();
}

std::string cfg_to_dot(const Program& p, const CfgReport& r) {
    std::ostringstream os;
    os << "digraph cfg {\n";
    os << "  node [shape=box, fontname=\"monospace\"];\n";
    for (uint32_t s = 0; s < p.insns.size(); ++s) {
        if (p.insns[s].wide_cont)
            continue;
        std::string text = format_insn(p, s);
        for (size_t k = 0; k < text.size(); ++k)
            if (text[k] == '"')
                text[k] = '\'';
        os << "  n" << s << " [label=\"" << s << ": " << text << "\"";
        if (r.pruning_points.count(s))
            os << ", style=bold";
        os << "];\n";
    }
    for (const CfgEdge& e : r.edges) {
        os << "  n" << e.from << " -> n" << e.to;
        switch (e.kind) {
        case EdgeKind::TreeEdge: os << " [label=\"tree\"]"; break;
        case EdgeKind::BackEdge: os << " [label=\"back\", color=red]"; break;
        case EdgeKind::ForwardOrCrossEdge: os << " [label=\"fwd/cross\"]"; break;
        }
        os << ";\n";
    }
    for (auto [from, to] : r.subprog_call_graph)
        os << "  n" << p.subprogs[from].start << " -> n" << p.subprogs[to].start
           << " [style=dashed, label=\"call\"];\n";
    os << "}\n";
    return os.str();
}

} // namespace ubpf

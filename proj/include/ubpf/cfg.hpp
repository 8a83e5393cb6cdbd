// Copyright (c) ubpf-forge contributors.
// SPDX-License-Identifier: MIT
#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "ubpf/isa.hpp"

namespace ubpf {

enum class EdgeKind : uint8_t { TreeEdge, BackEdge, ForwardOrCrossEdge };

struct CfgEdge {
    uint32_t from;
    uint32_t to;
    EdgeKind kind;
    bool operator==(const CfgEdge&) const = default;
};

struct CfgReport {
    std::vector<bool> visited;                        // per slot
    std::vector<CfgEdge> edges;                       // intra-subprog edges in DFS discovery order
    std::vector<CfgEdge> back_edges;
    std::set<uint32_t> pruning_points;
    std::vector<std::pair<uint32_t, uint32_t>> subprog_call_graph; // caller subprog -> callee subprog
};

struct CfgError {
    enum class Kind {
        UnreachableInstruction,
        FallthroughOffSubprog,
        JumpOutOfRange,
        RecursiveOrCrossSubprogEdge,
    };
    Kind kind;
    uint32_t index;
    std::string detail;
};

using CfgResult = std::variant<CfgReport, CfgError>;

// First verifier pass: depth-first walk of the control-flow graph from each
// subprog entry, edge classification, reachability and structure checks, and
// pruning-point annotation.
CfgResult check_cfg(const Program& p);

// Pruning points: join points (more than one incoming edge), back-edge
// targets, and the instruction after each call.
std::set<uint32_t> mark_pruning_points(const Program& p, const CfgReport& r);

std::string cfg_error_to_string(const CfgError& e);

// DOT rendering with edge-kind labels, for the `cfg` CLI subcommand.
std::string cfg_to_dot(const Program& p, const CfgReport& r);

} // namespace ubpf

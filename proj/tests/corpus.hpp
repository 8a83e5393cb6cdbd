// Copyright (c) ubpf-forge contributors.
// SPDX-License-Identifier: MIT
//
// Shared program corpus: the packet-filter example, one minimal rejected
// program per safety property, a set of accepted programs, and the diamond
// chain used to measure pruning.
#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "ubpf/cfg.hpp"
#include "ubpf/isa.hpp"
#include "ubpf/verifier.hpp"

namespace ubpf::corpus {

// Drops IPv4/UDP traffic, passes everything else. The bounds checks compare
// packet cursors against data_end before every load.
inline const char* kDropUdp = R"(
    ldxdw r2, [r1+0]      ; data
    ldxdw r3, [r1+8]      ; data_end
    mov64 r4, r2
    add64 r4, 14
    jgt r4, r3, pass      ; runt ethernet frame
    ldxh r5, [r2+12]
    jne r5, 0x0008, pass  ; ethertype: IPv4 (bytes 08 00 on the wire)
    mov64 r4, r2
    add64 r4, 34
    jgt r4, r3, pass      ; need the full 20-byte IPv4 header
    ldxb r5, [r2+23]
    jne r5, 17, pass      ; IPPROTO_UDP
    mov64 r0, 1           ; XDP_DROP
    exit
pass:
    mov64 r0, 2           ; XDP_PASS
    exit
)";

struct PropertyCase {
    const char* name; // safety property name the rejection must carry
    const char* src;
    ViolationCode expected_code;
};

// Exactly one minimal program per safety property.
inline std::vector<PropertyCase> property_cases() {
    return {
        {"Memory Safety",
         "ldxdw r2, [r1+0]\n"
         "ldxb r0, [r2+0]\n" // packet load with no proven range
         "exit\n",
         ViolationCode::OutOfBounds},
        {"Type Safety",
         "mov64 r2, r1\n"
         "add64 r2, r1\n" // pointer + pointer
         "mov64 r0, 0\n"
         "exit\n",
         ViolationCode::BadPointerArithmetic},
        {"Resource Safety",
         "call acquire_test_ref\n"
         "mov64 r0, 0\n"
         "exit\n", // reference never released
         ViolationCode::ResourceLeak},
        {"Information Leak Safety",
         "ldxdw r0, [r10-8]\n" // stack byte that was never written
         "exit\n",
         ViolationCode::UninitializedStackRead},
        {"Data Race Freedom",
         ".map locked array 4 16 1 8\n"
         "mov64 r9, 0\n"
         "stxw [r10-4], r9\n"
         "lddw r1, locked\n"
         "mov64 r2, r10\n"
         "add64 r2, -4\n"
         "call map_lookup_elem\n"
         "jeq r0, 0, out\n"
         "stw [r0+8], 0\n" // direct write to the lock field
         "out:\n"
         "mov64 r0, 0\n"
         "exit\n",
         ViolationCode::LockRegionAccess},
        {"Termination",
         "self:\n"
         "ja self\n", // never reaches exit
         ViolationCode::ComplexityLimitExceeded},
        {"Deadlock Freedom",
         ".map a array 4 16 1 8\n"
         ".map b array 4 16 1 8\n"
         "mov64 r9, 0\n"
         "stxw [r10-4], r9\n"
         "lddw r1, a\n"
         "mov64 r2, r10\n"
         "add64 r2, -4\n"
         "call map_lookup_elem\n"
         "jeq r0, 0, out\n"
         "mov64 r6, r0\n"
         "add64 r6, 8\n"
         "lddw r1, b\n"
         "mov64 r2, r10\n"
         "add64 r2, -4\n"
         "call map_lookup_elem\n"
         "jeq r0, 0, out\n"
         "mov64 r7, r0\n"
         "add64 r7, 8\n"
         "mov64 r1, r6\n"
         "call spin_lock\n"
         "mov64 r1, r7\n"
         "call spin_lock\n" // second lock while one is held
         "mov64 r1, r6\n"
         "call spin_unlock\n"
         "mov64 r1, r7\n"
         "call spin_unlock\n"
         "out:\n"
         "mov64 r0, 0\n"
         "exit\n",
         ViolationCode::SecondLockHeld},
        {"Upholding Execution Context Invariants",
         "exit\n", // r0 never set
         ViolationCode::UninitializedReturn},
    };
}

// Accepted programs exercising distinct verifier features.
inline std::vector<std::pair<const char*, const char*>> accepted_cases() {
    return {
        {"return-constant", "mov64 r0, 0\nexit\n"},
        {"drop-udp", kDropUdp},
        {"countdown-loop",
         "mov64 r1, 3\n"
         "L: sub64 r1, 1\n"
         "jne r1, 0, L\n"
         "mov64 r0, 0\n"
         "exit\n"},
        {"diamond",
         "ldxdw r2, [r1+0]\n"
         "ldxdw r3, [r1+8]\n"
         "mov64 r4, r3\n"
         "sub64 r4, r2\n"
         "mov64 r0, 0\n"
         "jeq r4, 5, A\n"
         "mov64 r0, 1\n"
         "A: exit\n"},
        {"spill-fill",
         "mov64 r6, 42\n"
         "stxdw [r10-8], r6\n"
         "mov64 r6, 0\n"
         "ldxdw r7, [r10-8]\n"
         "mov64 r0, r7\n"
         "exit\n"},
        {"zero-init-read",
         "stdw [r10-16], 0\n"
         "ldxdw r0, [r10-16]\n"
         "exit\n"},
        {"map-counter",
         ".map counters array 4 8 4\n"
         "mov64 r9, 0\n"
         "stxw [r10-4], r9\n"
         "lddw r1, counters\n"
         "mov64 r2, r10\n"
         "add64 r2, -4\n"
         "call map_lookup_elem\n"
         "jeq r0, 0, out\n"
         "ldxdw r8, [r0+0]\n"
         "add64 r8, 1\n"
         "stxdw [r0+0], r8\n"
         "out:\n"
         "mov64 r0, 2\n"
         "exit\n"},
        {"subprog-call",
         "mov64 r6, 7\n"
         "mov64 r1, 5\n"
         "call double_it\n"
         "add64 r0, r6\n"
         "exit\n"
         ".subprog double_it\n"
         "mov64 r0, r1\n"
         "add64 r0, r0\n"
         "exit\n"},
        {"acquire-release",
         "call acquire_test_ref\n"
         "jeq r0, 0, out\n"
         "mov64 r6, r0\n"
         "mov64 r7, 11\n"
         "stxdw [r6+0], r7\n"
         "ldxdw r8, [r6+0]\n"
         "mov64 r1, r6\n"
         "call release_test_ref\n"
         "out:\n"
         "mov64 r0, 0\n"
         "exit\n"},
        {"lock-unlock",
         ".map locked array 4 16 1 8\n"
         "mov64 r9, 0\n"
         "stxw [r10-4], r9\n"
         "lddw r1, locked\n"
         "mov64 r2, r10\n"
         "add64 r2, -4\n"
         "call map_lookup_elem\n"
         "jeq r0, 0, out\n"
         "mov64 r6, r0\n"
         "add64 r6, 8\n"
         "mov64 r1, r6\n"
         "call spin_lock\n"
         "mov64 r1, r6\n"
         "call spin_unlock\n"
         "out:\n"
         "mov64 r0, 0\n"
         "exit\n"},
        {"trace-emit",
         "stdw [r10-8], 77\n"
         "mov64 r1, r10\n"
         "add64 r1, -8\n"
         "mov64 r2, 8\n"
         "call trace_emit\n"
         "mov64 r0, 0\n"
         "exit\n"},
        {"byte-swap",
         "mov64 r1, 0x1234\n"
         "be16 r1\n"
         "le32 r1\n"
         "mov64 r0, r1\n"
         "exit\n"},
        {"jmp32-compare",
         "mov32 r1, 100\n"
         "jgt32 r1, 50, A\n"
         "mov64 r0, 0\n"
         "exit\n"
         "A: mov64 r0, 1\n"
         "exit\n"},
        {"iterator-loop",
         "mov64 r6, 0\n"
         "mov64 r1, r10\n"
         "add64 r1, -16\n"
         "mov64 r2, 10\n"
         "call iter_new\n"
         "loop:\n"
         "mov64 r1, r10\n"
         "add64 r1, -16\n"
         "call iter_next\n"
         "jeq r0, 0, done\n"
         "ldxdw r7, [r0+0]\n"
         "add64 r6, 1\n"
         "ja loop\n"
         "done:\n"
         "mov64 r1, r10\n"
         "add64 r1, -16\n"
         "call iter_destroy\n"
         "mov64 r0, 0\n"
         "exit\n"},
    };
}

// Iterator loop whose counter needs precision on every iteration, so the
// states never converge and the complexity limit trips.
inline const char* kUnconvergingIter = R"(
    mov64 r6, 0
    mov64 r1, r10
    add64 r1, -16
    mov64 r2, 10
    call iter_new
loop:
    mov64 r1, r10
    add64 r1, -16
    call iter_next
    jeq r0, 0, done
    add64 r6, 1
    jeq r6, 123456, done
    ja loop
done:
    mov64 r1, r10
    add64 r1, -16
    call iter_destroy
    mov64 r0, 0
    exit
)";

// Chain of `n` independent two-way diamonds, each branching on a fresh
// packet byte; path count without pruning is 2^n. The counter in r6 is live
// but never needs precision, so the joins prune.
inline std::string diamond_chain(int n) {
    std::string src;
    src += "ldxdw r2, [r1+0]\n";
    src += "ldxdw r3, [r1+8]\n";
    src += "mov64 r4, r2\n";
    src += "add64 r4, " + std::to_string(n) + "\n";
    src += "jgt r4, r3, out\n";
    src += "mov64 r6, 0\n";
    for (int k = 1; k <= n; ++k) {
        src += "ldxb r5, [r2+" + std::to_string(k - 1) + "]\n";
        src += "jeq r5, 0, d" + std::to_string(k) + "\n";
        src += "add64 r6, 1\n";
        src += "d" + std::to_string(k) + ":\n";
    }
    src += "out:\n";
    src += "mov64 r0, 2\nexit\n";
    return src;
}

inline std::vector<MapDef> map_defs(const Program& p) {
    std::vector<MapDef> out;
    for (const MapRef& r : p.map_refs) {
        if (!r.def)
            throw std::runtime_error("map '" + r.name + "' has no definition");
        out.push_back(*r.def);
    }
    return out;
}

inline CfgReport cfg_or_throw(const Program& p) {
    CfgResult r = check_cfg(p);
    if (std::holds_alternative<CfgError>(r))
        throw std::runtime_error(cfg_error_to_string(std::get<CfgError>(r)));
    return std::get<CfgReport>(r);
}

inline VerifyResult verify_src(const std::string& src, VerifierConfig config = {}) {
    Program p = parse_asm(src);
    CfgReport report = cfg_or_throw(p);
    return verify(p, default_helper_specs(), map_defs(p), report, config);
}

} // namespace ubpf::corpus

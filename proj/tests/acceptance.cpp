// Copyright (c) ubpf-forge contributors.
// SPDX-License-Identifier: MIT
//
// Acceptance suite: one self-contained check per release criterion, one
// PASS/FAIL line each. Exits nonzero if any criterion fails.
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "abs_oracle.hpp"
#include "corpus.hpp"
#include "differential.hpp"
#include "progen.hpp"
#include "ubpf/engine.hpp"
#include "ubpf/runtime.hpp"
#include "ubpf/verifier.hpp"
#include "ubpf/xform.hpp"

using namespace ubpf;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

// 1. Exhaustive 8-bit soundness of every ALU transfer (mask-sampled pair
//    space) and bitwise optimality of ADD.
Outcome abstract_domain_soundness() {
    auto a_tnums = oracle::all_tnums8();
    auto b_tnums = oracle::tnums8_with_masks({0x00, 0x01, 0x03, 0x0f, 0x55, 0x80, 0xc3, 0xff});

    std::vector<ScalarAbs> a_lift(a_tnums.size()), b_lift(b_tnums.size());
    std::vector<std::vector<uint64_t>> a_gamma(a_tnums.size()), b_gamma(b_tnums.size());
    for (size_t i = 0; i < a_tnums.size(); ++i) {
        a_lift[i] = oracle::lift(a_tnums[i]);
        a_gamma[i] = oracle::concretize8(a_tnums[i]);
    }
    for (size_t i = 0; i < b_tnums.size(); ++i) {
        b_lift[i] = oracle::lift(b_tnums[i]);
        b_gamma[i] = oracle::concretize8(b_tnums[i]);
    }

    uint64_t violations = 0, optimality_misses = 0, pairs = 0;
    for (AluOp op : oracle::kAllAluOps) {
        for (size_t ai = 0; ai < a_tnums.size(); ++ai) {
            for (size_t bi = 0; bi < b_tnums.size(); ++bi) {
                ScalarAbs r64 = abs_alu(op, a_lift[ai], b_lift[bi], 64);
                ScalarAbs r32 = abs_alu(op, a_lift[ai], b_lift[bi], 32);
                ++pairs;
                uint64_t diff = 0, first = 0;
                bool first_set = false;
                for (uint64_t x : a_gamma[ai]) {
                    for (uint64_t y : b_gamma[bi]) {
                        uint64_t c64 = oracle::alu64(op, x, y);
                        uint64_t c32 = oracle::alu32(op, x, y);
                        if (!abs_contains(r64, c64) || !abs_contains(r32, c32)) {
                            ++violations;
                            continue;
                        }
                        if (op == AluOp::ADD) {
                            if (!first_set) {
                                first = c64;
                                first_set = true;
                            }
                            diff |= c64 ^ first;
                        }
                    }
                }
                if (op == AluOp::ADD && first_set) {
                    Tnum minimal{first & ~diff, diff};
                    if (!(r64.tnum == minimal))
                        ++optimality_misses;
                }
            }
        }
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "%llu violations, %llu ADD optimality misses over %llu tnum pairs x %zu ops",
                  static_cast<unsigned long long>(violations),
                  static_cast<unsigned long long>(optimality_misses), static_cast<unsigned long long>(pairs),
                  std::size(oracle::kAllAluOps));
    return {violations == 0 && optimality_misses == 0, buf};
}

// 2. Eight minimal rejections (one per safety property, exact reason) plus
//    at least ten accepted programs including the packet filter.
Outcome safety_property_corpus() {
    int rejected = 0, accepted = 0;
    std::string fail;
    for (const corpus::PropertyCase& pc : corpus::property_cases()) {
        VerifierConfig cfg;
        if (pc.expected_code == ViolationCode::ComplexityLimitExceeded)
            cfg.complexity_limit = 1000;
        VerifyResult r = corpus::verify_src(pc.src, cfg);
        if (!std::holds_alternative<Rejection>(r)) {
            fail += std::string{pc.name} + " not rejected; ";
            continue;
        }
        const Rejection& rej = std::get<Rejection>(r);
        if (rej.code != pc.expected_code || std::string{safety_property_name(rej.property)} != pc.name) {
            fail += std::string{pc.name} + " wrong reason (" + violation_code_name(rej.code) + "); ";
            continue;
        }
        ++rejected;
    }
    for (const auto& [name, src] : corpus::accepted_cases()) {
        VerifyResult r = corpus::verify_src(src);
        if (!std::holds_alternative<VerifiedProgram>(r)) {
            fail += std::string{name} + " not accepted; ";
            continue;
        }
        ++accepted;
    }
    char buf[128];
    std::snprintf(buf, sizeof buf, "%d/8 property rejections, %d accepted programs. %s", rejected, accepted,
                  fail.c_str());
    return {rejected == 8 && accepted >= 10 && fail.empty(), buf};
}

// 3. The packet filter end to end: verify, attach, and classify three frames.
Outcome end_to_end_packet_filter() {
    Runtime rt;
    rt.verifier_config().log_level = 0;
    auto lr = rt.prog_load(corpus::kDropUdp);
    if (!std::holds_alternative<Handle>(lr))
        return {false, "packet filter did not load"};
    Handle prog = std::get<Handle>(lr);
    rt.link_create(prog, "xdp@eth0");
    auto frame = [](uint8_t proto) {
        std::vector<uint8_t> f(48, 0);
        f[12] = 0x08;
        f[13] = 0x00;
        f[23] = proto;
        return f;
    };
    int ok = 0;
    ok += rt.hook_dispatch("xdp@eth0", frame(17)) == XdpAction::Drop;
    ok += rt.hook_dispatch("xdp@eth0", frame(6)) == XdpAction::Pass;
    ok += rt.hook_dispatch("xdp@eth0", std::vector<uint8_t>(10, 0xab)) == XdpAction::Pass;
    return {ok == 3, std::to_string(ok) + "/3 frames classified as expected"};
}

// 4. State pruning collapses the 12-diamond chain.
Outcome pruning_effectiveness() {
    std::string src = corpus::diamond_chain(12);
    VerifierConfig with;
    with.log_level = 0;
    VerifierConfig without = with;
    without.pruning_enabled = false;
    VerifyResult a = corpus::verify_src(src, with);
    VerifyResult b = corpus::verify_src(src, without);
    bool both_accept =
        std::holds_alternative<VerifiedProgram>(a) && std::holds_alternative<VerifiedProgram>(b);
    if (!both_accept)
        return {false, "verdicts differ or program rejected"};
    uint64_t pruned_states = std::get<VerifiedProgram>(a).stats.states_created;
    uint64_t full_states = std::get<VerifiedProgram>(b).stats.states_created;
    char buf[128];
    std::snprintf(buf, sizeof buf, "states explored: %llu with pruning vs %llu without (2^12 = 4096)",
                  static_cast<unsigned long long>(pruned_states), static_cast<unsigned long long>(full_states));
    return {pruned_states * 10 <= full_states && full_states >= (1u << 12), buf};
}

// 5. Termination: the self-jump and the unconverging iterator loop both stop
//    at exactly the configured complexity limit.
Outcome termination_enforcement() {
    VerifierConfig cfg;
    cfg.complexity_limit = 1000;
    cfg.log_level = 0;
    int ok = 0;
    for (const char* src : {"self: ja self\n", corpus::kUnconvergingIter}) {
        VerifyResult r = corpus::verify_src(src, cfg);
        if (!std::holds_alternative<Rejection>(r))
            continue;
        const Rejection& rej = std::get<Rejection>(r);
        if (rej.code == ViolationCode::ComplexityLimitExceeded && rej.stats.insns_processed == 1000)
            ++ok;
    }
    return {ok == 2, std::to_string(ok) + "/2 programs rejected at exactly the limit of 1000"};
}

// 6. Every execution route agrees over a large random corpus; also feeds
//    criterion 7 with the images it builds.
struct CorpusResult {
    Outcome outcome;
    uint64_t imm_leaks{};
    uint64_t scanned_ops{};
};

CorpusResult transform_preservation_and_blinding() {
    std::mt19937_64 rng{0xac5e97a11ull};
    Runtime rt;
    rt.verifier_config().log_level = 0;
    const int programs = 1000;
    const int inputs = 10;
    const std::vector<uint64_t> blind_seeds{3, 17, 29};
    uint64_t imm_leaks = 0, scanned = 0;
    for (int k = 0; k < programs; ++k) {
        std::string src = progen::generate(rng);
        auto lr = rt.prog_load(src);
        if (!std::holds_alternative<Handle>(lr))
            return {{false, "program " + std::to_string(k) + " rejected: " +
                                std::get<Rejection>(lr).detail},
                    0,
                    0};
        Handle h = std::get<Handle>(lr);

        // Blinding sweep (criterion 7): no original immediate above the
        // hardened threshold may survive into any blinded body.
        const LoadedProgram& lp = rt.prog_of(h);
        std::set<uint64_t> big_imms;
        for (const Instruction& i : lp.xformed.prog.insns) {
            if (i.wide_cont || i.is_call())
                continue;
            uint64_t operand = i.cls == InsnClass::LD
                                   ? i.imm64()
                                   : static_cast<uint64_t>(static_cast<int64_t>(i.imm));
            int64_t s = static_cast<int64_t>(operand);
            uint64_t mag = static_cast<uint64_t>(s < 0 ? -s : s);
            if (mag > 255)
                big_imms.insert(operand);
        }
        JitImage blinded = lower(lp.xformed.prog, lp.xformed.notes, true, 7 + k);
        for (const LoweredSub& sub : blinded.subs())
            for (const LoweredOp& op : sub.body) {
                ++scanned;
                if (op.kind == LKind::Alu || op.kind == LKind::Jump || op.kind == LKind::StoreImm ||
                    op.kind == LKind::LoadImm64)
                    if (!op.reg_operand && big_imms.count(op.imm))
                        ++imm_leaks;
            }

        for (int input = 0; input < inputs; ++input) {
            std::vector<uint8_t> packet = differential::random_packet(rng);
            auto diverged = differential::check_all_routes(rt, h, packet, rng(), blind_seeds);
            if (diverged)
                return {{false,
                         "program " + std::to_string(k) + " input " + std::to_string(input) + ": " + *diverged},
                        0,
                        0};
        }
        rt.obj_put(h);
    }
    char buf[128];
    std::snprintf(buf, sizeof buf, "%d programs x %d inputs x 5 routes agree bit-exactly", programs, inputs);
    return {{true, buf}, imm_leaks, scanned};
}

// 8. Object lifecycle against a replayed reference-count oracle.
Outcome lifecycle_model() {
    std::mt19937_64 rng{0x11f3c1c1eull};
    uint64_t ops = 0, divergences = 0;
    while (ops < 10000) {
        Runtime rt;
        std::map<Handle, int> total, user;
        std::map<std::string, Handle> pins;
        std::map<Handle, Handle> link_prog;
        std::vector<Handle> created, progs;
        int pin_seq = 0;
        auto alive = [&](Handle h) { return total.count(h) && total[h] > 0; };
        std::function<void(Handle)> oracle_put = [&](Handle h) {
            if (--total[h] == 0) {
                total.erase(h);
                user.erase(h);
                if (link_prog.count(h)) {
                    Handle p = link_prog[h];
                    link_prog.erase(h);
                    oracle_put(p);
                }
            }
        };
        for (int step = 0; step < 250 && ops < 10000; ++step, ++ops) {
            switch (rng() % 6) {
            case 0: {
                Handle h = rt.map_create({MapType::Array, 4, 8, 2, -1});
                total[h] = user[h] = 1;
                created.push_back(h);
                break;
            }
            case 1: {
                auto r = rt.prog_load("mov64 r0, 0\nexit\n");
                Handle h = std::get<Handle>(r);
                total[h] = user[h] = 1;
                created.push_back(h);
                progs.push_back(h);
                break;
            }
            case 2: {
                std::vector<Handle> live;
                for (Handle p : progs)
                    if (alive(p))
                        live.push_back(p);
                if (live.empty())
                    break;
                Handle p = live[rng() % live.size()];
                Handle l = rt.link_create(p, "hook" + std::to_string(step) + "_" + std::to_string(ops));
                total[l] = user[l] = 1;
                ++total[p];
                link_prog[l] = p;
                created.push_back(l);
                break;
            }
            case 3: {
                if (created.empty())
                    break;
                Handle h = created[rng() % created.size()];
                if (!alive(h))
                    break;
                rt.obj_get(h);
                ++total[h];
                ++user[h];
                break;
            }
            case 4: {
                if (created.empty())
                    break;
                Handle h = created[rng() % created.size()];
                if (!alive(h) || user[h] == 0)
                    break;
                --user[h];
                rt.obj_put(h);
                oracle_put(h);
                break;
            }
            case 5: {
                if (rng() % 2 && !pins.empty()) {
                    auto it = pins.begin();
                    std::advance(it, rng() % pins.size());
                    rt.unpin(it->first);
                    oracle_put(it->second);
                    pins.erase(it);
                } else if (!created.empty()) {
                    Handle h = created[rng() % created.size()];
                    if (!alive(h))
                        break;
                    std::string path = "pin" + std::to_string(pin_seq++);
                    rt.pin(h, path);
                    pins[path] = h;
                    ++total[h];
                }
                break;
            }
            }
            for (Handle h : created)
                if (alive(h) != rt.is_live(h))
                    ++divergences;
        }
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "%llu operations, %llu liveness divergences",
                  static_cast<unsigned long long>(ops), static_cast<unsigned long long>(divergences));
    return {divergences == 0, buf};
}

// 9. A crafted faulting untrusted load zero-fills its destination and the
//    program completes with the analytically expected result.
Outcome exception_table_semantics() {
    Program p = parse_asm(
        "lddw r2, 0x7f000000\n" // points at no mapped region
        "ldxdw r3, [r2+0]\n"
        "mov64 r0, 41\n"
        "add64 r0, r3\n" // + 0 from the zero-filled load
        "add64 r0, 1\n"
        "exit\n");
    std::vector<InsnNotes> notes(p.insns.size());
    for (auto& n : notes)
        n.seen = true;
    notes[2].untrusted_load = true;
    JitImage img = lower(p, notes, false, 1);
    Runtime rt;
    rt.verifier_config().log_level = 0;
    auto lr = rt.prog_load("mov64 r0, 0\nexit\n");
    Handle dummy = std::get<Handle>(lr);
    auto ctx = rt.make_context(dummy, {});
    auto env = rt.make_env(dummy);
    ExecResult r = exec_image(img, *ctx, *env, kCtxBase, 1000);
    char buf[96];
    std::snprintf(buf, sizeof buf, "r0 = %llu (expected 42), %llu fault handled",
                  static_cast<unsigned long long>(r.r0), static_cast<unsigned long long>(ctx->faults));
    return {r.r0 == 42 && ctx->faults == 1, buf};
}

int g_failures = 0;

void report(int number, const char* name, const Outcome& o, double seconds) {
    std::printf("%s  %d. %-34s %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", number, name, o.detail.c_str(),
                seconds);
    if (!o.pass)
        ++g_failures;
}

template <typename F>
void run(int number, const char* name, F&& f) {
    auto start = std::chrono::steady_clock::now();
    Outcome o = f();
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report(number, name, o, secs);
}

} // namespace

int main() {
    run(1, "abstract-domain soundness", abstract_domain_soundness);
    run(2, "safety-property corpus", safety_property_corpus);
    run(3, "end-to-end packet filter", end_to_end_packet_filter);
    run(4, "pruning effectiveness", pruning_effectiveness);
    run(5, "termination enforcement", termination_enforcement);

    auto start = std::chrono::steady_clock::now();
    CorpusResult cr = transform_preservation_and_blinding();
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report(6, "transform preservation", cr.outcome, secs);
    {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%llu leaked immediates over %llu lowered ops",
                      static_cast<unsigned long long>(cr.imm_leaks),
                      static_cast<unsigned long long>(cr.scanned_ops));
        report(7, "blinding mitigation", {cr.outcome.pass && cr.imm_leaks == 0, buf}, 0.0);
    }

    run(8, "lifecycle model", lifecycle_model);
    run(9, "exception-table semantics", exception_table_semantics);

    if (g_failures) {
        std::printf("%d criterion(s) FAILED\n", g_failures);
        return 1;
    }
    std::printf("all acceptance criteria passed\n");
    return 0;
}

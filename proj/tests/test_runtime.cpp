// Copyright (c) ubpf-forge contributors.
// SPDX-License-Identifier: MIT
#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <random>

#include "corpus.hpp"
#include "ubpf/runtime.hpp"

using namespace ubpf;

namespace {

Handle load_ok(Runtime& rt, const std::string& src) {
    auto r = rt.prog_load(src);
    REQUIRE(std::holds_alternative<Handle>(r));
    return std::get<Handle>(r);
}

std::vector<uint8_t> ip_frame(uint8_t protocol) {
    std::vector<uint8_t> f(48, 0);
    f[12] = 0x08;
    f[13] = 0x00;
    f[23] = protocol;
    return f;
}

} // namespace

TEST_CASE("prog_load returns a handle for the packet filter") {
    Runtime rt;
    Handle h = load_ok(rt, corpus::kDropUdp);
    CHECK(rt.is_live(h));
}

TEST_CASE("prog_load propagates verifier rejections with the full log") {
    Runtime rt;
    auto r = rt.prog_load("exit\n");
    REQUIRE(std::holds_alternative<Rejection>(r));
    CHECK(std::get<Rejection>(r).log.find("REJECT") != std::string::npos);
}

TEST_CASE("prog_load rejects structurally invalid programs at the CFG stage") {
    Runtime rt;
    auto r = rt.prog_load("ja +1\nmov64 r0, 0\nexit\n");
    REQUIRE(std::holds_alternative<Rejection>(r));
    CHECK(std::get<Rejection>(r).detail.find("Unreachable") != std::string::npos);
}

TEST_CASE("prog_load rejects a lock leak") {
    Runtime rt;
    auto r = rt.prog_load(
        ".map a array 4 16 1 8\n"
        "mov64 r9, 0\n"
        "stxw [r10-4], r9\n"
        "lddw r1, a\n"
        "mov64 r2, r10\n"
        "add64 r2, -4\n"
        "call map_lookup_elem\n"
        "jeq r0, 0, out\n"
        "mov64 r6, r0\n"
        "add64 r6, 8\n"
        "mov64 r1, r6\n"
        "call spin_lock\n"
        "out:\n"
        "mov64 r0, 0\n"
        "exit\n");
    REQUIRE(std::holds_alternative<Rejection>(r));
    CHECK(std::get<Rejection>(r).property == SafetyProperty::ResourceSafety);
}

TEST_CASE("map create/update/lookup round trip") {
    Runtime rt;
    Handle h = rt.map_create({MapType::Array, 4, 8, 16, -1});
    MapInstance& m = rt.map_of(h);
    uint32_t key = 3;
    uint64_t value = 0x1122334455667788;
    CHECK(m.update(reinterpret_cast<uint8_t*>(&key), reinterpret_cast<uint8_t*>(&value), 0) == 0);
    int64_t slot = m.lookup(reinterpret_cast<uint8_t*>(&key));
    REQUIRE(slot == 3);
    uint64_t got;
    std::memcpy(&got, m.value_at(3), 8);
    CHECK(got == value);
}

TEST_CASE("map definition validation") {
    Runtime rt;
    CHECK_THROWS_AS(rt.map_create({MapType::Array, 4, 0, 16, -1}), RuntimeApiError);
    CHECK_THROWS_AS(rt.map_create({MapType::Array, 8, 8, 16, -1}), RuntimeApiError);
    CHECK_THROWS_AS(rt.map_create({MapType::Hash, 4, 8, 4, 4}), RuntimeApiError); // lock not 8-aligned
}

TEST_CASE("hash map stores, finds, evicts nothing until full, and deletes") {
    Runtime rt;
    Handle h = rt.map_create({MapType::Hash, 4, 8, 4, -1});
    MapInstance& m = rt.map_of(h);
    auto put = [&](uint32_t k, uint64_t v) {
        return m.update(reinterpret_cast<uint8_t*>(&k), reinterpret_cast<uint8_t*>(&v), 0);
    };
    auto get = [&](uint32_t k) -> int64_t { return m.lookup(reinterpret_cast<uint8_t*>(&k)); };
    CHECK(put(1, 100) == 0);
    CHECK(put(2, 200) == 0);
    CHECK(put(3, 300) == 0);
    CHECK(put(4, 400) == 0);
    CHECK(put(5, 500) == -1); // at capacity
    CHECK(get(9) == -1);      // miss
    uint64_t v2;
    REQUIRE(get(2) >= 0);
    std::memcpy(&v2, m.value_at(static_cast<uint32_t>(get(2))), 8);
    CHECK(v2 == 200);
    uint32_t k2 = 2;
    CHECK(m.erase(reinterpret_cast<uint8_t*>(&k2)) == 0);
    CHECK(get(2) == -1);
    CHECK(put(5, 500) == 0); // room again
    // Every key must still resolve after the deletion reshuffle.
    for (uint32_t k : {1u, 3u, 4u, 5u})
        CHECK(get(k) >= 0);
}

TEST_CASE("update at capacity returns the error code to the program") {
    Runtime rt;
    Handle h = load_ok(rt,
                       ".map tiny hash 4 8 1\n"
                       "mov64 r6, 1\n"
                       "stxw [r10-32], r6\n"
                       "stdw [r10-24], 7\n"
                       "lddw r1, tiny\n"
                       "mov64 r2, r10\n"
                       "add64 r2, -32\n"
                       "mov64 r3, r10\n"
                       "add64 r3, -24\n"
                       "mov64 r4, 0\n"
                       "call map_update_elem\n"
                       "mov64 r6, r0\n"
                       "mov64 r1, 2\n"
                       "stxw [r10-32], r1\n"
                       "lddw r1, tiny\n"
                       "mov64 r2, r10\n"
                       "add64 r2, -32\n"
                       "mov64 r3, r10\n"
                       "add64 r3, -24\n"
                       "mov64 r4, 0\n"
                       "call map_update_elem\n"
                       "add64 r0, r6\n" // 0 + (-1)
                       "exit\n");
    auto ctx = rt.make_context(h, {});
    ExecResult r = rt.run_program(h, *ctx, true, 10000);
    CHECK(static_cast<int64_t>(r.r0) == -1);
}

TEST_CASE("attach, dispatch, detach lifecycle on a hook") {
    Runtime rt;
    Handle prog = load_ok(rt, corpus::kDropUdp);
    CHECK(rt.hook_dispatch("xdp@eth0", ip_frame(17)) == XdpAction::Pass); // nothing attached
    Handle link = rt.link_create(prog, "xdp@eth0");
    CHECK(rt.hook_dispatch("xdp@eth0", ip_frame(17)) == XdpAction::Drop);
    CHECK(rt.hook_dispatch("xdp@eth0", ip_frame(6)) == XdpAction::Pass);
    CHECK(rt.hook_dispatch("xdp@eth0", std::vector<uint8_t>(10, 1)) == XdpAction::Pass);
    CHECK_THROWS_AS(rt.link_create(prog, "xdp@eth0"), RuntimeApiError); // busy
    rt.obj_put(link);
    CHECK(rt.hook_dispatch("xdp@eth0", ip_frame(17)) == XdpAction::Pass); // detached
}

TEST_CASE("a link keeps its program alive") {
    Runtime rt;
    Handle prog = load_ok(rt, "mov64 r0, 1\nexit\n");
    Handle link = rt.link_create(prog, "xdp@hook");
    rt.obj_put(prog); // drop the creator's reference
    CHECK(rt.is_live(prog));
    CHECK(rt.hook_dispatch("xdp@hook", {}) == XdpAction::Drop);
    rt.obj_put(link);
    CHECK(!rt.is_live(prog));
}

TEST_CASE("pinning extends lifetime beyond the last handle") {
    Runtime rt;
    Handle prog = load_ok(rt, "mov64 r0, 0\nexit\n");
    rt.pin(prog, "progs/keep");
    rt.obj_put(prog);
    CHECK(rt.is_live(prog));
    rt.unpin("progs/keep");
    CHECK(!rt.is_live(prog));
    CHECK_THROWS_AS(rt.unpin("progs/keep"), RuntimeApiError); // double unpin
}

TEST_CASE("pin paths are unique") {
    Runtime rt;
    Handle a = load_ok(rt, "mov64 r0, 0\nexit\n");
    Handle b = load_ok(rt, "mov64 r0, 1\nexit\n");
    rt.pin(a, "p");
    CHECK_THROWS_AS(rt.pin(b, "p"), RuntimeApiError);
}

TEST_CASE("lifecycle model: random op sequences match a replayed refcount oracle") {
    // The oracle replays reference counts. Sequences stay well-formed the way
    // descriptor users are: a put only releases a reference the user holds
    // (creation or get); pins and links hold their own.
    std::mt19937_64 rng{0x11fe};
    for (int round = 0; round < 60; ++round) {
        Runtime rt;
        std::map<Handle, int> total;      // every reference
        std::map<Handle, int> user;       // creator handle + gets
        std::map<std::string, Handle> pins;
        std::map<Handle, Handle> link_prog; // link -> referenced program
        std::vector<Handle> created;
        std::vector<Handle> progs;
        int pin_seq = 0;

        auto alive = [&](Handle h) { return total.count(h) && total[h] > 0; };
        auto oracle_put = [&](auto&& self, Handle h) -> void {
            if (--total[h] == 0) {
                total.erase(h);
                user.erase(h);
                if (link_prog.count(h)) {
                    Handle p = link_prog[h];
                    link_prog.erase(h);
                    self(self, p);
                }
            }
        };

        for (int step = 0; step < 170; ++step) {
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
            case 2: { // link a live program to a fresh hook
                std::vector<Handle> live;
                for (Handle p : progs)
                    if (alive(p))
                        live.push_back(p);
                if (live.empty())
                    break;
                Handle p = live[rng() % live.size()];
                Handle l = rt.link_create(p, "hook" + std::to_string(step));
                total[l] = user[l] = 1;
                ++total[p];
                link_prog[l] = p;
                created.push_back(l);
                break;
            }
            case 3: { // get
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
            case 4: { // put a user-held reference
                if (created.empty())
                    break;
                Handle h = created[rng() % created.size()];
                if (!alive(h) || user[h] == 0)
                    break;
                --user[h];
                rt.obj_put(h);
                oracle_put(oracle_put, h);
                break;
            }
            case 5: { // pin or unpin
                if (rng() % 2 && !pins.empty()) {
                    auto it = pins.begin();
                    std::advance(it, rng() % pins.size());
                    rt.unpin(it->first);
                    oracle_put(oracle_put, it->second);
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
            // Liveness must match the oracle exactly, every step.
            for (Handle h : created) {
                if (alive(h) != rt.is_live(h)) {
                    CAPTURE(round);
                    CAPTURE(step);
                    CAPTURE(h);
                    REQUIRE(alive(h) == rt.is_live(h));
                }
            }
        }
    }
}

TEST_CASE("helper return contracts match the runtime behavior") {
    // lookup returns null for a missing hash key and a value pointer for a
    // present one; the verifier's or-null contract mirrors this.
    Runtime rt;
    Handle h = load_ok(rt,
                       ".map m hash 4 8 4\n"
                       "mov64 r6, 5\n"
                       "stxw [r10-32], r6\n"
                       "lddw r1, m\n"
                       "mov64 r2, r10\n"
                       "add64 r2, -32\n"
                       "call map_lookup_elem\n"
                       "jne r0, 0, hit\n"
                       "mov64 r0, 77\n" // miss marker
                       "exit\n"
                       "hit:\n"
                       "ldxdw r0, [r0+0]\n"
                       "exit\n");
    auto ctx = rt.make_context(h, {});
    CHECK(rt.run_program(h, *ctx, true, 10000).r0 == 77);
    // Seed the entry, then the same program must return the stored value.
    uint32_t key = 5;
    uint64_t value = 424242;
    rt.map_of(rt.prog_of(h).maps[0]).update(reinterpret_cast<uint8_t*>(&key),
                                            reinterpret_cast<uint8_t*>(&value), 0);
    auto ctx2 = rt.make_context(h, {});
    CHECK(rt.run_program(h, *ctx2, true, 10000).r0 == 424242);
}

TEST_CASE("pin registry persists across runtimes through the state dir") {
    std::string dir = (std::filesystem::temp_directory_path() / "ubpf_forge_state_test").string();
    std::filesystem::remove_all(dir);
    {
        Runtime rt;
        rt.set_state_dir(dir);
        Handle m = rt.map_create({MapType::Hash, 4, 8, 8, -1}, "flows");
        rt.pin(m, "maps/flows");
        Handle p = load_ok(rt, corpus::kDropUdp);
        rt.pin(p, "progs/dropudp");
    }
    {
        Runtime rt;
        rt.set_state_dir(dir);
        auto objs = rt.list_objects();
        REQUIRE(objs.size() >= 2);
        bool have_map = false, have_prog = false;
        for (const auto& o : objs) {
            if (o.kind == "map" && !o.pins.empty() && o.pins[0] == "maps/flows")
                have_map = true;
            if (o.kind == "prog" && !o.pins.empty() && o.pins[0] == "progs/dropudp")
                have_prog = true;
        }
        CHECK(have_map);
        CHECK(have_prog);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("trace output is observable and deterministic") {
    Runtime rt;
    Handle h = load_ok(rt,
                       "stdw [r10-8], 0x4142\n"
                       "mov64 r1, r10\n"
                       "add64 r1, -8\n"
                       "mov64 r2, 8\n"
                       "call trace_emit\n"
                       "mov64 r0, 0\n"
                       "exit\n");
    auto ctx = rt.make_context(h, {});
    rt.run_program(h, *ctx, true, 1000);
    REQUIRE(ctx->trace.size() == 1);
    CHECK(ctx->trace[0] == "4241000000000000");
}

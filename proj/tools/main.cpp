// Copyright (c) ubpf-forge contributors.
// SPDX-License-Identifier: MIT
//
// Command-line front end: assemble, disassemble, inspect the CFG, verify,
// and run programs against a simulated XDP hook.
//
// Exit codes: 0 success, 1 usage or parse error, 2 verification rejection.
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ubpf/cfg.hpp"
#include "ubpf/engine.hpp"
#include "ubpf/isa.hpp"
#include "ubpf/runtime.hpp"
#include "ubpf/verifier.hpp"
#include "ubpf/xform.hpp"

using namespace ubpf;

namespace {

std::string read_input(const std::string& path) {
    if (path == "-") {
        std::ostringstream ss;
        ss << std::cin.rdbuf();
        return ss.str();
    }
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Program load_program(const std::string& path, bool binary) {
    std::string data = read_input(path);
    if (binary)
        return decode(std::vector<uint8_t>(data.begin(), data.end()));
    return parse_asm(data);
}

std::vector<uint8_t> parse_hex(const std::string& hex) {
    if (hex.size() % 2 != 0)
        throw std::runtime_error("packet hex must have an even number of digits");
    std::vector<uint8_t> out;
    out.reserve(hex.size() / 2);
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9')
            return c - '0';
        if (c >= 'a' && c <= 'f')
            return c - 'a' + 10;
        if (c >= 'A' && c <= 'F')
            return c - 'A' + 10;
        throw std::runtime_error("bad hex digit in packet");
    };
    for (size_t k = 0; k < hex.size(); k += 2)
        out.push_back(static_cast<uint8_t>(nibble(hex[k]) << 4 | nibble(hex[k + 1])));
    return out;
}

struct VerifyFlags {
    bool stats{false};
    bool no_pruning{false};
    uint64_t limit{100000};
    int log_level{1};
    bool json{false};
};

int do_verify_pipeline(const Program& p, const VerifyFlags& flags, VerifyResult* out_result) {
    VerifierConfig cfg;
    cfg.complexity_limit = flags.limit;
    cfg.pruning_enabled = !flags.no_pruning;
    cfg.log_level = flags.log_level;

    CfgResult cfgr = check_cfg(p);
    if (std::holds_alternative<CfgError>(cfgr)) {
        std::string msg = cfg_error_to_string(std::get<CfgError>(cfgr));
        if (flags.json) {
            nlohmann::json j{{"verdict", "reject"}, {"stage", "cfg"}, {"reason", msg}};
            std::cout << j.dump() << "\n";
        } else {
            std::cout << "REJECT control-flow: " << msg << "\n";
        }
        return 2;
    }
    std::vector<MapDef> defs;
    for (const MapRef& r : p.map_refs) {
        if (!r.def)
            throw std::runtime_error("map '" + r.name + "' has no definition");
        defs.push_back(*r.def);
    }
    VerifyResult vr = verify(p, default_helper_specs(), defs, std::get<CfgReport>(cfgr), cfg);
    if (out_result)
        *out_result = vr;
    if (std::holds_alternative<Rejection>(vr)) {
        const Rejection& rej = std::get<Rejection>(vr);
        if (flags.json) {
            nlohmann::json j{{"verdict", "reject"},
                             {"property", safety_property_name(rej.property)},
                             {"code", violation_code_name(rej.code)},
                             {"insn", rej.insn},
                             {"detail", rej.detail}};
            if (flags.stats) {
                j["insns_processed"] = rej.stats.insns_processed;
                j["states_explored"] = rej.stats.states_created;
                j["states_pruned"] = rej.stats.states_pruned;
            }
            std::cout << j.dump() << "\n";
        } else {
            std::cout << rej.log;
            if (flags.stats)
                std::cout << "stats: insns=" << rej.stats.insns_processed
                          << " states-explored=" << rej.stats.states_created
                          << " pruned=" << rej.stats.states_pruned << "\n";
        }
        return 2;
    }
    const VerifiedProgram& vp = std::get<VerifiedProgram>(vr);
    if (flags.json) {
        nlohmann::json j{{"verdict", "accept"}};
        if (flags.stats) {
            j["insns_processed"] = vp.stats.insns_processed;
            j["states_explored"] = vp.stats.states_created;
            j["states_pruned"] = vp.stats.states_pruned;
        }
        std::cout << j.dump() << "\n";
    } else {
        std::cout << vp.log;
        if (flags.stats)
            std::cout << "stats: insns=" << vp.stats.insns_processed
                      << " states-explored=" << vp.stats.states_created << " pruned=" << vp.stats.states_pruned
                      << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ubpf-forge: userspace eBPF-style assembler, verifier and runtime"};
    app.require_subcommand(1);

    std::string input;
    std::string output;
    bool binary_in = false;

    auto* cmd_asm = app.add_subcommand("asm", "assemble text to the binary slot format");
    cmd_asm->add_option("input", input, "assembly file, or - for stdin")->required();
    cmd_asm->add_option("-o,--output", output, "output file (default stdout)");

    auto* cmd_disasm = app.add_subcommand("disasm", "disassemble the binary slot format");
    cmd_disasm->add_option("input", input, "binary file, or - for stdin")->required();
    cmd_disasm->add_option("-o,--output", output, "output file (default stdout)");

    auto* cmd_cfg = app.add_subcommand("cfg", "emit the control-flow graph as DOT");
    cmd_cfg->add_option("input", input)->required();
    cmd_cfg->add_flag("--binary", binary_in, "input is the binary slot format");

    VerifyFlags vflags;
    auto* cmd_verify = app.add_subcommand("verify", "run the verifier and print its log");
    cmd_verify->add_option("input", input)->required();
    cmd_verify->add_flag("--binary", binary_in);
    cmd_verify->add_flag("--stats", vflags.stats, "append explored-state and instruction counts");
    cmd_verify->add_flag("--no-pruning", vflags.no_pruning, "disable state pruning (instrumentation)");
    cmd_verify->add_option("--limit", vflags.limit, "instruction complexity limit");
    cmd_verify->add_option("--log-level", vflags.log_level, "0 = verdict only, 1 = per-instruction");
    cmd_verify->add_flag("--json", vflags.json, "machine-readable output");

    std::string packet_hex;
    std::string engine = "image";
    bool blind = false;
    uint64_t seed = 1;
    uint64_t fuel = 1 << 20;
    std::string emit;
    bool run_json = false;
    auto* cmd_run = app.add_subcommand("run", "load, attach, dispatch one packet, detach");
    cmd_run->add_option("input", input)->required();
    cmd_run->add_flag("--binary", binary_in);
    cmd_run->add_option("--packet", packet_hex, "packet bytes as hex");
    cmd_run->add_option("--engine", engine, "interp | image")->check(CLI::IsMember({"interp", "image"}));
    cmd_run->add_flag("--blind", blind, "harden the image with constant blinding");
    cmd_run->add_option("--seed", seed, "blinding seed");
    cmd_run->add_option("--fuel", fuel, "execution step budget");
    cmd_run->add_option("--emit", emit, "post-xform: dump transformed assembly before running")
        ->check(CLI::IsMember({"post-xform"}));
    cmd_run->add_flag("--json", run_json);

    std::string state_dir;
    auto* cmd_objects = app.add_subcommand("objects", "list live objects, refcounts and pin paths");
    cmd_objects->add_option("--state-dir", state_dir, "pin registry directory");

    auto* cmd_absdom = app.add_subcommand("absdom", "abstract-domain developer tools");
    std::string abs_op = "eval";
    std::string abs_alu_name;
    uint32_t abs_width = 64;
    uint64_t av = 0, am = 0, bv = 0, bm = 0;
    auto* cmd_eval = cmd_absdom->add_subcommand("eval", "evaluate one ALU transfer on two tnums");
    cmd_eval->add_option("op", abs_alu_name, "mnemonic, e.g. add64 or and32")->required();
    cmd_eval->add_option("a_value", av)->required();
    cmd_eval->add_option("a_mask", am)->required();
    cmd_eval->add_option("b_value", bv)->required();
    cmd_eval->add_option("b_mask", bm)->required();
    (void)abs_op;

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*cmd_asm) {
            Program p = parse_asm(read_input(input));
            std::vector<uint8_t> bytes = encode(p);
            if (output.empty()) {
                std::fwrite(bytes.data(), 1, bytes.size(), stdout);
            } else {
                std::ofstream out(output, std::ios::binary);
                out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
            }
            return 0;
        }
        if (*cmd_disasm) {
            std::string data = read_input(input);
            Program p = decode(std::vector<uint8_t>(data.begin(), data.end()));
            std::string text = format_asm(p);
            if (output.empty())
                std::cout << text;
            else
                std::ofstream(output) << text;
            return 0;
        }
        if (*cmd_cfg) {
            Program p = load_program(input, binary_in);
            CfgResult r = check_cfg(p);
            if (std::holds_alternative<CfgError>(r)) {
                std::cerr << "REJECT control-flow: " << cfg_error_to_string(std::get<CfgError>(r)) << "\n";
                return 2;
            }
            std::cout << cfg_to_dot(p, std::get<CfgReport>(r));
            return 0;
        }
        if (*cmd_verify) {
            Program p = load_program(input, binary_in);
            return do_verify_pipeline(p, vflags, nullptr);
        }
        if (*cmd_run) {
            Program p = load_program(input, binary_in);
            Runtime rt;
            rt.verifier_config().log_level = 0;
            LoadOptions opts;
            opts.blind = blind;
            opts.seed = seed;
            auto lr = rt.prog_load(p, ProgType::Xdp, opts);
            if (std::holds_alternative<Rejection>(lr)) {
                const Rejection& rej = std::get<Rejection>(lr);
                std::cout << rej.log;
                return 2;
            }
            Handle prog = std::get<Handle>(lr);
            if (emit == "post-xform")
                std::cout << format_asm(rt.prog_of(prog).xformed.prog);
            Handle link = rt.link_create(prog, "xdp@cli");
            std::vector<uint8_t> packet = parse_hex(packet_hex);
            auto ctx = rt.make_context(prog, packet);
            ExecResult r = rt.run_program(prog, *ctx, engine == "image", fuel);
            XdpAction action = r.r0 <= 3 ? static_cast<XdpAction>(r.r0) : XdpAction::Aborted;
            if (run_json) {
                nlohmann::json j{{"action", xdp_action_name(action)}, {"r0", r.r0}};
                std::cout << j.dump() << "\n";
            } else {
                std::cout << xdp_action_name(action) << " r0=" << r.r0 << "\n";
            }
            rt.obj_put(link);
            rt.obj_put(prog);
            return 0;
        }
        if (*cmd_objects) {
            Runtime rt;
            if (const char* env = std::getenv("UBPF_FORGE_STATE"))
                state_dir = env;
            if (!state_dir.empty())
                rt.set_state_dir(state_dir);
            for (const auto& o : rt.list_objects()) {
                std::cout << o.kind << " handle=" << o.handle << " refs=" << o.refcount << " " << o.summary;
                for (const std::string& pin : o.pins)
                    std::cout << " pin=" << pin;
                std::cout << "\n";
            }
            return 0;
        }
        if (*cmd_eval) {
            Program probe = parse_asm(abs_alu_name + " r1, r2\nexit\n");
            const Instruction& i = probe.insns[0];
            if (!i.is_alu()) {
                std::cerr << "not an ALU mnemonic: " << abs_alu_name << "\n";
                return 1;
            }
            abs_width = i.cls == InsnClass::ALU64 ? 64 : 32;
            ScalarAbs a, b;
            a.tnum = Tnum{av, am};
            b.tnum = Tnum{bv, bm};
            if (!a.tnum.wellformed() || !b.tnum.wellformed()) {
                std::cerr << "tnum value and mask overlap\n";
                return 1;
            }
            a.normalize();
            b.normalize();
            ScalarAbs r = abs_alu(i.alu_op(), a, b, abs_width);
            std::cout << abs_to_string(r) << "\n";
            std::cout << "u=[" << r.bounds.umin << "," << r.bounds.umax << "] s=[" << r.bounds.smin << ","
                      << r.bounds.smax << "]\n";
            return 0;
        }
    } catch (const AsmError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 1;
    } catch (const DecodeError& e) {
        std::cerr << "decode error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

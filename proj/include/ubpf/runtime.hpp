// Copyright (c) ubpf-forge contributors.
// SPDX-License-Identifier: MIT
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ubpf/engine.hpp"
#include "ubpf/isa.hpp"
#include "ubpf/verifier.hpp"
#include "ubpf/xform.hpp"

namespace ubpf {

enum class XdpAction : uint8_t { Aborted = 0, Drop = 1, Pass = 2, Tx = 3 };

const char* xdp_action_name(XdpAction a);

struct LoadOptions {
    bool blind{false};
    uint64_t seed{1};
};

struct RuntimeApiError : std::runtime_error {
    enum class Kind { InvalidDef, UnknownHandle, PathExists, PathMissing, TypeMismatch, HookBusy, BadInput };
    Kind kind;
    RuntimeApiError(Kind kind, const std::string& what) : std::runtime_error{what}, kind{kind} {}
};

// One map: array (u32 index keys, dense storage) or hash (open addressing
// over at most max_entries live entries). Value slots live at stable indices
// so looked-up pointers stay valid across unrelated updates.
class MapInstance {
  public:
    explicit MapInstance(const MapDef& def);

    const MapDef& def() const { return def_; }

    // Slot index of the value, or -1 when absent.
    int64_t lookup(const uint8_t* key);
    // 0 on success, -1 when the map is full (hash) or the index is bad (array).
    int32_t update(const uint8_t* key, const uint8_t* value, uint64_t flags);
    // 0 on success, -1 when absent or unsupported (array).
    int32_t erase(const uint8_t* key);

    // Drops every entry and zeroes storage, keeping the allocation (and any
    // registered region pointers) intact.
    void reset();

    uint8_t* storage_data() { return values_.data(); }
    uint64_t storage_size() const { return values_.size(); }
    uint8_t* value_at(uint32_t slot) { return values_.data() + static_cast<size_t>(slot) * def_.value_size; }

  private:
    int64_t hash_find(const uint8_t* key, bool for_insert);

    MapDef def_;
    std::vector<uint8_t> values_;
    std::vector<std::vector<uint8_t>> keys_; // hash: key per slot, empty = free
    uint32_t live_{};
};

using Handle = int32_t;

struct LoadedProgram {
    Program source;            // as parsed/decoded
    VerifiedProgram verified;  // pre-transform, with notes
    TransformedProgram xformed;
    JitImage image;
    ProgType type{ProgType::Xdp};
    std::vector<Handle> maps;  // per map_ref index
    std::string asm_text;      // original text for pin persistence
};

// Object lifecycle, pinning registry, hooks and execution wiring. Reference
// counts drive destruction: an object dies exactly when its count reaches
// zero. Links hold a reference on their program and detach on destruction.
class Runtime {
  public:
    explicit Runtime(VerifierConfig vcfg = {});
    ~Runtime();

    std::variant<Handle, Rejection> prog_load(const std::string& asm_text, ProgType type = ProgType::Xdp,
                                              const LoadOptions& opts = {});
    std::variant<Handle, Rejection> prog_load(const Program& p, ProgType type = ProgType::Xdp,
                                              const LoadOptions& opts = {});

    Handle map_create(const MapDef& def, const std::string& name = "");
    Handle link_create(Handle prog, const std::string& hook);

    void obj_get(Handle h);
    void obj_put(Handle h);
    void pin(Handle h, const std::string& path);
    void unpin(const std::string& path);

    bool is_live(Handle h) const;
    size_t live_objects() const;

    XdpAction hook_dispatch(const std::string& hook, const std::vector<uint8_t>& packet,
                            uint64_t fuel = 1u << 20);

    struct ObjectInfo {
        Handle handle;
        std::string kind;
        int refcount;
        std::vector<std::string> pins;
        std::string summary;
    };
    std::vector<ObjectInfo> list_objects() const;

    MapInstance& map_of(Handle h);
    const LoadedProgram& prog_of(Handle h) const;

    // Builds an execution context with this program's map regions mapped in.
    std::unique_ptr<ExecContext> make_context(Handle prog, const std::vector<uint8_t>& packet);

    // Helper/direct-call dispatch bound to one program's map references.
    std::unique_ptr<EngineEnv> make_env(Handle prog);

    // Runs a loaded program on one packet with the chosen evaluator.
    ExecResult run_program(Handle prog, ExecContext& ctx, bool use_image, uint64_t fuel);

    // Pin registry persistence (JSON lines); loads existing state eagerly.
    void set_state_dir(const std::string& dir);

    VerifierConfig& verifier_config() { return vcfg_; }

  private:
    struct Object;
    struct Impl;
    Object& obj(Handle h) const;
    void save_pins();
    void load_pins();

    std::unique_ptr<Impl> impl_;
    VerifierConfig vcfg_;
};

} // namespace ubpf

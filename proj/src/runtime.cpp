// Copyright (c) ubpf-forge contributors.
// SPDX-License-Identifier: MIT
#include "ubpf/runtime.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ubpf/cfg.hpp"
#include "ubpf/helper_ids.hpp"

namespace ubpf {

const char* xdp_action_name(XdpAction a) {
    switch (a) {
    case XdpAction::Aborted: return "ABORTED";
    case XdpAction::Drop: return "DROP";
    case XdpAction::Pass: return "PASS";
    case XdpAction::Tx: return "TX";
    }
    return "?";
}

// ---- maps --------------------------------------------------------------------

MapInstance::MapInstance(const MapDef& def) : def_{def} {
    if (def.key_size == 0 || def.value_size == 0 || def.max_entries == 0)
        throw RuntimeApiError{RuntimeApiError::Kind::InvalidDef, "map sizes must be positive"};
    if (def.type == MapType::Array && def.key_size != 4)
        throw RuntimeApiError{RuntimeApiError::Kind::InvalidDef, "array maps take 4-byte index keys"};
    if (def.lock_off >= 0 &&
        (def.lock_off % 8 != 0 || static_cast<uint32_t>(def.lock_off) + 8 > def.value_size))
        throw RuntimeApiError{RuntimeApiError::Kind::InvalidDef, "lock field must be 8 aligned bytes in the value"};
    values_.assign(static_cast<size_t>(def.max_entries) * def.value_size, 0);
    if (def.type == MapType::Hash)
        keys_.resize(def.max_entries);
}

namespace {
uint64_t fnv1a(const uint8_t* data, size_t n) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (size_t k = 0; k < n; ++k) {
        h ^= data[k];
        h *= 0x100000001b3ull;
    }
    return h;
}
} // namespace

int64_t MapInstance::hash_find(const uint8_t* key, bool for_insert) {
    uint64_t start = fnv1a(key, def_.key_size) % def_.max_entries;
    int64_t first_free = -1;
    for (uint32_t probe = 0; probe < def_.max_entries; ++probe) {
        uint32_t slot = static_cast<uint32_t>((start + probe) % def_.max_entries);
        if (keys_[slot].empty()) {
            if (first_free < 0)
                first_free = slot;
            continue;
        }
        if (std::memcmp(keys_[slot].data(), key, def_.key_size) == 0)
            return slot;
    }
    return for_insert ? first_free : -1;
}

void MapInstance::reset() {
    std::fill(values_.begin(), values_.end(), 0);
    for (auto& k : keys_)
        k.clear();
    live_ = 0;
}

int64_t MapInstance::lookup(const uint8_t* key) {
    if (def_.type == MapType::Array) {
        uint32_t idx;
        std::memcpy(&idx, key, 4);
        return idx < def_.max_entries ? static_cast<int64_t>(idx) : int64_t{-1};
    }
    return hash_find(key, false);
}

int32_t MapInstance::update(const uint8_t* key, const uint8_t* value, uint64_t) {
    if (def_.type == MapType::Array) {
        uint32_t idx;
        std::memcpy(&idx, key, 4);
        if (idx >= def_.max_entries)
            return -1;
        std::memcpy(value_at(idx), value, def_.value_size);
        return 0;
    }
    int64_t slot = hash_find(key, false);
    if (slot < 0) {
        if (live_ >= def_.max_entries)
            return -1;
        slot = hash_find(key, true);
        if (slot < 0)
            return -1;
        keys_[slot].assign(key, key + def_.key_size);
        ++live_;
    }
    std::memcpy(value_at(static_cast<uint32_t>(slot)), value, def_.value_size);
    return 0;
}

int32_t MapInstance::erase(const uint8_t* key) {
    if (def_.type == MapType::Array)
        return -1; // array elements cannot be deleted
    int64_t slot = hash_find(key, false);
    if (slot < 0)
        return -1;
    // Re-insert the probe chain after the hole to keep open addressing sound.
    keys_[slot].clear();
    std::memset(value_at(static_cast<uint32_t>(slot)), 0, def_.value_size);
    --live_;
    std::vector<std::pair<std::vector<uint8_t>, std::vector<uint8_t>>> displaced;
    for (uint32_t probe = 1; probe < def_.max_entries; ++probe) {
        uint32_t s = static_cast<uint32_t>((slot + probe) % def_.max_entries);
        if (keys_[s].empty())
            break;
        std::vector<uint8_t> k = std::move(keys_[s]);
        keys_[s].clear();
        std::vector<uint8_t> v(value_at(s), value_at(s) + def_.value_size);
        std::memset(value_at(s), 0, def_.value_size);
        --live_;
        displaced.emplace_back(std::move(k), std::move(v));
    }
    for (auto& [k, v] : displaced)
        update(k.data(), v.data(), 0);
    return 0;
}

// ---- runtime objects -----------------------------------------------------------

struct Runtime::Object {
    enum class Kind { Program, Map, Link } kind;
    int refcount{1};
    std::string name;

    std::unique_ptr<LoadedProgram> prog;
    std::unique_ptr<MapInstance> map;
    // link payload
    Handle link_prog{-1};
    std::string hook;
};

struct Runtime::Impl {
    std::map<Handle, Object> objects;
    std::map<std::string, Handle> pins;
    std::map<std::string, Handle> hooks; // hook -> link handle
    Handle next_handle{1};
    std::optional<std::string> state_dir;
};

Runtime::Runtime(VerifierConfig vcfg) : impl_{std::make_unique<Impl>()}, vcfg_{vcfg} {}

Runtime::~Runtime() = default;

namespace {

// Helper/direct-map dispatch for one loaded program.
class ProgEnv final : public EngineEnv {
  public:
    ProgEnv(Runtime& rt, std::vector<Handle> maps) : rt_{rt}, maps_{std::move(maps)} {}

    uint64_t call_helper(ExecContext& ctx, int32_t helper_id, std::array<uint64_t, 5> args) override {
        switch (helper_id) {
        case HELPER_MAP_LOOKUP_ELEM:
        case HELPER_MAP_UPDATE_ELEM:
        case HELPER_MAP_DELETE_ELEM: {
            uint64_t map_idx = args[0] - kMapHandleBase;
            return map_call(ctx, static_cast<uint32_t>(map_idx), helper_id, args);
        }
        case HELPER_TRACE_EMIT: {
            uint64_t len = args[1];
            std::string hex;
            if (len) {
                uint8_t* p = ctx.translate(args[0], len, false);
                if (!p)
                    throw EngineError{EngineError::Kind::BoundsViolation, "trace_emit region fault"};
                static const char digits[] = "0123456789abcdef";
                for (uint64_t k = 0; k < len; ++k) {
                    hex.push_back(digits[p[k] >> 4]);
                    hex.push_back(digits[p[k] & 0xf]);
                }
            }
            ctx.trace.push_back(std::move(hex));
            return 0;
        }
        case HELPER_ACQUIRE_TEST_REF:
            return ctx.scratch_alloc(8);
        case HELPER_RELEASE_TEST_REF:
            return 0;
        case HELPER_SPIN_LOCK:
        case HELPER_SPIN_UNLOCK: {
            uint8_t* p = ctx.translate(args[0], 8, true);
            if (!p)
                throw EngineError{EngineError::Kind::BoundsViolation, "lock field fault"};
            uint64_t v = helper_id == HELPER_SPIN_LOCK ? 1 : 0;
            std::memcpy(p, &v, 8);
            return 0;
        }
        case HELPER_ITER_NEW: {
            uint8_t* p = ctx.translate(args[0], 16, true);
            if (!p)
                throw EngineError{EngineError::Kind::BoundsViolation, "iterator slot fault"};
            uint64_t magic = kIterMagic;
            uint64_t remaining = args[1];
            std::memcpy(p, &magic, 8);
            std::memcpy(p + 8, &remaining, 8);
            return 0;
        }
        case HELPER_ITER_NEXT: {
            uint8_t* p = ctx.translate(args[0], 16, true);
            if (!p)
                throw EngineError{EngineError::Kind::BoundsViolation, "iterator slot fault"};
            uint64_t magic, remaining;
            std::memcpy(&magic, p, 8);
            std::memcpy(&remaining, p + 8, 8);
            if (magic != kIterMagic)
                throw EngineError{EngineError::Kind::BadProgram, "iterator slot is not initialized"};
            if (remaining == 0)
                return 0;
            --remaining;
            std::memcpy(p + 8, &remaining, 8);
            uint64_t cell = ctx.scratch_alloc(8);
            uint8_t* cp = ctx.translate(cell, 8, true);
            std::memcpy(cp, &remaining, 8);
            return cell;
        }
        case HELPER_ITER_DESTROY: {
            uint8_t* p = ctx.translate(args[0], 16, true);
            if (!p)
                throw EngineError{EngineError::Kind::BoundsViolation, "iterator slot fault"};
            std::memset(p, 0, 16);
            return 0;
        }
        default:
            throw EngineError{EngineError::Kind::BadProgram, "unknown helper id " + std::to_string(helper_id)};
        }
    }

    uint64_t direct_map_call(ExecContext& ctx, uint32_t map_idx, int32_t op,
                             std::array<uint64_t, 5> args) override {
        return map_call(ctx, map_idx, op, args);
    }

  private:
    static constexpr uint64_t kIterMagic = 0x17e7c0defeedull;

    uint64_t map_call(ExecContext& ctx, uint32_t map_idx, int32_t op, std::array<uint64_t, 5> args) {
        if (map_idx >= maps_.size())
            throw EngineError{EngineError::Kind::BadProgram, "map reference out of range"};
        MapInstance& m = rt_.map_of(maps_[map_idx]);
        const MapDef& def = m.def();
        uint8_t* key = ctx.translate(args[1], def.key_size, false);
        if (!key)
            throw EngineError{EngineError::Kind::BoundsViolation, "map key fault"};
        switch (op) {
        case HELPER_MAP_LOOKUP_ELEM: {
            int64_t slot = m.lookup(key);
            if (slot < 0)
                return 0;
            return map_region_vaddr(map_idx) + static_cast<uint64_t>(slot) * def.value_size;
        }
        case HELPER_MAP_UPDATE_ELEM: {
            uint8_t* value = ctx.translate(args[2], def.value_size, false);
            if (!value)
                throw EngineError{EngineError::Kind::BoundsViolation, "map value fault"};
            return static_cast<uint64_t>(static_cast<int64_t>(m.update(key, value, args[3])));
        }
        case HELPER_MAP_DELETE_ELEM:
            return static_cast<uint64_t>(static_cast<int64_t>(m.erase(key)));
        default:
            throw EngineError{EngineError::Kind::BadProgram, "bad map operation"};
        }
    }

    Runtime& rt_;
    std::vector<Handle> maps_;
};

} // namespace

Runtime::Object& Runtime::obj(Handle h) const {
    auto it = impl_->objects.find(h);
    if (it == impl_->objects.end())
        throw RuntimeApiError{RuntimeApiError::Kind::UnknownHandle, "unknown handle " + std::to_string(h)};
    return it->second;
}

std::variant<Handle, Rejection> Runtime::prog_load(const std::string& asm_text, ProgType type,
                                                   const LoadOptions& opts) {
    Program p = parse_asm(asm_text);
    auto r = prog_load(p, type, opts);
    if (std::holds_alternative<Handle>(r))
        obj(std::get<Handle>(r)).prog->asm_text = asm_text;
    return r;
}

std::variant<Handle, Rejection> Runtime::prog_load(const Program& p, ProgType type, const LoadOptions& opts) {
    // Materialize the maps the program references before verification; their
    // definitions feed the verifier.
    std::vector<MapDef> defs;
    std::vector<Handle> map_handles;
    for (const MapRef& ref : p.map_refs) {
        if (!ref.def)
            throw RuntimeApiError{RuntimeApiError::Kind::BadInput,
                                  "map '" + ref.name + "' has no definition to create it from"};
        defs.push_back(*ref.def);
    }

    CfgResult cfgr = check_cfg(p);
    if (std::holds_alternative<CfgError>(cfgr)) {
        const CfgError& e = std::get<CfgError>(cfgr);
        Rejection rej;
        rej.code = ViolationCode::OutOfBounds;
        rej.property = SafetyProperty::MemorySafety;
        rej.insn = e.index;
        rej.detail = cfg_error_to_string(e);
        rej.log = "REJECT control-flow: " + cfg_error_to_string(e) + "\n";
        return rej;
    }
    VerifyResult vr = verify(p, default_helper_specs(), defs, std::get<CfgReport>(cfgr), vcfg_);
    if (std::holds_alternative<Rejection>(vr))
        return std::get<Rejection>(vr);

    auto lp = std::make_unique<LoadedProgram>();
    lp->source = p;
    lp->verified = std::move(std::get<VerifiedProgram>(vr));
    lp->xformed = transform(lp->verified, defs);
    lp->image = lower(lp->xformed.prog, lp->xformed.notes, opts.blind, opts.seed);
    lp->type = type;
    lp->asm_text = format_asm(p);
    for (size_t k = 0; k < defs.size(); ++k)
        map_handles.push_back(map_create(defs[k], p.map_refs[k].name));
    lp->maps = map_handles;

    Handle h = impl_->next_handle++;
    Object obj;
    obj.kind = Object::Kind::Program;
    obj.prog = std::move(lp);
    obj.name = "prog" + std::to_string(h);
    impl_->objects.emplace(h, std::move(obj));
    return h;
}

Handle Runtime::map_create(const MapDef& def, const std::string& name) {
    Handle h = impl_->next_handle++;
    Object obj;
    obj.kind = Object::Kind::Map;
    obj.map = std::make_unique<MapInstance>(def);
    obj.name = name.empty() ? "map" + std::to_string(h) : name;
    impl_->objects.emplace(h, std::move(obj));
    return h;
}

Handle Runtime::link_create(Handle prog, const std::string& hook) {
    Object& p = obj(prog);
    if (p.kind != Object::Kind::Program)
        throw RuntimeApiError{RuntimeApiError::Kind::TypeMismatch, "handle is not a program"};
    if (p.prog->type != ProgType::Xdp)
        throw RuntimeApiError{RuntimeApiError::Kind::TypeMismatch, "program type does not match the hook"};
    auto it = impl_->hooks.find(hook);
    if (it != impl_->hooks.end() && impl_->objects.count(it->second))
        throw RuntimeApiError{RuntimeApiError::Kind::HookBusy, "hook '" + hook + "' already has a program"};
    obj_get(prog); // the link keeps its program alive
    Handle h = impl_->next_handle++;
    Object obj;
    obj.kind = Object::Kind::Link;
    obj.link_prog = prog;
    obj.hook = hook;
    obj.name = "link" + std::to_string(h);
    impl_->objects.emplace(h, std::move(obj));
    impl_->hooks[hook] = h;
    return h;
}

void Runtime::obj_get(Handle h) { ++obj(h).refcount; }

void Runtime::obj_put(Handle h) {
    Object& o = obj(h);
    if (--o.refcount > 0)
        return;
    // Destroy: links detach and release their program; programs release the
    // maps they created.
    std::vector<Handle> to_put;
    if (o.kind == Object::Kind::Link) {
        auto it = impl_->hooks.find(o.hook);
        if (it != impl_->hooks.end() && it->second == h)
            impl_->hooks.erase(it);
        to_put.push_back(o.link_prog);
    } else if (o.kind == Object::Kind::Program) {
        to_put = o.prog->maps;
    }
    impl_->objects.erase(h);
    for (Handle m : to_put)
        obj_put(m);
}

void Runtime::pin(Handle h, const std::string& path) {
    if (impl_->pins.count(path))
        throw RuntimeApiError{RuntimeApiError::Kind::PathExists, "path '" + path + "' is already pinned"};
    obj_get(h); // pinning takes a reference, extending the object's lifetime
    impl_->pins[path] = h;
    save_pins();
}

void Runtime::unpin(const std::string& path) {
    auto it = impl_->pins.find(path);
    if (it == impl_->pins.end())
        throw RuntimeApiError{RuntimeApiError::Kind::PathMissing, "path '" + path + "' is not pinned"};
    Handle h = it->second;
    impl_->pins.erase(it);
    obj_put(h);
    save_pins();
}

bool Runtime::is_live(Handle h) const { return impl_->objects.count(h) > 0; }

size_t Runtime::live_objects() const { return impl_->objects.size(); }

MapInstance& Runtime::map_of(Handle h) {
    Object& o = obj(h);
    if (o.kind != Object::Kind::Map)
        throw RuntimeApiError{RuntimeApiError::Kind::TypeMismatch, "handle is not a map"};
    return *o.map;
}

const LoadedProgram& Runtime::prog_of(Handle h) const {
    Object& o = obj(h);
    if (o.kind != Object::Kind::Program)
        throw RuntimeApiError{RuntimeApiError::Kind::TypeMismatch, "handle is not a program"};
    return *o.prog;
}

std::unique_ptr<ExecContext> Runtime::make_context(Handle prog, const std::vector<uint8_t>& packet) {
    const LoadedProgram& lp = prog_of(prog);
    auto ctx = std::make_unique<ExecContext>(vcfg_.stack_size, vcfg_.max_call_depth, packet);
    for (size_t k = 0; k < lp.maps.size(); ++k) {
        MapInstance& m = map_of(lp.maps[k]);
        ctx->add_region(map_region_vaddr(static_cast<uint32_t>(k)), m.storage_size(), m.storage_data(), true);
    }
    return ctx;
}

std::unique_ptr<EngineEnv> Runtime::make_env(Handle prog) {
    return std::make_unique<ProgEnv>(*this, prog_of(prog).maps);
}

ExecResult Runtime::run_program(Handle prog, ExecContext& ctx, bool use_image, uint64_t fuel) {
    const LoadedProgram& lp = prog_of(prog);
    ProgEnv env{*this, lp.maps};
    if (use_image)
        return exec_image(lp.image, ctx, env, kCtxBase, fuel);
    return interpret(lp.xformed.prog, ctx, env, kCtxBase, fuel);
}

XdpAction Runtime::hook_dispatch(const std::string& hook, const std::vector<uint8_t>& packet, uint64_t fuel) {
    auto it = impl_->hooks.find(hook);
    if (it == impl_->hooks.end())
        return XdpAction::Pass; // nothing attached
    Object& link = obj(it->second);
    Handle prog = link.link_prog;
    auto ctx = make_context(prog, packet);
    ExecResult r = run_program(prog, *ctx, true, fuel);
    return r.r0 <= 3 ? static_cast<XdpAction>(r.r0) : XdpAction::Aborted;
}

std::vector<Runtime::ObjectInfo> Runtime::list_objects() const {
    std::vector<ObjectInfo> out;
    for (const auto& [h, obj] : impl_->objects) {
        ObjectInfo info;
        info.handle = h;
        info.refcount = obj.refcount;
        switch (obj.kind) {
        case Object::Kind::Program:
            info.kind = "prog";
            info.summary = obj.name + " (" + std::to_string(obj.prog->source.insns.size()) + " insns)";
            break;
        case Object::Kind::Map: {
            const MapDef& d = obj.map->def();
            info.kind = "map";
            info.summary = obj.name + " (" + (d.type == MapType::Array ? "array" : "hash") + " " +
                           std::to_string(d.key_size) + "/" + std::to_string(d.value_size) + " x" +
                           std::to_string(d.max_entries) + ")";
            break;
        }
        case Object::Kind::Link:
            info.kind = "link";
            info.summary = obj.name + " -> " + obj.hook;
            break;
        }
        for (const auto& [path, ph] : impl_->pins)
            if (ph == h)
                info.pins.push_back(path);
        out.push_back(std::move(info));
    }
    return out;
}

// ---- persistence ----------------------------------------------------------------

void Runtime::set_state_dir(const std::string& dir) {
    impl_->state_dir = dir;
    std::filesystem::create_directories(dir);
    load_pins();
}

void Runtime::save_pins() {
    if (!impl_->state_dir)
        return;
    std::ofstream out(*impl_->state_dir + "/pins.jsonl", std::ios::trunc);
    for (const auto& [path, h] : impl_->pins) {
        auto it = impl_->objects.find(h);
        if (it == impl_->objects.end())
            continue;
        const Object& obj = it->second;
        nlohmann::json j;
        j["path"] = path;
        if (obj.kind == Object::Kind::Map) {
            const MapDef& d = obj.map->def();
            j["kind"] = "map";
            j["name"] = obj.name;
            j["map_type"] = d.type == MapType::Array ? "array" : "hash";
            j["key_size"] = d.key_size;
            j["value_size"] = d.value_size;
            j["max_entries"] = d.max_entries;
            j["lock_off"] = d.lock_off;
        } else if (obj.kind == Object::Kind::Program) {
            j["kind"] = "prog";
            j["asm"] = obj.prog->asm_text;
            j["prog_type"] = "xdp";
        } else {
            continue; // links are attachment state, not persisted
        }
        out << j.dump() << "\n";
    }
}

void Runtime::load_pins() {
    if (!impl_->state_dir)
        return;
    std::ifstream in(*impl_->state_dir + "/pins.jsonl");
    if (!in)
        return;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("path") || impl_->pins.count(j["path"]))
            continue;
        Handle h = -1;
        if (j["kind"] == "map") {
            MapDef d;
            d.type = j["map_type"] == "array" ? MapType::Array : MapType::Hash;
            d.key_size = j["key_size"];
            d.value_size = j["value_size"];
            d.max_entries = j["max_entries"];
            d.lock_off = j["lock_off"];
            h = map_create(d, j.value("name", ""));
        } else if (j["kind"] == "prog") {
            auto r = prog_load(j["asm"].get<std::string>(), ProgType::Xdp);
            if (std::holds_alternative<Handle>(r))
                h = std::get<Handle>(r);
        }
        if (h < 0)
            continue;
        impl_->pins[j["path"]] = h; // the creation reference becomes the pin
    }
}

} // namespace ubpf

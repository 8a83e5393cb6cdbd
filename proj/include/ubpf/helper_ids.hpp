// Copyright (c) ubpf-forge contributors.
// SPDX-License-Identifier: MIT
#pragma once

#include <cstdint>
#include <string>

namespace ubpf {

// Stable helper function ids, shared by the assembler, verifier and runtime.
enum HelperId : int32_t {
    HELPER_MAP_LOOKUP_ELEM = 1,
    HELPER_MAP_UPDATE_ELEM = 2,
    HELPER_MAP_DELETE_ELEM = 3,
    HELPER_TRACE_EMIT = 4,
    HELPER_ACQUIRE_TEST_REF = 5,
    HELPER_RELEASE_TEST_REF = 6,
    HELPER_SPIN_LOCK = 7,
    HELPER_SPIN_UNLOCK = 8,
    HELPER_ITER_NEW = 9,
    HELPER_ITER_NEXT = 10,
    HELPER_ITER_DESTROY = 11,
};

inline const char* helper_name(int32_t id) {
    switch (id) {
    case HELPER_MAP_LOOKUP_ELEM: return "map_lookup_elem";
    case HELPER_MAP_UPDATE_ELEM: return "map_update_elem";
    case HELPER_MAP_DELETE_ELEM: return "map_delete_elem";
    case HELPER_TRACE_EMIT: return "trace_emit";
    case HELPER_ACQUIRE_TEST_REF: return "acquire_test_ref";
    case HELPER_RELEASE_TEST_REF: return "release_test_ref";
    case HELPER_SPIN_LOCK: return "spin_lock";
    case HELPER_SPIN_UNLOCK: return "spin_unlock";
    case HELPER_ITER_NEW: return "iter_new";
    case HELPER_ITER_NEXT: return "iter_next";
    case HELPER_ITER_DESTROY: return "iter_destroy";
    default: return nullptr;
    }
}

inline int32_t helper_id_by_name(const std::string& name) {
    for (int32_t id = HELPER_MAP_LOOKUP_ELEM; id <= HELPER_ITER_DESTROY; ++id)
        if (name == helper_name(id))
            return id;
    return -1;
}

} // namespace ubpf

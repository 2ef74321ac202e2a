#pragma once

#include <cstdint>
#include <string_view>

#include "dfm/common.hpp"

namespace dfm {

// Counter-based random stream. Draw i is a pure function of
// (seed, stream_id, counter + i), so per-worker and per-sample streams can be
// derived from label strings without any coordination, and a stream can be
// replayed from an arbitrary offset. Same triple -> same bits, always.
struct RngStream {
    uint64_t seed = 0;
    uint64_t stream_id = 0;
    uint64_t counter = 0;

    static RngStream from_label(uint64_t seed, std::string_view label) {
        return RngStream{seed, fnv1a64(label), 0};
    }

    uint64_t next_u64();

    // Uniform in [0, 1).
    double next_uniform();
    double next_uniform(double lo, double hi);

    // Standard normal via Box-Muller; consumes two counter slots.
    double next_normal();

    // Uniform index in [0, n). n must be positive.
    size_t next_index(size_t n);
};

}  // namespace dfm

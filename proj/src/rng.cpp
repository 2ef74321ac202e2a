#include "dfm/rng.hpp"

#include <cmath>
#include <numbers>

namespace dfm {

namespace {

// murmur3 finalizer
inline uint64_t mix64(uint64_t z) {
    z ^= z >> 33;
    z *= 0xff51afd7ed558ccdull;
    z ^= z >> 33;
    z *= 0xc4ceb9fe1a85ec53ull;
    z ^= z >> 33;
    return z;
}

constexpr uint64_t kGolden = 0x9e3779b97f4a7c15ull;

}  // namespace

std::string hex64(uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

uint64_t RngStream::next_u64() {
    uint64_t key = mix64(mix64(seed ^ 0x53a5f2a8e73c9d11ull) ^ stream_id);
    uint64_t word = mix64(key + counter * kGolden);
    ++counter;
    return word;
}

double RngStream::next_uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_uniform();
}

double RngStream::next_normal() {
    // (0,1] for the log argument
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

size_t RngStream::next_index(size_t n) {
    if (n == 0) {
        throw ContractError("RngStream::next_index: n must be positive");
    }
    return static_cast<size_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
}

}  // namespace dfm

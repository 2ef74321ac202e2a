#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dfm {

// Error taxonomy. The CLI maps ContractError/ConfigError to exit code 1 and
// IoError to exit code 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Violated precondition or invariant (bad shapes, out-of-range arguments, ...).
class ContractError : public Error {
public:
    using Error::Error;
};

// Invalid or inconsistent configuration supplied by the user.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Filesystem / serialization failure.
class IoError : public Error {
public:
    using Error::Error;
};

// FNV-1a, 64 bit. Used for stream-id derivation from label strings and for
// content digests in the container formats.
constexpr uint64_t kFnvOffset = 14695981039346656037ull;
constexpr uint64_t kFnvPrime = 1099511628211ull;

constexpr uint64_t fnv1a64(std::string_view s, uint64_t h = kFnvOffset) {
    for (unsigned char c : s) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

inline uint64_t fnv1a64_bytes(const void* data, size_t n, uint64_t h = kFnvOffset) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= kFnvPrime;
    }
    return h;
}

std::string hex64(uint64_t v);

}  // namespace dfm

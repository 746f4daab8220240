#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "f2r/core/tensor.hpp"

namespace f2r {

// FNV-1a over raw bytes; used for frozen-prior audits and checkpoint
// integrity. Not cryptographic, just a fingerprint.
inline uint64_t fnv1a64(const void* bytes, std::size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
    const unsigned char* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline uint64_t fnv1a64(const std::string& s, uint64_t h = 0xcbf29ce484222325ULL) {
    return fnv1a64(s.data(), s.size(), h);
}

template <class S>
inline uint64_t checksum(const TensorT<S>& t, uint64_t h = 0xcbf29ce484222325ULL) {
    h = fnv1a64(t.shape.data(), t.shape.size() * sizeof(int), h);
    return fnv1a64(t.ptr(), t.numel() * sizeof(S), h);
}

}  // namespace f2r

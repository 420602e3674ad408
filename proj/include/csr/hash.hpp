#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace csr {

// FNV-1a, used for dataset fingerprints and architecture hashes.
inline uint64_t fnv1a(const void* bytes, size_t n, uint64_t seed = 14695981039346656037ull) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    uint64_t h = seed;
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline uint64_t fnv1a(const std::string& s, uint64_t seed = 14695981039346656037ull) {
    return fnv1a(s.data(), s.size(), seed);
}

inline std::string hex64(uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<size_t>(i)] = digits[h & 0xf];
        h >>= 4;
    }
    return s;
}

}  // namespace csr

#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace safeval {

// FNV-1a, 64 bit. Used for fixture keys, cache file names and config
// fingerprints; must stay stable across platforms and releases.
inline std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : data) {
        h ^= static_cast<std::uint64_t>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string to_hex(std::uint64_t value) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[value & 0xf];
        value >>= 4;
    }
    return out;
}

inline std::string stable_hash(std::string_view data) { return to_hex(fnv1a64(data)); }

}  // namespace safeval

// Shared utilities: error type, seeded hashing, little-endian codecs,
// and small parsing helpers used across the library.

#pragma once

#include <cstdint>
#include <cstddef>
#include <cstring>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace braidsort {

/** Error categories surfaced through the C API as status codes. */
enum class Errc {
    config = 1,      // invalid spec/flag/parameter
    io = 2,          // host filesystem failure
    out_of_range = 3,// device access beyond capacity
    device_full = 4, // region allocation exceeds capacity
    format = 5,      // malformed file (profile, run header, truncated record)
    state = 6,       // operation not valid in current state
};

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    Errc code() const { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) {
    throw Error(code, msg);
}

// ---------------------------------------------------------------------------
// Seeded hashing. splitmix64 drives dataset generation; the 128-bit hash
// (murmur3 x64 finalization structure) feeds the order-independent digest.

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/** One-shot mix of two words, used to derive per-record generator states. */
inline uint64_t mix2(uint64_t a, uint64_t b) {
    uint64_t s = a ^ (b * 0xd6e8feb86659fd93ull);
    uint64_t z = s;
    z = (z ^ (z >> 32)) * 0xd6e8feb86659fd93ull;
    z = (z ^ (z >> 32)) * 0xd6e8feb86659fd93ull;
    return z ^ (z >> 32);
}

struct Hash128 {
    uint64_t lo = 0;
    uint64_t hi = 0;

    bool operator==(const Hash128&) const = default;

    /** Addition mod 2^128; commutative, so record order does not matter. */
    Hash128& operator+=(const Hash128& o) {
        uint64_t old = lo;
        lo += o.lo;
        hi += o.hi + (lo < old ? 1 : 0);
        return *this;
    }
};

namespace detail {
inline uint64_t fmix64(uint64_t k) {
    k ^= k >> 33;
    k *= 0xff51afd7ed558ccdull;
    k ^= k >> 33;
    k *= 0xc4ceb9fe1a85ec53ull;
    k ^= k >> 33;
    return k;
}
inline uint64_t load_u64(const uint8_t* p) {
    uint64_t v;
    std::memcpy(&v, p, 8);
    return v;
}
} // namespace detail

/** 128-bit hash of a byte range (murmur3 x64_128). */
inline Hash128 hash128(const void* data, size_t len, uint64_t seed) {
    const uint8_t* p = static_cast<const uint8_t*>(data);
    const size_t nblocks = len / 16;
    uint64_t h1 = seed, h2 = seed;
    const uint64_t c1 = 0x87c37b91114253d5ull;
    const uint64_t c2 = 0x4cf5ad432745937full;

    for (size_t i = 0; i < nblocks; i++) {
        uint64_t k1 = detail::load_u64(p + i * 16);
        uint64_t k2 = detail::load_u64(p + i * 16 + 8);
        k1 *= c1; k1 = (k1 << 31) | (k1 >> 33); k1 *= c2; h1 ^= k1;
        h1 = (h1 << 27) | (h1 >> 37); h1 += h2; h1 = h1 * 5 + 0x52dce729;
        k2 *= c2; k2 = (k2 << 33) | (k2 >> 31); k2 *= c1; h2 ^= k2;
        h2 = (h2 << 31) | (h2 >> 33); h2 += h1; h2 = h2 * 5 + 0x38495ab5;
    }

    const uint8_t* tail = p + nblocks * 16;
    uint64_t k1 = 0, k2 = 0;
    switch (len & 15) {
        case 15: k2 ^= uint64_t(tail[14]) << 48; [[fallthrough]];
        case 14: k2 ^= uint64_t(tail[13]) << 40; [[fallthrough]];
        case 13: k2 ^= uint64_t(tail[12]) << 32; [[fallthrough]];
        case 12: k2 ^= uint64_t(tail[11]) << 24; [[fallthrough]];
        case 11: k2 ^= uint64_t(tail[10]) << 16; [[fallthrough]];
        case 10: k2 ^= uint64_t(tail[9]) << 8;   [[fallthrough]];
        case 9:  k2 ^= uint64_t(tail[8]);
                 k2 *= c2; k2 = (k2 << 33) | (k2 >> 31); k2 *= c1; h2 ^= k2;
                 [[fallthrough]];
        case 8:  k1 ^= uint64_t(tail[7]) << 56; [[fallthrough]];
        case 7:  k1 ^= uint64_t(tail[6]) << 48; [[fallthrough]];
        case 6:  k1 ^= uint64_t(tail[5]) << 40; [[fallthrough]];
        case 5:  k1 ^= uint64_t(tail[4]) << 32; [[fallthrough]];
        case 4:  k1 ^= uint64_t(tail[3]) << 24; [[fallthrough]];
        case 3:  k1 ^= uint64_t(tail[2]) << 16; [[fallthrough]];
        case 2:  k1 ^= uint64_t(tail[1]) << 8;  [[fallthrough]];
        case 1:  k1 ^= uint64_t(tail[0]);
                 k1 *= c1; k1 = (k1 << 31) | (k1 >> 33); k1 *= c2; h1 ^= k1;
                 break;
        default: break;
    }

    h1 ^= uint64_t(len); h2 ^= uint64_t(len);
    h1 += h2; h2 += h1;
    h1 = detail::fmix64(h1);
    h2 = detail::fmix64(h2);
    h1 += h2; h2 += h1;
    return Hash128{h1, h2};
}

// ---------------------------------------------------------------------------
// Little-endian integer codecs (record headers, run entries).

inline void store_le(uint8_t* dst, uint64_t value, unsigned width) {
    for (unsigned i = 0; i < width; i++) {
        dst[i] = uint8_t(value >> (8 * i));
    }
}

inline uint64_t load_le(const uint8_t* src, unsigned width) {
    uint64_t v = 0;
    for (unsigned i = 0; i < width; i++) {
        v |= uint64_t(src[i]) << (8 * i);
    }
    return v;
}

// ---------------------------------------------------------------------------
// Parsing helpers.

/** Parse a byte size with optional K/M/G suffix (powers of 1024). */
std::optional<uint64_t> parse_size(std::string_view text);

/** Trim ASCII whitespace from both ends. */
std::string_view trim(std::string_view s);

/** Thread cap from BRAIDSORT_THREADS; 0 means unset. */
unsigned env_thread_cap();

} // namespace braidsort

// Record encodings, sortbenchmark-style dataset generation, and validation
// of sorted outputs against their inputs.
//
// File format is raw concatenated records with no header.
//   Fixed: K key bytes, then V value bytes.
//   Klv:   K key bytes, 4-byte LE value length, then that many value bytes.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "common.hpp"

namespace braidsort {

enum class LayoutKind : uint8_t { fixed = 0, klv = 1 };

struct RecordLayout {
    LayoutKind kind = LayoutKind::fixed;
    uint32_t key_size = 10;
    uint32_t value_size = 90;       // Fixed only
    uint32_t vlen_field_size = 4;   // Klv only, fixed at 4

    uint64_t fixed_record_size() const { return uint64_t(key_size) + value_size; }
    uint64_t klv_header_size() const { return uint64_t(key_size) + vlen_field_size; }

    void validate() const;

    static RecordLayout fixed(uint32_t k, uint32_t v) {
        return RecordLayout{LayoutKind::fixed, k, v, 4};
    }
    static RecordLayout klv(uint32_t k) {
        return RecordLayout{LayoutKind::klv, k, 0, 4};
    }
};

/** Inclusive bounds for generated Klv value lengths. */
struct VlenBounds {
    uint32_t min = 0;
    uint32_t max = 0;
};

struct DatasetMeta {
    RecordLayout layout;
    uint64_t record_count = 0;
    uint64_t seed = 0;
    VlenBounds vlen;
    uint64_t total_bytes = 0;
    std::string path;
};

struct ValidationReport {
    bool is_sorted = false;
    bool is_permutation = false;
    std::optional<uint64_t> first_violation_index;
    Hash128 input_digest;
    Hash128 output_digest;
};

/**
 * Generate a dataset file. Keys are uniformly random under the seed; value
 * bytes are a keyed hash stream of (seed, record index) so any corruption or
 * record loss shows up in the permutation digest. Pure function of
 * (layout, record_count, seed, vlen bounds): regeneration is byte-identical.
 *
 * capacity_limit, when nonzero, bounds the file size that may be produced.
 */
DatasetMeta gen_dataset(const RecordLayout& layout, uint64_t record_count,
                        uint64_t seed, const VlenBounds& vlen,
                        const std::string& out_path, uint64_t capacity_limit = 0);

/** Deterministic key bytes of one record, for oracles and spot checks. */
void gen_key_bytes(uint64_t seed, uint64_t record_index, uint8_t* dst, uint32_t key_size);
/** Deterministic value bytes of one record. */
void gen_value_bytes(uint64_t seed, uint64_t record_index, uint8_t* dst, uint32_t value_size);
/** Deterministic Klv value length of one record. */
uint32_t gen_vlen(uint64_t seed, uint64_t record_index, const VlenBounds& vlen);

/**
 * Order-independent 128-bit digest: sum mod 2^128 of per-record hashes.
 * Equal digests mean (up to hash collisions) the files hold the same record
 * multiset. Fails with Errc::format on a truncated trailing record.
 */
Hash128 multiset_digest(const std::string& path, const RecordLayout& layout);

/** Digest over records already in memory (whole file image). */
Hash128 multiset_digest_bytes(const uint8_t* data, uint64_t len, const RecordLayout& layout);

/**
 * Check that output is a sorted permutation of input. Key order is unsigned
 * lexicographic byte comparison. first_violation_index is the first record
 * whose successor has a smaller key.
 */
ValidationReport validate(const std::string& input_path, const std::string& output_path,
                          const RecordLayout& layout);

/** Read a whole file into memory (host-side helper, not device-accounted). */
std::vector<uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const uint8_t* data, uint64_t len);

} // namespace braidsort

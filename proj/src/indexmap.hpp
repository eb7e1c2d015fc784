// The IndexMap: an array of (key, value locator[, vlength]) entries kept in
// DRAM during sorting, its concurrent sort, and the packed on-device run
// format it serializes to.
//
// Run format: 32-byte header (magic "WSIM", u16 LE version, u8 layout kind,
// u8 key size, u8 offset width, u64 LE entry count, zero padding), then
// packed entries of key bytes + LE offset [+ 4-byte LE vlength for klv].

#pragma once

#include <cstdint>
#include <vector>

#include "device.hpp"
#include "recfmt.hpp"
#include "sched.hpp"
#include "thread_pool.hpp"

namespace braidsort {

constexpr uint32_t kRunHeaderSize = 32;
constexpr char kRunMagic[4] = {'W', 'S', 'I', 'M'};
constexpr uint16_t kRunVersion = 1;

/**
 * Entries are stored packed: key bytes, then a u64 locator (fixed layout:
 * record index; klv: byte offset of the value), then a u32 vlength for klv.
 */
class IndexMap {
public:
    IndexMap() = default;
    IndexMap(uint32_t key_size, bool has_vlen)
        : key_size_(key_size), has_vlen_(has_vlen),
          stride_(key_size + 8 + (has_vlen ? 4 : 0)) {}

    uint32_t key_size() const { return key_size_; }
    bool has_vlen() const { return has_vlen_; }
    uint64_t stride() const { return stride_; }
    uint64_t size() const { return count_; }
    bool sorted() const { return sorted_; }

    void reserve(uint64_t entries) { data_.reserve(entries * stride_); }
    /** Pre-size so concurrent writers can fill disjoint slots. */
    void resize(uint64_t entries) {
        data_.resize(entries * stride_);
        count_ = entries;
    }

    void append(const uint8_t* key, uint64_t offset, uint32_t vlen = 0);
    void set_entry(uint64_t i, const uint8_t* key, uint64_t offset, uint32_t vlen = 0);

    const uint8_t* key_at(uint64_t i) const { return data_.data() + i * stride_; }
    uint64_t offset_at(uint64_t i) const {
        return load_le(data_.data() + i * stride_ + key_size_, 8);
    }
    uint32_t vlen_at(uint64_t i) const {
        return static_cast<uint32_t>(load_le(data_.data() + i * stride_ + key_size_ + 8, 4));
    }

    const uint8_t* raw() const { return data_.data(); }
    uint8_t* raw() { return data_.data(); }

    void mark_sorted() { sorted_ = true; }

private:
    friend void sort_indexmap(IndexMap&, ThreadPool&);
    uint32_t key_size_ = 0;
    bool has_vlen_ = false;
    uint64_t stride_ = 8;
    uint64_t count_ = 0;
    bool sorted_ = false;
    std::vector<uint8_t> data_;
};

/**
 * Concurrent comparison sort of the entries: nondecreasing by key bytes,
 * ties by ascending locator. The (key, locator) pair is unique, so the
 * result does not depend on thread scheduling.
 */
void sort_indexmap(IndexMap& im, ThreadPool& sort_pool);

/**
 * Generic parallel index sort: sorts [0, count) indices with less(a, b)
 * (block sort + balanced merge). less must induce a strict weak ordering.
 */
std::vector<uint64_t> parallel_sort_indices(
    uint64_t count, ThreadPool& pool,
    const std::function<bool(uint64_t, uint64_t)>& less);

struct RunFileMeta {
    uint64_t base_offset = 0;     // device offset of the header
    uint64_t entry_count = 0;
    uint32_t entry_size = 0;      // key + offset_width [+ 4]
    uint32_t offset_width = 0;
    LayoutKind layout = LayoutKind::fixed;
    uint32_t key_size = 0;

    uint64_t payload_bytes() const { return entry_count * entry_size; }
    uint64_t file_bytes() const { return kRunHeaderSize + payload_bytes(); }
    uint64_t payload_offset() const { return base_offset + kRunHeaderSize; }
};

/**
 * Serialize a sorted IndexMap to a device region as a packed run. Written
 * sequentially, split across the write pool (serially when null), inside a
 * write phase. Offsets are packed to offset_width bytes (fails if one does
 * not fit).
 */
RunFileMeta write_indexmap_run(Device& device, const IndexMap& im, uint64_t region_offset,
                               uint32_t offset_width, ThreadPool* write_pool,
                               PhaseGate& gate, PhaseId phase);

/** Parse and sanity-check a run header (reads 32 bytes, accounted). */
RunFileMeta read_run_header(Device& device, uint64_t region_offset, PhaseId phase);

/** Read back a whole run into memory (test/repair helper; accounted). */
IndexMap read_run_entries(Device& device, const RunFileMeta& run, PhaseId phase);

} // namespace braidsort

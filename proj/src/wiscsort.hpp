// Key/value-separated external sorting: strided key gather into an IndexMap,
// concurrent in-memory sort, then either direct materialization of the
// output (one pass) or packed index runs merged in a single level with
// batched random value gathering (merge pass).

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "device.hpp"
#include "indexmap.hpp"
#include "profiler.hpp"
#include "recfmt.hpp"
#include "sched.hpp"
#include "thread_pool.hpp"

namespace braidsort {

enum class SortMode : uint8_t { one_pass = 0, merge_pass = 1 };

struct BufferGeometry {
    uint64_t read_buffer_bytes = 64ull << 20;
    uint64_t write_buffer_bytes = 64ull << 20;
    /** Run sizes are floored to a multiple of this record count. */
    uint64_t reader_partition_granularity = 1;
};

struct SortPlan {
    SortMode mode = SortMode::one_pass;
    uint64_t run_count = 1;
    uint64_t records_per_run = 0;
    uint32_t merge_levels = 0;
    BufferGeometry buffers;
    PoolPlan pools;
    uint64_t index_budget = 0;
    uint32_t offset_width = 5;

    /** DRAM footprint of one index entry for the budget decision. */
    static uint64_t entry_footprint(uint32_t key_size) { return uint64_t(key_size) + 8; }
};

/**
 * Decide one pass vs merge pass. One pass iff all N entries fit the budget
 * at K+8 bytes each; otherwise records_per_run = floor(budget / footprint)
 * floored to the reader-partition granularity, run_count = ceil(N / that).
 */
SortPlan plan_sort(const DatasetMeta& meta, uint64_t index_budget,
                   const BufferGeometry& buffers, const PoolPlan& pools,
                   uint32_t offset_width = 0);

/**
 * Strided key gather over a fixed-layout record range: each reader thread
 * owns an equal contiguous sub-range and reads exactly the key bytes of each
 * record, generating record-index locators on the fly.
 */
IndexMap run_read_strided(Device& device, uint64_t input_base, const RecordLayout& layout,
                          uint64_t rec_begin, uint64_t rec_end, ThreadPool* read_pool,
                          PhaseGate& gate, PhaseId phase);

/**
 * Serial key+vlength walk of a klv file region starting at byte cursor;
 * reads at most max_entries entries and returns the advanced cursor. The
 * locator of each entry is the byte offset of its value.
 */
IndexMap run_read_klv(Device& device, uint64_t input_base, uint64_t input_len,
                      const RecordLayout& layout, uint64_t& cursor, uint64_t max_entries,
                      PhaseGate& gate, PhaseId phase);

/**
 * Output-ordered list of pending value gathers. Capacity derives from the
 * write buffer: fixed layout admits write_buffer / record_size entries; klv
 * admits entries while the total output bytes stay within the buffer. The
 * first entry is always admitted.
 */
class OffsetQueue {
public:
    OffsetQueue(const RecordLayout& layout, uint64_t write_buffer_bytes);

    bool try_push(const uint8_t* key, uint64_t locator, uint32_t vlen);
    uint64_t size() const { return entries_.size(); }
    bool empty() const { return entries_.size() == 0; }
    uint64_t output_bytes() const { return out_bytes_; }
    const IndexMap& entries() const { return entries_; }
    void clear();

private:
    RecordLayout layout_;
    uint64_t cap_bytes_;
    uint64_t cap_entries_; // fixed layout only
    uint64_t out_bytes_ = 0;
    IndexMap entries_;
};

/** Per-run cursors plus the min-selection heap over live run heads. */
class MergeState {
public:
    /**
     * Parse and check each run's header, split the read buffer evenly
     * amongst the runs (entry-aligned), load each run's first chunk
     * sequentially and seed the selection heap.
     */
    static MergeState init(Device& device, const std::vector<uint64_t>& run_offsets,
                           uint64_t read_buffer_bytes, PhaseGate& gate, PhaseId read_phase);

    bool exhausted() const { return heap_.empty(); }
    uint32_t live_runs() const { return live_; }
    uint64_t refills() const { return refills_; }
    uint64_t allotment_entries() const { return allotment_entries_; }
    uint64_t retire_count() const { return retires_; }
    uint64_t refill_wall_ns() const { return refill_wall_ns_; }

    struct MinEntry {
        const uint8_t* key; // valid until the next selection
        uint64_t locator;
        uint32_t vlen;
    };

    /**
     * Pop the least (key, locator, run) head, advance that run's cursor and
     * refill or retire it when the cursor hits its end. Fails when every
     * run is exhausted.
     */
    MinEntry select_min(Device& device, PhaseGate& gate, PhaseId read_phase);

private:
    struct Run {
        RunFileMeta file;
        uint64_t next_entry = 0;   // next file entry not yet loaded
        std::vector<uint8_t> region;
        uint64_t region_entries = 0;
        uint64_t cursor = 0;
    };

    const uint8_t* head_key(uint32_t run) const;
    uint64_t head_locator(uint32_t run) const;
    bool heap_less(uint32_t a, uint32_t b) const;
    void heap_push(uint32_t run);
    uint32_t heap_pop();
    void refill_or_retire(Device& device, uint32_t run, PhaseGate& gate, PhaseId phase);
    void recompute_allotment();

    uint64_t read_buffer_bytes_ = 0;
    uint32_t entry_size_ = 0;
    uint32_t key_size_ = 0;
    uint32_t offset_width_ = 0;
    bool has_vlen_ = false;
    uint64_t allotment_entries_ = 0;
    uint32_t live_ = 0;
    uint64_t refills_ = 0;
    uint64_t retires_ = 0;
    uint64_t refill_wall_ns_ = 0;
    std::vector<Run> runs_;
    std::vector<uint32_t> heap_;
    std::vector<uint8_t> min_scratch_;
};

/** Wall-clock per phase label, accumulated by the drivers. */
using PhaseWall = std::map<std::string, uint64_t>;

struct WiscsortPhases {
    PhaseId run_read, run_sort, run_write, merge_read, record_read, merge_write;
};

/**
 * Batched value gathering: the queue is partitioned evenly across the gather
 * pool; each thread random-reads its values from the input region into the
 * write buffer at final positions. In no-sync mode records go straight to
 * the output region instead of staging.
 */
void gather_records(Device& device, uint64_t input_base, const RecordLayout& layout,
                    const OffsetQueue& queue, StagingBuffer& buffer,
                    ThreadPool* gather_pool, PhaseGate& gate, PhaseId record_read_phase);

struct SortStats {
    SortPlan plan;
    PhaseWall phase_wall_ns;
    uint64_t wall_ns = 0;
    uint64_t output_offset = 0;
    uint64_t output_bytes = 0;
    uint64_t merge_refills = 0;
    uint64_t merge_retires = 0;
};

/**
 * Run the full sort over a dataset image on the device; the output region is
 * allocated from the device arena. Single merge level by construction.
 */
SortStats wiscsort_sort(Device& device, const DatasetMeta& meta, uint64_t input_offset,
                        const SortPlan& plan, ConcurrencyMode mode);

/**
 * Merge pre-written index runs into the output region (shared by the
 * key/value-separated sorters). Returns bytes written.
 */
uint64_t mergepass(Device& device, const std::vector<uint64_t>& run_offsets,
                   uint64_t input_base, const RecordLayout& layout, uint64_t out_base,
                   const BufferGeometry& buffers, ThreadPool* gather_pool,
                   ThreadPool* write_pool, PhaseGate& gate, const WiscsortPhases& phases,
                   PhaseWall& wall, uint64_t* refills = nullptr, uint64_t* retires = nullptr);

} // namespace braidsort

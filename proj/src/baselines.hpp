// Comparison sorters: external merge sort in three concurrency variants,
// in-place sample sort running directly on device-resident records, and a
// key/value-separated sorter that loads full records sequentially instead of
// gathering keys with strided reads.

#pragma once

#include "wiscsort.hpp"

namespace braidsort {

enum class BaselineAlgorithm : uint8_t { ems = 0, samplesort_in_place = 1, pmsort = 2 };

struct BaselineConfig {
    ConcurrencyMode concurrency = ConcurrencyMode::no_overlap;
    bool single_thread = false; // published single-threaded pmsort variant
    BufferGeometry buffers;
    PoolPlan pools;
    uint32_t offset_width = 0; // pmsort run entries; 0 = layout default
};

/**
 * External merge sort: full records are read sequentially, sorted by key
 * (ties by original position) and written to full-record run files; a single
 * merge level combines them with one min-finding thread copying records into
 * the write buffer. Total device traffic is 4N(K+V) for the fixed layout.
 */
SortStats ems_sort(Device& device, const DatasetMeta& meta, uint64_t input_offset,
                   const BaselineConfig& config);

/**
 * Concurrent in-place comparison sort operating directly on device-resident
 * fixed-size records; every record move and comparison read is device
 * traffic. Sorts the given region in place (output_offset = input_offset).
 * Ordering is lexicographic over the whole record, so equal keys order by
 * value bytes.
 */
SortStats samplesort_inplace(Device& device, const DatasetMeta& meta,
                             uint64_t region_offset, const BaselineConfig& config);

/**
 * Key/value separation without strided gather: the run phase reads full
 * records sequentially, keeps (key, record-index) pairs and discards the
 * values, then merges the index runs with batched value gathering.
 */
SortStats pmsort_sort(Device& device, const DatasetMeta& meta, uint64_t input_offset,
                      const BaselineConfig& config);

} // namespace braidsort

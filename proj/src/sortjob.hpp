// One sort job end to end: algorithm dispatch over a dataset image on a
// device, plus the per-phase report that joins wall time with the ledger.

#pragma once

#include <string>

#include "baselines.hpp"
#include "wiscsort.hpp"

namespace braidsort {

enum class Algorithm : uint8_t { wiscsort = 0, ems = 1, samplesort = 2, pmsort = 3 };
enum class PlanChoice : uint8_t { automatic = 0, one_pass = 1, merge_pass = 2 };

const char* to_string(Algorithm a);
Algorithm algorithm_from_string(std::string_view name);
PlanChoice plan_choice_from_string(std::string_view name);

struct SortRequest {
    Algorithm algo = Algorithm::wiscsort;
    PlanChoice mode = PlanChoice::automatic;
    ConcurrencyMode concurrency = ConcurrencyMode::no_overlap;
    bool single_thread = false;
    uint64_t index_budget = 256ull << 20;
    BufferGeometry buffers;
    PoolPlan pools = PoolPlan::defaults();
    uint32_t offset_width = 0; // 0 = layout default (5 fixed, 8 klv)
};

/**
 * Sort the dataset image living at input_offset. The output region comes
 * from the device arena; sample sort rewrites the input region in place.
 */
SortStats run_sort(Device& device, const DatasetMeta& meta, uint64_t input_offset,
                   const SortRequest& request);

/** The eight phase labels in report order. */
const std::vector<std::string>& phase_labels();

/**
 * Per-phase rows joining wall time with the ledger's bytes and injected
 * delay, broken out by access kind.
 */
struct PhaseReport {
    struct Row {
        std::string phase;
        uint64_t wall_ns = 0;
        uint64_t injected_delay_ns = 0;
        uint64_t seq_read_bytes = 0;
        uint64_t strided_read_bytes = 0;
        uint64_t random_read_bytes = 0;
        uint64_t write_bytes = 0;
    };
    std::vector<Row> rows;

    uint64_t total_bytes() const;

    /** CSV; the wall_ns column is host-dependent, everything else is exact. */
    std::string to_csv() const;

    static PhaseReport build(const PhaseWall& wall, const TrafficLedger& ledger);
};

} // namespace braidsort

#include "sortjob.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace braidsort {

const char* to_string(Algorithm a) {
    switch (a) {
        case Algorithm::wiscsort: return "wiscsort";
        case Algorithm::ems: return "ems";
        case Algorithm::samplesort: return "samplesort";
        default: return "pmsort";
    }
}

Algorithm algorithm_from_string(std::string_view name) {
    if (name == "wiscsort") return Algorithm::wiscsort;
    if (name == "ems") return Algorithm::ems;
    if (name == "samplesort") return Algorithm::samplesort;
    if (name == "pmsort") return Algorithm::pmsort;
    fail(Errc::config, "unknown algorithm '" + std::string(name) + "'");
}

PlanChoice plan_choice_from_string(std::string_view name) {
    if (name == "auto") return PlanChoice::automatic;
    if (name == "onepass") return PlanChoice::one_pass;
    if (name == "mergepass") return PlanChoice::merge_pass;
    fail(Errc::config, "unknown mode '" + std::string(name) + "'");
}

SortStats run_sort(Device& device, const DatasetMeta& meta, uint64_t input_offset,
                   const SortRequest& request) {
    PoolPlan pools = request.single_thread ? PoolPlan{1, 1, 1, 1} : request.pools;
    pools = pools.capped(env_thread_cap());

    switch (request.algo) {
        case Algorithm::wiscsort: {
            SortPlan plan = plan_sort(meta, request.index_budget, request.buffers, pools,
                                      request.offset_width);
            if (request.mode == PlanChoice::one_pass && plan.mode != SortMode::one_pass) {
                fail(Errc::config,
                     "onepass requested but the index budget of " +
                         std::to_string(request.index_budget) + " bytes only holds " +
                         std::to_string(request.index_budget /
                                        SortPlan::entry_footprint(meta.layout.key_size)) +
                         " of " + std::to_string(meta.record_count) + " entries");
            }
            if (request.mode == PlanChoice::merge_pass && plan.mode == SortMode::one_pass &&
                meta.record_count > 0) {
                // Forced merge pass: split into two runs even when one would do.
                plan.mode = SortMode::merge_pass;
                plan.merge_levels = 1;
                plan.records_per_run = (meta.record_count + 1) / 2;
                plan.run_count =
                    (meta.record_count + plan.records_per_run - 1) / plan.records_per_run;
            }
            return wiscsort_sort(device, meta, input_offset, plan, request.concurrency);
        }
        case Algorithm::ems: {
            BaselineConfig cfg;
            cfg.concurrency = request.concurrency;
            cfg.single_thread = request.single_thread;
            cfg.buffers = request.buffers;
            cfg.pools = pools;
            return ems_sort(device, meta, input_offset, cfg);
        }
        case Algorithm::samplesort: {
            BaselineConfig cfg;
            cfg.concurrency = request.concurrency;
            cfg.single_thread = request.single_thread;
            cfg.pools = pools;
            return samplesort_inplace(device, meta, input_offset, cfg);
        }
        default: {
            BaselineConfig cfg;
            cfg.concurrency = request.concurrency;
            cfg.single_thread = request.single_thread;
            cfg.buffers = request.buffers;
            cfg.pools = pools;
            cfg.offset_width = request.offset_width;
            return pmsort_sort(device, meta, input_offset, cfg);
        }
    }
}

const std::vector<std::string>& phase_labels() {
    static const std::vector<std::string> labels = {
        "RUN read",  "RUN sort",   "RUN other",   "RUN write",
        "MERGE read", "MERGE other", "RECORD read", "MERGE write",
    };
    return labels;
}

uint64_t PhaseReport::total_bytes() const {
    uint64_t sum = 0;
    for (const auto& r : rows) {
        sum += r.seq_read_bytes + r.strided_read_bytes + r.random_read_bytes +
               r.write_bytes;
    }
    return sum;
}

PhaseReport PhaseReport::build(const PhaseWall& wall, const TrafficLedger& ledger) {
    PhaseReport report;
    std::set<std::string> seen;
    auto row_for = [&](const std::string& phase) -> Row& {
        for (auto& r : report.rows) {
            if (r.phase == phase) return r;
        }
        report.rows.push_back(Row{phase});
        return report.rows.back();
    };

    for (const auto& label : phase_labels()) {
        bool in_wall = wall.count(label) > 0;
        bool in_ledger = false;
        for (const auto& lr : ledger.rows) {
            if (lr.phase == label) {
                in_ledger = true;
                break;
            }
        }
        if (in_wall || in_ledger) {
            row_for(label);
        }
    }
    // Any ledger phase outside the canonical taxonomy still gets a row.
    for (const auto& lr : ledger.rows) {
        row_for(lr.phase);
    }

    for (auto& row : report.rows) {
        auto it = wall.find(row.phase);
        if (it != wall.end()) {
            row.wall_ns = it->second;
        }
        for (const auto& lr : ledger.rows) {
            if (lr.phase != row.phase) continue;
            row.injected_delay_ns += lr.cell.injected_delay_ns;
            if (lr.direction == Direction::write) {
                row.write_bytes += lr.cell.bytes;
            } else if (lr.pattern == Pattern::sequential) {
                row.seq_read_bytes += lr.cell.bytes;
            } else if (lr.pattern == Pattern::strided) {
                row.strided_read_bytes += lr.cell.bytes;
            } else {
                row.random_read_bytes += lr.cell.bytes;
            }
        }
    }
    return report;
}

std::string PhaseReport::to_csv() const {
    std::ostringstream out;
    out << "# schema braidsort.phases.v1 (wall_ns is host-dependent)\n";
    out << "phase,wall_ns,injected_delay_ns,seq_read_bytes,strided_read_bytes,"
           "random_read_bytes,write_bytes\n";
    for (const auto& r : rows) {
        out << r.phase << ',' << r.wall_ns << ',' << r.injected_delay_ns << ','
            << r.seq_read_bytes << ',' << r.strided_read_bytes << ','
            << r.random_read_bytes << ',' << r.write_bytes << "\n";
    }
    return out.str();
}

} // namespace braidsort

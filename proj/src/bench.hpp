// Benchmark suites that mirror the evaluation structure: per-phase
// breakdowns, concurrency-model comparisons, value:key sweeps, strided vs
// sequential index loading, emulated device presets, and background
// interference runs. Each suite emits one CSV.

#pragma once

#include <cstdint>
#include <string>

#include "sortjob.hpp"

namespace braidsort {

enum class BenchSuite : uint8_t {
    phase_breakdown = 0,
    concurrency_models = 1,
    vk_sweep = 2,
    strided_vs_seq = 3,
    devices = 4,
    interference = 5,
};

BenchSuite suite_from_string(std::string_view name);
const char* to_string(BenchSuite suite);

struct BenchRequest {
    BenchSuite suite = BenchSuite::phase_breakdown;
    uint64_t record_count = 0; // 0 = suite default
    uint64_t seed = 1;
    std::string device;        // preset/spec path; empty = suite default
    std::string scratch_dir = ".";
};

/**
 * Run a suite and return its CSV: one row per (algorithm, variant, phase)
 * with bytes, injected delay and wall time, plus a "total" row per run.
 * Byte and delay columns are reproducible for a fixed (seed, config,
 * emulated device); wall_ns is host-dependent.
 */
std::string run_bench(const BenchRequest& request);

} // namespace braidsort

// Device microbenchmarks: measure read/write throughput curves and size the
// per-access-type thread pools from them.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "device.hpp"

namespace braidsort {

struct DeviceProfile {
    /** (pattern, access size, thread count) -> throughput in bytes/s. */
    std::map<std::tuple<Pattern, uint64_t, uint32_t>, double> read_curve;
    /** thread count -> throughput in bytes/s. */
    std::map<uint32_t, double> write_curve;
    int64_t measured_at = 0; // unix seconds
    std::string device_id;

    void validate() const;
};

struct PoolPlan {
    uint32_t read_pool = 1;
    uint32_t random_read_pool = 1;
    uint32_t write_pool = 1;
    uint32_t sort_pool = 1;

    /** Clamp every pool to the BRAIDSORT_THREADS cap (0 = no cap). */
    PoolPlan capped(unsigned cap) const;

    static PoolPlan defaults();
    /**
     * Derive pools from a measured profile: sequential reads at the largest
     * measured size, random reads at the size closest to value_hint, writes
     * from the write curve, sort pool = hardware cores.
     */
    static PoolPlan from_profile(const DeviceProfile& profile, uint64_t value_hint);
};

struct ProfileOptions {
    std::vector<uint64_t> sizes = {64, 256, 4096};
    std::vector<uint32_t> threads = {1, 2, 4, 8};
    uint64_t duration_ns_per_cell = 25'000'000;
    uint64_t region_bytes_per_thread = 4ull << 20;
};

/**
 * Measure the device's throughput curves. Probe regions are disjoint and
 * pre-touched so allocation cost stays out of the measurement; the device is
 * owned exclusively while the benchmark runs. Cells are visited in a fixed
 * order. Sizes must include at least {64, 256, 4096}.
 */
DeviceProfile profile_device(Device& device, const ProfileOptions& options);

/**
 * Best thread count for an access type: the argmax-throughput entry of the
 * matching curve, ties toward fewer threads. The access size snaps to the
 * nearest measured size (ties toward the smaller size). Strided reads use
 * the random curve.
 */
uint32_t pool_size(const DeviceProfile& profile, AccessKind kind, uint64_t access_size);

void save_profile(const DeviceProfile& profile, const std::string& path);
DeviceProfile load_profile(const std::string& path);
std::string serialize_profile(const DeviceProfile& profile);
DeviceProfile parse_profile(std::string_view text);

} // namespace braidsort

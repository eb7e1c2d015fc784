// Uniform storage-device abstraction. A handle serves either a real
// file-backed region or an emulated byte-addressable device with injected
// per-cacheline delays, and records exact traffic plus timestamped access
// windows on every operation.
//
// The handle exposes one flat address space. Callers carve regions out of it
// (input image, run files, output image) with alloc_region/import_file and
// address all accounted I/O by absolute offset.

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "common.hpp"

namespace braidsort {

enum class Backing : uint8_t { real_file = 0, emulated = 1 };
enum class Direction : uint8_t { read = 0, write = 1 };
enum class Pattern : uint8_t { sequential = 0, strided = 1, random = 2 };

const char* to_string(Direction d);
const char* to_string(Pattern p);

struct AccessKind {
    Direction direction = Direction::read;
    Pattern pattern = Pattern::sequential;
};

/**
 * Piecewise-constant per-thread throughput multipliers keyed by concurrency.
 * Lookup takes the entry with the largest thread count <= n. The effective
 * per-line delay at concurrency n is base_delay / at(n).
 */
struct ScalingTable {
    std::vector<std::pair<uint32_t, double>> points{{1, 1.0}};

    double at(uint32_t threads) const;
    void validate(const char* what) const;
};

struct DeviceSpec {
    Backing backing = Backing::real_file;
    uint32_t line_size = 64;
    double base_read_latency_ns = 0.0;
    double seq_read_extra_ns = 0.0;
    double rand_read_extra_ns = 0.0;
    double write_extra_ns = 0.0;
    double interference_read_slowdown = 2.0;
    ScalingTable read_scaling;
    ScalingTable write_scaling;
    uint64_t capacity_bytes = 1ull << 30;

    void validate() const;

    /** Presets: "bd", "brd", "bard", plus "asym" (strong write asymmetry). */
    static DeviceSpec preset(std::string_view name);
    /** Parse key=value text (see serialize for the key set). */
    static DeviceSpec parse(std::string_view text);
    static DeviceSpec load_file(const std::string& path);
    /** Preset name, spec file path, or "real" for an unmetered file device. */
    static DeviceSpec resolve(const std::string& name_or_path);
    std::string serialize() const;

    double read_line_delay_ns(Pattern pattern, uint32_t readers, bool write_in_flight) const;
    double write_line_delay_ns(uint32_t writers) const;
};

/** Ledger phase identifiers are interned per handle; 0 is "default". */
using PhaseId = uint16_t;

struct LedgerCell {
    uint64_t bytes = 0;
    uint64_t ops = 0;
    uint64_t lines = 0;
    uint64_t injected_delay_ns = 0;
    uint64_t interference_lines = 0; // read lines charged the interference multiplier
};

struct LedgerRow {
    std::string phase;
    Direction direction;
    Pattern pattern;
    LedgerCell cell;
};

struct TrafficLedger {
    std::vector<LedgerRow> rows; // sorted by (phase, direction, pattern)

    uint64_t total_bytes() const;
    uint64_t total_bytes(Direction d) const;
    uint64_t total_injected_ns() const;
    uint64_t total_interference_lines() const;
    /** Sum of bytes for one phase label (all kinds), or one direction of it. */
    uint64_t phase_bytes(std::string_view phase) const;
    uint64_t phase_bytes(std::string_view phase, Direction d) const;
    const LedgerCell* find(std::string_view phase, Direction d, Pattern p) const;

    /** CSV with columns phase,direction,pattern,bytes,ops,lines,injected_delay_ns. */
    std::string to_csv() const;
};

struct TraceWindow {
    uint64_t start_ns = 0;
    uint64_t end_ns = 0;
    Direction direction = Direction::read;
    PhaseId phase = 0;
    uint32_t thread = 0;
};

struct PhaseTrace {
    std::vector<std::string> phase_names;
    std::vector<TraceWindow> windows;

    /** Number of (read window, write window) pairs that overlap in time. */
    uint64_t read_write_overlaps() const;

    /** CSV with columns start_ns,end_ns,direction,phase,thread. */
    std::string to_csv() const;
};

/** Number of line_size-aligned lines an access [offset, offset+len) spans. */
uint64_t lines_spanned(uint64_t offset, uint64_t len, uint32_t line_size);

class Device {
public:
    /**
     * Open a device. Real backing opens/creates the file at path (sparse,
     * sized to capacity); pre-existing contents stay addressable and the
     * region arena starts after them. Emulated backing ignores the path and
     * serves an in-memory region of capacity bytes.
     */
    Device(DeviceSpec spec, const std::string& path = "");
    ~Device();

    Device(const Device&) = delete;
    Device& operator=(const Device&) = delete;

    const DeviceSpec& spec() const { return spec_; }
    uint64_t capacity() const { return spec_.capacity_bytes; }

    // -- region arena -------------------------------------------------------
    /** Reserve size bytes; returns the region's base offset (line-aligned). */
    uint64_t alloc_region(uint64_t size);
    /** Load a host file into a fresh region; returns its base offset. */
    uint64_t import_file(const std::string& os_path, uint64_t* out_len = nullptr);
    /** Dump a region to a host file. */
    void export_region(uint64_t offset, uint64_t len, const std::string& os_path);

    // Unaccounted provisioning access (setup/teardown, never sort traffic).
    void raw_store(uint64_t offset, std::span<const uint8_t> src);
    void raw_load(uint64_t offset, std::span<uint8_t> dst);

    // -- accounted access ---------------------------------------------------
    PhaseId phase(std::string_view label);

    void read(uint64_t offset, std::span<uint8_t> dst, Pattern pattern, PhaseId phase);
    void write(uint64_t offset, std::span<const uint8_t> src, Pattern pattern, PhaseId phase);

    // -- observation --------------------------------------------------------
    TrafficLedger ledger_snapshot() const;
    PhaseTrace trace_snapshot() const;
    void set_trace_enabled(bool enabled);
    bool trace_enabled() const { return trace_enabled_; }

private:
    struct CellKey {
        PhaseId phase;
        Direction direction;
        Pattern pattern;
        bool operator<(const CellKey& o) const {
            if (phase != o.phase) return phase < o.phase;
            if (direction != o.direction) return direction < o.direction;
            return pattern < o.pattern;
        }
    };

    void check_range(uint64_t offset, uint64_t len) const;
    void account(PhaseId phase, Direction d, Pattern p, uint64_t bytes,
                 uint64_t lines, uint64_t injected_ns, bool interfered,
                 uint64_t start_ns, uint64_t end_ns);
    uint64_t now_ns() const;
    uint32_t thread_slot();
    void busy_wait(uint64_t ns) const;

    DeviceSpec spec_;
    std::string path_;
    uint64_t id_ = 0;
    int fd_ = -1;               // real backing
    uint8_t* region_ = nullptr; // emulated backing
    uint64_t arena_next_ = 0;

    std::atomic<uint32_t> reads_in_flight_{0};
    std::atomic<uint32_t> writes_in_flight_{0};

    mutable std::mutex stats_mu_;
    std::vector<std::string> phase_names_;
    std::map<CellKey, LedgerCell> cells_;
    std::vector<TraceWindow> windows_;
    std::map<std::thread::id, uint32_t> thread_slots_;
    std::atomic<bool> trace_enabled_{true};
    std::chrono::steady_clock::time_point epoch_;
};

} // namespace braidsort

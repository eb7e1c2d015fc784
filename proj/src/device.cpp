#include "device.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <system_error>
#include <thread>

#include "recfmt.hpp"

namespace braidsort {

const char* to_string(Direction d) {
    return d == Direction::read ? "read" : "write";
}

const char* to_string(Pattern p) {
    switch (p) {
        case Pattern::sequential: return "sequential";
        case Pattern::strided: return "strided";
        default: return "random";
    }
}

// ---------------------------------------------------------------------------
// ScalingTable / DeviceSpec

double ScalingTable::at(uint32_t threads) const {
    double value = points.front().second;
    for (const auto& [n, v] : points) {
        if (n > threads) {
            break;
        }
        value = v;
    }
    return value;
}

void ScalingTable::validate(const char* what) const {
    if (points.empty()) {
        fail(Errc::config, std::string(what) + " scaling table is empty");
    }
    uint32_t prev = 0;
    for (const auto& [n, v] : points) {
        if (n < 1) {
            fail(Errc::config, std::string(what) + " scaling thread count must be >= 1");
        }
        if (n <= prev) {
            fail(Errc::config, std::string(what) + " scaling thread counts must increase");
        }
        if (!(v > 0.0)) {
            fail(Errc::config, std::string(what) + " scaling value must be > 0");
        }
        prev = n;
    }
}

void DeviceSpec::validate() const {
    if (line_size == 0) {
        fail(Errc::config, "line_size must be > 0");
    }
    if (base_read_latency_ns < 0 || seq_read_extra_ns < 0 || rand_read_extra_ns < 0 ||
        write_extra_ns < 0) {
        fail(Errc::config, "latencies must be >= 0");
    }
    if (interference_read_slowdown < 1.0) {
        fail(Errc::config, "interference_read_slowdown must be >= 1");
    }
    read_scaling.validate("read");
    write_scaling.validate("write");
    if (capacity_bytes == 0) {
        fail(Errc::config, "capacity must be > 0");
    }
}

DeviceSpec DeviceSpec::preset(std::string_view name) {
    DeviceSpec spec;
    spec.backing = Backing::emulated;
    spec.base_read_latency_ns = 100.0;
    if (name == "bd") {
        // Byte-addressable 'disk': random reads 500ns slower, symmetric writes.
        spec.rand_read_extra_ns = 500.0;
        spec.write_extra_ns = 0.0;
        spec.interference_read_slowdown = 1.0;
    } else if (name == "brd") {
        // Equal random read, sequential read and write cost.
        spec.interference_read_slowdown = 1.0;
    } else if (name == "bard") {
        // Writes 500ns slower than reads; random reads equal sequential.
        spec.write_extra_ns = 500.0;
        spec.interference_read_slowdown = 1.0;
    } else if (name == "asym") {
        // Strongly asymmetric interfering device for scheduling studies.
        spec.write_extra_ns = 1000.0;
        spec.interference_read_slowdown = 2.0;
    } else {
        fail(Errc::config, "unknown device preset '" + std::string(name) + "'");
    }
    return spec;
}

DeviceSpec DeviceSpec::parse(std::string_view text) {
    DeviceSpec spec;
    spec.read_scaling.points.clear();
    spec.write_scaling.points.clear();

    size_t pos = 0;
    while (pos < text.size()) {
        size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) {
            eol = text.size();
        }
        std::string_view line = trim(text.substr(pos, eol - pos));
        pos = eol + 1;
        if (line.empty() || line.front() == '#') {
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string_view::npos) {
            fail(Errc::format, "device spec line without '=': " + std::string(line));
        }
        std::string key(trim(line.substr(0, eq)));
        std::string value(trim(line.substr(eq + 1)));

        auto as_double = [&]() {
            try {
                return std::stod(value);
            } catch (const std::exception&) {
                fail(Errc::format, "bad numeric value for " + key);
            }
        };
        auto as_u64 = [&]() -> uint64_t {
            auto v = parse_size(value);
            if (!v) {
                fail(Errc::format, "bad size value for " + key);
            }
            return *v;
        };

        if (key == "backing") {
            if (value == "real") spec.backing = Backing::real_file;
            else if (value == "emulated") spec.backing = Backing::emulated;
            else fail(Errc::format, "backing must be real or emulated");
        } else if (key == "line_size") {
            spec.line_size = static_cast<uint32_t>(as_u64());
        } else if (key == "base_read_latency_ns") {
            spec.base_read_latency_ns = as_double();
        } else if (key == "seq_read_extra_ns") {
            spec.seq_read_extra_ns = as_double();
        } else if (key == "rand_read_extra_ns") {
            spec.rand_read_extra_ns = as_double();
        } else if (key == "write_extra_ns") {
            spec.write_extra_ns = as_double();
        } else if (key == "interference_read_slowdown") {
            spec.interference_read_slowdown = as_double();
        } else if (key == "capacity_bytes") {
            spec.capacity_bytes = as_u64();
        } else if (key.rfind("read_scaling.", 0) == 0) {
            spec.read_scaling.points.emplace_back(
                static_cast<uint32_t>(std::stoul(key.substr(13))), as_double());
        } else if (key.rfind("write_scaling.", 0) == 0) {
            spec.write_scaling.points.emplace_back(
                static_cast<uint32_t>(std::stoul(key.substr(14))), as_double());
        } else {
            fail(Errc::format, "unknown device spec key '" + key + "'");
        }
    }
    if (spec.read_scaling.points.empty()) {
        spec.read_scaling.points = {{1, 1.0}};
    }
    if (spec.write_scaling.points.empty()) {
        spec.write_scaling.points = {{1, 1.0}};
    }
    std::sort(spec.read_scaling.points.begin(), spec.read_scaling.points.end());
    std::sort(spec.write_scaling.points.begin(), spec.write_scaling.points.end());
    spec.validate();
    return spec;
}

DeviceSpec DeviceSpec::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        fail(Errc::io, "cannot open device spec '" + path + "'");
    }
    std::ostringstream text;
    text << in.rdbuf();
    return parse(text.str());
}

DeviceSpec DeviceSpec::resolve(const std::string& name_or_path) {
    if (name_or_path.empty() || name_or_path == "real") {
        return DeviceSpec{};
    }
    if (name_or_path == "bd" || name_or_path == "brd" || name_or_path == "bard" ||
        name_or_path == "asym") {
        return preset(name_or_path);
    }
    return load_file(name_or_path);
}

std::string DeviceSpec::serialize() const {
    std::ostringstream out;
    out << "backing=" << (backing == Backing::real_file ? "real" : "emulated") << "\n";
    out << "line_size=" << line_size << "\n";
    out << "base_read_latency_ns=" << base_read_latency_ns << "\n";
    out << "seq_read_extra_ns=" << seq_read_extra_ns << "\n";
    out << "rand_read_extra_ns=" << rand_read_extra_ns << "\n";
    out << "write_extra_ns=" << write_extra_ns << "\n";
    out << "interference_read_slowdown=" << interference_read_slowdown << "\n";
    for (const auto& [n, v] : read_scaling.points) {
        out << "read_scaling." << n << "=" << v << "\n";
    }
    for (const auto& [n, v] : write_scaling.points) {
        out << "write_scaling." << n << "=" << v << "\n";
    }
    out << "capacity_bytes=" << capacity_bytes << "\n";
    return out.str();
}

double DeviceSpec::read_line_delay_ns(Pattern pattern, uint32_t readers,
                                      bool write_in_flight) const {
    double extra = pattern == Pattern::sequential ? seq_read_extra_ns : rand_read_extra_ns;
    double delay = base_read_latency_ns + extra;
    if (write_in_flight) {
        delay *= interference_read_slowdown;
    }
    return delay / read_scaling.at(std::max<uint32_t>(readers, 1));
}

double DeviceSpec::write_line_delay_ns(uint32_t writers) const {
    double delay = base_read_latency_ns + write_extra_ns;
    return delay / write_scaling.at(std::max<uint32_t>(writers, 1));
}

// ---------------------------------------------------------------------------
// TrafficLedger / PhaseTrace

uint64_t TrafficLedger::total_bytes() const {
    uint64_t sum = 0;
    for (const auto& r : rows) sum += r.cell.bytes;
    return sum;
}

uint64_t TrafficLedger::total_bytes(Direction d) const {
    uint64_t sum = 0;
    for (const auto& r : rows) {
        if (r.direction == d) sum += r.cell.bytes;
    }
    return sum;
}

uint64_t TrafficLedger::total_injected_ns() const {
    uint64_t sum = 0;
    for (const auto& r : rows) sum += r.cell.injected_delay_ns;
    return sum;
}

uint64_t TrafficLedger::total_interference_lines() const {
    uint64_t sum = 0;
    for (const auto& r : rows) sum += r.cell.interference_lines;
    return sum;
}

uint64_t TrafficLedger::phase_bytes(std::string_view phase) const {
    uint64_t sum = 0;
    for (const auto& r : rows) {
        if (r.phase == phase) sum += r.cell.bytes;
    }
    return sum;
}

uint64_t TrafficLedger::phase_bytes(std::string_view phase, Direction d) const {
    uint64_t sum = 0;
    for (const auto& r : rows) {
        if (r.phase == phase && r.direction == d) sum += r.cell.bytes;
    }
    return sum;
}

const LedgerCell* TrafficLedger::find(std::string_view phase, Direction d, Pattern p) const {
    for (const auto& r : rows) {
        if (r.phase == phase && r.direction == d && r.pattern == p) {
            return &r.cell;
        }
    }
    return nullptr;
}

std::string TrafficLedger::to_csv() const {
    std::ostringstream out;
    out << "phase,direction,pattern,bytes,ops,lines,injected_delay_ns\n";
    for (const auto& r : rows) {
        out << r.phase << ',' << to_string(r.direction) << ',' << to_string(r.pattern)
            << ',' << r.cell.bytes << ',' << r.cell.ops << ',' << r.cell.lines << ','
            << r.cell.injected_delay_ns << "\n";
    }
    return out.str();
}

uint64_t PhaseTrace::read_write_overlaps() const {
    // Sweep over window starts; count read/write pairs that intersect in time.
    struct Ev { uint64_t start, end; Direction dir; };
    std::vector<Ev> evs;
    evs.reserve(windows.size());
    for (const auto& w : windows) {
        evs.push_back({w.start_ns, w.end_ns, w.direction});
    }
    std::sort(evs.begin(), evs.end(), [](const Ev& a, const Ev& b) {
        return a.start < b.start;
    });
    uint64_t overlaps = 0;
    // Active windows of the opposite class with end > current start.
    std::vector<uint64_t> active_read_ends, active_write_ends;
    for (const auto& e : evs) {
        auto& same = e.dir == Direction::read ? active_read_ends : active_write_ends;
        auto& other = e.dir == Direction::read ? active_write_ends : active_read_ends;
        std::erase_if(other, [&](uint64_t end) { return end <= e.start; });
        std::erase_if(same, [&](uint64_t end) { return end <= e.start; });
        overlaps += other.size();
        same.push_back(e.end);
    }
    return overlaps;
}

std::string PhaseTrace::to_csv() const {
    std::ostringstream out;
    out << "start_ns,end_ns,direction,phase,thread\n";
    for (const auto& w : windows) {
        out << w.start_ns << ',' << w.end_ns << ',' << to_string(w.direction) << ','
            << (w.phase < phase_names.size() ? phase_names[w.phase] : "?") << ','
            << w.thread << "\n";
    }
    return out.str();
}

uint64_t lines_spanned(uint64_t offset, uint64_t len, uint32_t line_size) {
    if (len == 0) {
        return 0;
    }
    return (offset + len - 1) / line_size - offset / line_size + 1;
}

// ---------------------------------------------------------------------------
// Device

namespace {
std::atomic<uint64_t> g_device_counter{0};
}

Device::Device(DeviceSpec spec, const std::string& path)
    : spec_(std::move(spec)), path_(path), epoch_(std::chrono::steady_clock::now()) {
    spec_.validate();
    id_ = g_device_counter.fetch_add(1, std::memory_order_relaxed) + 1;
    phase_names_.push_back("default");
    if (spec_.backing == Backing::emulated) {
        region_ = static_cast<uint8_t*>(std::malloc(spec_.capacity_bytes));
        if (region_ == nullptr) {
            fail(Errc::io, "cannot allocate emulated region of " +
                               std::to_string(spec_.capacity_bytes) + " bytes");
        }
    } else {
        if (path_.empty()) {
            fail(Errc::config, "real-file device needs a backing path");
        }
        fd_ = ::open(path_.c_str(), O_RDWR | O_CREAT, 0644);
        if (fd_ < 0) {
            fail(Errc::io, "cannot open backing file '" + path_ + "': " +
                               std::strerror(errno));
        }
        off_t size = ::lseek(fd_, 0, SEEK_END);
        if (size < 0) {
            fail(Errc::io, "cannot size backing file '" + path_ + "'");
        }
        if (static_cast<uint64_t>(size) > spec_.capacity_bytes) {
            ::close(fd_);
            fd_ = -1;
            fail(Errc::device_full, "backing file exceeds device capacity");
        }
        // Existing contents stay addressable from offset 0.
        arena_next_ = ((static_cast<uint64_t>(size) + spec_.line_size - 1) /
                       spec_.line_size) * spec_.line_size;
    }
}

Device::~Device() {
    if (region_ != nullptr) {
        std::free(region_);
    }
    if (fd_ >= 0) {
        ::close(fd_);
    }
}

uint64_t Device::alloc_region(uint64_t size) {
    std::lock_guard<std::mutex> lock(stats_mu_);
    uint64_t base = arena_next_;
    if (size > spec_.capacity_bytes || base > spec_.capacity_bytes - size) {
        fail(Errc::device_full, "device full: cannot reserve " + std::to_string(size) +
                                    " bytes at offset " + std::to_string(base));
    }
    uint64_t next = base + size;
    arena_next_ = ((next + spec_.line_size - 1) / spec_.line_size) * spec_.line_size;
    if (arena_next_ > spec_.capacity_bytes) {
        arena_next_ = spec_.capacity_bytes;
    }
    return base;
}

uint64_t Device::import_file(const std::string& os_path, uint64_t* out_len) {
    std::vector<uint8_t> bytes = read_file_bytes(os_path);
    uint64_t base = alloc_region(bytes.size());
    raw_store(base, bytes);
    if (out_len != nullptr) {
        *out_len = bytes.size();
    }
    return base;
}

void Device::export_region(uint64_t offset, uint64_t len, const std::string& os_path) {
    std::vector<uint8_t> bytes(len);
    raw_load(offset, bytes);
    write_file_bytes(os_path, bytes.data(), bytes.size());
}

void Device::raw_store(uint64_t offset, std::span<const uint8_t> src) {
    check_range(offset, src.size());
    if (src.empty()) {
        return;
    }
    if (region_ != nullptr) {
        std::memcpy(region_ + offset, src.data(), src.size());
    } else {
        ssize_t n = ::pwrite(fd_, src.data(), src.size(), static_cast<off_t>(offset));
        if (n < 0 || static_cast<size_t>(n) != src.size()) {
            fail(Errc::io, "backing file write failed");
        }
    }
}

void Device::raw_load(uint64_t offset, std::span<uint8_t> dst) {
    check_range(offset, dst.size());
    if (dst.empty()) {
        return;
    }
    if (region_ != nullptr) {
        std::memcpy(dst.data(), region_ + offset, dst.size());
    } else {
        ssize_t n = ::pread(fd_, dst.data(), dst.size(), static_cast<off_t>(offset));
        if (n < 0) {
            fail(Errc::io, "backing file read failed");
        }
        // Reads past the sparse end yield zeros.
        if (static_cast<size_t>(n) < dst.size()) {
            std::memset(dst.data() + n, 0, dst.size() - n);
        }
    }
}

PhaseId Device::phase(std::string_view label) {
    std::lock_guard<std::mutex> lock(stats_mu_);
    for (size_t i = 0; i < phase_names_.size(); i++) {
        if (phase_names_[i] == label) {
            return static_cast<PhaseId>(i);
        }
    }
    phase_names_.emplace_back(label);
    return static_cast<PhaseId>(phase_names_.size() - 1);
}

void Device::check_range(uint64_t offset, uint64_t len) const {
    if (len > spec_.capacity_bytes || offset > spec_.capacity_bytes - len) {
        fail(Errc::out_of_range, "access [" + std::to_string(offset) + ", +" +
                                     std::to_string(len) + ") beyond device capacity");
    }
}

uint64_t Device::now_ns() const {
    return static_cast<uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(
                                     std::chrono::steady_clock::now() - epoch_)
                                     .count());
}

uint32_t Device::thread_slot() {
    thread_local uint64_t cached_id = 0;
    thread_local uint32_t cached_slot = 0;
    if (cached_id == id_) {
        return cached_slot;
    }
    std::lock_guard<std::mutex> lock(stats_mu_);
    auto [it, inserted] =
        thread_slots_.emplace(std::this_thread::get_id(),
                              static_cast<uint32_t>(thread_slots_.size()));
    cached_id = id_;
    cached_slot = it->second;
    return it->second;
}

void Device::busy_wait(uint64_t ns) const {
    if (ns == 0) {
        return;
    }
    auto until = std::chrono::steady_clock::now() + std::chrono::nanoseconds(ns);
    while (std::chrono::steady_clock::now() < until) {
        // spin; the injected latency models device occupancy
    }
}

void Device::read(uint64_t offset, std::span<uint8_t> dst, Pattern pattern, PhaseId ph) {
    check_range(offset, dst.size());
    if (dst.empty()) {
        return;
    }
    uint32_t readers = reads_in_flight_.fetch_add(1, std::memory_order_acq_rel) + 1;
    bool interfered = writes_in_flight_.load(std::memory_order_acquire) > 0;
    uint64_t lines = lines_spanned(offset, dst.size(), spec_.line_size);
    uint64_t injected = 0;
    if (spec_.backing == Backing::emulated) {
        double per_line = spec_.read_line_delay_ns(pattern, readers, interfered);
        injected = static_cast<uint64_t>(std::llround(per_line * double(lines)));
    } else {
        interfered = false;
    }
    uint64_t start = now_ns();
    busy_wait(injected);
    raw_load(offset, dst);
    uint64_t end = now_ns();
    account(ph, Direction::read, pattern, dst.size(), lines, injected, interfered,
            start, end);
    reads_in_flight_.fetch_sub(1, std::memory_order_acq_rel);
}

void Device::write(uint64_t offset, std::span<const uint8_t> src, Pattern pattern,
                   PhaseId ph) {
    check_range(offset, src.size());
    if (src.empty()) {
        return;
    }
    uint32_t writers = writes_in_flight_.fetch_add(1, std::memory_order_acq_rel) + 1;
    uint64_t lines = lines_spanned(offset, src.size(), spec_.line_size);
    uint64_t injected = 0;
    if (spec_.backing == Backing::emulated) {
        double per_line = spec_.write_line_delay_ns(writers);
        injected = static_cast<uint64_t>(std::llround(per_line * double(lines)));
    }
    uint64_t start = now_ns();
    busy_wait(injected);
    raw_store(offset, src);
    uint64_t end = now_ns();
    account(ph, Direction::write, pattern, src.size(), lines, injected, false, start, end);
    writes_in_flight_.fetch_sub(1, std::memory_order_acq_rel);
}

void Device::account(PhaseId phase, Direction d, Pattern p, uint64_t bytes,
                     uint64_t lines, uint64_t injected_ns, bool interfered,
                     uint64_t start_ns, uint64_t end_ns) {
    uint32_t slot = thread_slot();
    std::lock_guard<std::mutex> lock(stats_mu_);
    LedgerCell& cell = cells_[CellKey{phase, d, p}];
    cell.bytes += bytes;
    cell.ops += 1;
    cell.lines += lines;
    cell.injected_delay_ns += injected_ns;
    if (interfered) {
        cell.interference_lines += lines;
    }
    if (trace_enabled_.load(std::memory_order_relaxed)) {
        if (end_ns <= start_ns) {
            end_ns = start_ns + 1; // clock granularity floor
        }
        windows_.push_back(TraceWindow{start_ns, end_ns, d, phase, slot});
    }
}

TrafficLedger Device::ledger_snapshot() const {
    std::lock_guard<std::mutex> lock(stats_mu_);
    TrafficLedger ledger;
    ledger.rows.reserve(cells_.size());
    for (const auto& [key, cell] : cells_) {
        ledger.rows.push_back(LedgerRow{phase_names_[key.phase], key.direction,
                                        key.pattern, cell});
    }
    std::sort(ledger.rows.begin(), ledger.rows.end(),
              [](const LedgerRow& a, const LedgerRow& b) {
                  if (a.phase != b.phase) return a.phase < b.phase;
                  if (a.direction != b.direction) return a.direction < b.direction;
                  return a.pattern < b.pattern;
              });
    return ledger;
}

PhaseTrace Device::trace_snapshot() const {
    std::lock_guard<std::mutex> lock(stats_mu_);
    PhaseTrace trace;
    trace.phase_names = phase_names_;
    trace.windows = windows_;
    return trace;
}

void Device::set_trace_enabled(bool enabled) {
    trace_enabled_.store(enabled, std::memory_order_relaxed);
}

} // namespace braidsort

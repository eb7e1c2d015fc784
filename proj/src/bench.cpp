#include "bench.hpp"

#include <atomic>
#include <filesystem>
#include <sstream>
#include <thread>
#include <vector>

namespace braidsort {

namespace {

constexpr char kCsvHeader[] =
    "# schema braidsort.bench.v1 (wall_ns is host-dependent)\n"
    "suite,algorithm,variant,phase,bytes,injected_delay_ns,wall_ns\n";

struct BenchJob {
    std::string variant;
    Algorithm algo;
    SortRequest request;
};

std::string dataset_path(const std::string& scratch, const RecordLayout& layout,
                         uint64_t n, uint64_t seed, const VlenBounds& vlen) {
    std::ostringstream name;
    name << "bench-" << (layout.kind == LayoutKind::fixed ? "fixed" : "klv") << "-k"
         << layout.key_size << "-v" << layout.value_size << "-n" << n << "-s" << seed;
    if (layout.kind == LayoutKind::klv) {
        name << "-l" << vlen.min << "-" << vlen.max;
    }
    name << ".dat";
    return (std::filesystem::path(scratch) / name.str()).string();
}

DatasetMeta ensure_dataset(const std::string& scratch, const RecordLayout& layout,
                           uint64_t n, uint64_t seed, const VlenBounds& vlen) {
    std::filesystem::create_directories(scratch);
    std::string path = dataset_path(scratch, layout, n, seed, vlen);
    if (!std::filesystem::exists(path)) {
        return gen_dataset(layout, n, seed, vlen, path);
    }
    DatasetMeta meta;
    meta.layout = layout;
    meta.record_count = n;
    meta.seed = seed;
    meta.vlen = vlen;
    meta.total_bytes = std::filesystem::file_size(path);
    meta.path = path;
    return meta;
}

uint64_t workspace_capacity(uint64_t dataset_bytes) {
    return dataset_bytes * 4 + (64ull << 20);
}

class CsvSink {
public:
    explicit CsvSink(BenchSuite suite) : suite_(to_string(suite)) { out_ << kCsvHeader; }

    void add_run(const std::string& algo, const std::string& variant,
                 const PhaseReport& report, uint64_t total_wall_ns,
                 uint64_t total_delay_ns) {
        uint64_t bytes_total = 0;
        for (const auto& row : report.rows) {
            uint64_t bytes = row.seq_read_bytes + row.strided_read_bytes +
                             row.random_read_bytes + row.write_bytes;
            bytes_total += bytes;
            out_ << suite_ << ',' << algo << ',' << variant << ',' << row.phase << ','
                 << bytes << ',' << row.injected_delay_ns << ',' << row.wall_ns << "\n";
        }
        out_ << suite_ << ',' << algo << ',' << variant << ",total," << bytes_total << ','
             << total_delay_ns << ',' << total_wall_ns << "\n";
    }

    std::string str() const { return out_.str(); }

private:
    std::string suite_;
    std::ostringstream out_;
};

/** Run one sort job on a fresh device and emit its rows. */
void run_job(CsvSink& sink, const BenchJob& job, const DatasetMeta& meta,
             const std::string& device_spec) {
    DeviceSpec spec = DeviceSpec::resolve(device_spec);
    spec.capacity_bytes = std::max(spec.capacity_bytes, workspace_capacity(meta.total_bytes));
    std::string backing;
    if (spec.backing == Backing::real_file) {
        backing = meta.path + ".work";
    }
    Device device(spec, backing);
    device.set_trace_enabled(false);
    uint64_t input = device.import_file(meta.path);
    SortStats stats = run_sort(device, meta, input, job.request);
    TrafficLedger ledger = device.ledger_snapshot();
    PhaseReport report = PhaseReport::build(stats.phase_wall_ns, ledger);
    sink.add_run(to_string(job.algo), job.variant, report, stats.wall_ns,
                 ledger.total_injected_ns());
    if (!backing.empty()) {
        std::error_code ec;
        std::filesystem::remove(backing, ec);
    }
}

SortRequest base_request(Algorithm algo, PlanChoice mode, ConcurrencyMode concurrency) {
    SortRequest req;
    req.algo = algo;
    req.mode = mode;
    req.concurrency = concurrency;
    return req;
}

// ---------------------------------------------------------------------------
// Suites

std::string suite_phase_breakdown(const BenchRequest& request) {
    uint64_t n = request.record_count ? request.record_count : 400'000;
    std::string device = request.device.empty() ? "bard" : request.device;
    DatasetMeta meta = ensure_dataset(request.scratch_dir, RecordLayout::fixed(10, 90), n,
                                      request.seed, {});
    CsvSink sink(BenchSuite::phase_breakdown);
    run_job(sink,
            {"no-overlap", Algorithm::ems,
             base_request(Algorithm::ems, PlanChoice::automatic,
                          ConcurrencyMode::no_overlap)},
            meta, device);
    run_job(sink,
            {"onepass/no-overlap", Algorithm::wiscsort,
             base_request(Algorithm::wiscsort, PlanChoice::one_pass,
                          ConcurrencyMode::no_overlap)},
            meta, device);
    run_job(sink,
            {"mergepass/no-overlap", Algorithm::wiscsort,
             base_request(Algorithm::wiscsort, PlanChoice::merge_pass,
                          ConcurrencyMode::no_overlap)},
            meta, device);
    return sink.str();
}

std::string suite_concurrency_models(const BenchRequest& request) {
    uint64_t n = request.record_count ? request.record_count : 200'000;
    std::string device = request.device.empty() ? "asym" : request.device;
    DatasetMeta meta = ensure_dataset(request.scratch_dir, RecordLayout::fixed(10, 90), n,
                                      request.seed, {});
    CsvSink sink(BenchSuite::concurrency_models);

    for (ConcurrencyMode mode : {ConcurrencyMode::no_sync, ConcurrencyMode::overlap,
                                 ConcurrencyMode::no_overlap}) {
        run_job(sink,
                {to_string(mode), Algorithm::ems,
                 base_request(Algorithm::ems, PlanChoice::automatic, mode)},
                meta, device);
    }
    {
        SortRequest req = base_request(Algorithm::pmsort, PlanChoice::automatic,
                                       ConcurrencyMode::no_sync);
        req.single_thread = true;
        run_job(sink, {"single-thread", Algorithm::pmsort, req}, meta, device);
    }
    for (ConcurrencyMode mode : {ConcurrencyMode::no_sync, ConcurrencyMode::overlap}) {
        run_job(sink,
                {std::string("plus/") + to_string(mode), Algorithm::pmsort,
                 base_request(Algorithm::pmsort, PlanChoice::automatic, mode)},
                meta, device);
    }
    for (ConcurrencyMode mode : {ConcurrencyMode::no_sync, ConcurrencyMode::overlap,
                                 ConcurrencyMode::no_overlap}) {
        run_job(sink,
                {std::string("mergepass/") + to_string(mode), Algorithm::wiscsort,
                 base_request(Algorithm::wiscsort, PlanChoice::merge_pass, mode)},
                meta, device);
    }
    {
        SortRequest req = base_request(Algorithm::wiscsort, PlanChoice::merge_pass,
                                       ConcurrencyMode::no_overlap);
        req.single_thread = true;
        run_job(sink, {"mergepass/single-thread", Algorithm::wiscsort, req}, meta, device);
    }
    run_job(sink,
            {"onepass/no-overlap", Algorithm::wiscsort,
             base_request(Algorithm::wiscsort, PlanChoice::one_pass,
                          ConcurrencyMode::no_overlap)},
            meta, device);
    return sink.str();
}

std::string suite_vk_sweep(const BenchRequest& request) {
    uint64_t n = request.record_count ? request.record_count : 100'000;
    std::string device = request.device.empty() ? "asym" : request.device;
    CsvSink sink(BenchSuite::vk_sweep);
    for (uint32_t v : {5u, 10u, 50u, 90u, 246u, 502u}) {
        DatasetMeta meta = ensure_dataset(request.scratch_dir, RecordLayout::fixed(10, v),
                                          n, request.seed, {});
        std::string tag = "/V=" + std::to_string(v);
        run_job(sink,
                {"no-overlap" + tag, Algorithm::ems,
                 base_request(Algorithm::ems, PlanChoice::automatic,
                              ConcurrencyMode::no_overlap)},
                meta, device);
        run_job(sink,
                {"onepass" + tag, Algorithm::wiscsort,
                 base_request(Algorithm::wiscsort, PlanChoice::one_pass,
                              ConcurrencyMode::no_overlap)},
                meta, device);
        run_job(sink,
                {"mergepass" + tag, Algorithm::wiscsort,
                 base_request(Algorithm::wiscsort, PlanChoice::merge_pass,
                              ConcurrencyMode::no_overlap)},
                meta, device);
    }
    return sink.str();
}

std::string suite_strided_vs_seq(const BenchRequest& request) {
    uint64_t n = request.record_count ? request.record_count : 50'000;
    std::string device = request.device.empty() ? "brd" : request.device;
    CsvSink sink(BenchSuite::strided_vs_seq);
    for (uint32_t v : {5u, 10u, 50u, 90u, 246u, 502u}) {
        DatasetMeta meta = ensure_dataset(request.scratch_dir, RecordLayout::fixed(10, v),
                                          n, request.seed, {});
        std::string tag = "/V=" + std::to_string(v);
        // The strided IndexMap load is wiscsort's RUN read; the sequential
        // full-record load is pmsort's.
        run_job(sink,
                {"strided" + tag, Algorithm::wiscsort,
                 base_request(Algorithm::wiscsort, PlanChoice::one_pass,
                              ConcurrencyMode::no_overlap)},
                meta, device);
        run_job(sink,
                {"sequential" + tag, Algorithm::pmsort,
                 base_request(Algorithm::pmsort, PlanChoice::automatic,
                              ConcurrencyMode::no_overlap)},
                meta, device);
    }
    return sink.str();
}

std::string suite_devices(const BenchRequest& request) {
    uint64_t n = request.record_count ? request.record_count : 400'000;
    DatasetMeta meta = ensure_dataset(request.scratch_dir, RecordLayout::fixed(10, 90), n,
                                      request.seed, {});
    CsvSink sink(BenchSuite::devices);
    std::vector<std::string> devices;
    if (request.device.empty()) {
        devices = {"bd", "brd", "bard"};
    } else {
        devices = {request.device};
    }
    for (const auto& device : devices) {
        std::string tag = "/" + device;
        run_job(sink,
                {"no-overlap" + tag, Algorithm::ems,
                 base_request(Algorithm::ems, PlanChoice::automatic,
                              ConcurrencyMode::no_overlap)},
                meta, device);
        run_job(sink,
                {"in-place" + tag, Algorithm::samplesort,
                 base_request(Algorithm::samplesort, PlanChoice::automatic,
                              ConcurrencyMode::no_sync)},
                meta, device);
        run_job(sink,
                {"onepass" + tag, Algorithm::wiscsort,
                 base_request(Algorithm::wiscsort, PlanChoice::one_pass,
                              ConcurrencyMode::no_overlap)},
                meta, device);
        run_job(sink,
                {"mergepass" + tag, Algorithm::wiscsort,
                 base_request(Algorithm::wiscsort, PlanChoice::merge_pass,
                              ConcurrencyMode::no_overlap)},
                meta, device);
    }
    return sink.str();
}

std::string suite_interference(const BenchRequest& request) {
    uint64_t n = request.record_count ? request.record_count : 100'000;
    std::string device_spec = request.device.empty() ? "asym" : request.device;
    DatasetMeta meta = ensure_dataset(request.scratch_dir, RecordLayout::fixed(10, 90), n,
                                      request.seed, {});
    CsvSink sink(BenchSuite::interference);

    for (bool bg_writes : {false, true}) {
        for (uint32_t clients : {0u, 1u, 2u, 4u, 8u}) {
            for (Algorithm algo : {Algorithm::wiscsort, Algorithm::ems}) {
                DeviceSpec spec = DeviceSpec::resolve(device_spec);
                spec.capacity_bytes = std::max<uint64_t>(
                    spec.capacity_bytes,
                    workspace_capacity(meta.total_bytes) + clients * (8ull << 20));
                if (spec.backing == Backing::real_file) {
                    fail(Errc::config, "interference suite needs an emulated device");
                }
                Device device(spec, "");
                device.set_trace_enabled(false);
                uint64_t input = device.import_file(meta.path);

                // Background clients: 4KiB requests against their own region
                // of the same device, running until the sort completes.
                std::atomic<bool> stop{false};
                PhaseId bg_phase = device.phase("BACKGROUND");
                std::vector<std::thread> bg;
                std::vector<uint64_t> bg_bases;
                for (uint32_t c = 0; c < clients; c++) {
                    bg_bases.push_back(device.alloc_region(8ull << 20));
                }
                for (uint32_t c = 0; c < clients; c++) {
                    bg.emplace_back([&device, &stop, bg_writes, bg_phase,
                                     base = bg_bases[c]] {
                        std::vector<uint8_t> buf(4096);
                        uint64_t cursor = 0;
                        while (!stop.load(std::memory_order_acquire)) {
                            uint64_t off = base + cursor * 4096;
                            if (bg_writes) {
                                device.write(off, buf, Pattern::sequential, bg_phase);
                            } else {
                                device.read(off, buf, Pattern::sequential, bg_phase);
                            }
                            cursor = (cursor + 1) % ((8ull << 20) / 4096);
                        }
                    });
                }

                SortRequest req = base_request(
                    algo,
                    algo == Algorithm::wiscsort ? PlanChoice::one_pass
                                                : PlanChoice::automatic,
                    ConcurrencyMode::no_overlap);
                SortStats stats = run_sort(device, meta, input, req);
                stop.store(true, std::memory_order_release);
                for (auto& t : bg) t.join();

                TrafficLedger ledger = device.ledger_snapshot();
                PhaseReport report = PhaseReport::build(stats.phase_wall_ns, ledger);
                std::ostringstream variant;
                variant << (bg_writes ? "bg-write-" : "bg-read-") << clients;
                sink.add_run(to_string(algo), variant.str(), report, stats.wall_ns,
                             ledger.total_injected_ns());
            }
        }
    }
    return sink.str();
}

} // namespace

BenchSuite suite_from_string(std::string_view name) {
    if (name == "phase-breakdown") return BenchSuite::phase_breakdown;
    if (name == "concurrency-models") return BenchSuite::concurrency_models;
    if (name == "vk-sweep") return BenchSuite::vk_sweep;
    if (name == "strided-vs-seq") return BenchSuite::strided_vs_seq;
    if (name == "devices") return BenchSuite::devices;
    if (name == "interference") return BenchSuite::interference;
    fail(Errc::config, "unknown bench suite '" + std::string(name) + "'");
}

const char* to_string(BenchSuite suite) {
    switch (suite) {
        case BenchSuite::phase_breakdown: return "phase-breakdown";
        case BenchSuite::concurrency_models: return "concurrency-models";
        case BenchSuite::vk_sweep: return "vk-sweep";
        case BenchSuite::strided_vs_seq: return "strided-vs-seq";
        case BenchSuite::devices: return "devices";
        default: return "interference";
    }
}

std::string run_bench(const BenchRequest& request) {
    switch (request.suite) {
        case BenchSuite::phase_breakdown: return suite_phase_breakdown(request);
        case BenchSuite::concurrency_models: return suite_concurrency_models(request);
        case BenchSuite::vk_sweep: return suite_vk_sweep(request);
        case BenchSuite::strided_vs_seq: return suite_strided_vs_seq(request);
        case BenchSuite::devices: return suite_devices(request);
        default: return suite_interference(request);
    }
}

} // namespace braidsort

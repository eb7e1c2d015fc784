// Command-line front end: dataset generation, sorting, validation, device
// profiling and the benchmark suites. Talks to the engine exclusively
// through the C API in braidsort.h.

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "braidsort.h"

namespace {

constexpr uint64_t kDefaultIndexBudget = 256ull << 20;
constexpr uint64_t kDefaultBuffer = 64ull << 20;

int fail_with(bs_status status, const std::string& context) {
    std::fprintf(stderr, "braidsort: %s: %s", context.c_str(),
                 bs_status_message(status));
    const char* detail = bs_last_error();
    if (detail != nullptr && detail[0] != '\0') {
        std::fprintf(stderr, " (%s)", detail);
    }
    std::fprintf(stderr, "\n");
    return status == BS_ERR_CONFIG ? 2 : 3;
}

struct LayoutFlags {
    uint32_t key_size = 10;
    uint32_t value_size = 90;
    bool klv = false;
    uint32_t vlen_min = 0;
    uint32_t vlen_max = 90;

    void attach(CLI::App* cmd) {
        cmd->add_option("--key-size", key_size, "Key bytes per record")
            ->capture_default_str();
        cmd->add_option("--value-size", value_size,
                        "Value bytes per record (fixed layout)")
            ->capture_default_str();
        cmd->add_flag("--klv", klv, "Key-length-value records (variable values)");
        cmd->add_option("--vlen-min", vlen_min, "Smallest generated value length");
        cmd->add_option("--vlen-max", vlen_max, "Largest generated value length");
    }

    bs_layout to_c() const {
        bs_layout l{};
        l.kind = klv ? BS_LAYOUT_KLV : BS_LAYOUT_FIXED;
        l.key_size = key_size;
        l.value_size = value_size;
        l.vlen_min = vlen_min;
        l.vlen_max = vlen_max;
        return l;
    }
};

/** Size strings accept K/M/G suffixes. */
uint64_t parse_size_flag(const std::string& text) {
    uint64_t mult = 1;
    std::string body = text;
    if (!body.empty()) {
        char last = body.back();
        if (last == 'k' || last == 'K') mult = 1ull << 10;
        if (last == 'm' || last == 'M') mult = 1ull << 20;
        if (last == 'g' || last == 'G') mult = 1ull << 30;
        if (mult != 1) body.pop_back();
    }
    return std::stoull(body) * mult;
}

bool write_text(const std::string& path, const char* text) {
    std::ofstream out(path);
    if (!out) {
        return false;
    }
    out << text;
    return bool(out);
}

int dump_report(bs_device* dev, const std::string& prefix) {
    char* csv = nullptr;
    bs_status st = bs_sort_phase_csv(dev, &csv);
    if (st != BS_OK) return fail_with(st, "phase report");
    bool ok = write_text(prefix + ".phases.csv", csv);
    bs_free(csv);
    st = bs_device_ledger_csv(dev, &csv);
    if (st != BS_OK) return fail_with(st, "ledger export");
    ok = ok && write_text(prefix + ".ledger.csv", csv);
    bs_free(csv);
    st = bs_device_trace_csv(dev, &csv);
    if (st != BS_OK) return fail_with(st, "trace export");
    ok = ok && write_text(prefix + ".trace.csv", csv);
    bs_free(csv);
    if (!ok) {
        std::fprintf(stderr, "braidsort: cannot write report files at %s.*\n",
                     prefix.c_str());
        return 3;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"braidsort - concurrent external sorting for byte-addressable storage"};
    app.require_subcommand(1);

    // --- gen ---------------------------------------------------------------
    auto* gen = app.add_subcommand("gen", "Generate a dataset file");
    LayoutFlags gen_layout;
    gen_layout.attach(gen);
    uint64_t gen_records = 0;
    uint64_t gen_seed = 1;
    std::string gen_out;
    gen->add_option("--records", gen_records, "Record count")->required();
    gen->add_option("--seed", gen_seed, "Generator seed")->capture_default_str();
    gen->add_option("--out", gen_out, "Output dataset path")->required();

    // --- sort --------------------------------------------------------------
    auto* sort = app.add_subcommand("sort", "Sort a dataset");
    LayoutFlags sort_layout;
    sort_layout.attach(sort);
    std::string sort_input, sort_out, sort_algo = "wiscsort", sort_mode = "auto";
    std::string sort_concurrency = "no-overlap", sort_device = "real";
    std::string sort_profile, sort_report;
    std::string sort_read_buf, sort_write_buf, sort_index_budget;
    uint64_t sort_records = 0, sort_seed = 0;
    uint32_t sort_offset_width = 0;
    bool sort_single = false, sort_verify = false, sort_trace = false;
    sort->add_option("input", sort_input, "Input dataset path")->required();
    sort->add_option("--out", sort_out, "Sorted output path")->required();
    sort->add_option("--algo", sort_algo, "wiscsort|ems|samplesort|pmsort")
        ->check(CLI::IsMember({"wiscsort", "ems", "samplesort", "pmsort"}))
        ->capture_default_str();
    sort->add_option("--mode", sort_mode, "auto|onepass|mergepass")
        ->check(CLI::IsMember({"auto", "onepass", "mergepass"}))
        ->capture_default_str();
    sort->add_option("--concurrency", sort_concurrency, "nosync|overlap|no-overlap")
        ->check(CLI::IsMember({"nosync", "overlap", "no-overlap"}))
        ->capture_default_str();
    sort->add_flag("--single-thread", sort_single, "Run every stage on one thread");
    sort->add_option("--records", sort_records,
                     "Record count (default: derived from the file)");
    sort->add_option("--seed", sort_seed, "Seed recorded for reports");
    sort->add_option("--index-budget", sort_index_budget,
                     "DRAM budget for key+locator entries (bytes, K/M/G)");
    sort->add_option("--read-buf", sort_read_buf, "Read buffer size (bytes, K/M/G)");
    sort->add_option("--write-buf", sort_write_buf, "Write buffer size (bytes, K/M/G)");
    sort->add_option("--offset-width", sort_offset_width,
                     "Packed locator width in run files (default 5 fixed, 8 klv)");
    sort->add_option("--device", sort_device,
                     "Device: real, bd, brd, bard, asym, or a spec file")
        ->capture_default_str();
    sort->add_option("--profile", sort_profile, "Device profile file for pool sizing");
    sort->add_option("--report", sort_report,
                     "Prefix for <p>.phases.csv, <p>.ledger.csv, <p>.trace.csv");
    sort->add_flag("--verify", sort_verify, "Validate the output; nonzero exit on failure");
    sort->add_flag("--trace", sort_trace, "Record per-access trace windows");

    // --- validate ----------------------------------------------------------
    auto* val = app.add_subcommand("validate", "Check a sorted output against its input");
    LayoutFlags val_layout;
    val_layout.attach(val);
    std::string val_input, val_output;
    val->add_option("input", val_input, "Input dataset")->required();
    val->add_option("output", val_output, "Sorted output")->required();

    // --- profile -----------------------------------------------------------
    auto* prof = app.add_subcommand("profile", "Microbenchmark a device");
    std::string prof_device = "brd", prof_out;
    uint64_t prof_ms = 25;
    std::vector<uint32_t> prof_threads = {1, 2, 4, 8};
    prof->add_option("--device", prof_device, "Device preset or spec file")
        ->capture_default_str();
    prof->add_option("--out", prof_out, "Profile output file")->required();
    prof->add_option("--cell-ms", prof_ms, "Milliseconds per probe cell")
        ->capture_default_str();
    prof->add_option("--threads", prof_threads, "Thread counts to probe")
        ->capture_default_str();

    // --- bench -------------------------------------------------------------
    auto* bench = app.add_subcommand("bench", "Run a benchmark suite");
    std::string bench_suite, bench_device, bench_out, bench_scratch = ".";
    uint64_t bench_records = 0, bench_seed = 1;
    bench->add_option("--suite", bench_suite,
                      "phase-breakdown|concurrency-models|vk-sweep|strided-vs-seq|"
                      "devices|interference")
        ->required()
        ->check(CLI::IsMember({"phase-breakdown", "concurrency-models", "vk-sweep",
                               "strided-vs-seq", "devices", "interference"}));
    bench->add_option("--records", bench_records, "Records per dataset (0 = default)");
    bench->add_option("--seed", bench_seed, "Dataset seed")->capture_default_str();
    bench->add_option("--device", bench_device, "Device preset/spec (default per suite)");
    bench->add_option("--out", bench_out, "CSV output path")->required();
    bench->add_option("--scratch", bench_scratch, "Scratch directory for datasets")
        ->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    if (gen->parsed()) {
        bs_layout layout = gen_layout.to_c();
        bs_dataset_info info{};
        bs_status st =
            bs_dataset_generate(&layout, gen_records, gen_seed, gen_out.c_str(), &info);
        if (st != BS_OK) return fail_with(st, "gen");
        std::printf("generated %" PRIu64 " records, %" PRIu64 " bytes at %s\n",
                    info.record_count, info.total_bytes, gen_out.c_str());
        return 0;
    }

    if (sort->parsed()) {
        uint64_t input_size = 0;
        try {
            input_size = std::filesystem::file_size(sort_input);
        } catch (const std::exception&) {
            std::fprintf(stderr, "braidsort: cannot stat input '%s'\n",
                         sort_input.c_str());
            return 2;
        }

        bool real = sort_device == "real" || sort_device.empty();
        std::string backing = sort_out + ".work";
        bs_device* dev = nullptr;
        bs_status st = bs_device_open(sort_device.c_str(),
                                      real ? backing.c_str() : nullptr,
                                      real ? input_size * 4 + (64ull << 20) : 0, &dev);
        if (st != BS_OK) return fail_with(st, "device open");

        bs_sort_request req{};
        req.input_path = sort_input.c_str();
        req.output_path = sort_out.c_str();
        req.layout = sort_layout.to_c();
        req.record_count = sort_records;
        req.algorithm = sort_algo == "wiscsort"     ? BS_ALGO_WISCSORT
                        : sort_algo == "ems"        ? BS_ALGO_EMS
                        : sort_algo == "samplesort" ? BS_ALGO_SAMPLESORT
                                                    : BS_ALGO_PMSORT;
        req.mode = sort_mode == "auto"      ? BS_MODE_AUTO
                   : sort_mode == "onepass" ? BS_MODE_ONEPASS
                                            : BS_MODE_MERGEPASS;
        req.concurrency = sort_concurrency == "nosync"    ? BS_CONCURRENCY_NOSYNC
                          : sort_concurrency == "overlap" ? BS_CONCURRENCY_OVERLAP
                                                          : BS_CONCURRENCY_NO_OVERLAP;
        req.single_thread = sort_single ? 1 : 0;
        req.index_budget =
            sort_index_budget.empty() ? kDefaultIndexBudget
                                      : parse_size_flag(sort_index_budget);
        req.read_buffer =
            sort_read_buf.empty() ? kDefaultBuffer : parse_size_flag(sort_read_buf);
        req.write_buffer =
            sort_write_buf.empty() ? kDefaultBuffer : parse_size_flag(sort_write_buf);
        req.offset_width = sort_offset_width;
        req.profile_path = sort_profile.empty() ? nullptr : sort_profile.c_str();
        req.verify = sort_verify ? 1 : 0;
        req.enable_trace = (sort_trace || !sort_report.empty()) ? 1 : 0;

        bs_sort_summary summary{};
        st = bs_sort_run(dev, &req, &summary);
        bool verify_failed =
            st == BS_ERR_STATE && sort_verify &&
            (summary.verified_sorted == 0 || summary.verified_permutation == 0);
        if (st != BS_OK && !verify_failed) {
            bs_device_close(dev);
            return fail_with(st, "sort");
        }

        if (!sort_report.empty()) {
            int rc = dump_report(dev, sort_report);
            if (rc != 0) {
                bs_device_close(dev);
                return rc;
            }
        }
        bs_device_close(dev);
        if (real) {
            std::error_code ec;
            std::filesystem::remove(backing, ec);
        }

        std::printf("sorted %" PRIu64 " bytes -> %s (%s, %" PRIu64
                    " runs, read %" PRIu64 "B, wrote %" PRIu64 "B, delay %" PRIu64
                    "ns, %.3fs)\n",
                    summary.output_bytes, sort_out.c_str(),
                    summary.used_merge_pass ? "mergepass" : "onepass",
                    summary.run_count, summary.device_read_bytes,
                    summary.device_write_bytes, summary.injected_delay_ns,
                    double(summary.wall_ns) * 1e-9);
        if (sort_verify) {
            std::printf("verify: sorted=%s permutation=%s\n",
                        summary.verified_sorted == 1 ? "true" : "false",
                        summary.verified_permutation == 1 ? "true" : "false");
            if (verify_failed) return 1;
        }
        return 0;
    }

    if (val->parsed()) {
        bs_layout layout = val_layout.to_c();
        bs_validation_report report{};
        bs_status st =
            bs_validate(val_input.c_str(), val_output.c_str(), &layout, &report);
        if (st != BS_OK) return fail_with(st, "validate");
        std::printf("sorted=%s permutation=%s", report.is_sorted ? "true" : "false",
                    report.is_permutation ? "true" : "false");
        if (!report.is_sorted) {
            std::printf(" first_violation_index=%" PRId64, report.first_violation_index);
        }
        std::printf("\n");
        return (report.is_sorted && report.is_permutation) ? 0 : 1;
    }

    if (prof->parsed()) {
        bs_device* dev = nullptr;
        bs_status st = bs_device_open(prof_device.c_str(), nullptr, 0, &dev);
        if (st != BS_OK) return fail_with(st, "device open");
        bs_profile* profile = nullptr;
        st = bs_profile_measure(dev, prof_ms * 1'000'000ull, prof_threads.data(),
                                prof_threads.size(), &profile);
        if (st != BS_OK) {
            bs_device_close(dev);
            return fail_with(st, "profile");
        }
        st = bs_profile_save(profile, prof_out.c_str());
        bs_profile_close(profile);
        bs_device_close(dev);
        if (st != BS_OK) return fail_with(st, "profile save");
        std::printf("profile written to %s\n", prof_out.c_str());
        return 0;
    }

    if (bench->parsed()) {
        bs_bench_request req{};
        req.suite = bench_suite == "phase-breakdown"      ? BS_SUITE_PHASE_BREAKDOWN
                    : bench_suite == "concurrency-models" ? BS_SUITE_CONCURRENCY_MODELS
                    : bench_suite == "vk-sweep"           ? BS_SUITE_VK_SWEEP
                    : bench_suite == "strided-vs-seq"     ? BS_SUITE_STRIDED_VS_SEQ
                    : bench_suite == "devices"            ? BS_SUITE_DEVICES
                                                          : BS_SUITE_INTERFERENCE;
        req.record_count = bench_records;
        req.seed = bench_seed;
        req.device = bench_device.empty() ? nullptr : bench_device.c_str();
        req.scratch_dir = bench_scratch.c_str();
        bs_status st = bs_bench_run(&req, bench_out.c_str());
        if (st != BS_OK) return fail_with(st, "bench");
        std::printf("suite %s written to %s\n", bench_suite.c_str(), bench_out.c_str());
        return 0;
    }
    return 2;
}

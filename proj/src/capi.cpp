// extern "C" surface over the C++ core: opaque handles, status codes, and
// thread-local error detail.

#include "braidsort.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>

#include "bench.hpp"
#include "device.hpp"
#include "profiler.hpp"
#include "recfmt.hpp"
#include "sortjob.hpp"

using namespace braidsort;

struct bs_device {
    std::unique_ptr<Device> dev;
    std::string phase_csv; // report of the last sort on this handle
};

struct bs_profile {
    DeviceProfile profile;
};

namespace {

thread_local std::string t_last_error;

bs_status status_from(Errc code) {
    switch (code) {
        case Errc::config: return BS_ERR_CONFIG;
        case Errc::io: return BS_ERR_IO;
        case Errc::out_of_range: return BS_ERR_OUT_OF_RANGE;
        case Errc::device_full: return BS_ERR_DEVICE_FULL;
        case Errc::format: return BS_ERR_FORMAT;
        case Errc::state: return BS_ERR_STATE;
    }
    return BS_ERR_UNKNOWN;
}

template <typename Fn>
bs_status guarded(Fn&& fn) {
    try {
        t_last_error.clear();
        return fn();
    } catch (const Error& e) {
        t_last_error = e.what();
        return status_from(e.code());
    } catch (const std::exception& e) {
        t_last_error = e.what();
        return BS_ERR_UNKNOWN;
    } catch (...) {
        t_last_error = "unknown failure";
        return BS_ERR_UNKNOWN;
    }
}

RecordLayout layout_from(const bs_layout* layout) {
    if (layout == nullptr) {
        fail(Errc::config, "layout is null");
    }
    RecordLayout out;
    out.kind = layout->kind == BS_LAYOUT_KLV ? LayoutKind::klv : LayoutKind::fixed;
    out.key_size = layout->key_size;
    out.value_size = layout->value_size;
    out.validate();
    return out;
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out != nullptr) {
        std::memcpy(out, s.c_str(), s.size() + 1);
    }
    return out;
}

Pattern pattern_from(bs_pattern p) {
    switch (p) {
        case BS_PATTERN_SEQUENTIAL: return Pattern::sequential;
        case BS_PATTERN_STRIDED: return Pattern::strided;
        default: return Pattern::random;
    }
}

uint64_t klv_record_count(const std::string& path, const RecordLayout& layout) {
    std::vector<uint8_t> bytes = read_file_bytes(path);
    uint64_t hdr = layout.klv_header_size();
    uint64_t off = 0, n = 0;
    while (off < bytes.size()) {
        if (off + hdr > bytes.size()) {
            fail(Errc::format, "truncated klv record header");
        }
        off += hdr + load_le(bytes.data() + off + layout.key_size, 4);
        n++;
    }
    if (off != bytes.size()) {
        fail(Errc::format, "klv value length runs past end of file");
    }
    return n;
}

} // namespace

extern "C" {

const char* bs_status_message(bs_status status) {
    switch (status) {
        case BS_OK: return "ok";
        case BS_ERR_CONFIG: return "invalid configuration";
        case BS_ERR_IO: return "i/o failure";
        case BS_ERR_OUT_OF_RANGE: return "access out of range";
        case BS_ERR_DEVICE_FULL: return "device full";
        case BS_ERR_FORMAT: return "malformed input";
        case BS_ERR_STATE: return "invalid state";
        default: return "unknown failure";
    }
}

const char* bs_last_error(void) {
    return t_last_error.c_str();
}

void bs_free(char* buffer) {
    std::free(buffer);
}

bs_status bs_dataset_generate(const bs_layout* layout, uint64_t record_count,
                              uint64_t seed, const char* out_path,
                              bs_dataset_info* info) {
    return guarded([&]() -> bs_status {
        if (out_path == nullptr) {
            fail(Errc::config, "output path is null");
        }
        RecordLayout rl = layout_from(layout);
        VlenBounds vlen{layout->vlen_min, layout->vlen_max};
        DatasetMeta meta = gen_dataset(rl, record_count, seed, vlen, out_path);
        if (info != nullptr) {
            info->record_count = meta.record_count;
            info->total_bytes = meta.total_bytes;
        }
        return BS_OK;
    });
}

bs_status bs_validate(const char* input_path, const char* output_path,
                      const bs_layout* layout, bs_validation_report* report) {
    return guarded([&]() -> bs_status {
        if (input_path == nullptr || output_path == nullptr) {
            fail(Errc::config, "validation paths are null");
        }
        ValidationReport r = validate(input_path, output_path, layout_from(layout));
        if (report != nullptr) {
            report->is_sorted = r.is_sorted ? 1 : 0;
            report->is_permutation = r.is_permutation ? 1 : 0;
            report->first_violation_index =
                r.first_violation_index ? static_cast<int64_t>(*r.first_violation_index)
                                        : -1;
            report->input_digest_lo = r.input_digest.lo;
            report->input_digest_hi = r.input_digest.hi;
            report->output_digest_lo = r.output_digest.lo;
            report->output_digest_hi = r.output_digest.hi;
        }
        return BS_OK;
    });
}

bs_status bs_device_open(const char* spec, const char* backing_path,
                         uint64_t capacity_override, bs_device** out) {
    return guarded([&]() -> bs_status {
        if (out == nullptr) {
            fail(Errc::config, "output handle is null");
        }
        DeviceSpec ds = DeviceSpec::resolve(spec == nullptr ? "" : spec);
        if (capacity_override != 0) {
            ds.capacity_bytes = capacity_override;
        }
        auto handle = std::make_unique<bs_device>();
        handle->dev = std::make_unique<Device>(
            ds, backing_path == nullptr ? "" : backing_path);
        *out = handle.release();
        return BS_OK;
    });
}

void bs_device_close(bs_device* device) {
    delete device;
}

bs_status bs_device_read(bs_device* device, uint64_t offset, uint8_t* dst, uint64_t len,
                         bs_pattern pattern, const char* phase) {
    return guarded([&]() -> bs_status {
        if (device == nullptr || (dst == nullptr && len > 0)) {
            fail(Errc::config, "bad device read arguments");
        }
        PhaseId id = device->dev->phase(phase == nullptr ? "default" : phase);
        device->dev->read(offset, std::span<uint8_t>(dst, len), pattern_from(pattern), id);
        return BS_OK;
    });
}

bs_status bs_device_write(bs_device* device, uint64_t offset, const uint8_t* src,
                          uint64_t len, bs_pattern pattern, const char* phase) {
    return guarded([&]() -> bs_status {
        if (device == nullptr || (src == nullptr && len > 0)) {
            fail(Errc::config, "bad device write arguments");
        }
        PhaseId id = device->dev->phase(phase == nullptr ? "default" : phase);
        device->dev->write(offset, std::span<const uint8_t>(src, len),
                           pattern_from(pattern), id);
        return BS_OK;
    });
}

bs_status bs_device_ledger_csv(bs_device* device, char** csv_out) {
    return guarded([&]() -> bs_status {
        if (device == nullptr || csv_out == nullptr) {
            fail(Errc::config, "bad ledger arguments");
        }
        *csv_out = dup_string(device->dev->ledger_snapshot().to_csv());
        return *csv_out != nullptr ? BS_OK : BS_ERR_IO;
    });
}

bs_status bs_device_trace_csv(bs_device* device, char** csv_out) {
    return guarded([&]() -> bs_status {
        if (device == nullptr || csv_out == nullptr) {
            fail(Errc::config, "bad trace arguments");
        }
        *csv_out = dup_string(device->dev->trace_snapshot().to_csv());
        return *csv_out != nullptr ? BS_OK : BS_ERR_IO;
    });
}

bs_status bs_device_set_trace_enabled(bs_device* device, int enabled) {
    return guarded([&]() -> bs_status {
        if (device == nullptr) {
            fail(Errc::config, "device is null");
        }
        device->dev->set_trace_enabled(enabled != 0);
        return BS_OK;
    });
}

bs_status bs_profile_measure(bs_device* device, uint64_t duration_ns_per_cell,
                             const uint32_t* thread_counts, size_t thread_count_len,
                             bs_profile** out) {
    return guarded([&]() -> bs_status {
        if (device == nullptr || out == nullptr) {
            fail(Errc::config, "bad profile arguments");
        }
        ProfileOptions options;
        if (duration_ns_per_cell != 0) {
            options.duration_ns_per_cell = duration_ns_per_cell;
        }
        if (thread_counts != nullptr && thread_count_len > 0) {
            options.threads.assign(thread_counts, thread_counts + thread_count_len);
        }
        auto handle = std::make_unique<bs_profile>();
        handle->profile = profile_device(*device->dev, options);
        *out = handle.release();
        return BS_OK;
    });
}

bs_status bs_profile_save(const bs_profile* profile, const char* path) {
    return guarded([&]() -> bs_status {
        if (profile == nullptr || path == nullptr) {
            fail(Errc::config, "bad profile save arguments");
        }
        save_profile(profile->profile, path);
        return BS_OK;
    });
}

bs_status bs_profile_load(const char* path, bs_profile** out) {
    return guarded([&]() -> bs_status {
        if (path == nullptr || out == nullptr) {
            fail(Errc::config, "bad profile load arguments");
        }
        auto handle = std::make_unique<bs_profile>();
        handle->profile = load_profile(path);
        *out = handle.release();
        return BS_OK;
    });
}

void bs_profile_close(bs_profile* profile) {
    delete profile;
}

bs_status bs_profile_pool_size(const bs_profile* profile, int is_write,
                               bs_pattern pattern, uint64_t access_size,
                               uint32_t* out_threads) {
    return guarded([&]() -> bs_status {
        if (profile == nullptr || out_threads == nullptr) {
            fail(Errc::config, "bad pool size arguments");
        }
        AccessKind kind{is_write ? Direction::write : Direction::read,
                        pattern_from(pattern)};
        *out_threads = pool_size(profile->profile, kind, access_size);
        return BS_OK;
    });
}

bs_status bs_sort_run(bs_device* device, const bs_sort_request* request,
                      bs_sort_summary* summary) {
    return guarded([&]() -> bs_status {
        if (device == nullptr || request == nullptr || request->input_path == nullptr ||
            request->output_path == nullptr) {
            fail(Errc::config, "bad sort arguments");
        }
        RecordLayout layout = layout_from(&request->layout);

        DatasetMeta meta;
        meta.layout = layout;
        meta.seed = 0;
        meta.path = request->input_path;
        meta.total_bytes = std::filesystem::file_size(request->input_path);
        if (request->record_count != 0) {
            meta.record_count = request->record_count;
        } else if (layout.kind == LayoutKind::fixed) {
            uint64_t rec = layout.fixed_record_size();
            if (rec == 0 || meta.total_bytes % rec != 0) {
                fail(Errc::format, "input size is not a multiple of the record size");
            }
            meta.record_count = meta.total_bytes / rec;
        } else {
            meta.record_count = klv_record_count(request->input_path, layout);
        }

        SortRequest req;
        req.algo = static_cast<Algorithm>(request->algorithm);
        req.mode = static_cast<PlanChoice>(request->mode);
        req.concurrency = static_cast<ConcurrencyMode>(request->concurrency);
        req.single_thread = request->single_thread != 0;
        if (request->index_budget != 0) req.index_budget = request->index_budget;
        if (request->read_buffer != 0) req.buffers.read_buffer_bytes = request->read_buffer;
        if (request->write_buffer != 0) {
            req.buffers.write_buffer_bytes = request->write_buffer;
        }
        req.offset_width = request->offset_width;
        if (request->profile_path != nullptr && *request->profile_path != '\0') {
            DeviceProfile profile = load_profile(request->profile_path);
            uint64_t hint = layout.kind == LayoutKind::fixed ? layout.value_size : 256;
            req.pools = PoolPlan::from_profile(profile, hint);
        }

        device->dev->set_trace_enabled(request->enable_trace != 0);
        uint64_t input = device->dev->import_file(request->input_path);
        SortStats stats = run_sort(*device->dev, meta, input, req);
        device->dev->export_region(stats.output_offset, stats.output_bytes,
                                   request->output_path);

        TrafficLedger ledger = device->dev->ledger_snapshot();
        device->phase_csv = PhaseReport::build(stats.phase_wall_ns, ledger).to_csv();

        bool sorted = true, permutation = true;
        if (request->verify != 0) {
            ValidationReport vr =
                validate(request->input_path, request->output_path, layout);
            sorted = vr.is_sorted;
            permutation = vr.is_permutation;
        }
        if (summary != nullptr) {
            summary->used_merge_pass = stats.plan.mode == SortMode::merge_pass ? 1 : 0;
            summary->run_count = stats.plan.run_count;
            summary->wall_ns = stats.wall_ns;
            summary->output_bytes = stats.output_bytes;
            summary->device_read_bytes = ledger.total_bytes(Direction::read);
            summary->device_write_bytes = ledger.total_bytes(Direction::write);
            summary->injected_delay_ns = ledger.total_injected_ns();
            summary->verified_sorted = request->verify ? (sorted ? 1 : 0) : -1;
            summary->verified_permutation = request->verify ? (permutation ? 1 : 0) : -1;
        }
        if (request->verify != 0 && !(sorted && permutation)) {
            t_last_error = "output failed validation";
            return BS_ERR_STATE;
        }
        return BS_OK;
    });
}

bs_status bs_sort_phase_csv(bs_device* device, char** csv_out) {
    return guarded([&]() -> bs_status {
        if (device == nullptr || csv_out == nullptr) {
            fail(Errc::config, "bad phase report arguments");
        }
        *csv_out = dup_string(device->phase_csv);
        return *csv_out != nullptr ? BS_OK : BS_ERR_IO;
    });
}

bs_status bs_bench_run(const bs_bench_request* request, const char* csv_path) {
    return guarded([&]() -> bs_status {
        if (request == nullptr || csv_path == nullptr) {
            fail(Errc::config, "bad bench arguments");
        }
        BenchRequest req;
        req.suite = static_cast<BenchSuite>(request->suite);
        req.record_count = request->record_count;
        req.seed = request->seed;
        if (request->device != nullptr) {
            req.device = request->device;
        }
        if (request->scratch_dir != nullptr && *request->scratch_dir != '\0') {
            req.scratch_dir = request->scratch_dir;
        }
        std::string csv = run_bench(req);
        std::ofstream out(csv_path);
        if (!out) {
            fail(Errc::io, "cannot write '" + std::string(csv_path) + "'");
        }
        out << csv;
        return BS_OK;
    });
}

} // extern "C"

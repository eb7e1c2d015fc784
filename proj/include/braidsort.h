/*
 * braidsort — concurrent external sorting for byte-addressable storage.
 *
 * C API over the C++ core: opaque handles, integer status codes, and
 * bs_last_error() for the detailed message of the most recent failure on
 * the calling thread.
 */

#ifndef BRAIDSORT_H
#define BRAIDSORT_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* ------------------------------------------------------------------ */
/* Status codes                                                        */

typedef enum bs_status {
    BS_OK = 0,
    BS_ERR_CONFIG = 1,       /* invalid spec/flag/parameter */
    BS_ERR_IO = 2,           /* host filesystem failure */
    BS_ERR_OUT_OF_RANGE = 3, /* device access beyond capacity */
    BS_ERR_DEVICE_FULL = 4,  /* region allocation exceeds capacity */
    BS_ERR_FORMAT = 5,       /* malformed file or record */
    BS_ERR_STATE = 6,        /* operation invalid in current state */
    BS_ERR_UNKNOWN = 99
} bs_status;

/* Static description of a status code. */
const char* bs_status_message(bs_status status);
/* Detail of the last failure on this thread (empty string if none). */
const char* bs_last_error(void);

/* ------------------------------------------------------------------ */
/* Record layouts and datasets                                         */

typedef enum bs_layout_kind { BS_LAYOUT_FIXED = 0, BS_LAYOUT_KLV = 1 } bs_layout_kind;

typedef struct bs_layout {
    int32_t kind;       /* bs_layout_kind */
    uint32_t key_size;
    uint32_t value_size; /* fixed layout */
    uint32_t vlen_min;   /* klv generation bounds, inclusive */
    uint32_t vlen_max;
} bs_layout;

typedef struct bs_dataset_info {
    uint64_t record_count;
    uint64_t total_bytes;
} bs_dataset_info;

/* Deterministic dataset generation; identical arguments give identical
 * bytes. info may be NULL. */
bs_status bs_dataset_generate(const bs_layout* layout, uint64_t record_count,
                              uint64_t seed, const char* out_path,
                              bs_dataset_info* info);

typedef struct bs_validation_report {
    int32_t is_sorted;
    int32_t is_permutation;
    int64_t first_violation_index; /* -1 when sorted */
    uint64_t input_digest_lo, input_digest_hi;
    uint64_t output_digest_lo, output_digest_hi;
} bs_validation_report;

/* Check that output is a sorted permutation of input. */
bs_status bs_validate(const char* input_path, const char* output_path,
                      const bs_layout* layout, bs_validation_report* report);

/* ------------------------------------------------------------------ */
/* Devices                                                             */

typedef struct bs_device bs_device;

/*
 * Open a device. `spec` is a preset name ("bd", "brd", "bard", "asym"),
 * the path of a key=value spec file, or "real" / NULL for an unmetered
 * file-backed device. `backing_path` is the backing file for real devices
 * (ignored when emulated). capacity_override of 0 keeps the spec's value.
 */
bs_status bs_device_open(const char* spec, const char* backing_path,
                         uint64_t capacity_override, bs_device** out);
void bs_device_close(bs_device* device);

/* Accounted access, for exercising the device model directly. */
typedef enum bs_pattern {
    BS_PATTERN_SEQUENTIAL = 0,
    BS_PATTERN_STRIDED = 1,
    BS_PATTERN_RANDOM = 2
} bs_pattern;

bs_status bs_device_read(bs_device* device, uint64_t offset, uint8_t* dst, uint64_t len,
                         bs_pattern pattern, const char* phase);
bs_status bs_device_write(bs_device* device, uint64_t offset, const uint8_t* src,
                          uint64_t len, bs_pattern pattern, const char* phase);

/* Point-in-time CSV snapshots; free the returned buffer with bs_free. */
bs_status bs_device_ledger_csv(bs_device* device, char** csv_out);
bs_status bs_device_trace_csv(bs_device* device, char** csv_out);
bs_status bs_device_set_trace_enabled(bs_device* device, int enabled);

void bs_free(char* buffer);

/* ------------------------------------------------------------------ */
/* Profiles                                                            */

typedef struct bs_profile bs_profile;

/* Microbenchmark the device (exclusive use while running). */
bs_status bs_profile_measure(bs_device* device, uint64_t duration_ns_per_cell,
                             const uint32_t* thread_counts, size_t thread_count_len,
                             bs_profile** out);
bs_status bs_profile_save(const bs_profile* profile, const char* path);
bs_status bs_profile_load(const char* path, bs_profile** out);
void bs_profile_close(bs_profile* profile);

/* Argmax-throughput thread count for an access type (ties to fewer). */
bs_status bs_profile_pool_size(const bs_profile* profile, int is_write,
                               bs_pattern pattern, uint64_t access_size,
                               uint32_t* out_threads);

/* ------------------------------------------------------------------ */
/* Sorting                                                             */

typedef enum bs_algorithm {
    BS_ALGO_WISCSORT = 0,
    BS_ALGO_EMS = 1,
    BS_ALGO_SAMPLESORT = 2,
    BS_ALGO_PMSORT = 3
} bs_algorithm;

typedef enum bs_mode { BS_MODE_AUTO = 0, BS_MODE_ONEPASS = 1, BS_MODE_MERGEPASS = 2 } bs_mode;

typedef enum bs_concurrency {
    BS_CONCURRENCY_NOSYNC = 0,
    BS_CONCURRENCY_OVERLAP = 1,
    BS_CONCURRENCY_NO_OVERLAP = 2
} bs_concurrency;

typedef struct bs_sort_request {
    const char* input_path;   /* dataset file */
    const char* output_path;  /* sorted output file */
    bs_layout layout;
    uint64_t record_count;    /* 0 = derive (fixed: from size; klv: pre-scan) */
    int32_t algorithm;        /* bs_algorithm */
    int32_t mode;             /* bs_mode */
    int32_t concurrency;      /* bs_concurrency */
    int32_t single_thread;
    uint64_t index_budget;    /* 0 = default 256 MiB */
    uint64_t read_buffer;     /* 0 = default 64 MiB */
    uint64_t write_buffer;    /* 0 = default 64 MiB */
    uint32_t offset_width;    /* 0 = layout default */
    const char* profile_path; /* optional; sizes the pools */
    int32_t verify;           /* validate output before returning */
    int32_t enable_trace;     /* record access windows */
} bs_sort_request;

typedef struct bs_sort_summary {
    int32_t used_merge_pass;
    uint64_t run_count;
    uint64_t wall_ns;
    uint64_t output_bytes;
    uint64_t device_read_bytes;
    uint64_t device_write_bytes;
    uint64_t injected_delay_ns;
    int32_t verified_sorted;       /* -1 when verify was off */
    int32_t verified_permutation;  /* -1 when verify was off */
} bs_sort_summary;

/*
 * Run one sort job against an open device: the input file is imported into
 * the device, sorted, and the output region exported to output_path.
 * summary may be NULL. With verify set, a failed validation returns
 * BS_ERR_STATE after still writing the output and filling the summary.
 */
bs_status bs_sort_run(bs_device* device, const bs_sort_request* request,
                      bs_sort_summary* summary);

/* Per-phase CSV (wall time, injected delay, bytes by kind) of the last
 * bs_sort_run on this device; free with bs_free. */
bs_status bs_sort_phase_csv(bs_device* device, char** csv_out);

/* ------------------------------------------------------------------ */
/* Benchmark suites                                                    */

typedef enum bs_suite {
    BS_SUITE_PHASE_BREAKDOWN = 0,
    BS_SUITE_CONCURRENCY_MODELS = 1,
    BS_SUITE_VK_SWEEP = 2,
    BS_SUITE_STRIDED_VS_SEQ = 3,
    BS_SUITE_DEVICES = 4,
    BS_SUITE_INTERFERENCE = 5
} bs_suite;

typedef struct bs_bench_request {
    int32_t suite;            /* bs_suite */
    uint64_t record_count;    /* 0 = suite default */
    uint64_t seed;
    const char* device;       /* spec/preset; NULL = suite default */
    const char* scratch_dir;  /* working directory for datasets */
} bs_bench_request;

/* Run a suite and write its CSV to csv_path. */
bs_status bs_bench_run(const bs_bench_request* request, const char* csv_path);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* BRAIDSORT_H */

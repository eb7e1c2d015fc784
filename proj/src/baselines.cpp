#include "baselines.hpp"

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <memory>
#include <optional>

namespace braidsort {

namespace {

uint64_t now_wall_ns() {
    return static_cast<uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(
                                     std::chrono::steady_clock::now().time_since_epoch())
                                     .count());
}

class Section {
public:
    Section() : start_(now_wall_ns()) {}
    uint64_t elapsed() const { return now_wall_ns() - start_; }

private:
    uint64_t start_;
};

struct EmsPhases {
    PhaseId run_read, run_write, merge_read, merge_write;
};

/** One raw-record chunk held in DRAM: bytes plus per-record offsets. */
struct RecordChunk {
    std::vector<uint8_t> bytes;
    std::vector<uint64_t> rec_offsets; // local byte offset of each record
    uint64_t first_record = 0;         // global index of the first record
};

/** A full-record run region on the device (no header). */
struct EmsRunMeta {
    uint64_t base = 0;
    uint64_t length = 0;
};

// ---------------------------------------------------------------------------
// EMS run phase

RecordChunk read_chunk_fixed(Device& device, uint64_t input_base,
                             const RecordLayout& layout, uint64_t rec_begin,
                             uint64_t rec_end, ThreadPool* read_pool, PhaseGate& gate,
                             PhaseId phase) {
    uint64_t rec = layout.fixed_record_size();
    RecordChunk chunk;
    chunk.first_record = rec_begin;
    chunk.bytes.resize((rec_end - rec_begin) * rec);
    chunk.rec_offsets.resize(rec_end - rec_begin);
    for (uint64_t i = 0; i < chunk.rec_offsets.size(); i++) {
        chunk.rec_offsets[i] = i * rec;
    }
    PhaseToken token = gate.enter_read_phase();
    parallel_for(read_pool, chunk.bytes.size(), [&](unsigned, uint64_t b, uint64_t e) {
        device.read(input_base + rec_begin * rec + b,
                    std::span<uint8_t>(chunk.bytes.data() + b, e - b), Pattern::sequential,
                    phase);
    });
    return chunk;
}

/** Serial sequential walk of klv records until the buffer budget is spent. */
RecordChunk read_chunk_klv(Device& device, uint64_t input_base, uint64_t input_len,
                           const RecordLayout& layout, uint64_t& cursor,
                           uint64_t budget_bytes, uint64_t first_record, PhaseGate& gate,
                           PhaseId phase) {
    uint64_t hdr = layout.klv_header_size();
    RecordChunk chunk;
    chunk.first_record = first_record;
    PhaseToken token = gate.enter_read_phase();
    while (cursor < input_len) {
        if (cursor + hdr > input_len) {
            fail(Errc::format, "truncated klv record header");
        }
        std::vector<uint8_t> head(hdr);
        device.read(input_base + cursor, head, Pattern::sequential, phase);
        uint64_t vlen = load_le(head.data() + layout.key_size, 4);
        if (cursor + hdr + vlen > input_len) {
            fail(Errc::format, "klv value length runs past end of file");
        }
        uint64_t rec_len = hdr + vlen;
        if (!chunk.rec_offsets.empty() && chunk.bytes.size() + rec_len > budget_bytes) {
            break; // chunk full
        }
        size_t at = chunk.bytes.size();
        chunk.bytes.resize(at + rec_len);
        std::memcpy(chunk.bytes.data() + at, head.data(), hdr);
        if (vlen > 0) {
            device.read(input_base + cursor + hdr,
                        std::span<uint8_t>(chunk.bytes.data() + at + hdr, vlen),
                        Pattern::sequential, phase);
        }
        chunk.rec_offsets.push_back(at);
        cursor += rec_len;
    }
    return chunk;
}

/** Sort chunk records by key (ties by position); returns the run image. */
std::vector<uint8_t> sort_chunk(const RecordChunk& chunk, const RecordLayout& layout,
                                ThreadPool* sort_pool) {
    uint64_t n = chunk.rec_offsets.size();
    uint32_t k = layout.key_size;
    const uint8_t* bytes = chunk.bytes.data();
    const uint64_t* offs = chunk.rec_offsets.data();
    auto less = [bytes, offs, k](uint64_t a, uint64_t b) {
        int c = std::memcmp(bytes + offs[a], bytes + offs[b], k);
        if (c != 0) return c < 0;
        return a < b;
    };

    std::vector<uint64_t> order;
    if (sort_pool != nullptr) {
        order = parallel_sort_indices(n, *sort_pool, less);
    } else {
        order.resize(n);
        for (uint64_t i = 0; i < n; i++) order[i] = i;
        std::sort(order.begin(), order.end(), less);
    }

    std::vector<uint8_t> image(chunk.bytes.size());
    uint64_t hdr = layout.klv_header_size();
    auto rec_len = [&](uint64_t r) {
        return layout.kind == LayoutKind::fixed
                   ? layout.fixed_record_size()
                   : hdr + load_le(bytes + offs[r] + k, 4);
    };
    // Copy records to their sorted positions.
    std::vector<uint64_t> out_off(n);
    uint64_t acc = 0;
    for (uint64_t i = 0; i < n; i++) {
        out_off[i] = acc;
        acc += rec_len(order[i]);
    }
    parallel_for(sort_pool, n, [&](unsigned, uint64_t b, uint64_t e) {
        for (uint64_t i = b; i < e; i++) {
            std::memcpy(image.data() + out_off[i], bytes + offs[order[i]],
                        rec_len(order[i]));
        }
    });
    return image;
}

EmsRunMeta write_run_image(Device& device, const std::vector<uint8_t>& image,
                           ThreadPool* write_pool, PhaseGate& gate, PhaseId phase) {
    EmsRunMeta meta;
    meta.length = image.size();
    meta.base = device.alloc_region(image.size());
    PhaseToken token = gate.enter_write_phase();
    parallel_for(write_pool, image.size(), [&](unsigned, uint64_t b, uint64_t e) {
        device.write(meta.base + b, std::span<const uint8_t>(image.data() + b, e - b),
                     Pattern::sequential, phase);
    });
    return meta;
}

// ---------------------------------------------------------------------------
// EMS merge

/** Per-run record cursors over refillable read-buffer regions. */
class EmsMergeState {
public:
    static EmsMergeState init(Device& device, const std::vector<EmsRunMeta>& runs,
                              const RecordLayout& layout, uint64_t read_buffer_bytes,
                              PhaseGate& gate, PhaseId phase) {
        if (runs.empty()) {
            fail(Errc::config, "merge needs at least one run");
        }
        EmsMergeState ms;
        ms.layout_ = layout;
        ms.read_buffer_bytes_ = read_buffer_bytes;
        ms.allot_bytes_ = read_buffer_bytes / runs.size();
        if (layout.kind == LayoutKind::fixed) {
            uint64_t rec = layout.fixed_record_size();
            ms.allot_bytes_ = (ms.allot_bytes_ / rec) * rec;
            if (ms.allot_bytes_ == 0) {
                fail(Errc::config, "read buffer too small for one record per run");
            }
        } else if (ms.allot_bytes_ < layout.klv_header_size()) {
            fail(Errc::config, "read buffer too small for one record per run");
        }
        ms.runs_.resize(runs.size());
        PhaseToken token = gate.enter_read_phase();
        for (uint32_t r = 0; r < runs.size(); r++) {
            ms.runs_[r].meta = runs[r];
            ms.live_++;
            ms.refill(device, r, phase);
            if (ms.runs_[r].region_bytes > 0) {
                ms.heap_push(r);
            } else {
                ms.live_--;
            }
        }
        return ms;
    }

    bool exhausted() const { return heap_.empty(); }

    /** Copy the least-key head record into dst; returns its length. */
    uint64_t pop_min(Device& device, PhaseGate& gate, PhaseId phase,
                     std::vector<uint8_t>& dst) {
        uint32_t r = heap_pop();
        Run& run = runs_[r];
        uint64_t len = head_len(r);
        dst.resize(len);
        std::memcpy(dst.data(), run.region.data() + run.cursor, len);
        run.cursor += len;
        if (run.cursor >= run.region_bytes) {
            PhaseToken token = gate.enter_read_phase();
            refill(device, r, phase);
            if (run.region_bytes > 0) {
                heap_push(r);
            } else {
                live_--;
                if (live_ > 0) {
                    uint64_t next = read_buffer_bytes_ / live_;
                    if (layout_.kind == LayoutKind::fixed) {
                        uint64_t rec = layout_.fixed_record_size();
                        next = (next / rec) * rec;
                    }
                    allot_bytes_ = std::max(allot_bytes_, next);
                }
            }
        } else {
            heap_push(r);
        }
        return len;
    }

private:
    struct Run {
        EmsRunMeta meta;
        uint64_t next_byte = 0;
        std::vector<uint8_t> region;
        uint64_t region_bytes = 0;
        uint64_t cursor = 0;
    };

    uint64_t head_len(uint32_t r) const {
        const Run& run = runs_[r];
        if (layout_.kind == LayoutKind::fixed) {
            return layout_.fixed_record_size();
        }
        return layout_.klv_header_size() +
               load_le(run.region.data() + run.cursor + layout_.key_size, 4);
    }

    void refill(Device& device, uint32_t r, PhaseId phase) {
        Run& run = runs_[r];
        run.cursor = 0;
        run.region_bytes = 0;
        uint64_t remaining = run.meta.length - run.next_byte;
        if (remaining == 0) {
            run.region.clear();
            return;
        }
        uint64_t take = std::min(remaining, allot_bytes_);
        run.region.resize(take);
        device.read(run.meta.base + run.next_byte, run.region, Pattern::sequential, phase);
        uint64_t usable = take;
        if (layout_.kind == LayoutKind::klv) {
            // Only complete records; the partial tail is re-read next time.
            usable = 0;
            while (usable + layout_.klv_header_size() <= take) {
                uint64_t len = layout_.klv_header_size() +
                               load_le(run.region.data() + usable + layout_.key_size, 4);
                if (usable + len > take) {
                    break;
                }
                usable += len;
            }
            if (usable == 0) {
                fail(Errc::config, "merge allotment smaller than one klv record");
            }
        }
        run.region_bytes = usable;
        run.next_byte += usable;
    }

    bool heap_less(uint32_t a, uint32_t b) const {
        const Run& ra = runs_[a];
        const Run& rb = runs_[b];
        int c = std::memcmp(ra.region.data() + ra.cursor, rb.region.data() + rb.cursor,
                            layout_.key_size);
        if (c != 0) return c < 0;
        return a < b; // runs partition the file in order, so this keeps stability
    }

    void heap_push(uint32_t r) {
        heap_.push_back(r);
        std::push_heap(heap_.begin(), heap_.end(),
                       [this](uint32_t a, uint32_t b) { return heap_less(b, a); });
    }

    uint32_t heap_pop() {
        std::pop_heap(heap_.begin(), heap_.end(),
                      [this](uint32_t a, uint32_t b) { return heap_less(b, a); });
        uint32_t r = heap_.back();
        heap_.pop_back();
        return r;
    }

    RecordLayout layout_;
    uint64_t read_buffer_bytes_ = 0;
    uint64_t allot_bytes_ = 0;
    uint32_t live_ = 0;
    std::vector<Run> runs_;
    std::vector<uint32_t> heap_;
};

} // namespace

// ---------------------------------------------------------------------------
// External merge sort

SortStats ems_sort(Device& device, const DatasetMeta& meta, uint64_t input_offset,
                   const BaselineConfig& config) {
    Section total;
    SortStats stats;
    const RecordLayout& layout = meta.layout;
    layout.validate();

    PoolPlan pool_plan = config.single_thread
                             ? PoolPlan{1, 1, 1, 1}
                             : config.pools;
    auto read_pool = std::make_unique<ThreadPool>(pool_plan.read_pool);
    auto write_pool = std::make_unique<ThreadPool>(pool_plan.write_pool);
    auto sort_pool = std::make_unique<ThreadPool>(pool_plan.sort_pool);
    PhaseGate gate(config.concurrency);
    PhaseWall& wall = stats.phase_wall_ns;

    EmsPhases phases{device.phase("RUN read"), device.phase("RUN write"),
                     device.phase("MERGE read"), device.phase("MERGE write")};

    uint64_t out_base = device.alloc_region(meta.total_bytes);
    stats.output_offset = out_base;

    // --- run generation -----------------------------------------------------
    std::vector<EmsRunMeta> runs;
    if (layout.kind == LayoutKind::fixed) {
        uint64_t rec = layout.fixed_record_size();
        uint64_t chunk_records = rec > 0 ? config.buffers.read_buffer_bytes / rec : 1;
        if (chunk_records == 0) {
            fail(Errc::config, "read buffer smaller than one record");
        }
        uint64_t n = meta.record_count;
        uint64_t run_count = n == 0 ? 0 : (n + chunk_records - 1) / chunk_records;
        runs.resize(run_count);

        if (config.concurrency == ConcurrencyMode::no_sync && !config.single_thread) {
            std::mutex wall_mu;
            parallel_for(*sort_pool, run_count, [&](unsigned, uint64_t rb, uint64_t re) {
                PhaseWall local;
                for (uint64_t r = rb; r < re; r++) {
                    uint64_t begin = r * chunk_records;
                    uint64_t end = std::min(n, begin + chunk_records);
                    Section sr;
                    RecordChunk chunk = read_chunk_fixed(device, input_offset, layout,
                                                         begin, end, nullptr, gate,
                                                         phases.run_read);
                    local["RUN read"] += sr.elapsed();
                    Section ss;
                    std::vector<uint8_t> image = sort_chunk(chunk, layout, nullptr);
                    local["RUN sort"] += ss.elapsed();
                    Section sw;
                    runs[r] = write_run_image(device, image, nullptr, gate,
                                              phases.run_write);
                    local["RUN write"] += sw.elapsed();
                }
                std::lock_guard<std::mutex> lock(wall_mu);
                for (const auto& [k, v] : local) wall[k] += v;
            });
        } else {
            bool pipelined = config.concurrency == ConcurrencyMode::overlap;
            std::future<void> prev_write;
            for (uint64_t r = 0; r < run_count; r++) {
                uint64_t begin = r * chunk_records;
                uint64_t end = std::min(n, begin + chunk_records);
                Section sr;
                RecordChunk chunk =
                    read_chunk_fixed(device, input_offset, layout, begin, end,
                                     read_pool.get(), gate, phases.run_read);
                wall["RUN read"] += sr.elapsed();
                Section ss;
                auto image = std::make_shared<std::vector<uint8_t>>(
                    sort_chunk(chunk, layout, sort_pool.get()));
                // The record copy into the run image is the sort-adjacent
                // bookkeeping this algorithm pays on top of the key sort.
                wall["RUN other"] += ss.elapsed() / 2;
                wall["RUN sort"] += ss.elapsed() - ss.elapsed() / 2;
                if (pipelined) {
                    if (prev_write.valid()) prev_write.get();
                    prev_write = std::async(std::launch::async, [&device, &write_pool,
                                                                 &gate, &phases, image, r,
                                                                 &runs] {
                        runs[r] = write_run_image(device, *image, write_pool.get(), gate,
                                                  phases.run_write);
                    });
                } else {
                    Section sw;
                    runs[r] = write_run_image(device, *image, write_pool.get(), gate,
                                              phases.run_write);
                    wall["RUN write"] += sw.elapsed();
                }
            }
            if (prev_write.valid()) prev_write.get();
        }
    } else {
        uint64_t cursor = 0;
        uint64_t next_record = 0;
        while (cursor < meta.total_bytes) {
            Section sr;
            RecordChunk chunk = read_chunk_klv(device, input_offset, meta.total_bytes,
                                               layout, cursor,
                                               config.buffers.read_buffer_bytes,
                                               next_record, gate, phases.run_read);
            wall["RUN read"] += sr.elapsed();
            if (chunk.rec_offsets.empty()) {
                break;
            }
            next_record += chunk.rec_offsets.size();
            Section ss;
            std::vector<uint8_t> image = sort_chunk(chunk, layout, sort_pool.get());
            wall["RUN sort"] += ss.elapsed();
            Section sw;
            runs.push_back(
                write_run_image(device, image, write_pool.get(), gate, phases.run_write));
            wall["RUN write"] += sw.elapsed();
        }
    }

    // --- merge ---------------------------------------------------------------
    if (runs.empty()) {
        stats.output_bytes = 0;
        stats.wall_ns = total.elapsed();
        return stats;
    }

    Section mi;
    EmsMergeState state = EmsMergeState::init(device, runs, layout,
                                              config.buffers.read_buffer_bytes, gate,
                                              phases.merge_read);
    wall["MERGE read"] += mi.elapsed();

    PhasedRegionWriter writer(device, gate, write_pool.get(), out_base,
                              config.buffers.write_buffer_bytes, phases.merge_write);
    std::vector<uint8_t> rec;
    uint64_t copied = 0;
    Section loop;
    while (!state.exhausted()) {
        // A single thread finds the minimum and copies the record; input
        // buffer contents may shift under refills, so this stays serial.
        uint64_t len = state.pop_min(device, gate, phases.merge_read, rec);
        StagingBuffer& buf = writer.current();
        if (buf.fill() + len > buf.capacity()) {
            writer.flush();
        }
        if (len > writer.current().capacity()) {
            fail(Errc::config, "record larger than the write buffer");
        }
        std::memcpy(writer.current().data() + writer.current().fill(), rec.data(), len);
        writer.current().set_fill(writer.current().fill() + len);
        copied += len;
    }
    writer.finish();
    wall["MERGE other"] += loop.elapsed();
    stats.output_bytes = copied;

    if (stats.output_bytes != meta.total_bytes) {
        fail(Errc::state, "merge produced a short output");
    }
    stats.wall_ns = total.elapsed();
    return stats;
}

// ---------------------------------------------------------------------------
// In-place sample sort

namespace {

/** Work queue of index ranges processed by the sort pool. */
class RangeQueue {
public:
    void push(uint64_t lo, uint64_t hi) {
        {
            std::lock_guard<std::mutex> lock(mu_);
            q_.emplace_back(lo, hi);
            outstanding_++;
        }
        cv_.notify_one();
    }

    bool pop(std::pair<uint64_t, uint64_t>& out) {
        std::unique_lock<std::mutex> lock(mu_);
        cv_.wait(lock, [&] { return !q_.empty() || outstanding_ == 0; });
        if (q_.empty()) {
            return false;
        }
        out = q_.front();
        q_.pop_front();
        return true;
    }

    void done_one() {
        std::lock_guard<std::mutex> lock(mu_);
        if (--outstanding_ == 0) {
            cv_.notify_all();
        }
    }

private:
    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<std::pair<uint64_t, uint64_t>> q_;
    uint64_t outstanding_ = 0;
};

class InPlaceSorter {
public:
    InPlaceSorter(Device& device, uint64_t base, uint64_t rec_size, uint32_t key_size,
                  PhaseGate& gate, PhaseId phase)
        : device_(device), base_(base), rec_(rec_size), key_(key_size), gate_(gate),
          phase_(phase) {}

    void sort(uint64_t count, unsigned workers) {
        if (count < 2) {
            return;
        }
        queue_.push(0, count);
        std::vector<std::thread> threads;
        std::exception_ptr first_error;
        std::mutex err_mu;
        for (unsigned w = 0; w < std::max(1u, workers); w++) {
            threads.emplace_back([&] {
                std::pair<uint64_t, uint64_t> range;
                while (queue_.pop(range)) {
                    try {
                        process(range.first, range.second);
                    } catch (...) {
                        std::lock_guard<std::mutex> lock(err_mu);
                        if (!first_error) {
                            first_error = std::current_exception();
                        }
                    }
                    queue_.done_one();
                }
            });
        }
        for (auto& t : threads) t.join();
        if (first_error) {
            std::rethrow_exception(first_error);
        }
    }

private:
    static constexpr uint64_t kBaseCase = 8;
    static constexpr uint64_t kMoveBatch = 512;

    void read_record(uint64_t idx, uint8_t* dst) {
        device_.read(base_ + idx * rec_, std::span<uint8_t>(dst, rec_), Pattern::random,
                     phase_);
    }
    void write_record(uint64_t idx, const uint8_t* src) {
        device_.write(base_ + idx * rec_, std::span<const uint8_t>(src, rec_),
                      Pattern::random, phase_);
    }

    void process(uint64_t lo, uint64_t hi) {
        uint64_t count = hi - lo;
        if (count < 2) {
            return;
        }
        if (count <= kBaseCase) {
            selection_sort(lo, hi);
            return;
        }

        std::vector<uint8_t> pivot = choose_pivot(lo, hi);

        // Classify every record against the pivot (reads only).
        std::vector<uint8_t> cls(count);
        uint64_t n_lt = 0, n_eq = 0;
        {
            PhaseToken token = gate_.enter_read_phase();
            std::vector<uint8_t> rec(rec_);
            for (uint64_t i = 0; i < count; i++) {
                read_record(lo + i, rec.data());
                int c = std::memcmp(rec.data(), pivot.data(), rec_);
                cls[i] = c < 0 ? 0 : (c == 0 ? 1 : 2);
                n_lt += cls[i] == 0;
                n_eq += cls[i] == 1;
            }
        }

        // Pair misplaced records with the slots their class owns and move
        // them along permutation cycles in read-batch/write-batch steps.
        uint64_t b1 = n_lt, b2 = n_lt + n_eq;
        auto region_of = [&](uint64_t i) { return i < b1 ? 0 : (i < b2 ? 1 : 2); };
        std::vector<std::vector<uint64_t>> wrong_slots(3), wrong_recs(3);
        for (uint64_t i = 0; i < count; i++) {
            uint8_t r = static_cast<uint8_t>(region_of(i));
            if (cls[i] != r) {
                wrong_slots[r].push_back(i);   // slot in region r holding another class
                wrong_recs[cls[i]].push_back(i); // record of class cls[i] out of place
            }
        }
        std::map<uint64_t, uint64_t> dest_of;
        for (int c = 0; c < 3; c++) {
            for (size_t i = 0; i < wrong_recs[c].size(); i++) {
                dest_of[wrong_recs[c][i]] = wrong_slots[c][i];
            }
        }
        std::vector<bool> visited(count, false);
        for (const auto& [src, dst] : dest_of) {
            if (visited[src]) {
                continue;
            }
            std::vector<uint64_t> cycle;
            uint64_t cur = src;
            do {
                visited[cur] = true;
                cycle.push_back(cur);
                cur = dest_of.at(cur);
            } while (cur != src);
            rotate_cycle(lo, cycle);
        }

        if (n_lt >= 2) queue_.push(lo, lo + n_lt);
        if (count - b2 >= 2) queue_.push(lo + b2, hi);
    }

    /** Move rec(cycle[j]) to slot cycle[j+1] (wrapping), batched. */
    void rotate_cycle(uint64_t lo, const std::vector<uint64_t>& cycle) {
        uint64_t len = cycle.size();
        std::vector<uint8_t> hold(rec_);
        {
            PhaseToken token = gate_.enter_read_phase();
            read_record(lo + cycle[0], hold.data());
        }
        uint64_t pos = 1;
        std::vector<uint8_t> batch;
        while (pos < len) {
            uint64_t take = std::min(kMoveBatch, len - pos);
            batch.resize(take * rec_);
            {
                PhaseToken token = gate_.enter_read_phase();
                for (uint64_t j = 0; j < take; j++) {
                    read_record(lo + cycle[pos + j], batch.data() + j * rec_);
                }
            }
            {
                PhaseToken token = gate_.enter_write_phase();
                write_record(lo + cycle[pos], hold.data());
                for (uint64_t j = 1; j < take; j++) {
                    write_record(lo + cycle[pos + j], batch.data() + (j - 1) * rec_);
                }
            }
            std::memcpy(hold.data(), batch.data() + (take - 1) * rec_, rec_);
            pos += take;
        }
        PhaseToken token = gate_.enter_write_phase();
        write_record(lo + cycle[0], hold.data());
    }

    std::vector<uint8_t> choose_pivot(uint64_t lo, uint64_t hi) {
        uint64_t count = hi - lo;
        uint64_t samples = std::min<uint64_t>(count, 25);
        std::vector<std::vector<uint8_t>> recs(samples, std::vector<uint8_t>(rec_));
        {
            PhaseToken token = gate_.enter_read_phase();
            for (uint64_t s = 0; s < samples; s++) {
                uint64_t idx = lo + (s * count) / samples;
                read_record(idx, recs[s].data());
            }
        }
        std::nth_element(recs.begin(), recs.begin() + samples / 2, recs.end(),
                         [&](const auto& a, const auto& b) {
                             return std::memcmp(a.data(), b.data(), rec_) < 0;
                         });
        return recs[samples / 2];
    }

    void selection_sort(uint64_t lo, uint64_t hi) {
        std::vector<uint8_t> best(rec_), probe(rec_), tmp(rec_);
        for (uint64_t i = lo; i + 1 < hi; i++) {
            uint64_t m = i;
            {
                PhaseToken token = gate_.enter_read_phase();
                read_record(i, best.data());
                for (uint64_t j = i + 1; j < hi; j++) {
                    read_record(j, probe.data());
                    if (std::memcmp(probe.data(), best.data(), rec_) < 0) {
                        m = j;
                        std::swap(best, probe);
                    }
                }
                if (m != i) {
                    read_record(i, tmp.data());
                }
            }
            if (m != i) {
                PhaseToken token = gate_.enter_write_phase();
                write_record(i, best.data());
                write_record(m, tmp.data());
            }
        }
    }

    Device& device_;
    uint64_t base_;
    uint64_t rec_;
    uint32_t key_;
    PhaseGate& gate_;
    PhaseId phase_;
    RangeQueue queue_;
};

} // namespace

SortStats samplesort_inplace(Device& device, const DatasetMeta& meta,
                             uint64_t region_offset, const BaselineConfig& config) {
    Section total;
    if (meta.layout.kind != LayoutKind::fixed) {
        fail(Errc::config, "in-place sample sort requires the fixed layout");
    }
    SortStats stats;
    stats.output_offset = region_offset;
    stats.output_bytes = meta.total_bytes;

    PhaseGate gate(config.concurrency);
    PhaseId phase = device.phase("RUN sort");
    unsigned workers = config.single_thread ? 1 : config.pools.sort_pool;
    InPlaceSorter sorter(device, region_offset, meta.layout.fixed_record_size(),
                         meta.layout.key_size, gate, phase);
    Section s;
    sorter.sort(meta.record_count, workers);
    stats.phase_wall_ns["RUN sort"] += s.elapsed();
    stats.wall_ns = total.elapsed();
    return stats;
}

// ---------------------------------------------------------------------------
// PMSort-style key/value separation without strided gather

SortStats pmsort_sort(Device& device, const DatasetMeta& meta, uint64_t input_offset,
                      const BaselineConfig& config) {
    Section total;
    if (meta.layout.kind != LayoutKind::fixed) {
        fail(Errc::config, "pmsort requires the fixed layout");
    }
    const RecordLayout& layout = meta.layout;
    SortStats stats;

    PoolPlan pool_plan = config.single_thread ? PoolPlan{1, 1, 1, 1} : config.pools;
    auto read_pool = std::make_unique<ThreadPool>(pool_plan.read_pool);
    auto gather_pool = std::make_unique<ThreadPool>(pool_plan.random_read_pool);
    auto write_pool = std::make_unique<ThreadPool>(pool_plan.write_pool);
    auto sort_pool = std::make_unique<ThreadPool>(pool_plan.sort_pool);
    PhaseGate gate(config.concurrency);
    PhaseWall& wall = stats.phase_wall_ns;

    WiscsortPhases phases;
    phases.run_read = device.phase("RUN read");
    phases.run_sort = device.phase("RUN sort");
    phases.run_write = device.phase("RUN write");
    phases.merge_read = device.phase("MERGE read");
    phases.record_read = device.phase("RECORD read");
    phases.merge_write = device.phase("MERGE write");

    uint32_t offset_width = config.offset_width != 0 ? config.offset_width : 5;
    uint64_t rec = layout.fixed_record_size();
    uint64_t chunk_records = rec > 0 ? config.buffers.read_buffer_bytes / rec : 1;
    if (chunk_records == 0) {
        fail(Errc::config, "read buffer smaller than one record");
    }
    uint64_t n = meta.record_count;
    uint64_t run_count = n == 0 ? 0 : (n + chunk_records - 1) / chunk_records;

    uint64_t out_base = device.alloc_region(meta.total_bytes);
    stats.output_offset = out_base;

    // Run phase: sequential full-record loads, keys extracted in memory, the
    // values discarded rather than rewritten.
    std::vector<RunFileMeta> runs(run_count);
    bool pipelined = config.concurrency == ConcurrencyMode::overlap && !config.single_thread;
    std::future<void> prev_write;
    for (uint64_t r = 0; r < run_count; r++) {
        uint64_t begin = r * chunk_records;
        uint64_t end = std::min(n, begin + chunk_records);
        Section sr;
        RecordChunk chunk = read_chunk_fixed(device, input_offset, layout, begin, end,
                                             read_pool.get(), gate, phases.run_read);
        wall["RUN read"] += sr.elapsed();

        Section se;
        auto im = std::make_shared<IndexMap>(layout.key_size, false);
        im->resize(end - begin);
        parallel_for(sort_pool.get(), end - begin,
                     [&](unsigned, uint64_t b, uint64_t e) {
                         for (uint64_t i = b; i < e; i++) {
                             im->set_entry(i, chunk.bytes.data() + i * rec, begin + i);
                         }
                     });
        wall["RUN other"] += se.elapsed(); // the extra key copy this design pays

        Section ss;
        sort_indexmap(*im, *sort_pool);
        wall["RUN sort"] += ss.elapsed();

        uint64_t region = device.alloc_region(kRunHeaderSize +
                                              im->size() * (layout.key_size + offset_width));
        Section sw;
        if (pipelined) {
            if (prev_write.valid()) prev_write.get();
            prev_write = std::async(std::launch::async, [&device, offset_width, &write_pool,
                                                         &gate, &phases, im, region, r,
                                                         &runs] {
                runs[r] = write_indexmap_run(device, *im, region, offset_width,
                                             write_pool.get(), gate, phases.run_write);
            });
        } else {
            runs[r] = write_indexmap_run(device, *im, region, offset_width,
                                         write_pool.get(), gate, phases.run_write);
            wall["RUN write"] += sw.elapsed();
        }
    }
    if (prev_write.valid()) prev_write.get();

    if (runs.empty()) {
        stats.output_bytes = 0;
        stats.wall_ns = total.elapsed();
        return stats;
    }

    std::vector<uint64_t> run_offsets;
    run_offsets.reserve(runs.size());
    for (const auto& r : runs) run_offsets.push_back(r.base_offset);
    stats.output_bytes = mergepass(device, run_offsets, input_offset, layout, out_base,
                                   config.buffers, gather_pool.get(), write_pool.get(),
                                   gate, phases, wall, &stats.merge_refills,
                                   &stats.merge_retires);

    if (stats.output_bytes != meta.total_bytes) {
        fail(Errc::state, "merge produced a short output");
    }
    stats.wall_ns = total.elapsed();
    return stats;
}

} // namespace braidsort

#include "wiscsort.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
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

/** Serial index sort + permutation, for per-worker no-sync loops. */
void sort_indexmap_serial(IndexMap& im) {
    uint64_t n = im.size();
    uint32_t k = im.key_size();
    uint64_t stride = im.stride();
    uint8_t* raw = im.raw();
    std::vector<uint64_t> order(n);
    for (uint64_t i = 0; i < n; i++) order[i] = i;
    std::sort(order.begin(), order.end(), [raw, stride, k](uint64_t a, uint64_t b) {
        int c = std::memcmp(raw + a * stride, raw + b * stride, k);
        if (c != 0) return c < 0;
        return load_le(raw + a * stride + k, 8) < load_le(raw + b * stride + k, 8);
    });
    std::vector<uint8_t> sorted(n * stride);
    for (uint64_t i = 0; i < n; i++) {
        std::memcpy(sorted.data() + i * stride, raw + order[i] * stride, stride);
    }
    std::memcpy(raw, sorted.data(), sorted.size());
    im.mark_sorted();
}

uint64_t out_record_size(const RecordLayout& layout, uint32_t vlen) {
    return layout.kind == LayoutKind::fixed
               ? layout.fixed_record_size()
               : layout.klv_header_size() + vlen;
}

} // namespace

// ---------------------------------------------------------------------------
// Planning

SortPlan plan_sort(const DatasetMeta& meta, uint64_t index_budget,
                   const BufferGeometry& buffers, const PoolPlan& pools,
                   uint32_t offset_width) {
    meta.layout.validate();
    uint64_t footprint = SortPlan::entry_footprint(meta.layout.key_size);
    if (index_budget < footprint) {
        fail(Errc::config, "index budget below one entry footprint (" +
                               std::to_string(footprint) + " bytes)");
    }

    SortPlan plan;
    plan.buffers = buffers;
    plan.pools = pools;
    plan.index_budget = index_budget;
    plan.offset_width =
        offset_width != 0 ? offset_width
                          : (meta.layout.kind == LayoutKind::fixed ? 5 : 8);

    uint64_t n = meta.record_count;
    if (n == 0 || n * footprint <= index_budget) {
        plan.mode = SortMode::one_pass;
        plan.run_count = 1;
        plan.records_per_run = n;
        plan.merge_levels = 0;
        return plan;
    }

    uint64_t per_run = index_budget / footprint;
    uint64_t gran = std::max<uint64_t>(1, buffers.reader_partition_granularity);
    per_run = (per_run / gran) * gran;
    if (per_run == 0) {
        per_run = gran;
    }
    plan.mode = SortMode::merge_pass;
    plan.records_per_run = per_run;
    plan.run_count = (n + per_run - 1) / per_run;
    plan.merge_levels = 1;
    return plan;
}

// ---------------------------------------------------------------------------
// Run-phase reads

IndexMap run_read_strided(Device& device, uint64_t input_base, const RecordLayout& layout,
                          uint64_t rec_begin, uint64_t rec_end, ThreadPool* read_pool,
                          PhaseGate& gate, PhaseId phase) {
    if (layout.kind != LayoutKind::fixed) {
        fail(Errc::config, "strided key gather requires the fixed layout");
    }
    uint64_t rec_size = layout.fixed_record_size();
    uint32_t k = layout.key_size;
    IndexMap im(k, false);
    im.resize(rec_end - rec_begin);

    PhaseToken token = gate.enter_read_phase();
    parallel_for(read_pool, rec_end - rec_begin,
                 [&](unsigned, uint64_t begin, uint64_t end) {
                     uint8_t* raw = im.raw();
                     for (uint64_t i = begin; i < end; i++) {
                         uint64_t rec = rec_begin + i;
                         uint8_t* slot = raw + i * im.stride();
                         device.read(input_base + rec * rec_size,
                                     std::span<uint8_t>(slot, k), Pattern::strided, phase);
                         store_le(slot + k, rec, 8);
                     }
                 });
    return im;
}

IndexMap run_read_klv(Device& device, uint64_t input_base, uint64_t input_len,
                      const RecordLayout& layout, uint64_t& cursor, uint64_t max_entries,
                      PhaseGate& gate, PhaseId phase) {
    if (layout.kind != LayoutKind::klv) {
        fail(Errc::config, "klv walk requires the klv layout");
    }
    uint64_t hdr = layout.klv_header_size();
    IndexMap im(layout.key_size, true);

    PhaseToken token = gate.enter_read_phase();
    std::vector<uint8_t> head(hdr);
    while (im.size() < max_entries && cursor < input_len) {
        if (cursor + hdr > input_len) {
            fail(Errc::format, "truncated klv record header at offset " +
                                   std::to_string(cursor));
        }
        device.read(input_base + cursor, head, Pattern::strided, phase);
        uint32_t vlen = static_cast<uint32_t>(load_le(head.data() + layout.key_size, 4));
        uint64_t value_off = cursor + hdr;
        if (value_off + vlen > input_len) {
            fail(Errc::format, "klv value length runs past end of file at offset " +
                                   std::to_string(cursor));
        }
        im.append(head.data(), value_off, vlen);
        cursor = value_off + vlen;
    }
    return im;
}

// ---------------------------------------------------------------------------
// OffsetQueue

OffsetQueue::OffsetQueue(const RecordLayout& layout, uint64_t write_buffer_bytes)
    : layout_(layout),
      cap_bytes_(write_buffer_bytes),
      entries_(layout.key_size, layout.kind == LayoutKind::klv) {
    if (layout.kind == LayoutKind::fixed) {
        uint64_t rec = layout.fixed_record_size();
        cap_entries_ = rec > 0 ? write_buffer_bytes / rec : 1;
        if (cap_entries_ == 0) {
            cap_entries_ = 1; // a record larger than the buffer still flows
        }
    } else {
        cap_entries_ = 0;
    }
}

bool OffsetQueue::try_push(const uint8_t* key, uint64_t locator, uint32_t vlen) {
    uint64_t add = out_record_size(layout_, vlen);
    if (entries_.size() > 0) {
        if (layout_.kind == LayoutKind::fixed) {
            if (entries_.size() >= cap_entries_) {
                return false;
            }
        } else if (out_bytes_ + add > cap_bytes_) {
            return false;
        }
    }
    entries_.append(key, locator, vlen);
    out_bytes_ += add;
    return true;
}

void OffsetQueue::clear() {
    entries_ = IndexMap(layout_.key_size, layout_.kind == LayoutKind::klv);
    out_bytes_ = 0;
}

// ---------------------------------------------------------------------------
// MergeState

MergeState MergeState::init(Device& device, const std::vector<uint64_t>& run_offsets,
                            uint64_t read_buffer_bytes, PhaseGate& gate,
                            PhaseId read_phase) {
    if (run_offsets.empty()) {
        fail(Errc::config, "merge needs at least one run");
    }
    MergeState ms;
    PhaseToken token = gate.enter_read_phase();
    std::vector<RunFileMeta> runs;
    runs.reserve(run_offsets.size());
    for (uint64_t offset : run_offsets) {
        runs.push_back(read_run_header(device, offset, read_phase));
    }
    ms.read_buffer_bytes_ = read_buffer_bytes;
    ms.entry_size_ = runs.front().entry_size;
    ms.key_size_ = runs.front().key_size;
    ms.offset_width_ = runs.front().offset_width;
    ms.has_vlen_ = runs.front().layout == LayoutKind::klv;
    for (const auto& r : runs) {
        if (r.entry_size != ms.entry_size_ || r.key_size != ms.key_size_) {
            fail(Errc::format, "merge runs disagree on entry geometry");
        }
    }

    // Even split of the read buffer amongst the run files, entry-aligned.
    ms.allotment_entries_ = read_buffer_bytes / runs.size() / ms.entry_size_;
    if (ms.allotment_entries_ == 0) {
        fail(Errc::config, "read buffer too small for one entry per run");
    }
    ms.min_scratch_.resize(ms.key_size_);
    ms.runs_.resize(runs.size());
    ms.live_ = 0;

    for (uint32_t r = 0; r < runs.size(); r++) {
        Run& run = ms.runs_[r];
        run.file = runs[r];
        uint64_t take = std::min(run.file.entry_count, ms.allotment_entries_);
        if (take == 0) {
            continue; // empty run never joins the selection
        }
        run.region.resize(take * ms.entry_size_);
        device.read(run.file.payload_offset(), run.region, Pattern::sequential, read_phase);
        run.next_entry = take;
        run.region_entries = take;
        run.cursor = 0;
        ms.live_++;
        ms.heap_push(r);
    }
    return ms;
}

const uint8_t* MergeState::head_key(uint32_t run) const {
    const Run& r = runs_[run];
    return r.region.data() + r.cursor * entry_size_;
}

uint64_t MergeState::head_locator(uint32_t run) const {
    return load_le(head_key(run) + key_size_, offset_width_);
}

bool MergeState::heap_less(uint32_t a, uint32_t b) const {
    int c = std::memcmp(head_key(a), head_key(b), key_size_);
    if (c != 0) {
        return c < 0;
    }
    uint64_t la = head_locator(a), lb = head_locator(b);
    if (la != lb) {
        return la < lb;
    }
    return a < b;
}

void MergeState::heap_push(uint32_t run) {
    heap_.push_back(run);
    std::push_heap(heap_.begin(), heap_.end(),
                   [this](uint32_t a, uint32_t b) { return heap_less(b, a); });
}

uint32_t MergeState::heap_pop() {
    std::pop_heap(heap_.begin(), heap_.end(),
                  [this](uint32_t a, uint32_t b) { return heap_less(b, a); });
    uint32_t r = heap_.back();
    heap_.pop_back();
    return r;
}

void MergeState::recompute_allotment() {
    if (live_ > 0) {
        uint64_t next = read_buffer_bytes_ / live_ / entry_size_;
        allotment_entries_ = std::max<uint64_t>(1, next);
    }
}

void MergeState::refill_or_retire(Device& device, uint32_t run_id, PhaseGate& gate,
                                  PhaseId phase) {
    Section timer;
    Run& run = runs_[run_id];
    uint64_t remaining = run.file.entry_count - run.next_entry;
    if (remaining > 0) {
        uint64_t take = std::min(remaining, allotment_entries_);
        run.region.resize(take * entry_size_);
        PhaseToken token = gate.enter_read_phase();
        device.read(run.file.payload_offset() + run.next_entry * entry_size_, run.region,
                    Pattern::sequential, phase);
        token.release();
        run.next_entry += take;
        run.region_entries = take;
        run.cursor = 0;
        refills_++;
        heap_push(run_id);
    } else {
        // Retired: the freed buffer share benefits the survivors at their
        // next refill.
        run.region.clear();
        run.region.shrink_to_fit();
        run.region_entries = 0;
        live_--;
        retires_++;
        recompute_allotment();
    }
    refill_wall_ns_ += timer.elapsed();
}

MergeState::MinEntry MergeState::select_min(Device& device, PhaseGate& gate,
                                            PhaseId read_phase) {
    if (heap_.empty()) {
        fail(Errc::state, "all merge runs are exhausted");
    }
    uint32_t r = heap_pop();
    Run& run = runs_[r];

    MinEntry out;
    const uint8_t* entry = run.region.data() + run.cursor * entry_size_;
    std::memcpy(min_scratch_.data(), entry, key_size_);
    out.key = min_scratch_.data();
    out.locator = load_le(entry + key_size_, offset_width_);
    out.vlen = has_vlen_
                   ? static_cast<uint32_t>(load_le(entry + key_size_ + offset_width_, 4))
                   : 0;

    run.cursor++;
    if (run.cursor == run.region_entries) {
        refill_or_retire(device, r, gate, read_phase);
    } else {
        heap_push(r);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Gathering

void gather_records(Device& device, uint64_t input_base, const RecordLayout& layout,
                    const OffsetQueue& queue, StagingBuffer& buffer,
                    ThreadPool* gather_pool, PhaseGate& gate, PhaseId record_read_phase) {
    const IndexMap& items = queue.entries();
    uint64_t n = items.size();
    if (n == 0) {
        return;
    }
    if (queue.output_bytes() > buffer.capacity()) {
        fail(Errc::state, "gather batch exceeds the write buffer");
    }

    // Output position of each record within the buffer.
    std::vector<uint64_t> pos;
    uint64_t rec_size = 0;
    if (layout.kind == LayoutKind::klv) {
        pos.resize(n);
        uint64_t acc = 0;
        for (uint64_t i = 0; i < n; i++) {
            pos[i] = acc;
            acc += out_record_size(layout, items.vlen_at(i));
        }
    } else {
        rec_size = layout.fixed_record_size();
    }

    uint32_t k = layout.key_size;
    PhaseToken token = gate.enter_read_phase();
    parallel_for(gather_pool, n, [&](unsigned, uint64_t begin, uint64_t end) {
        for (uint64_t i = begin; i < end; i++) {
            uint8_t* dst = buffer.data() +
                           (layout.kind == LayoutKind::fixed ? i * rec_size : pos[i]);
            std::memcpy(dst, items.key_at(i), k);
            if (layout.kind == LayoutKind::fixed) {
                uint64_t value_off = input_base + items.offset_at(i) * rec_size + k;
                device.read(value_off, std::span<uint8_t>(dst + k, layout.value_size),
                            Pattern::random, record_read_phase);
            } else {
                uint32_t vlen = items.vlen_at(i);
                store_le(dst + k, vlen, 4);
                device.read(input_base + items.offset_at(i),
                            std::span<uint8_t>(dst + k + 4, vlen), Pattern::random,
                            record_read_phase);
            }
        }
    });
    token.release();
    buffer.set_fill(queue.output_bytes());
}

namespace {

/** No-sync gathering: records go straight from input to output region. */
void gather_direct(Device& device, uint64_t input_base, const RecordLayout& layout,
                   const OffsetQueue& queue, uint64_t out_offset, ThreadPool* gather_pool,
                   PhaseId record_read_phase, PhaseId write_phase) {
    const IndexMap& items = queue.entries();
    uint64_t n = items.size();
    if (n == 0) {
        return;
    }
    std::vector<uint64_t> pos(n);
    uint64_t acc = 0;
    for (uint64_t i = 0; i < n; i++) {
        pos[i] = acc;
        acc += out_record_size(layout, items.has_vlen() ? items.vlen_at(i) : 0);
    }
    uint32_t k = layout.key_size;
    parallel_for(gather_pool, n, [&](unsigned, uint64_t begin, uint64_t end) {
        std::vector<uint8_t> rec;
        for (uint64_t i = begin; i < end; i++) {
            uint32_t vlen = items.has_vlen() ? items.vlen_at(i) : 0;
            rec.resize(out_record_size(layout, vlen));
            std::memcpy(rec.data(), items.key_at(i), k);
            if (layout.kind == LayoutKind::fixed) {
                device.read(input_base + items.offset_at(i) * layout.fixed_record_size() + k,
                            std::span<uint8_t>(rec.data() + k, layout.value_size),
                            Pattern::random, record_read_phase);
            } else {
                store_le(rec.data() + k, vlen, 4);
                device.read(input_base + items.offset_at(i),
                            std::span<uint8_t>(rec.data() + k + 4, vlen), Pattern::random,
                            record_read_phase);
            }
            device.write(out_offset + pos[i], rec, Pattern::sequential, write_phase);
        }
    });
}

/**
 * Accumulates output-ordered entries and drains them in write-buffer-sized
 * batches: batched random value gathering, then a sequential flush (staged
 * through the write buffer, or written directly under no-sync).
 */
class GatherSink {
public:
    GatherSink(Device& device, uint64_t input_base, const RecordLayout& layout,
               uint64_t out_base, const BufferGeometry& buffers, ThreadPool* gather_pool,
               ThreadPool* write_pool, PhaseGate& gate, PhaseId record_read_phase,
               PhaseId write_phase, PhaseWall& wall, const char* write_label)
        : device_(device),
          input_base_(input_base),
          layout_(layout),
          out_base_(out_base),
          gather_pool_(gather_pool),
          write_pool_(write_pool),
          gate_(gate),
          record_read_phase_(record_read_phase),
          write_phase_(write_phase),
          wall_(wall),
          write_label_(write_label),
          queue_(layout, buffers.write_buffer_bytes),
          direct_(gate.mode() == ConcurrencyMode::no_sync) {
        if (!direct_) {
            writer_.emplace(device, gate, write_pool, out_base,
                            buffers.write_buffer_bytes, write_phase);
        }
    }

    void push(const uint8_t* key, uint64_t locator, uint32_t vlen) {
        if (!queue_.try_push(key, locator, vlen)) {
            drain();
            queue_.try_push(key, locator, vlen);
        }
    }

    void finish() {
        drain();
        if (writer_) {
            Section s;
            writer_->finish();
            wall_[write_label_] += s.elapsed();
        }
    }

    uint64_t output_bytes() const { return out_cursor_; }

private:
    void drain() {
        if (queue_.empty()) {
            return;
        }
        if (direct_) {
            Section s;
            gather_direct(device_, input_base_, layout_, queue_, out_base_ + out_cursor_,
                          gather_pool_, record_read_phase_, write_phase_);
            wall_["RECORD read"] += s.elapsed();
        } else {
            Section g;
            gather_records(device_, input_base_, layout_, queue_, writer_->current(),
                           gather_pool_, gate_, record_read_phase_);
            wall_["RECORD read"] += g.elapsed();
            Section w;
            writer_->flush();
            wall_[write_label_] += w.elapsed();
        }
        out_cursor_ += queue_.output_bytes();
        queue_.clear();
    }

    Device& device_;
    uint64_t input_base_;
    RecordLayout layout_;
    uint64_t out_base_;
    ThreadPool* gather_pool_;
    ThreadPool* write_pool_;
    PhaseGate& gate_;
    PhaseId record_read_phase_;
    PhaseId write_phase_;
    PhaseWall& wall_;
    const char* write_label_;
    OffsetQueue queue_;
    bool direct_;
    std::optional<PhasedRegionWriter> writer_;
    uint64_t out_cursor_ = 0;
};

} // namespace

// ---------------------------------------------------------------------------
// Merge pass

uint64_t mergepass(Device& device, const std::vector<uint64_t>& run_offsets,
                   uint64_t input_base, const RecordLayout& layout, uint64_t out_base,
                   const BufferGeometry& buffers, ThreadPool* gather_pool,
                   ThreadPool* write_pool, PhaseGate& gate, const WiscsortPhases& phases,
                   PhaseWall& wall, uint64_t* refills, uint64_t* retires) {
    Section init_timer;
    MergeState state = MergeState::init(device, run_offsets, buffers.read_buffer_bytes,
                                        gate, phases.merge_read);
    wall["MERGE read"] += init_timer.elapsed();

    GatherSink sink(device, input_base, layout, out_base, buffers, gather_pool, write_pool,
                    gate, phases.record_read, phases.merge_write, wall, "MERGE write");

    Section loop_timer;
    uint64_t busy_before = wall["RECORD read"] + wall["MERGE write"];
    while (!state.exhausted()) {
        MergeState::MinEntry m = state.select_min(device, gate, phases.merge_read);
        sink.push(m.key, m.locator, m.vlen);
    }
    uint64_t loop_ns = loop_timer.elapsed();
    sink.finish();

    uint64_t busy = wall["RECORD read"] + wall["MERGE write"] - busy_before;
    uint64_t refill_ns = state.refill_wall_ns();
    wall["MERGE read"] += refill_ns;
    wall["MERGE other"] += loop_ns > busy + refill_ns ? loop_ns - busy - refill_ns : 0;

    if (refills != nullptr) *refills = state.refills();
    if (retires != nullptr) *retires = state.retire_count();
    return sink.output_bytes();
}

// ---------------------------------------------------------------------------
// Top-level driver

namespace {

struct Pools {
    std::unique_ptr<ThreadPool> read, gather, write, sort;

    explicit Pools(const PoolPlan& plan) {
        read = std::make_unique<ThreadPool>(plan.read_pool);
        gather = std::make_unique<ThreadPool>(plan.random_read_pool);
        write = std::make_unique<ThreadPool>(plan.write_pool);
        sort = std::make_unique<ThreadPool>(plan.sort_pool);
    }
};

WiscsortPhases intern_phases(Device& device) {
    WiscsortPhases p;
    p.run_read = device.phase("RUN read");
    p.run_sort = device.phase("RUN sort");
    p.run_write = device.phase("RUN write");
    p.merge_read = device.phase("MERGE read");
    p.record_read = device.phase("RECORD read");
    p.merge_write = device.phase("MERGE write");
    return p;
}

/** Fixed-layout run generation for the merge pass. */
std::vector<RunFileMeta> run_phase_fixed(Device& device, const DatasetMeta& meta,
                                         uint64_t input_base, const SortPlan& plan,
                                         Pools& pools, PhaseGate& gate,
                                         const WiscsortPhases& phases, PhaseWall& wall) {
    uint64_t n = meta.record_count;
    uint64_t per_run = plan.records_per_run;
    std::vector<RunFileMeta> runs(plan.run_count);

    if (gate.mode() == ConcurrencyMode::no_sync) {
        // Per-worker read -> sort -> write loops, no gate.
        std::mutex wall_mu;
        parallel_for(*pools.sort, plan.run_count,
                     [&](unsigned, uint64_t rb, uint64_t re) {
                         PhaseWall local;
                         for (uint64_t r = rb; r < re; r++) {
                             uint64_t begin = r * per_run;
                             uint64_t end = std::min(n, begin + per_run);
                             Section sr;
                             IndexMap im = run_read_strided(device, input_base, meta.layout,
                                                            begin, end, nullptr, gate,
                                                            phases.run_read);
                             local["RUN read"] += sr.elapsed();
                             Section ss;
                             sort_indexmap_serial(im);
                             local["RUN sort"] += ss.elapsed();
                             Section sw;
                             uint64_t region = device.alloc_region(
                                 kRunHeaderSize + im.size() * (meta.layout.key_size +
                                                               plan.offset_width));
                             runs[r] = write_indexmap_run(device, im, region,
                                                          plan.offset_width, nullptr, gate,
                                                          phases.run_write);
                             local["RUN write"] += sw.elapsed();
                         }
                         std::lock_guard<std::mutex> lock(wall_mu);
                         for (const auto& [k, v] : local) wall[k] += v;
                     });
        return runs;
    }

    bool pipelined = gate.mode() == ConcurrencyMode::overlap;
    std::future<void> prev_write;
    for (uint64_t r = 0; r < plan.run_count; r++) {
        uint64_t begin = r * per_run;
        uint64_t end = std::min(n, begin + per_run);
        Section sr;
        auto im = std::make_shared<IndexMap>(run_read_strided(
            device, input_base, meta.layout, begin, end, pools.read.get(), gate,
            phases.run_read));
        wall["RUN read"] += sr.elapsed();
        Section ss;
        sort_indexmap(*im, *pools.sort);
        wall["RUN sort"] += ss.elapsed();

        uint64_t region = device.alloc_region(
            kRunHeaderSize + im->size() * (meta.layout.key_size + plan.offset_width));
        Section sw;
        if (pipelined) {
            if (prev_write.valid()) {
                prev_write.get();
            }
            prev_write = std::async(std::launch::async, [&device, &plan, &pools, &gate,
                                                         &phases, im, region, r, &runs] {
                runs[r] = write_indexmap_run(device, *im, region, plan.offset_width,
                                             pools.write.get(), gate, phases.run_write);
            });
        } else {
            runs[r] = write_indexmap_run(device, *im, region, plan.offset_width,
                                         pools.write.get(), gate, phases.run_write);
        }
        wall["RUN write"] += sw.elapsed();
    }
    if (prev_write.valid()) {
        prev_write.get();
    }
    return runs;
}

/** Klv run generation: the file walk is inherently serial. */
std::vector<RunFileMeta> run_phase_klv(Device& device, const DatasetMeta& meta,
                                       uint64_t input_base, const SortPlan& plan,
                                       Pools& pools, PhaseGate& gate,
                                       const WiscsortPhases& phases, PhaseWall& wall) {
    std::vector<RunFileMeta> runs;
    uint64_t cursor = 0;
    std::future<void> prev_write;
    bool pipelined = gate.mode() == ConcurrencyMode::overlap;
    while (cursor < meta.total_bytes) {
        Section sr;
        IndexMap im0 = run_read_klv(device, input_base, meta.total_bytes, meta.layout,
                                    cursor, plan.records_per_run, gate, phases.run_read);
        wall["RUN read"] += sr.elapsed();
        if (im0.size() == 0) {
            break;
        }
        auto im = std::make_shared<IndexMap>(std::move(im0));
        Section ss;
        sort_indexmap(*im, *pools.sort);
        wall["RUN sort"] += ss.elapsed();

        uint64_t entry_size = meta.layout.key_size + plan.offset_width + 4;
        uint64_t region = device.alloc_region(kRunHeaderSize + im->size() * entry_size);
        size_t slot = runs.size();
        runs.emplace_back();
        Section sw;
        if (pipelined) {
            if (prev_write.valid()) {
                prev_write.get();
            }
            prev_write = std::async(std::launch::async, [&device, &plan, &pools, &gate,
                                                         &phases, im, region, slot, &runs] {
                runs[slot] = write_indexmap_run(device, *im, region, plan.offset_width,
                                                pools.write.get(), gate, phases.run_write);
            });
        } else {
            runs[slot] = write_indexmap_run(device, *im, region, plan.offset_width,
                                            pools.write.get(), gate, phases.run_write);
        }
        wall["RUN write"] += sw.elapsed();
    }
    if (prev_write.valid()) {
        prev_write.get();
    }
    return runs;
}

} // namespace

SortStats wiscsort_sort(Device& device, const DatasetMeta& meta, uint64_t input_offset,
                        const SortPlan& plan, ConcurrencyMode mode) {
    Section total;
    SortStats stats;
    stats.plan = plan;
    Pools pools(plan.pools);
    PhaseGate gate(mode);
    WiscsortPhases phases = intern_phases(device);
    PhaseWall& wall = stats.phase_wall_ns;

    uint64_t out_base = device.alloc_region(meta.total_bytes);
    stats.output_offset = out_base;

    if (plan.mode == SortMode::one_pass) {
        IndexMap im;
        Section sr;
        if (meta.layout.kind == LayoutKind::fixed) {
            im = run_read_strided(device, input_offset, meta.layout, 0, meta.record_count,
                                  pools.read.get(), gate, phases.run_read);
        } else {
            uint64_t cursor = 0;
            im = run_read_klv(device, input_offset, meta.total_bytes, meta.layout, cursor,
                              ~0ull, gate, phases.run_read);
        }
        wall["RUN read"] += sr.elapsed();
        Section ss;
        sort_indexmap(im, *pools.sort);
        wall["RUN sort"] += ss.elapsed();

        // Materialize: batched random value gathers, sequential output flushes.
        GatherSink sink(device, input_offset, meta.layout, out_base, plan.buffers,
                        pools.gather.get(), pools.write.get(), gate, phases.record_read,
                        phases.run_write, wall, "RUN write");
        for (uint64_t i = 0; i < im.size(); i++) {
            sink.push(im.key_at(i), im.offset_at(i), im.has_vlen() ? im.vlen_at(i) : 0);
        }
        sink.finish();
        stats.output_bytes = sink.output_bytes();
    } else {
        std::vector<RunFileMeta> runs =
            meta.layout.kind == LayoutKind::fixed
                ? run_phase_fixed(device, meta, input_offset, plan, pools, gate, phases,
                                  wall)
                : run_phase_klv(device, meta, input_offset, plan, pools, gate, phases,
                                wall);
        std::vector<uint64_t> run_offsets;
        run_offsets.reserve(runs.size());
        for (const auto& r : runs) run_offsets.push_back(r.base_offset);
        stats.output_bytes = mergepass(device, run_offsets, input_offset, meta.layout,
                                       out_base, plan.buffers, pools.gather.get(),
                                       pools.write.get(), gate, phases, wall,
                                       &stats.merge_refills, &stats.merge_retires);
    }

    if (stats.output_bytes != meta.total_bytes) {
        fail(Errc::state, "output is incomplete: wrote " +
                              std::to_string(stats.output_bytes) + " of " +
                              std::to_string(meta.total_bytes) + " bytes");
    }
    stats.wall_ns = total.elapsed();
    return stats;
}

} // namespace braidsort

// Interference-aware scheduling: a phase gate that (in no-overlap mode)
// admits only one class of device operation at a time, staging buffers that
// act as the barrier between read and write phases, and the buffered writer
// that realizes the three concurrency models.

#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <future>
#include <mutex>
#include <vector>

#include "device.hpp"
#include "thread_pool.hpp"

namespace braidsort {

enum class ConcurrencyMode : uint8_t { no_sync = 0, overlap = 1, no_overlap = 2 };

const char* to_string(ConcurrencyMode m);
ConcurrencyMode concurrency_from_string(std::string_view name);

class PhaseGate;

/** RAII admission token for one class of device operations. */
class PhaseToken {
public:
    PhaseToken() = default;
    PhaseToken(PhaseGate* gate, Direction dir) : gate_(gate), dir_(dir) {}
    PhaseToken(PhaseToken&& o) noexcept : gate_(o.gate_), dir_(o.dir_) { o.gate_ = nullptr; }
    PhaseToken& operator=(PhaseToken&& o) noexcept;
    ~PhaseToken() { release(); }
    void release();

private:
    PhaseGate* gate_ = nullptr;
    Direction dir_ = Direction::read;
};

/**
 * In no-overlap mode reads and writes are mutually exclusive and the gate
 * switches phase only once the previous phase fully drains. Admission is
 * FIFO between opposing phases so neither class starves; same-direction
 * requests queued behind an opposing one wait their turn. Overlap and
 * no-sync modes admit immediately.
 */
class PhaseGate {
public:
    explicit PhaseGate(ConcurrencyMode mode) : mode_(mode) {}

    ConcurrencyMode mode() const { return mode_; }

    PhaseToken enter_read_phase() { return enter(Direction::read); }
    PhaseToken enter_write_phase() { return enter(Direction::write); }
    PhaseToken enter(Direction dir);

private:
    friend class PhaseToken;
    void leave(Direction dir);

    enum class State { idle, reading, writing };
    static State state_for(Direction d) {
        return d == Direction::read ? State::reading : State::writing;
    }

    ConcurrencyMode mode_;
    std::mutex mu_;
    std::condition_variable cv_;
    State state_ = State::idle;
    uint32_t active_ = 0;
    uint64_t next_ticket_ = 0;
    std::deque<std::pair<uint64_t, Direction>> waiters_;
};

enum class BufferRole : uint8_t { read_buffer = 0, write_buffer = 1 };

/** DRAM staging area; fill never exceeds capacity. */
class StagingBuffer {
public:
    StagingBuffer(uint64_t capacity, BufferRole role)
        : data_(capacity), role_(role) {}

    uint64_t capacity() const { return data_.size(); }
    uint64_t fill() const { return fill_; }
    BufferRole role() const { return role_; }
    uint8_t* data() { return data_.data(); }
    const uint8_t* data() const { return data_.data(); }

    void set_fill(uint64_t fill);
    void reset() { fill_ = 0; }

private:
    std::vector<uint8_t> data_;
    uint64_t fill_ = 0;
    BufferRole role_;
};

/**
 * Flush a write buffer to the device inside a write phase: the contents go
 * out sequentially, split across the write pool, and the fill resets to 0.
 * Returns the number of bytes written.
 */
uint64_t flush_write_buffer(PhaseGate& gate, StagingBuffer& buffer, Device& device,
                            uint64_t dest_offset, ThreadPool* write_pool, PhaseId phase);

/**
 * Sequential writer over a device region honoring the gate's concurrency
 * model. Callers fill current() and call flush(); in overlap mode the flush
 * of one buffer proceeds on a background thread while the caller fills the
 * other (double buffering), otherwise flushes are synchronous. finish()
 * drains the final partial buffer.
 */
class PhasedRegionWriter {
public:
    PhasedRegionWriter(Device& device, PhaseGate& gate, ThreadPool* write_pool,
                       uint64_t base_offset, uint64_t buffer_capacity, PhaseId phase);
    ~PhasedRegionWriter();

    StagingBuffer& current() { return *current_; }
    /** Bytes already handed to flush (device offset cursor - base). */
    uint64_t flushed_bytes() const { return cursor_ - base_; }

    void flush();
    void finish();

private:
    void wait_pending();

    Device& device_;
    PhaseGate& gate_;
    ThreadPool* pool_;
    uint64_t base_;
    uint64_t cursor_;
    PhaseId phase_;
    StagingBuffer buf_a_;
    StagingBuffer buf_b_;
    StagingBuffer* current_;
    StagingBuffer* in_flight_ = nullptr;
    std::future<void> pending_;
};

} // namespace braidsort

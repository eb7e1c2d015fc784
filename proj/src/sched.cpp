#include "sched.hpp"

#include <algorithm>

namespace braidsort {

const char* to_string(ConcurrencyMode m) {
    switch (m) {
        case ConcurrencyMode::no_sync: return "nosync";
        case ConcurrencyMode::overlap: return "overlap";
        default: return "no-overlap";
    }
}

ConcurrencyMode concurrency_from_string(std::string_view name) {
    if (name == "nosync") return ConcurrencyMode::no_sync;
    if (name == "overlap") return ConcurrencyMode::overlap;
    if (name == "no-overlap") return ConcurrencyMode::no_overlap;
    fail(Errc::config, "unknown concurrency mode '" + std::string(name) + "'");
}

PhaseToken& PhaseToken::operator=(PhaseToken&& o) noexcept {
    if (this != &o) {
        release();
        gate_ = o.gate_;
        dir_ = o.dir_;
        o.gate_ = nullptr;
    }
    return *this;
}

void PhaseToken::release() {
    if (gate_ != nullptr) {
        gate_->leave(dir_);
        gate_ = nullptr;
    }
}

PhaseToken PhaseGate::enter(Direction dir) {
    if (mode_ != ConcurrencyMode::no_overlap) {
        return PhaseToken(this, dir);
    }
    std::unique_lock<std::mutex> lock(mu_);
    uint64_t ticket = next_ticket_++;
    waiters_.emplace_back(ticket, dir);
    cv_.wait(lock, [&] {
        if (waiters_.front().first != ticket) {
            return false;
        }
        return state_ == State::idle || state_ == state_for(dir);
    });
    waiters_.pop_front();
    state_ = state_for(dir);
    active_++;
    // Let a same-direction request now at the queue head join the phase.
    cv_.notify_all();
    return PhaseToken(this, dir);
}

void PhaseGate::leave(Direction dir) {
    if (mode_ != ConcurrencyMode::no_overlap) {
        return;
    }
    std::unique_lock<std::mutex> lock(mu_);
    (void)dir;
    if (--active_ == 0) {
        state_ = State::idle;
        cv_.notify_all();
    }
}

void StagingBuffer::set_fill(uint64_t fill) {
    if (fill > data_.size()) {
        fail(Errc::state, "staging buffer overfilled");
    }
    fill_ = fill;
}

uint64_t flush_write_buffer(PhaseGate& gate, StagingBuffer& buffer, Device& device,
                            uint64_t dest_offset, ThreadPool* write_pool, PhaseId phase) {
    if (buffer.role() != BufferRole::write_buffer) {
        fail(Errc::state, "flush requires a write buffer");
    }
    uint64_t fill = buffer.fill();
    if (fill == 0) {
        return 0;
    }
    PhaseToken token = gate.enter_write_phase();
    parallel_for(write_pool, fill, [&](unsigned, uint64_t begin, uint64_t end) {
        device.write(dest_offset + begin,
                     std::span<const uint8_t>(buffer.data() + begin, end - begin),
                     Pattern::sequential, phase);
    });
    token.release();
    buffer.reset();
    return fill;
}

PhasedRegionWriter::PhasedRegionWriter(Device& device, PhaseGate& gate,
                                       ThreadPool* write_pool, uint64_t base_offset,
                                       uint64_t buffer_capacity, PhaseId phase)
    : device_(device),
      gate_(gate),
      pool_(write_pool),
      base_(base_offset),
      cursor_(base_offset),
      phase_(phase),
      buf_a_(buffer_capacity, BufferRole::write_buffer),
      buf_b_(gate.mode() != ConcurrencyMode::no_overlap ? buffer_capacity : 0,
             BufferRole::write_buffer),
      current_(&buf_a_) {}

PhasedRegionWriter::~PhasedRegionWriter() {
    wait_pending();
}

void PhasedRegionWriter::wait_pending() {
    if (pending_.valid()) {
        pending_.get();
        in_flight_ = nullptr;
    }
}

void PhasedRegionWriter::flush() {
    StagingBuffer* buf = current_;
    if (buf->fill() == 0) {
        return;
    }
    uint64_t dest = cursor_;
    cursor_ += buf->fill();
    if (gate_.mode() != ConcurrencyMode::no_overlap) {
        wait_pending();
        in_flight_ = buf;
        current_ = (buf == &buf_a_) ? &buf_b_ : &buf_a_;
        pending_ = std::async(std::launch::async, [this, buf, dest] {
            flush_write_buffer(gate_, *buf, device_, dest, pool_, phase_);
        });
    } else {
        flush_write_buffer(gate_, *buf, device_, dest, pool_, phase_);
    }
}

void PhasedRegionWriter::finish() {
    flush();
    wait_pending();
}

} // namespace braidsort

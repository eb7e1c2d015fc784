#include "indexmap.hpp"

#include <algorithm>
#include <cstring>

namespace braidsort {

void IndexMap::append(const uint8_t* key, uint64_t offset, uint32_t vlen) {
    size_t at = data_.size();
    data_.resize(at + stride_);
    std::memcpy(data_.data() + at, key, key_size_);
    store_le(data_.data() + at + key_size_, offset, 8);
    if (has_vlen_) {
        store_le(data_.data() + at + key_size_ + 8, vlen, 4);
    }
    count_++;
    sorted_ = false;
}

void IndexMap::set_entry(uint64_t i, const uint8_t* key, uint64_t offset, uint32_t vlen) {
    uint8_t* slot = data_.data() + i * stride_;
    std::memcpy(slot, key, key_size_);
    store_le(slot + key_size_, offset, 8);
    if (has_vlen_) {
        store_le(slot + key_size_ + 8, vlen, 4);
    }
}

std::vector<uint64_t> parallel_sort_indices(
    uint64_t count, ThreadPool& pool,
    const std::function<bool(uint64_t, uint64_t)>& less) {
    std::vector<uint64_t> idx(count);
    for (uint64_t i = 0; i < count; i++) {
        idx[i] = i;
    }
    if (count < 2) {
        return idx;
    }

    unsigned parts = std::min<uint64_t>(pool.size(), (count + 4095) / 4096);
    if (parts <= 1) {
        std::sort(idx.begin(), idx.end(), less);
        return idx;
    }

    std::vector<std::pair<uint64_t, uint64_t>> blocks;
    for (unsigned i = 0; i < parts; i++) {
        blocks.emplace_back(partition_start(count, parts, i),
                            partition_start(count, parts, i + 1));
    }
    {
        std::vector<std::future<void>> futs;
        for (auto [b, e] : blocks) {
            futs.push_back(pool.submit([&idx, &less, b = b, e = e] {
                std::sort(idx.begin() + b, idx.begin() + e, less);
            }));
        }
        for (auto& f : futs) f.get();
    }

    // Pairwise balanced merges until one block remains.
    std::vector<uint64_t> tmp(count);
    while (blocks.size() > 1) {
        std::vector<std::pair<uint64_t, uint64_t>> next;
        std::vector<std::future<void>> futs;
        for (size_t i = 0; i + 1 < blocks.size(); i += 2) {
            auto [ab, ae] = blocks[i];
            auto [bb, be] = blocks[i + 1];
            next.emplace_back(ab, be);
            futs.push_back(pool.submit([&, ab = ab, ae = ae, be = be] {
                std::merge(idx.begin() + ab, idx.begin() + ae, idx.begin() + ae,
                           idx.begin() + be, tmp.begin() + ab, less);
                std::copy(tmp.begin() + ab, tmp.begin() + be, idx.begin() + ab);
            }));
        }
        if (blocks.size() % 2 == 1) {
            next.push_back(blocks.back());
        }
        for (auto& f : futs) f.get();
        blocks = std::move(next);
    }
    return idx;
}

void sort_indexmap(IndexMap& im, ThreadPool& sort_pool) {
    uint64_t n = im.size();
    uint32_t k = im.key_size();
    uint64_t stride = im.stride();
    const uint8_t* raw = im.raw();

    auto less = [raw, stride, k](uint64_t a, uint64_t b) {
        int c = std::memcmp(raw + a * stride, raw + b * stride, k);
        if (c != 0) {
            return c < 0;
        }
        return load_le(raw + a * stride + k, 8) < load_le(raw + b * stride + k, 8);
    };
    std::vector<uint64_t> order = parallel_sort_indices(n, sort_pool, less);

    // Materialize the permutation.
    std::vector<uint8_t> sorted(im.data_.size());
    parallel_for(sort_pool, n, [&](unsigned, uint64_t begin, uint64_t end) {
        for (uint64_t i = begin; i < end; i++) {
            std::memcpy(sorted.data() + i * stride, raw + order[i] * stride, stride);
        }
    });
    im.data_ = std::move(sorted);
    im.sorted_ = true;
}

RunFileMeta write_indexmap_run(Device& device, const IndexMap& im, uint64_t region_offset,
                               uint32_t offset_width, ThreadPool* write_pool,
                               PhaseGate& gate, PhaseId phase) {
    if (!im.sorted() && im.size() > 1) {
        fail(Errc::state, "run serialization requires a sorted IndexMap");
    }
    if (offset_width < 1 || offset_width > 8) {
        fail(Errc::config, "offset width must be in [1, 8]");
    }

    RunFileMeta meta;
    meta.base_offset = region_offset;
    meta.entry_count = im.size();
    meta.offset_width = offset_width;
    meta.layout = im.has_vlen() ? LayoutKind::klv : LayoutKind::fixed;
    meta.key_size = im.key_size();
    meta.entry_size = im.key_size() + offset_width + (im.has_vlen() ? 4 : 0);

    std::vector<uint8_t> header(kRunHeaderSize, 0);
    std::memcpy(header.data(), kRunMagic, 4);
    store_le(header.data() + 4, kRunVersion, 2);
    header[6] = static_cast<uint8_t>(meta.layout);
    header[7] = static_cast<uint8_t>(meta.key_size);
    header[8] = static_cast<uint8_t>(offset_width);
    store_le(header.data() + 9, meta.entry_count, 8);

    // Pack entries into a file image, then write it out sequentially.
    std::vector<uint8_t> image(meta.payload_bytes());
    uint64_t limit = offset_width >= 8 ? ~0ull : (1ull << (8 * offset_width)) - 1;
    parallel_for(write_pool, im.size(), [&](unsigned, uint64_t begin, uint64_t end) {
        for (uint64_t i = begin; i < end; i++) {
            uint8_t* dst = image.data() + i * meta.entry_size;
            uint64_t off = im.offset_at(i);
            if (off > limit) {
                fail(Errc::config, "locator does not fit the configured offset width");
            }
            std::memcpy(dst, im.key_at(i), im.key_size());
            store_le(dst + im.key_size(), off, offset_width);
            if (im.has_vlen()) {
                store_le(dst + im.key_size() + offset_width, im.vlen_at(i), 4);
            }
        }
    });

    PhaseToken token = gate.enter_write_phase();
    device.write(region_offset, header, Pattern::sequential, phase);
    parallel_for(write_pool, image.size(), [&](unsigned, uint64_t begin, uint64_t end) {
        device.write(region_offset + kRunHeaderSize + begin,
                     std::span<const uint8_t>(image.data() + begin, end - begin),
                     Pattern::sequential, phase);
    });
    return meta;
}

RunFileMeta read_run_header(Device& device, uint64_t region_offset, PhaseId phase) {
    std::vector<uint8_t> header(kRunHeaderSize);
    device.read(region_offset, header, Pattern::sequential, phase);
    if (std::memcmp(header.data(), kRunMagic, 4) != 0) {
        fail(Errc::format, "bad run magic");
    }
    if (load_le(header.data() + 4, 2) != kRunVersion) {
        fail(Errc::format, "unsupported run version");
    }
    RunFileMeta meta;
    meta.base_offset = region_offset;
    meta.layout = static_cast<LayoutKind>(header[6]);
    meta.key_size = header[7];
    meta.offset_width = header[8];
    meta.entry_count = load_le(header.data() + 9, 8);
    if (meta.key_size == 0 || meta.offset_width == 0 || meta.offset_width > 8) {
        fail(Errc::format, "corrupt run header");
    }
    meta.entry_size =
        meta.key_size + meta.offset_width + (meta.layout == LayoutKind::klv ? 4 : 0);
    return meta;
}

IndexMap read_run_entries(Device& device, const RunFileMeta& run, PhaseId phase) {
    IndexMap im(run.key_size, run.layout == LayoutKind::klv);
    im.reserve(run.entry_count);
    std::vector<uint8_t> image(run.payload_bytes());
    if (!image.empty()) {
        device.read(run.payload_offset(), image, Pattern::sequential, phase);
    }
    for (uint64_t i = 0; i < run.entry_count; i++) {
        const uint8_t* src = image.data() + i * run.entry_size;
        uint64_t off = load_le(src + run.key_size, run.offset_width);
        uint32_t vlen = run.layout == LayoutKind::klv
                            ? static_cast<uint32_t>(
                                  load_le(src + run.key_size + run.offset_width, 4))
                            : 0;
        im.append(src, off, vlen);
    }
    im.mark_sorted();
    return im;
}

} // namespace braidsort

#include "recfmt.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <memory>

namespace braidsort {

namespace {

constexpr uint64_t kKeyStreamTag = 0x6b65797374726d00ull;
constexpr uint64_t kValueStreamTag = 0x76616c7374726d00ull;
constexpr uint64_t kVlenTag = 0x766c656e00000000ull;
constexpr uint64_t kDigestSeed = 0x42534447u; // fixed digest seed

struct FileCloser {
    void operator()(std::FILE* f) const { if (f) std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) {
        fail(Errc::io, "cannot open '" + path + "'");
    }
    return f;
}

void fill_stream(uint64_t state, uint8_t* dst, uint32_t len) {
    uint32_t i = 0;
    while (i + 8 <= len) {
        uint64_t w = splitmix64(state);
        std::memcpy(dst + i, &w, 8);
        i += 8;
    }
    if (i < len) {
        uint64_t w = splitmix64(state);
        std::memcpy(dst + i, &w, len - i);
    }
}

} // namespace

void RecordLayout::validate() const {
    if (key_size < 1) {
        fail(Errc::config, "key_size must be >= 1");
    }
    if (kind == LayoutKind::klv && vlen_field_size != 4) {
        fail(Errc::config, "klv vlen field size is fixed at 4 bytes");
    }
}

void gen_key_bytes(uint64_t seed, uint64_t record_index, uint8_t* dst, uint32_t key_size) {
    fill_stream(mix2(seed ^ kKeyStreamTag, record_index), dst, key_size);
}

void gen_value_bytes(uint64_t seed, uint64_t record_index, uint8_t* dst, uint32_t value_size) {
    fill_stream(mix2(seed ^ kValueStreamTag, record_index), dst, value_size);
}

uint32_t gen_vlen(uint64_t seed, uint64_t record_index, const VlenBounds& vlen) {
    if (vlen.max <= vlen.min) {
        return vlen.min;
    }
    uint64_t span = uint64_t(vlen.max) - vlen.min + 1;
    return vlen.min + uint32_t(mix2(seed ^ kVlenTag, record_index) % span);
}

DatasetMeta gen_dataset(const RecordLayout& layout, uint64_t record_count,
                        uint64_t seed, const VlenBounds& vlen,
                        const std::string& out_path, uint64_t capacity_limit) {
    layout.validate();
    if (layout.kind == LayoutKind::klv && vlen.max < vlen.min) {
        fail(Errc::config, "vlen max below vlen min");
    }

    uint64_t total = 0;
    if (layout.kind == LayoutKind::fixed) {
        total = record_count * layout.fixed_record_size();
    } else {
        for (uint64_t i = 0; i < record_count; i++) {
            total += layout.klv_header_size() + gen_vlen(seed, i, vlen);
        }
    }
    if (capacity_limit != 0 && total > capacity_limit) {
        fail(Errc::device_full, "dataset of " + std::to_string(total) +
                                    " bytes exceeds capacity " + std::to_string(capacity_limit));
    }

    FilePtr f = open_file(out_path, "wb");
    std::vector<uint8_t> buf;
    buf.reserve(1 << 20);
    for (uint64_t i = 0; i < record_count; i++) {
        size_t at = buf.size();
        if (layout.kind == LayoutKind::fixed) {
            buf.resize(at + layout.fixed_record_size());
            gen_key_bytes(seed, i, buf.data() + at, layout.key_size);
            gen_value_bytes(seed, i, buf.data() + at + layout.key_size, layout.value_size);
        } else {
            uint32_t vl = gen_vlen(seed, i, vlen);
            buf.resize(at + layout.klv_header_size() + vl);
            gen_key_bytes(seed, i, buf.data() + at, layout.key_size);
            store_le(buf.data() + at + layout.key_size, vl, 4);
            gen_value_bytes(seed, i, buf.data() + at + layout.key_size + 4, vl);
        }
        if (buf.size() >= (1 << 20)) {
            if (std::fwrite(buf.data(), 1, buf.size(), f.get()) != buf.size()) {
                fail(Errc::io, "write failed on '" + out_path + "'");
            }
            buf.clear();
        }
    }
    if (!buf.empty() && std::fwrite(buf.data(), 1, buf.size(), f.get()) != buf.size()) {
        fail(Errc::io, "write failed on '" + out_path + "'");
    }
    if (std::fflush(f.get()) != 0) {
        fail(Errc::io, "flush failed on '" + out_path + "'");
    }

    DatasetMeta meta;
    meta.layout = layout;
    meta.record_count = record_count;
    meta.seed = seed;
    meta.vlen = vlen;
    meta.total_bytes = total;
    meta.path = out_path;
    return meta;
}

Hash128 multiset_digest_bytes(const uint8_t* data, uint64_t len, const RecordLayout& layout) {
    layout.validate();
    Hash128 sum;
    uint64_t off = 0;
    if (layout.kind == LayoutKind::fixed) {
        uint64_t rec = layout.fixed_record_size();
        if (rec == 0) {
            fail(Errc::config, "zero-size fixed record");
        }
        if (len % rec != 0) {
            fail(Errc::format, "file length is not a multiple of the record size");
        }
        while (off < len) {
            sum += hash128(data + off, rec, kDigestSeed);
            off += rec;
        }
    } else {
        uint64_t hdr = layout.klv_header_size();
        while (off < len) {
            if (off + hdr > len) {
                fail(Errc::format, "truncated klv record header");
            }
            uint64_t vl = load_le(data + off + layout.key_size, 4);
            if (off + hdr + vl > len) {
                fail(Errc::format, "klv value length runs past end of file");
            }
            sum += hash128(data + off, hdr + vl, kDigestSeed);
            off += hdr + vl;
        }
    }
    return sum;
}

Hash128 multiset_digest(const std::string& path, const RecordLayout& layout) {
    std::vector<uint8_t> bytes = read_file_bytes(path);
    return multiset_digest_bytes(bytes.data(), bytes.size(), layout);
}

ValidationReport validate(const std::string& input_path, const std::string& output_path,
                          const RecordLayout& layout) {
    layout.validate();
    std::vector<uint8_t> in = read_file_bytes(input_path);
    std::vector<uint8_t> out = read_file_bytes(output_path);

    if (layout.kind == LayoutKind::fixed) {
        uint64_t rec = layout.fixed_record_size();
        if (in.size() % rec != 0 || out.size() % rec != 0 || in.size() != out.size()) {
            fail(Errc::format, "fixed-layout mismatch between input and output files");
        }
    }

    ValidationReport report;
    report.input_digest = multiset_digest_bytes(in.data(), in.size(), layout);
    report.output_digest = multiset_digest_bytes(out.data(), out.size(), layout);
    report.is_permutation = report.input_digest == report.output_digest;

    report.is_sorted = true;
    uint64_t k = layout.key_size;
    if (layout.kind == LayoutKind::fixed) {
        uint64_t rec = layout.fixed_record_size();
        uint64_t n = out.size() / rec;
        for (uint64_t i = 0; i + 1 < n; i++) {
            if (std::memcmp(out.data() + i * rec, out.data() + (i + 1) * rec, k) > 0) {
                report.is_sorted = false;
                report.first_violation_index = i;
                break;
            }
        }
    } else {
        uint64_t hdr = layout.klv_header_size();
        uint64_t off = 0, idx = 0;
        const uint8_t* prev = nullptr;
        while (off < out.size()) {
            if (off + hdr > out.size()) {
                fail(Errc::format, "truncated klv record header");
            }
            uint64_t vl = load_le(out.data() + off + k, 4);
            if (off + hdr + vl > out.size()) {
                fail(Errc::format, "klv value length runs past end of file");
            }
            if (prev != nullptr && std::memcmp(prev, out.data() + off, k) > 0) {
                report.is_sorted = false;
                report.first_violation_index = idx - 1;
                break;
            }
            prev = out.data() + off;
            off += hdr + vl;
            idx++;
        }
    }
    return report;
}

std::vector<uint8_t> read_file_bytes(const std::string& path) {
    FilePtr f = open_file(path, "rb");
    std::fseek(f.get(), 0, SEEK_END);
    long size = std::ftell(f.get());
    if (size < 0) {
        fail(Errc::io, "cannot stat '" + path + "'");
    }
    std::fseek(f.get(), 0, SEEK_SET);
    std::vector<uint8_t> bytes(static_cast<size_t>(size));
    if (size > 0 && std::fread(bytes.data(), 1, bytes.size(), f.get()) != bytes.size()) {
        fail(Errc::io, "short read on '" + path + "'");
    }
    return bytes;
}

void write_file_bytes(const std::string& path, const uint8_t* data, uint64_t len) {
    FilePtr f = open_file(path, "wb");
    if (len > 0 && std::fwrite(data, 1, len, f.get()) != len) {
        fail(Errc::io, "write failed on '" + path + "'");
    }
}

} // namespace braidsort

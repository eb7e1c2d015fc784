#include "common.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>

namespace braidsort {

std::optional<uint64_t> parse_size(std::string_view text) {
    text = trim(text);
    if (text.empty()) {
        return std::nullopt;
    }
    uint64_t mult = 1;
    char last = text.back();
    if (last == 'k' || last == 'K') mult = 1ull << 10;
    else if (last == 'm' || last == 'M') mult = 1ull << 20;
    else if (last == 'g' || last == 'G') mult = 1ull << 30;
    if (mult != 1) {
        text.remove_suffix(1);
    }
    uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        return std::nullopt;
    }
    return value * mult;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
        s.remove_prefix(1);
    }
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
        s.remove_suffix(1);
    }
    return s;
}

unsigned env_thread_cap() {
    const char* v = std::getenv("BRAIDSORT_THREADS");
    if (v == nullptr || *v == '\0') {
        return 0;
    }
    long n = std::strtol(v, nullptr, 10);
    return n > 0 ? static_cast<unsigned>(n) : 0;
}

} // namespace braidsort

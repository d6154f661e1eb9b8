#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace navbench {

/// 64-bit FNV-1a. Stable across platforms; used for config, pool and
/// checkpoint fingerprints recorded in output artifacts.
class Fnv1a {
public:
    void update(std::string_view bytes) noexcept {
        for (unsigned char c : bytes) {
            state_ ^= c;
            state_ *= 0x100000001B3ULL;
        }
    }
    void update(const void* data, std::size_t size) noexcept {
        update(std::string_view(static_cast<const char*>(data), size));
    }
    std::uint64_t digest() const noexcept { return state_; }

private:
    std::uint64_t state_ = 0xCBF29CE484222325ULL;
};

inline std::uint64_t fnv1a(std::string_view bytes) noexcept {
    Fnv1a h;
    h.update(bytes);
    return h.digest();
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline constexpr std::string_view kCodeVersion = "navbench 0.1.0";

} // namespace navbench

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace poisimex {

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline constexpr std::uint64_t combine(std::uint64_t h, std::uint64_t v) noexcept {
    return splitmix64(h ^ splitmix64(v + 0x632BE59BD9B4E019ULL));
}

}  // namespace detail

/// 64-bit FNV-1a. Used to key streams by scenario name and to hash configs.
inline constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

/// Identifies an independent random stream.
///
/// A stream is a pure function of (seed, stream id); the engine it produces
/// does not depend on which thread asks for it or in which order. Child
/// streams are derived by hashing a (tag, index) pair into the key, so the
/// pseudo-data for replicate r, lambda k, draw b is always the same sequence.
class RngStream {
public:
    using engine_type = std::mt19937_64;

    RngStream() = default;
    explicit RngStream(std::uint64_t seed, std::uint64_t scenario = 0, std::uint64_t replicate = 0)
        : seed_(seed), key_(detail::combine(detail::combine(detail::splitmix64(seed), scenario), replicate)) {}

    RngStream(std::uint64_t seed, std::string_view scenario, std::uint64_t replicate)
        : RngStream(seed, fnv1a64(scenario), replicate) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t key() const noexcept { return key_; }

    /// Stream for sub-task `index` of kind `tag`.
    RngStream child(std::uint64_t tag, std::uint64_t index = 0) const noexcept {
        RngStream s;
        s.seed_ = seed_;
        s.key_ = detail::combine(detail::combine(key_, tag), index);
        return s;
    }

    RngStream child(std::string_view tag, std::uint64_t index = 0) const noexcept {
        return child(fnv1a64(tag), index);
    }

    engine_type engine() const { return engine_type(key_); }

private:
    std::uint64_t seed_ = 0;
    std::uint64_t key_ = detail::splitmix64(0);
};

}  // namespace poisimex

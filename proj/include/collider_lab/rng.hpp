#pragma once

// Counter-based random numbers. Every draw is a pure function of
// (master seed, stream label, row index, draw index), so samples do not depend
// on how rows are split across threads or in which order they are produced.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>

namespace collider_lab {

struct SeedSpec {
    std::uint64_t master_seed = 0;
    std::string stream_id = "default";

    /// A derived stream, e.g. seed.child("exposure").
    SeedSpec child(std::string_view suffix) const {
        return {master_seed, stream_id + "/" + std::string(suffix)};
    }

    bool operator==(const SeedSpec&) const = default;
};

namespace rng {

/// 64-bit FNV-1a, used to turn stream labels into key material.
constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Philox4x32-10 (Salmon et al., SC'11).
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;

    explicit constexpr Philox4x32(std::uint64_t key)
        : k0_(static_cast<std::uint32_t>(key)), k1_(static_cast<std::uint32_t>(key >> 32)) {}

    constexpr Counter operator()(Counter c) const {
        std::uint32_t k0 = k0_;
        std::uint32_t k1 = k1_;
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = std::uint64_t{kMul0} * c[0];
            const std::uint64_t p1 = std::uint64_t{kMul1} * c[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            c = {hi1 ^ c[1] ^ k0, lo1, hi0 ^ c[3] ^ k1, lo0};
            k0 += kWeyl0;
            k1 += kWeyl1;
        }
        return c;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85;

    std::uint32_t k0_;
    std::uint32_t k1_;
};

/// 52 random bits mapped to the open interval (0, 1). The largest value is
/// 1 - 2^-53, which is representable, so 1.0 is never produced.
constexpr double to_unit_open(std::uint64_t bits) {
    return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

inline std::uint64_t stream_key(const SeedSpec& seed) {
    return splitmix64(seed.master_seed ^ splitmix64(fnv1a64(seed.stream_id)));
}

/// The draws belonging to one row of one stream. Each Philox block yields two
/// uniforms; draw k of row r lives in block (r, k / 2).
class RowStream {
public:
    RowStream(const Philox4x32& gen, std::uint64_t row) : gen_(&gen), row_(row) {}

    double uniform() {
        if (cached_ == 0) refill();
        return buffer_[2 - cached_--];
    }

    double normal() {
        // Box-Muller, cosine branch only, so every normal uses exactly two uniforms.
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    void refill() {
        const auto out = (*gen_)({static_cast<std::uint32_t>(row_),
                                  static_cast<std::uint32_t>(row_ >> 32),
                                  static_cast<std::uint32_t>(block_),
                                  static_cast<std::uint32_t>(block_ >> 32)});
        buffer_[0] = to_unit_open((std::uint64_t{out[0]} << 32) | out[1]);
        buffer_[1] = to_unit_open((std::uint64_t{out[2]} << 32) | out[3]);
        ++block_;
        cached_ = 2;
    }

    const Philox4x32* gen_;
    std::uint64_t row_;
    std::uint64_t block_ = 0;
    std::array<double, 2> buffer_{};
    int cached_ = 0;
};

/// Keyed generator for one SeedSpec; hands out per-row streams.
class StreamGenerator {
public:
    explicit StreamGenerator(const SeedSpec& seed) : gen_(stream_key(seed)) {}

    RowStream row(std::uint64_t i) const { return RowStream(gen_, i); }

private:
    Philox4x32 gen_;
};

}  // namespace rng
}  // namespace collider_lab

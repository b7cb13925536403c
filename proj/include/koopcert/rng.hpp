#pragma once

#include <cstdint>
#include <random>

namespace koopcert {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}
}  // namespace detail

/// Reproducible random stream keyed by (seed, stream id). Independent trials
/// use distinct stream ids under one master seed.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {
        const std::uint64_t a = detail::splitmix64(seed ^ detail::splitmix64(stream + 0x632be59bd9b4e019ULL));
        const std::uint64_t b = detail::splitmix64(a);
        std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                          static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
        engine_.seed(seq);
    }

    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
    [[nodiscard]] std::uint64_t stream() const noexcept { return stream_; }

    /// Standard normal draw.
    double normal() { return normal_(engine_); }

    /// Uniform draw on the open interval (0, 1).
    double uniform() {
        double u = 0.0;
        while (u == 0.0) u = uniform_(engine_);
        return u;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace koopcert

#ifndef METAPOP_RNG_HPP
#define METAPOP_RNG_HPP

#include <cmath>
#include <cstdint>

namespace metapop {

/// Counter-based pseudo-random generator built on the splitmix64 output
/// function: the n-th draw of stream k under master seed m is a pure
/// function mix(m, k, n). Streams are statistically independent for
/// distinct (seed, stream) pairs, draws are reproducible bit-for-bit and
/// independent of call interleaving across streams.
///
/// Stream ids used by the simulators are documented constants, see
/// `rng_stream` below; replications derive sub-streams by offsetting the
/// stream id, which keeps common-random-number experiments valid.
class CounterRng {
  public:
    CounterRng() = default;
    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : key_(mix_key(seed, stream)) {}

    /// Next raw 64-bit draw.
    std::uint64_t next_u64() {
        std::uint64_t z = key_ + counter_ * 0x9e3779b97f4a7c15ULL;
        ++counter_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in (0, 1]; never returns 0, so -log is finite.
    double next_uniform() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    /// Exponential with rate 1.
    double next_exp1() { return -std::log(next_uniform()); }

    /// Exponential with the given rate (> 0).
    double next_exp(double rate) { return next_exp1() / rate; }

    /// Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) {
        // Lemire-style rejection keeps the draw exactly uniform.
        std::uint64_t x = next_u64();
        __uint128_t m = static_cast<__uint128_t>(x) * n;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < n) {
            const std::uint64_t thresh = (0 - n) % n;
            while (lo < thresh) {
                x = next_u64();
                m = static_cast<__uint128_t>(x) * n;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// True with probability p.
    bool next_bernoulli(double p) { return next_uniform() <= p; }

    std::uint64_t counter() const { return counter_; }

  private:
    static std::uint64_t mix_key(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

/// Documented stream purposes. A simulation with replication index r uses
/// stream `base + stride * r` so that replications never share draws.
namespace rng_stream {
constexpr std::uint64_t events = 0;        ///< main event clock / selection
constexpr std::uint64_t thinning = 1;      ///< migrant success coins
constexpr std::uint64_t destinations = 2;  ///< migration destination choice
constexpr std::uint64_t coupled_y = 3;     ///< Y-component channels of a coupled pair
constexpr std::uint64_t coupled_w = 4;     ///< W-component channels of a coupled pair
constexpr std::uint64_t catastrophe = 5;   ///< shared catastrophe clock
constexpr std::uint64_t stride = 8;        ///< per-replication stream stride
}  // namespace rng_stream

}  // namespace metapop

#endif  // METAPOP_RNG_HPP

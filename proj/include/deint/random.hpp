#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace deint {

/// Reproducible random stream identified by (seed, id).
///
/// The identity is mapped through Philox4x32-10 (a counter-based generator)
/// to the 256-bit state of a xoshiro256** generator that produces the bulk
/// draws. Child streams are derived from the identity alone, never from the
/// position, so the draws assigned to a replicate, an interim analysis or an
/// arm do not depend on how many draws any other consumer made. Simulation
/// output is therefore independent of the worker count, and a replayed
/// interim analysis sees exactly the posterior draws the engine saw.
class RngStream {
   public:
    using result_type = std::uint64_t;

    RngStream() : RngStream(0) {}
    explicit RngStream(std::uint64_t seed, std::uint64_t id = 0);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform on the open interval (0, 1).
    double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

    /// Independent stream keyed by `tag` under this stream's identity.
    [[nodiscard]] RngStream child(std::uint64_t tag) const {
        return RngStream(seed_, mix(id_ ^ mix(tag + 0x632be59bd9b4e019ULL)));
    }
    [[nodiscard]] RngStream child(std::uint64_t tag1, std::uint64_t tag2) const {
        return child(tag1).child(tag2);
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t id() const { return id_; }

    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// One Philox4x32-10 block for the given key and counter.
    static std::array<std::uint32_t, 4> philox(std::array<std::uint32_t, 2> key,
                                               std::array<std::uint32_t, 4> counter);

   private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t seed_;
    std::uint64_t id_;
    std::array<std::uint64_t, 4> s_{};
};

/// Well-known tags for child streams. Changing any of these changes every
/// simulated result.
namespace stream_tag {
inline constexpr std::uint64_t kAccrual = 1;
inline constexpr std::uint64_t kEfficacyOutcome = 2;
inline constexpr std::uint64_t kToxicityOutcome = 3;
inline constexpr std::uint64_t kPosterior = 4;
inline constexpr std::uint64_t kBootstrap = 5;
inline constexpr std::uint64_t kScenario = 6;
inline constexpr std::uint64_t kReplicate = 7;
inline constexpr std::uint64_t kCalibration = 8;
inline constexpr std::uint64_t kResimulation = 9;
}  // namespace stream_tag

double standard_normal(RngStream& rng);
double exponential(RngStream& rng, double rate);

/// Gamma(shape, 1) sampler with constants precomputed for repeated draws.
/// Marsaglia-Tsang for shape >= 1; a shape below 1 is boosted through
/// shape + 1 and corrected by U^(1/shape).
class GammaSampler {
   public:
    explicit GammaSampler(double shape);

    double operator()(RngStream& rng) const {
        const double base = core(rng);
        return boosted_ ? base * std::exp(std::log(rng.uniform()) * inv_shape_) : base;
    }

    /// Draw split into the Marsaglia-Tsang part and the log of the boost
    /// factor, for callers that must survive underflow of tiny shapes.
    double core(RngStream& rng) const;
    bool boosted() const { return boosted_; }
    double inv_shape() const { return inv_shape_; }
    double shape() const { return shape_; }

   private:
    double shape_;
    double d_;
    double c_;
    double inv_shape_;
    bool boosted_;
};

/// Beta(a, b) sampler for a, b >= 0. Degenerate parameters are the limits of
/// the Beta family: a = 0 gives 0, b = 0 gives 1, a = b = 0 gives a fair coin.
class BetaSampler {
   public:
    BetaSampler(double a, double b);
    double operator()(RngStream& rng) const;

   private:
    enum class Kind { kZero, kOne, kCoin, kGamma };
    Kind kind_;
    GammaSampler ga_;
    GammaSampler gb_;
};

}  // namespace deint

#include "deint/random.hpp"

#include <boost/random/normal_distribution.hpp>

namespace deint {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85;

}  // namespace

std::array<std::uint32_t, 4> RngStream::philox(std::array<std::uint32_t, 2> key,
                                               std::array<std::uint32_t, 4> ctr) {
    for (int r = 0; r < 10; ++r) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * ctr[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * ctr[2];
        ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
               static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
        key[0] += kPhiloxW0;
        key[1] += kPhiloxW1;
    }
    return ctr;
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t id) : seed_(seed), id_(id) {
    const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed),
                                              static_cast<std::uint32_t>(seed >> 32)};
    for (std::uint32_t block = 0; block < 2; ++block) {
        const auto out = philox(key, {block, 0u, static_cast<std::uint32_t>(id),
                                      static_cast<std::uint32_t>(id >> 32)});
        s_[2 * block] = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
        s_[2 * block + 1] = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
    }
    // xoshiro must not start from the all-zero state.
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 0x9e3779b97f4a7c15ULL;
}

double standard_normal(RngStream& rng) {
    // Ziggurat; the distribution object is stateless between calls.
    boost::random::normal_distribution<double> normal;
    return normal(rng);
}

double exponential(RngStream& rng, double rate) { return -std::log(rng.uniform()) / rate; }

GammaSampler::GammaSampler(double shape) : shape_(shape), boosted_(shape < 1.0) {
    const double effective = boosted_ ? shape + 1.0 : shape;
    d_ = effective - 1.0 / 3.0;
    c_ = 1.0 / std::sqrt(9.0 * d_);
    inv_shape_ = shape > 0.0 ? 1.0 / shape : 0.0;
}

double GammaSampler::core(RngStream& rng) const {
    for (;;) {
        double x;
        double v;
        do {
            x = standard_normal(rng);
            v = 1.0 + c_ * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.uniform();
        const double x2 = x * x;
        if (u < 1.0 - 0.0331 * x2 * x2) return d_ * v;
        if (std::log(u) < 0.5 * x2 + d_ * (1.0 - v + std::log(v))) return d_ * v;
    }
}

BetaSampler::BetaSampler(double a, double b) : ga_(a > 0 ? a : 1.0), gb_(b > 0 ? b : 1.0) {
    if (a <= 0.0 && b <= 0.0) {
        kind_ = Kind::kCoin;
    } else if (a <= 0.0) {
        kind_ = Kind::kZero;
    } else if (b <= 0.0) {
        kind_ = Kind::kOne;
    } else {
        kind_ = Kind::kGamma;
    }
}

double BetaSampler::operator()(RngStream& rng) const {
    switch (kind_) {
        case Kind::kZero:
            return 0.0;
        case Kind::kOne:
            return 1.0;
        case Kind::kCoin:
            return rng.uniform() < 0.5 ? 0.0 : 1.0;
        case Kind::kGamma:
            break;
    }
    const double gx = ga_.core(rng);
    const double lx = ga_.boosted() ? std::log(rng.uniform()) * ga_.inv_shape() : 0.0;
    const double gy = gb_.core(rng);
    const double ly = gb_.boosted() ? std::log(rng.uniform()) * gb_.inv_shape() : 0.0;
    const double x = lx == 0.0 ? gx : gx * std::exp(lx);
    const double y = ly == 0.0 ? gy : gy * std::exp(ly);
    if (x + y > 0.0) return x / (x + y);
    // Both factors underflowed: compare on the log scale.
    const double diff = (std::log(gy) + ly) - (std::log(gx) + lx);
    if (diff > 0) {
        const double e = std::exp(-diff);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(diff));
}

}  // namespace deint

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace graphtrans {

// splitmix64 finalizer; also used to derive substream seeds.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t tag) {
    return mix64(root ^ mix64(tag));
}

// Sequential generator with portable distributions on top of mt19937_64.
// The standard fixes the engine; the distribution helpers below avoid the
// implementation-defined std::*_distribution adaptors.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t u64() { return gen_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n); n must be positive.
    int uniform_int(int n) {
        return static_cast<int>(static_cast<std::uint64_t>(uniform() * static_cast<double>(n)));
    }

    // Box-Muller with a cached spare.
    double normal(double mean, double stddev) {
        if (has_spare_) {
            has_spare_ = false;
            return mean + stddev * spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return mean + stddev * r * std::cos(theta);
    }

    // Fisher-Yates.
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
            const int j = uniform_int(i + 1);
            std::swap(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(j)]);
        }
    }

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Counter-based generator for dropout masks: every drawn value is a pure
// function of (seed, stream, index), so masks are reproducible regardless of
// evaluation order and can be regenerated without storing state.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t seed() const { return seed_; }

    // Each dropout call claims a fresh stream id.
    std::uint64_t next_stream() { return next_stream_++; }

    static double uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
        const std::uint64_t h = mix64(seed ^ mix64(stream * 0x9e3779b97f4a7c15ULL + index));
        return static_cast<double>(h >> 11) * 0x1.0p-53;
    }

private:
    std::uint64_t seed_;
    std::uint64_t next_stream_ = 0;
};

}  // namespace graphtrans

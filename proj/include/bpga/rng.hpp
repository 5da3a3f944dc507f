// SPDX-License-Identifier: Apache-2.0
//
// Seeded random source. The mt19937_64 engine is bit-exact across
// platforms; the distribution transforms are spelled out here because the
// standard library's are implementation-defined and golden fixtures must
// not drift between toolchains.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace bpga {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // [0, 1) with 53 random bits
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    // inclusive range, rejection sampled (no modulo bias)
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        if (span == 0) return static_cast<std::int64_t>(eng_());  // full 64-bit range
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        std::uint64_t r;
        do {
            r = eng_();
        } while (r >= limit);
        return lo + static_cast<std::int64_t>(r % span);
    }

    // standard normal via Box-Muller, second draw cached
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    // Fisher-Yates; std::shuffle is implementation-defined
    template <typename Vec>
    void shuffle(Vec& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

    // derive an independent stream (training vs data vs noise)
    Rng fork(std::uint64_t stream) {
        return Rng(eng_() ^ (0x9E3779B97F4A7C15ULL * (stream + 1)));
    }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace bpga

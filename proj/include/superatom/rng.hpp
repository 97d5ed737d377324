#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace superatom {

// splitmix64-based generator. Hand-rolled so that sampled values are
// bit-identical across standard libraries, which the reproducibility
// contracts of traces and trajectory averages rely on.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    // Independent stream for a substream index (trajectory, atom, bin).
    static Rng stream(std::uint64_t seed, std::uint64_t index) {
        Rng mix(seed ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
        mix.next_u64();
        return mix;
    }

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in (0, 1); never returns 0 or 1, so it is safe under log()
    // and as a no-jump survival threshold.
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // Exponential-spacing sampler below, normal approximation above; the
    // crossover keeps the sampler exact where single counts matter and
    // O(1) where bins hold thousands of counts.
    long long poisson(double mean) {
        if (mean <= 0.0) return 0;
        if (mean < 50.0) {
            double sum = 0.0;
            long long k = -1;
            while (sum < mean) {
                sum += -std::log(uniform());
                ++k;
            }
            return k;
        }
        const double v = mean + std::sqrt(mean) * normal();
        return v > 0.0 ? static_cast<long long>(std::llround(v)) : 0;
    }

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace superatom

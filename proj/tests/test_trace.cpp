#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "superatom/trace.hpp"

using namespace superatom;

namespace {

PhotonTrace flat_trace(double rate, double bin_width, int bins) {
    PhotonTrace trace;
    trace.bin_edges = uniform_bin_edges(0.0, bins * bin_width, bin_width);
    trace.rates.assign(bins, rate);
    return trace;
}

}  // namespace

TEST_SUITE("trace") {

TEST_CASE("bin bookkeeping") {
    const PhotonTrace trace = flat_trace(2.0, 0.02, 50);
    trace.validate();
    CHECK(trace.size() == 50);
    CHECK(trace.bin_center(0) == doctest::Approx(0.01));
    CHECK(trace.bin_width(10) == doctest::Approx(0.02));

    PhotonTrace bad = trace;
    bad.rates[3] = -1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("zero rate produces zero counts") {
    const PhotonTrace zero = flat_trace(0.0, 0.02, 20);
    const PhotonTrace sampled = poissonize(zero, 1000000, 0.35, 42);
    for (long long c : sampled.counts) CHECK(c == 0);
}

TEST_CASE("sampled counts match the Poisson mean and variance") {
    // 1 photon/us in 20 ns bins over 1e6 runs at 35% efficiency: 7000/bin.
    const PhotonTrace trace = flat_trace(1.0, 0.02, 400);
    const PhotonTrace sampled = poissonize(trace, 1000000, 0.35, 7);
    double sum = 0.0;
    for (long long c : sampled.counts) sum += static_cast<double>(c);
    const double mean = sum / static_cast<double>(sampled.counts.size());
    const double sigma_of_mean =
        std::sqrt(7000.0 / static_cast<double>(sampled.counts.size()));
    CHECK(std::abs(mean - 7000.0) < 3.0 * sigma_of_mean);
    CHECK(sampled.n_measurements == 1000000);
    CHECK(sampled.detection_efficiency == doctest::Approx(0.35));
    // Observed rates are the counts mapped back to photons/us.
    CHECK(sampled.rates[0] ==
          doctest::Approx(static_cast<double>(sampled.counts[0]) / (0.02 * 1e6 * 0.35)));
}

TEST_CASE("identical seeds reproduce identical counts") {
    const PhotonTrace trace = flat_trace(0.7, 0.02, 100);
    const PhotonTrace a = poissonize(trace, 50000, 0.35, 99);
    const PhotonTrace b = poissonize(trace, 50000, 0.35, 99);
    const PhotonTrace c = poissonize(trace, 50000, 0.35, 100);
    CHECK(a.counts == b.counts);
    CHECK(a.counts != c.counts);
}

TEST_CASE("small-mean sampler is exactly Poisson on average") {
    const PhotonTrace trace = flat_trace(0.5, 0.02, 40000);  // mean 3.5 w/ these settings
    const PhotonTrace sampled = poissonize(trace, 1000, 0.35, 5);
    double sum = 0.0, sq = 0.0;
    for (long long c : sampled.counts) {
        sum += static_cast<double>(c);
        sq += static_cast<double>(c) * static_cast<double>(c);
    }
    const double n = static_cast<double>(sampled.counts.size());
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    const double expect = 0.5 * 0.02 * 1000 * 0.35;  // 3.5
    CHECK(std::abs(mean - expect) < 3.0 * std::sqrt(expect / n));
    CHECK(var == doctest::Approx(expect).epsilon(0.1));
}

TEST_CASE("input validation") {
    const PhotonTrace trace = flat_trace(1.0, 0.02, 10);
    CHECK_THROWS_AS(poissonize(trace, 0, 0.35, 1), std::invalid_argument);
    CHECK_THROWS_AS(poissonize(trace, 100, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(poissonize(trace, 100, 1.5, 1), std::invalid_argument);
    CHECK_THROWS_AS(uniform_bin_edges(1.0, 0.0, 0.1), std::invalid_argument);
}

}  // TEST_SUITE

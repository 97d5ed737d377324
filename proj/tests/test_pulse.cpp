#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "superatom/pulse.hpp"
#include "superatom/rng.hpp"

using namespace superatom;

namespace {

// Composite-Simpson oracle for the pulse integral.
double simpson_integral(const PulseShape& shape, int n_panels) {
    const double a = shape.start_time();
    const double b = shape.end_time;
    const double h = (b - a) / n_panels;
    double sum = pulse_rate(shape, a) + pulse_rate(shape, b);
    for (int i = 1; i < n_panels; ++i)
        sum += pulse_rate(shape, a + i * h) * (i % 2 ? 4.0 : 2.0);
    return sum * h / 3.0;
}

}  // namespace

TEST_SUITE("pulse") {

TEST_CASE("flat top, switch-off and ramp midpoint") {
    const PulseShape shape = make_pulse(3.0, 0.2, 15.0, 0.0);
    CHECK(pulse_rate(shape, -1.5) == doctest::Approx(15.0));
    CHECK(pulse_rate(shape, 0.0) == 0.0);
    CHECK(pulse_rate(shape, -3.0) == 0.0);
    CHECK(pulse_rate(shape, 1.0) == 0.0);
    CHECK(pulse_rate(shape, -4.0) == 0.0);
    // Midpoint of the falling ramp sits at half the peak.
    CHECK(pulse_rate(shape, -0.1) == doctest::Approx(7.5).epsilon(1e-12));
    // Midpoint of the rising ramp likewise.
    CHECK(pulse_rate(shape, -2.9) == doctest::Approx(7.5).epsilon(1e-12));
}

TEST_CASE("integral matches closed form") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const double duration = 0.5 + 5.0 * rng.uniform();
        const double taper = 0.05 + 0.45 * std::min(1.0, duration / 2.0) * rng.uniform();
        const PulseShape shape = make_pulse(duration, taper, 1.0 + 20.0 * rng.uniform(),
                                            2.0 * rng.uniform() - 1.0);
        const double oracle = simpson_integral(shape, 200000);
        CHECK(pulse_integral(shape) == doctest::Approx(oracle).epsilon(1e-6));
    }
}

TEST_CASE("non-negative everywhere and continuous at the seams") {
    Rng rng(11);
    const PulseShape shape = make_pulse(2.0, 0.3, 9.0, 0.4);
    for (int i = 0; i < 2000; ++i) {
        const double t = -4.0 + 8.0 * rng.uniform();
        CHECK(pulse_rate(shape, t) >= 0.0);
    }
    for (const double seam : {shape.start_time(), shape.start_time() + shape.taper_time,
                              shape.end_time - shape.taper_time, shape.end_time}) {
        const double left = pulse_rate(shape, seam - 1e-9);
        const double right = pulse_rate(shape, seam + 1e-9);
        CHECK(std::abs(left - right) < 1e-6);
    }
}

TEST_CASE("short pulses clamp the taper instead of failing") {
    const PulseShape shape = make_pulse(0.2, 0.2, 5.0, 0.0);
    CHECK(shape.taper_time == doctest::Approx(0.1));
    CHECK(pulse_rate(shape, -0.1) == doctest::Approx(5.0));
}

TEST_CASE("validation rejects malformed shapes") {
    PulseShape shape;
    shape.duration = 0.3;
    shape.taper_time = 0.2;
    shape.peak_rate = 1.0;
    CHECK_THROWS_AS(shape.validate(), std::invalid_argument);
    shape.taper_time = 0.1;
    shape.peak_rate = -1.0;
    CHECK_THROWS_AS(shape.validate(), std::invalid_argument);
}

}  // TEST_SUITE

#include "superatom/pulse.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace superatom {

void PulseShape::validate() const {
    if (!(duration > 0.0)) throw std::invalid_argument("pulse duration must be positive");
    if (!(taper_time > 0.0)) throw std::invalid_argument("pulse taper must be positive");
    if (2.0 * taper_time > duration + 1e-15)
        throw std::invalid_argument("pulse duration must cover both tapers");
    if (peak_rate < 0.0) throw std::invalid_argument("pulse peak rate must be non-negative");
}

double pulse_rate(const PulseShape& shape, double t) {
    const double t0 = shape.end_time - shape.duration;
    if (t <= t0 || t >= shape.end_time) return 0.0;
    const double tap = shape.taper_time;
    if (t < t0 + tap) {
        const double s = std::sin(std::numbers::pi * (t - t0) / (2.0 * tap));
        return shape.peak_rate * s * s;
    }
    if (t > shape.end_time - tap) {
        const double c = std::cos(std::numbers::pi * (t - (shape.end_time - tap)) / (2.0 * tap));
        return shape.peak_rate * c * c;
    }
    return shape.peak_rate;
}

double pulse_integral(const PulseShape& shape) {
    return shape.peak_rate * (shape.duration - shape.taper_time);
}

PulseShape make_pulse(double duration, double taper, double peak_rate, double end_time) {
    PulseShape shape;
    shape.duration = duration;
    shape.taper_time = std::min(taper, duration / 2.0);
    shape.peak_rate = peak_rate;
    shape.end_time = end_time;
    shape.validate();
    return shape;
}

}  // namespace superatom

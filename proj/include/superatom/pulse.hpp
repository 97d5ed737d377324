#pragma once

namespace superatom {

// Flat-top probe pulse with raised-cosine ramps of fixed length at both
// ends. The switch-off timescale is set by taper_time independent of the
// total duration; sweeps vary the start time and keep end_time fixed.
struct PulseShape {
    double duration = 1.0;    // us, full support including both ramps
    double taper_time = 0.2;  // us, length of each cosine ramp
    double peak_rate = 0.0;   // photons/us on the flat top
    double end_time = 0.0;    // us, absolute time where the pulse is off

    double start_time() const { return end_time - duration; }
    void validate() const;
};

// Instantaneous probe photon rate R_p(t). Zero outside
// [end_time - duration, end_time], continuous everywhere.
double pulse_rate(const PulseShape& shape, double t);

// Closed form of the time integral of pulse_rate over the full support:
// peak_rate * (duration - taper_time).
double pulse_integral(const PulseShape& shape);

// Pulse with the requested support whose taper is clamped to duration/2,
// so that sweeps may include pulses shorter than two full ramps.
PulseShape make_pulse(double duration, double taper, double peak_rate,
                      double end_time = 0.0);

}  // namespace superatom

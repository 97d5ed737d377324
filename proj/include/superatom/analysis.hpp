#pragma once

#include <Eigen/Dense>

#include <optional>
#include <vector>

#include "superatom/four_level.hpp"
#include "superatom/params.hpp"
#include "superatom/trace.hpp"

namespace superatom {

struct ThresholdOptions {
    // Counts-mode cut: bins with fewer accumulated counts are excluded.
    long long min_counts = 50;
    // Noiseless-trace equivalent: bins below this fraction of the trace
    // maximum are excluded.
    double relative_floor = 1e-3;
};

struct MaskedTrace {
    PhotonTrace trace;
    std::vector<bool> keep;
    bool threshold_applied = false;
};

MaskedTrace apply_threshold(const PhotonTrace& trace, const ThresholdOptions& opts = {});

struct FitResult {
    double i0 = 0.0;     // photons/us at t = 0
    double gamma = 0.0;  // 1/us
    Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();  // over (i0, gamma)
    double t_start = 0.0;
    double t_end = 0.0;
    std::size_t n_points_used = 0;
    bool threshold_applied = false;
};

// Weighted least squares of log-rate against time over the contiguous run
// of unmasked bins inside [t_start, t_end]. Weights come from Poisson error
// propagation when counts are present (var(log r) ~ 1/counts), otherwise
// uniform.
FitResult fit_exponential(const MaskedTrace& masked, double t_start, double t_end);

// Start of the decay-fit window: the first bin center at which the drive
// has fallen below 1e-3 of its peak. With the cosine taper this coincides
// with the pulse end time to within one bin.
double post_pulse_start(const PhotonTrace& trace, const PulseShape& shape);

struct SweepOptions {
    double taper_time = 0.2;       // us
    double end_time = 0.0;         // us, fixed switch-off for every length
    double post_window = 6.0;      // us of decay recorded after the pulse
    double pre_margin = 0.1;       // us of grid before the pulse starts
    double bin_width = 0.02;       // us
    ThresholdOptions threshold;
    PropagateOptions propagate;
    int n_threads = 0;             // 0 = hardware concurrency
    // Poissonization of each simulated trace before fitting (off when
    // n_measurements == 0).
    long long n_measurements = 0;
    double efficiency = 1.0;
    std::uint64_t seed = 0;
};

struct SweepResult {
    std::vector<double> pulse_lengths;  // us
    std::vector<std::optional<FitResult>> fits;
    std::vector<std::string> failures;  // one entry per failed length
    double omega_col = 0.0;             // rad/us, for detrending windows

    std::vector<double> gamma_series() const;
    std::vector<double> i0_series() const;
    std::vector<double> lengths_with_fits() const;
};

// Simulates the four-level model for every pulse length (fixed end time,
// varied start time) and fits each post-pulse trace. Lengths run
// concurrently; per-length failures are recorded, not fatal.
SweepResult sweep_pulse_lengths(const EffectiveParams& eff,
                                const std::vector<double>& lengths,
                                const SweepOptions& opts = {});

struct PhaseCorrelation {
    double pearson = 0.0;
    bool degenerate = false;
    std::size_t n_used = 0;
};

// Pearson correlation of the detrended decay-rate series against the
// detrended amplitude series. Detrending subtracts a centered moving
// average spanning detrend_window; only points whose window lies fully
// inside the sweep enter the correlation.
PhaseCorrelation phase_correlation(const SweepResult& sweep, double detrend_window);

// Shared helpers for series diagnostics.
std::vector<double> detrend_moving_average(const std::vector<double>& x,
                                           const std::vector<double>& y, double window,
                                           std::vector<bool>* valid = nullptr);

// Best-fitting oscillation period of y(x) in [period_min, period_max] by
// least-squares over a cosine + linear-trend basis.
double dominant_period(const std::vector<double>& x, const std::vector<double>& y,
                       double period_min, double period_max);

}  // namespace superatom

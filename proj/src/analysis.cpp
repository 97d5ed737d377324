#include "superatom/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace superatom {

MaskedTrace apply_threshold(const PhotonTrace& trace, const ThresholdOptions& opts) {
    trace.validate();
    MaskedTrace out;
    out.trace = trace;
    out.keep.assign(trace.size(), true);
    out.threshold_applied = true;
    if (trace.has_counts()) {
        for (std::size_t i = 0; i < trace.size(); ++i)
            out.keep[i] = trace.counts[i] >= opts.min_counts;
    } else {
        const double peak = *std::max_element(trace.rates.begin(), trace.rates.end());
        const double floor = opts.relative_floor * peak;
        for (std::size_t i = 0; i < trace.size(); ++i)
            out.keep[i] = trace.rates[i] >= floor;
    }
    if (std::none_of(out.keep.begin(), out.keep.end(), [](bool k) { return k; }))
        throw std::runtime_error("threshold masked every bin");
    return out;
}

FitResult fit_exponential(const MaskedTrace& masked, double t_start, double t_end) {
    const PhotonTrace& trace = masked.trace;
    std::vector<double> ts, logs, weights;
    bool started = false;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const double t = trace.bin_center(i);
        if (t < t_start || t > t_end) continue;
        const bool usable = masked.keep[i] && trace.rates[i] > 0.0;
        if (!usable) {
            if (started) break;  // fit the contiguous run after the window opens
            continue;
        }
        started = true;
        ts.push_back(t);
        logs.push_back(std::log(trace.rates[i]));
        weights.push_back(trace.has_counts() ? static_cast<double>(trace.counts[i]) : 1.0);
    }
    if (ts.size() < 3) throw std::runtime_error("fewer than 3 usable bins in fit window");

    // Model log r = log i0 - gamma t; weighted normal equations.
    double sw = 0, swt = 0, swtt = 0, swy = 0, swty = 0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const double w = weights[i];
        sw += w;
        swt += w * ts[i];
        swtt += w * ts[i] * ts[i];
        swy += w * logs[i];
        swty += w * ts[i] * logs[i];
    }
    const double det = sw * swtt - swt * swt;
    if (std::abs(det) < 1e-300) throw std::runtime_error("degenerate fit window");
    const double log_i0 = (swtt * swy - swt * swty) / det;
    const double gamma = -(sw * swty - swt * swy) / det;

    // Covariance of (log i0, gamma). Poisson weights are inverse variances;
    // uniform weights are scaled by the residual variance.
    Eigen::Matrix2d xtx_inv;
    xtx_inv << swtt / det, swt / det, swt / det, sw / det;
    double scale = 1.0;
    if (!trace.has_counts()) {
        double ssr = 0.0;
        for (std::size_t i = 0; i < ts.size(); ++i) {
            const double r = logs[i] - (log_i0 - gamma * ts[i]);
            ssr += r * r;
        }
        scale = ts.size() > 2 ? ssr / static_cast<double>(ts.size() - 2) : 0.0;
    }

    FitResult fit;
    fit.i0 = std::exp(log_i0);
    fit.gamma = gamma;
    // Transform var(log i0) to var(i0).
    Eigen::Matrix2d jac = Eigen::Matrix2d::Identity();
    jac(0, 0) = fit.i0;
    fit.covariance = jac * (scale * xtx_inv) * jac.transpose();
    fit.t_start = ts.front();
    fit.t_end = ts.back();
    fit.n_points_used = ts.size();
    fit.threshold_applied = masked.threshold_applied;
    return fit;
}

double post_pulse_start(const PhotonTrace& trace, const PulseShape& shape) {
    const double floor = 1e-3 * shape.peak_rate;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const double t = trace.bin_center(i);
        if (t > shape.start_time() && pulse_rate(shape, t) < floor &&
            t > shape.end_time - shape.taper_time)
            return t;
    }
    return shape.end_time;
}

std::vector<double> SweepResult::gamma_series() const {
    std::vector<double> out;
    for (const auto& f : fits)
        if (f) out.push_back(f->gamma);
    return out;
}

std::vector<double> SweepResult::i0_series() const {
    std::vector<double> out;
    for (const auto& f : fits)
        if (f) out.push_back(f->i0);
    return out;
}

std::vector<double> SweepResult::lengths_with_fits() const {
    std::vector<double> out;
    for (std::size_t i = 0; i < fits.size(); ++i)
        if (fits[i]) out.push_back(pulse_lengths[i]);
    return out;
}

SweepResult sweep_pulse_lengths(const EffectiveParams& eff,
                                const std::vector<double>& lengths,
                                const SweepOptions& opts) {
    if (lengths.empty()) throw std::invalid_argument("no pulse lengths given");
    for (std::size_t i = 1; i < lengths.size(); ++i)
        if (!(lengths[i] > lengths[i - 1]))
            throw std::invalid_argument("pulse lengths must be strictly increasing");

    SweepResult result;
    result.pulse_lengths = lengths;
    result.fits.resize(lengths.size());
    result.failures.assign(lengths.size(), "");
    result.omega_col = collective_rabi(eff);

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= lengths.size()) break;
            try {
                const PulseShape shape =
                    make_pulse(lengths[i], opts.taper_time, eff.r_p, opts.end_time);
                GridSpec grid{shape.start_time() - opts.pre_margin,
                              opts.end_time + opts.post_window, opts.bin_width};
                SimulatedTrace sim = simulate_trace(eff, shape, grid, opts.propagate);
                PhotonTrace trace = sim.trace;
                if (opts.n_measurements > 0)
                    trace = poissonize(trace, opts.n_measurements, opts.efficiency,
                                       opts.seed + i);
                MaskedTrace masked = apply_threshold(trace, opts.threshold);
                const double t0 = post_pulse_start(trace, shape);
                result.fits[i] =
                    fit_exponential(masked, t0, opts.end_time + opts.post_window);
            } catch (const std::exception& e) {
                result.failures[i] = e.what();
            }
        }
    };
    int n_threads = opts.n_threads > 0
                        ? opts.n_threads
                        : static_cast<int>(std::thread::hardware_concurrency());
    n_threads = std::max(1, std::min<int>(n_threads, static_cast<int>(lengths.size())));
    std::vector<std::thread> pool;
    for (int i = 1; i < n_threads; ++i) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    return result;
}

std::vector<double> detrend_moving_average(const std::vector<double>& x,
                                           const std::vector<double>& y, double window,
                                           std::vector<bool>* valid) {
    if (x.size() != y.size()) throw std::invalid_argument("series size mismatch");
    std::vector<double> out(y.size(), 0.0);
    if (valid) valid->assign(y.size(), false);
    const double half = window / 2.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double sum = 0.0;
        int count = 0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            if (std::abs(x[j] - x[i]) <= half + 1e-12) {
                sum += y[j];
                ++count;
            }
        }
        out[i] = y[i] - sum / count;
        const bool interior =
            x[i] - half >= x.front() - 1e-12 && x[i] + half <= x.back() + 1e-12;
        if (valid) (*valid)[i] = interior;
    }
    return out;
}

PhaseCorrelation phase_correlation(const SweepResult& sweep, double detrend_window) {
    const std::vector<double> lengths = sweep.lengths_with_fits();
    const std::vector<double> gammas = sweep.gamma_series();
    const std::vector<double> i0s = sweep.i0_series();
    if (lengths.size() < 8)
        throw std::invalid_argument("phase correlation needs at least 8 fitted lengths");

    std::vector<bool> valid;
    const std::vector<double> dg = detrend_moving_average(lengths, gammas, detrend_window, &valid);
    const std::vector<double> di = detrend_moving_average(lengths, i0s, detrend_window);

    double sg = 0, si = 0, n = 0;
    for (std::size_t k = 0; k < lengths.size(); ++k) {
        if (!valid[k]) continue;
        sg += dg[k];
        si += di[k];
        n += 1.0;
    }
    PhaseCorrelation pc;
    pc.n_used = static_cast<std::size_t>(n);
    if (n < 3) {
        pc.degenerate = true;
        return pc;
    }
    const double mg = sg / n, mi = si / n;
    double cgg = 0, cii = 0, cgi = 0;
    for (std::size_t k = 0; k < lengths.size(); ++k) {
        if (!valid[k]) continue;
        cgg += (dg[k] - mg) * (dg[k] - mg);
        cii += (di[k] - mi) * (di[k] - mi);
        cgi += (dg[k] - mg) * (di[k] - mi);
    }
    const double scale_g = std::sqrt(cgg / n);
    const double scale_i = std::sqrt(cii / n);
    const double typical_g = std::abs(mg) + 1.0;
    if (scale_g < 1e-9 * typical_g || scale_i <= 0.0) {
        pc.degenerate = true;
        return pc;
    }
    pc.pearson = cgi / std::sqrt(cgg * cii);
    return pc;
}

double dominant_period(const std::vector<double>& x, const std::vector<double>& y,
                       double period_min, double period_max) {
    if (x.size() != y.size() || x.size() < 6)
        throw std::invalid_argument("period estimate needs at least 6 points");
    if (!(period_min > 0.0) || !(period_max > period_min))
        throw std::invalid_argument("invalid period range");

    const int n = static_cast<int>(x.size());
    double best_period = period_min;
    double best_res = std::numeric_limits<double>::infinity();
    const int scan = 600;
    for (int s = 0; s <= scan; ++s) {
        const double period = period_min + (period_max - period_min) * s / scan;
        const double w = 2.0 * std::numbers::pi / period;
        Eigen::MatrixXd basis(n, 4);
        Eigen::VectorXd rhs(n);
        for (int i = 0; i < n; ++i) {
            basis(i, 0) = std::cos(w * x[i]);
            basis(i, 1) = std::sin(w * x[i]);
            basis(i, 2) = 1.0;
            basis(i, 3) = x[i];
            rhs(i) = y[i];
        }
        const Eigen::VectorXd coef = basis.colPivHouseholderQr().solve(rhs);
        const double res = (basis * coef - rhs).squaredNorm();
        if (res < best_res) {
            best_res = res;
            best_period = period;
        }
    }
    return best_period;
}

}  // namespace superatom

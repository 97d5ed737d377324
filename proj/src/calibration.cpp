#include "superatom/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "superatom/four_level.hpp"
#include "superatom/rng.hpp"

namespace superatom {

namespace {

struct BinData {
    std::vector<double> times;
    std::vector<double> rates;
    std::vector<double> weights;
    std::vector<bool> in_pulse;
};

BinData collect_bins(const PhotonTrace& trace, const PulseShape& pulse) {
    BinData bins;
    bins.times.reserve(trace.size());
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const double t = trace.bin_center(i);
        bins.times.push_back(t);
        bins.rates.push_back(trace.rates[i]);
        double w = 1.0;
        if (trace.has_counts()) {
            const double scale = trace.bin_width(i) *
                                 static_cast<double>(trace.n_measurements) *
                                 trace.detection_efficiency;
            w = scale * scale / static_cast<double>(std::max<long long>(trace.counts[i], 1));
        }
        bins.weights.push_back(w);
        bins.in_pulse.push_back(t < pulse.end_time);
    }
    return bins;
}

// Faster tolerance for the inner optimisation loop; the quoted fit is
// re-evaluated at full tolerance at the end.
PropagateOptions loss_propagate_options() {
    PropagateOptions opts;
    opts.rtol = 1e-7;
    opts.atol = 1e-9;
    opts.check_invariants = false;
    return opts;
}

class DatasetLoss {
public:
    DatasetLoss(const CalibrationDataset& dataset, const CalibrationSettings& settings)
        : dataset_(dataset), settings_(settings) {
        for (std::size_t k = 0; k < dataset.traces.size(); ++k)
            bins_.push_back(collect_bins(dataset.traces[k], dataset.pulses[k]));
    }

    // Quadratic loss of the model against every bin of every trace.
    // Regions: 0 = all bins, 1 = in-pulse only, 2 = post-pulse only.
    double evaluate(const EffectiveParams& eff, int region = 0) const {
        double loss = 0.0;
        for (std::size_t k = 0; k < bins_.size(); ++k)
            loss += trace_loss(eff, k, region);
        return loss;
    }

    Eigen::VectorXd residuals(const EffectiveParams& eff) const {
        std::size_t total = 0;
        for (const auto& b : bins_) total += b.times.size();
        Eigen::VectorXd res(total);
        std::size_t at = 0;
        for (std::size_t k = 0; k < bins_.size(); ++k) {
            const auto& b = bins_[k];
            const std::vector<double> model =
                model_rates_onto(eff, dataset_.pulses[k], b.times);
            for (std::size_t i = 0; i < b.times.size(); ++i) {
                const double w = bin_weight(b, i);
                res(at++) = std::sqrt(w) * (model[i] - b.rates[i]);
            }
        }
        return res;
    }

    std::size_t n_bins() const {
        std::size_t total = 0;
        for (const auto& b : bins_) total += b.times.size();
        return total;
    }

private:
    double bin_weight(const BinData& b, std::size_t i) const {
        double w = b.weights[i];
        if (b.in_pulse[i]) w *= settings_.pulse_weight;
        return w;
    }

    std::vector<double> model_rates_onto(const EffectiveParams& eff,
                                         const PulseShape& pulse,
                                         const std::vector<double>& times) const {
        return model_rates_at_impl(eff, pulse, times, loss_propagate_options());
    }

    double trace_loss(const EffectiveParams& eff, std::size_t k, int region) const {
        const auto& b = bins_[k];
        const std::vector<double> model = model_rates_onto(eff, dataset_.pulses[k], b.times);
        double loss = 0.0;
        for (std::size_t i = 0; i < b.times.size(); ++i) {
            if (region == 1 && !b.in_pulse[i]) continue;
            if (region == 2 && b.in_pulse[i]) continue;
            const double d = model[i] - b.rates[i];
            loss += bin_weight(b, i) * d * d;
        }
        return loss;
    }

public:
    static std::vector<double> model_rates_at_impl(const EffectiveParams& eff,
                                                   const PulseShape& shape,
                                                   const std::vector<double>& times,
                                                   const PropagateOptions& opts) {
        if (times.empty()) return {};
        if (times.front() > shape.start_time())
            throw std::invalid_argument("trace must start at or before the pulse");
        const LindbladSystem sys = build_system(eff, shape);
        Propagation prop = propagate(sys, pure_state_density(4, G), times, opts);
        std::vector<double> rates(times.size());
        for (std::size_t i = 0; i < times.size(); ++i)
            rates[i] = std::max(
                forward_rate(prop.states[i], eff, pulse_rate(shape, times[i])), 0.0);
        return rates;
    }

private:
    const CalibrationDataset& dataset_;
    const CalibrationSettings& settings_;
    std::vector<BinData> bins_;
};

EffectiveParams make_eff(double kappa, double varkappa, double gamma_d,
                         const CalibrationDataset& d) {
    EffectiveParams eff;
    eff.kappa = kappa;
    eff.varkappa = varkappa;
    eff.gamma_d = gamma_d;
    eff.gamma_raman = d.gamma_raman;
    eff.r_p = d.r_p;
    return eff;
}

double stage1_kappa(const DatasetLoss& loss, const CalibrationDataset& dataset,
                    const CalibrationSettings& s) {
    // varkappa = 0 against the in-pulse bins; gamma_d rides along unless
    // fixed so the absorption depth can be matched.
    const bool fit_gd = !s.fix_gamma_d;
    const int n = fit_gd ? 2 : 1;
    Bounds bounds;
    bounds.lower.resize(n);
    bounds.upper.resize(n);
    bounds.lower(0) = s.kappa_lo;
    bounds.upper(0) = s.kappa_hi;
    if (fit_gd) {
        bounds.lower(1) = s.gamma_d_lo;
        bounds.upper(1) = s.gamma_d_hi;
    }
    auto f = [&](const Eigen::VectorXd& x) {
        const double gd = fit_gd ? x(1) : s.gamma_d_value;
        return loss.evaluate(make_eff(x(0), 0.0, gd, dataset), 1);
    };

    Rng rng(s.seed ^ 0x5f375a86ULL);
    SimplexResult best;
    best.value = std::numeric_limits<double>::infinity();
    for (int start = 0; start < std::max(1, s.multistarts / 2); ++start) {
        Eigen::VectorXd x0(n), step(n);
        x0(0) = s.kappa_lo * std::pow(s.kappa_hi / s.kappa_lo, rng.uniform());
        step(0) = 0.3 * x0(0);
        if (fit_gd) {
            x0(1) = s.gamma_d_lo * std::pow(s.gamma_d_hi / s.gamma_d_lo, rng.uniform());
            step(1) = 0.3 * x0(1);
        }
        SimplexOptions so;
        so.max_iterations = 200;
        const SimplexResult r = nelder_mead(f, x0, step, bounds, so);
        if (r.value < best.value) best = r;
    }
    return best.x(0);
}

}  // namespace

void CalibrationDataset::validate() const {
    if (traces.empty()) throw std::invalid_argument("dataset holds no traces");
    if (traces.size() != pulses.size())
        throw std::invalid_argument("every trace needs its pulse shape");
    if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
    if (gamma_raman < 0.0) throw std::invalid_argument("gamma_raman must be non-negative");
    for (const auto& t : traces) t.validate();
}

std::vector<double> model_rates_at(const EffectiveParams& eff, const PulseShape& shape,
                                   const std::vector<double>& times) {
    return DatasetLoss::model_rates_at_impl(eff, shape, times, PropagateOptions{});
}

CalibrationResult fit_model_to_traces(const CalibrationDataset& dataset,
                                      const CalibrationSettings& settings) {
    dataset.validate();
    DatasetLoss loss(dataset, settings);

    CalibrationResult result;
    result.stage1_kappa = stage1_kappa(loss, dataset, settings);

    const bool fit_gd = !settings.fix_gamma_d;
    const int n = fit_gd ? 3 : 2;
    if (loss.n_bins() < static_cast<std::size_t>(n))
        throw std::invalid_argument("fewer residuals than free parameters");
    Bounds bounds;
    bounds.lower.resize(n);
    bounds.upper.resize(n);
    bounds.lower(0) = settings.kappa_lo;
    bounds.upper(0) = settings.kappa_hi;
    bounds.lower(1) = settings.varkappa_lo;
    bounds.upper(1) = settings.varkappa_hi;
    if (fit_gd) {
        bounds.lower(2) = settings.gamma_d_lo;
        bounds.upper(2) = settings.gamma_d_hi;
    }

    auto unpack = [&](const Eigen::VectorXd& x) {
        const double gd = fit_gd ? x(2) : settings.gamma_d_value;
        return make_eff(x(0), x(1), gd, dataset);
    };
    auto f = [&](const Eigen::VectorXd& x) { return loss.evaluate(unpack(x)); };

    Rng rng(settings.seed);
    SimplexResult best;
    best.value = std::numeric_limits<double>::infinity();
    for (int start = 0; start < settings.multistarts; ++start) {
        Eigen::VectorXd x0(n), step(n);
        if (start == 0) {
            x0(0) = result.stage1_kappa;
            x0(1) = 0.5 * result.stage1_kappa;
            if (fit_gd) x0(2) = 0.5;
        } else {
            x0(0) = settings.kappa_lo *
                    std::pow(settings.kappa_hi / settings.kappa_lo, rng.uniform());
            x0(1) = settings.varkappa_lo +
                    (settings.varkappa_hi - settings.varkappa_lo) * rng.uniform();
            if (fit_gd)
                x0(2) = settings.gamma_d_lo *
                        std::pow(settings.gamma_d_hi / settings.gamma_d_lo, rng.uniform());
        }
        for (int i = 0; i < n; ++i) step(i) = 0.25 * std::max(0.05, std::abs(x0(i)));
        const SimplexResult r = nelder_mead(f, x0, step, bounds);
        result.start_losses.push_back(r.value);
        if (r.value < best.value) best = r;
    }

    auto residuals = [&](const Eigen::VectorXd& x) { return loss.residuals(unpack(x)); };
    GaussNewtonResult polish = gauss_newton(residuals, best.x, bounds);

    Eigen::VectorXd x = polish.loss <= best.value ? polish.x : best.x;
    double final_loss = std::min(polish.loss, best.value);

    if (fit_gd && settings.post_pulse_gamma_d_adjust) {
        Bounds gd_bounds;
        gd_bounds.lower.resize(1);
        gd_bounds.upper.resize(1);
        gd_bounds.lower(0) = settings.gamma_d_lo;
        gd_bounds.upper(0) = settings.gamma_d_hi;
        const double kap = x(0), vk = x(1);
        auto f_gd = [&](const Eigen::VectorXd& g) {
            return loss.evaluate(make_eff(kap, vk, g(0), dataset), 2);
        };
        Eigen::VectorXd g0(1), gstep(1);
        g0(0) = x(2);
        gstep(0) = 0.1 * std::max(0.05, x(2));
        SimplexOptions so;
        so.max_iterations = 120;
        const SimplexResult gd_fit = nelder_mead(f_gd, g0, gstep, gd_bounds, so);
        x(2) = gd_fit.x(0);
        final_loss = loss.evaluate(unpack(x));
    }

    result.kappa = x(0);
    result.varkappa = x(1);
    result.gamma_d = fit_gd ? x(2) : settings.gamma_d_value;
    result.loss = final_loss;
    result.covariance = polish.covariance;
    result.free_names = fit_gd ? std::vector<std::string>{"kappa", "varkappa", "gamma_d"}
                               : std::vector<std::string>{"kappa", "varkappa"};
    result.converged = polish.converged || best.converged;
    for (int i = 0; i < static_cast<int>(bounds.lower.size()); ++i)
        if (bounds.pinned(x.head(bounds.lower.size()), i))
            result.pinned.push_back(result.free_names[i]);
    return result;
}

JointResult joint_fit(const std::vector<CalibrationDataset>& datasets,
                      const CalibrationSettings& settings, bool compare_with_independent) {
    if (datasets.empty()) throw std::invalid_argument("no datasets");
    for (const auto& d : datasets) d.validate();

    const std::size_t nd = datasets.size();
    std::vector<DatasetLoss> losses;
    losses.reserve(nd);
    for (const auto& d : datasets) losses.emplace_back(d, settings);

    JointResult result;
    result.delta_ref = datasets[0].delta;

    // Unconstrained per-dataset kappa estimates, kept as the 1/delta^2
    // verification record and used to seed the joint fit.
    for (std::size_t d = 0; d < nd; ++d)
        result.stage1_kappas.push_back(stage1_kappa(losses[d], datasets[d], settings));

    // Parameters: kappa_ref, gamma_d, varkappa per dataset.
    const int n = 2 + static_cast<int>(nd);
    Bounds bounds;
    bounds.lower.resize(n);
    bounds.upper.resize(n);
    bounds.lower(0) = settings.kappa_lo;
    bounds.upper(0) = settings.kappa_hi;
    bounds.lower(1) = settings.gamma_d_lo;
    bounds.upper(1) = settings.gamma_d_hi;
    for (std::size_t d = 0; d < nd; ++d) {
        bounds.lower(2 + d) = settings.varkappa_lo;
        bounds.upper(2 + d) = settings.varkappa_hi;
    }

    auto kappa_for = [&](double kappa_ref, std::size_t d) {
        const double ratio = result.delta_ref / datasets[d].delta;
        return kappa_ref * ratio * ratio;
    };
    auto f = [&](const Eigen::VectorXd& x) {
        double total = 0.0;
        for (std::size_t d = 0; d < nd; ++d)
            total += losses[d].evaluate(
                make_eff(kappa_for(x(0), d), x(2 + d), x(1), datasets[d]));
        return total;
    };

    double kappa_seed = 0.0;
    for (std::size_t d = 0; d < nd; ++d) {
        const double ratio = datasets[d].delta / result.delta_ref;
        kappa_seed += result.stage1_kappas[d] * ratio * ratio;
    }
    kappa_seed /= static_cast<double>(nd);

    Rng rng(settings.seed ^ 0xabcdef12345ULL);
    SimplexResult best;
    best.value = std::numeric_limits<double>::infinity();
    for (int start = 0; start < settings.multistarts; ++start) {
        Eigen::VectorXd x0(n), step(n);
        if (start == 0) {
            x0(0) = std::clamp(kappa_seed, settings.kappa_lo, settings.kappa_hi);
            x0(1) = 0.5;
            for (std::size_t d = 0; d < nd; ++d) x0(2 + d) = 0.5 * x0(0);
        } else {
            x0(0) = settings.kappa_lo *
                    std::pow(settings.kappa_hi / settings.kappa_lo, rng.uniform());
            x0(1) = settings.gamma_d_lo *
                    std::pow(settings.gamma_d_hi / settings.gamma_d_lo, rng.uniform());
            for (std::size_t d = 0; d < nd; ++d)
                x0(2 + d) = settings.varkappa_lo +
                            (settings.varkappa_hi - settings.varkappa_lo) * rng.uniform();
        }
        for (int i = 0; i < n; ++i) step(i) = 0.25 * std::max(0.05, std::abs(x0(i)));
        const SimplexResult r = nelder_mead(f, x0, step, bounds);
        result.start_losses.push_back(r.value);
        if (r.value < best.value) best = r;
    }

    auto residuals = [&](const Eigen::VectorXd& x) {
        std::vector<Eigen::VectorXd> parts;
        std::size_t total = 0;
        for (std::size_t d = 0; d < nd; ++d) {
            parts.push_back(losses[d].residuals(
                make_eff(kappa_for(x(0), d), x(2 + d), x(1), datasets[d])));
            total += parts.back().size();
        }
        Eigen::VectorXd res(total);
        std::size_t at = 0;
        for (const auto& p : parts) {
            res.segment(at, p.size()) = p;
            at += p.size();
        }
        return res;
    };
    GaussNewtonResult polish = gauss_newton(residuals, best.x, bounds);
    const Eigen::VectorXd x = polish.loss <= best.value ? polish.x : best.x;

    result.kappa_ref = x(0);
    result.gamma_d = x(1);
    for (std::size_t d = 0; d < nd; ++d) {
        result.kappas.push_back(kappa_for(x(0), d));
        result.varkappas.push_back(x(2 + d));
    }
    result.loss = std::min(polish.loss, best.value);
    result.covariance = polish.covariance;
    result.converged = polish.converged || best.converged;
    if (bounds.pinned(x, 0)) result.pinned.push_back("kappa_ref");
    if (bounds.pinned(x, 1)) result.pinned.push_back("gamma_d");
    for (std::size_t d = 0; d < nd; ++d)
        if (bounds.pinned(x, 2 + static_cast<int>(d)))
            result.pinned.push_back("varkappa_" + std::to_string(d));

    if (compare_with_independent) {
        result.independent_loss_sum = 0.0;
        for (std::size_t d = 0; d < nd; ++d) {
            CalibrationResult single = fit_model_to_traces(datasets[d], settings);
            result.independent_loss_sum += single.loss;
        }
        result.consistency_ratio =
            result.independent_loss_sum > 0.0 ? result.loss / result.independent_loss_sum
                                              : 1.0;
        result.inconsistent = result.consistency_ratio > 1.25;
    }
    return result;
}

ScalingFit kappa_scaling(const std::vector<double>& kappas,
                         const std::vector<double>& varkappas,
                         const std::vector<double>& weights) {
    const LinearFit fit = linear_weighted_fit(kappas, varkappas, weights);
    ScalingFit out;
    out.slope = fit.slope;
    out.intercept = fit.intercept;
    out.slope_err = fit.slope_err;
    out.r_squared = fit.r_squared;
    return out;
}

}  // namespace superatom

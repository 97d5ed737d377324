#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <vector>

#include "superatom/calibration.hpp"
#include "superatom/four_level.hpp"
#include "superatom/units.hpp"

using namespace superatom;

namespace {

// Synthetic dataset from known effective parameters.
CalibrationDataset make_dataset(const EffectiveParams& truth, double delta,
                                const std::vector<double>& lengths, long long n_meas,
                                std::uint64_t seed, double bin_width = 0.04) {
    CalibrationDataset ds;
    ds.delta = delta;
    ds.r_p = truth.r_p;
    ds.gamma_raman = truth.gamma_raman;
    int k = 0;
    for (double len : lengths) {
        const PulseShape shape = make_pulse(len, 0.2, truth.r_p, 0.0);
        const SimulatedTrace sim =
            simulate_trace(truth, shape, {shape.start_time() - 0.1, 5.0, bin_width});
        PhotonTrace trace = sim.trace;
        if (n_meas > 0) trace = poissonize(trace, n_meas, 0.35, seed + 100 * k);
        ds.traces.push_back(std::move(trace));
        ds.pulses.push_back(shape);
        ++k;
    }
    return ds;
}

CalibrationSettings fast_settings(std::uint64_t seed) {
    CalibrationSettings s;
    s.multistarts = 4;
    s.seed = seed;
    return s;
}

}  // namespace

TEST_SUITE("calibration") {

TEST_CASE("model rates demand coverage of the pulse") {
    EffectiveParams eff{0.46, 0.31, 0.15, 0.85, 15.0};
    const PulseShape shape = make_pulse(1.0, 0.2, 15.0, 0.0);
    CHECK_THROWS_AS(model_rates_at(eff, shape, {shape.start_time() + 0.5, 1.0}),
                    std::invalid_argument);
    const auto rates = model_rates_at(eff, shape, {-1.05, -0.5, 0.5, 1.0});
    CHECK(rates.size() == 4);
    CHECK(rates[2] > 0.0);
}

TEST_CASE("noiseless round trip recovers the generating parameters") {
    EffectiveParams truth{0.46, 0.31, 0.15, 0.85, 15.0};
    const CalibrationDataset ds =
        make_dataset(truth, angular_from_mhz(100.0), {0.5, 0.9, 1.4, 2.2, 3.2}, 0, 0);
    const CalibrationResult fit = fit_model_to_traces(ds, fast_settings(3));
    CHECK(fit.kappa == doctest::Approx(truth.kappa).epsilon(0.03));
    CHECK(fit.varkappa == doctest::Approx(truth.varkappa).epsilon(0.10));
    CHECK(fit.gamma_d == doctest::Approx(truth.gamma_d).epsilon(0.05));
    CHECK(fit.stage1_kappa == doctest::Approx(truth.kappa).epsilon(0.15));
}

TEST_CASE("a varkappa-free truth fits back to zero coupling") {
    EffectiveParams truth{0.46, 0.0, 0.15, 0.85, 15.0};
    const CalibrationDataset ds = make_dataset(truth, angular_from_mhz(100.0),
                                               {0.5, 1.0, 1.8, 2.8}, 2000000, 11);
    const CalibrationResult fit = fit_model_to_traces(ds, fast_settings(7));
    const int vk_index = 1;
    const double err = std::sqrt(std::max(fit.covariance(vk_index, vk_index), 1e-12));
    CHECK(fit.varkappa < std::max(0.05, 2.0 * err));
}

TEST_CASE("joint fit shares gamma_d and enforces the detuning scaling") {
    const std::vector<EffectiveParams> truths = {
        {0.46, 0.31, 0.15, 0.85, 15.0},
        {0.32, 0.32, 0.10, 0.85, 15.0},
        {0.21, 0.31, 0.064, 0.85, 15.0},
    };
    const std::vector<double> deltas = {angular_from_mhz(100.0), angular_from_mhz(125.0),
                                        angular_from_mhz(150.0)};
    std::vector<CalibrationDataset> datasets;
    for (std::size_t d = 0; d < truths.size(); ++d)
        datasets.push_back(
            make_dataset(truths[d], deltas[d], {0.6, 1.1, 1.9, 3.0}, 0, 17 * (d + 1)));
    const JointResult joint = joint_fit(datasets, fast_settings(5));
    CHECK(joint.gamma_d == doctest::Approx(0.85).epsilon(0.10));
    for (std::size_t d = 0; d < truths.size(); ++d) {
        CHECK(joint.kappas[d] == doctest::Approx(truths[d].kappa).epsilon(0.08));
        // The constraint kappa_d = kappa_ref (delta_ref/delta_d)^2 holds exactly.
        const double ratio = deltas[0] / deltas[d];
        CHECK(joint.kappas[d] ==
              doctest::Approx(joint.kappa_ref * ratio * ratio).epsilon(1e-12));
    }
    // Unconstrained stage-1 estimates already follow the scaling law.
    for (std::size_t d = 0; d < truths.size(); ++d) {
        const double ratio = deltas[0] / deltas[d];
        CHECK(joint.stage1_kappas[d] ==
              doctest::Approx(joint.stage1_kappas[0] * ratio * ratio).epsilon(0.15));
    }
}

TEST_CASE("single dataset joint fit reduces to the plain fit") {
    EffectiveParams truth{0.40, 0.25, 0.12, 0.7, 15.0};
    const CalibrationDataset ds =
        make_dataset(truth, angular_from_mhz(100.0), {0.7, 1.3, 2.4}, 0, 0);
    const JointResult joint = joint_fit({ds}, fast_settings(9));
    CHECK(joint.kappas.size() == 1);
    CHECK(joint.kappa_ref == doctest::Approx(joint.kappas[0]));
    CHECK(joint.kappas[0] == doctest::Approx(truth.kappa).epsilon(0.05));
    CHECK(joint.gamma_d == doctest::Approx(truth.gamma_d).epsilon(0.10));
}

TEST_CASE("inconsistent dephasing across datasets is flagged") {
    EffectiveParams a{0.46, 0.31, 0.15, 0.4, 15.0};
    EffectiveParams b{0.32, 0.32, 0.10, 1.6, 15.0};
    std::vector<CalibrationDataset> datasets = {
        make_dataset(a, angular_from_mhz(100.0), {0.6, 1.2, 2.2}, 0, 0),
        make_dataset(b, angular_from_mhz(125.0), {0.6, 1.2, 2.2}, 0, 0)};
    const JointResult joint = joint_fit(datasets, fast_settings(13), true);
    CHECK(joint.consistency_ratio > 1.25);
    CHECK(joint.inconsistent);

    // Consistent data stays unflagged.
    EffectiveParams b2 = b;
    b2.gamma_d = a.gamma_d;
    datasets[1] = make_dataset(b2, angular_from_mhz(125.0), {0.6, 1.2, 2.2}, 0, 0);
    const JointResult ok = joint_fit(datasets, fast_settings(13), true);
    CHECK_FALSE(ok.inconsistent);
}

TEST_CASE("scaling regression") {
    std::vector<double> kappas = {0.25, 0.45, 0.7, 1.0};
    std::vector<double> varkappas;
    for (double k : kappas) varkappas.push_back(0.7 * k);
    const ScalingFit exact = kappa_scaling(kappas, varkappas);
    CHECK(exact.slope == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(exact.r_squared == doctest::Approx(1.0).epsilon(1e-12));

    std::vector<double> constant = {0.31, 0.31, 0.31, 0.31};
    const ScalingFit flat = kappa_scaling(kappas, constant);
    CHECK(std::abs(flat.slope) < 1e-12);

    CHECK_THROWS_AS(kappa_scaling({0.3, 0.3, 0.3}, {0.1, 0.2, 0.3}),
                    std::invalid_argument);
    CHECK_THROWS_AS(kappa_scaling({0.3, 0.4}, {0.1, 0.2}), std::invalid_argument);
}

TEST_CASE("reproducibility under identical seeds") {
    EffectiveParams truth{0.46, 0.31, 0.15, 0.85, 15.0};
    const CalibrationDataset ds = make_dataset(truth, angular_from_mhz(100.0),
                                               {0.6, 1.2, 2.0}, 1000000, 23);
    const CalibrationResult a = fit_model_to_traces(ds, fast_settings(31));
    const CalibrationResult b = fit_model_to_traces(ds, fast_settings(31));
    CHECK(a.kappa == b.kappa);
    CHECK(a.varkappa == b.varkappa);
    CHECK(a.gamma_d == b.gamma_d);
    CHECK(a.loss == b.loss);
}

}  // TEST_SUITE

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "superatom/optim.hpp"
#include "superatom/params.hpp"
#include "superatom/pulse.hpp"
#include "superatom/trace.hpp"

namespace superatom {

// Traces recorded over several pulse lengths at one lab setting. The Raman
// rate is fixed from the lab parameters; kappa, varkappa and gamma_d are
// the calibration targets. delta enters only through the kappa ~ 1/delta^2
// constraint of joint fits.
struct CalibrationDataset {
    std::vector<PhotonTrace> traces;
    std::vector<PulseShape> pulses;  // one per trace
    double delta = 1.0;              // rad/us
    double r_p = 0.0;                // photons/us
    double gamma_raman = 0.0;        // 1/us

    void validate() const;
};

struct CalibrationSettings {
    double kappa_lo = 0.05, kappa_hi = 2.0;
    double varkappa_lo = 0.0, varkappa_hi = 2.0;
    double gamma_d_lo = 0.05, gamma_d_hi = 3.0;
    int multistarts = 8;
    bool fix_gamma_d = false;      // waveguide fits: no dephasing channel
    double gamma_d_value = 0.0;
    // Refit gamma_d on the post-pulse bins alone after the global fit, which
    // counteracts the pulse-region dominance of the full loss.
    bool post_pulse_gamma_d_adjust = true;
    // Extra multiplier on in-pulse bin weights (1 keeps plain chi^2).
    double pulse_weight = 1.0;
    std::uint64_t seed = 1;
    int n_threads = 0;
};

struct CalibrationResult {
    double kappa = 0.0;
    double varkappa = 0.0;
    double gamma_d = 0.0;
    double loss = 0.0;
    double stage1_kappa = 0.0;
    Eigen::MatrixXd covariance;  // over the free parameters, fit order
    std::vector<std::string> free_names;
    std::vector<double> start_losses;
    std::vector<std::string> pinned;  // parameters stuck at a bound
    bool converged = false;
};

// Two-stage calibration: stage 1 fits kappa with varkappa = 0 against the
// in-pulse bins; stage 2 frees (kappa, varkappa, gamma_d) against the full
// traces with a simplex multi-start followed by a Gauss-Newton polish.
CalibrationResult fit_model_to_traces(const CalibrationDataset& dataset,
                                      const CalibrationSettings& settings = {});

struct JointResult {
    double kappa_ref = 0.0;  // kappa at the first dataset's delta
    double delta_ref = 0.0;
    std::vector<double> kappas;          // per dataset, constrained by 1/delta^2
    std::vector<double> stage1_kappas;   // unconstrained per-dataset estimates
    double gamma_d = 0.0;
    std::vector<double> varkappas;
    double loss = 0.0;
    Eigen::MatrixXd covariance;
    std::vector<double> start_losses;
    std::vector<std::string> pinned;
    bool converged = false;
    // Filled when compare_with_independent is set: joint loss relative to
    // the sum of unconstrained per-dataset fits.
    double independent_loss_sum = 0.0;
    double consistency_ratio = 0.0;
    bool inconsistent = false;
};

// Joint fit over datasets at different detunings: one shared gamma_d, a
// single kappa_ref scaled by (delta_ref/delta)^2, and one varkappa per
// dataset.
JointResult joint_fit(const std::vector<CalibrationDataset>& datasets,
                      const CalibrationSettings& settings = {},
                      bool compare_with_independent = false);

struct ScalingFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_err = 0.0;
    double r_squared = 0.0;
};

// Weighted linear regression of fitted varkappa against kappa.
ScalingFit kappa_scaling(const std::vector<double>& kappas,
                         const std::vector<double>& varkappas,
                         const std::vector<double>& weights = {});

// Model forward rate evaluated at arbitrary bin centers, shared by the
// calibration loss and trace synthesis. Times must start at or before the
// pulse support.
std::vector<double> model_rates_at(const EffectiveParams& eff, const PulseShape& shape,
                                   const std::vector<double>& times);

}  // namespace superatom

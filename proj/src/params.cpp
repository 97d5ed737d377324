#include "superatom/params.hpp"

#include <cmath>
#include <stdexcept>

namespace superatom {

void ExperimentParams::validate() const {
    if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
    if (!(omega_c > 0.0)) throw std::invalid_argument("omega_c must be positive");
    if (!(gamma_e > 0.0)) throw std::invalid_argument("gamma_e must be positive");
    if (n_atoms < 1.0) throw std::invalid_argument("n_atoms must be at least 1");
    if (r_p < 0.0) throw std::invalid_argument("r_p must be non-negative");
}

void EffectiveParams::validate() const {
    if (kappa < 0.0) throw std::invalid_argument("kappa must be non-negative");
    if (gamma_raman < 0.0) throw std::invalid_argument("gamma_raman must be non-negative");
    if (gamma_d < 0.0) throw std::invalid_argument("gamma_d must be non-negative");
    if (r_p < 0.0) throw std::invalid_argument("r_p must be non-negative");
}

EffectiveParams derive_effective(const ExperimentParams& params) {
    params.validate();
    const double ratio = params.omega_c / (2.0 * params.delta);
    EffectiveParams eff;
    eff.gamma_raman = params.gamma_e * ratio * ratio;
    eff.kappa = params.n_atoms * params.g0 * params.g0 * ratio * ratio / 4.0;
    eff.varkappa = 0.0;
    eff.gamma_d = 0.0;
    eff.r_p = params.r_p;
    return eff;
}

double collective_rabi(const EffectiveParams& eff) {
    if (eff.kappa < 0.0 || eff.r_p < 0.0)
        throw std::invalid_argument("kappa and r_p must be non-negative");
    return 2.0 * std::sqrt(eff.kappa * eff.r_p);
}

const std::vector<ReferenceSet>& reference_sets() {
    static const std::vector<ReferenceSet> sets = {
        {15.0, 100.0, {0.46, 0.31, 0.15, 0.85, 15.0}},
        {15.0, 125.0, {0.32, 0.32, 0.10, 0.85, 15.0}},
        {15.0, 150.0, {0.21, 0.31, 0.064, 0.85, 15.0}},
        {6.7, 100.0, {0.47, 0.34, 0.15, 0.85, 6.7}},
    };
    return sets;
}

}  // namespace superatom

#pragma once

#include "superatom/lindblad.hpp"
#include "superatom/params.hpp"
#include "superatom/pulse.hpp"
#include "superatom/trace.hpp"

namespace superatom {

// Effective superatom basis. G is the collective ground state, W the
// radiating bright state, C the coherently coupled subradiant state and D
// the dark reservoir populated by dephasing.
enum FourLevel : Eigen::Index { G = 0, W = 1, C = 2, D = 3 };

// |a><b| on the four-level space.
Matrix level_op(FourLevel a, FourLevel b);

// Assembles the effective model in the frame rotating at two-photon
// resonance:
//   H(t) = sqrt(kappa R_p(t)) (|W><G| + |G><W|) + varkappa (|W><C| + |C><W|)
//          + detuning (|W><W| + |C><C|)
// with jumps (kappa+Gamma, sigma_GW), (gamma_d, sigma_DW), (Gamma, sigma_GD),
// (gamma_d, sigma_DC), (Gamma, sigma_GC). The bright-state drive element is
// half the collective Rabi frequency 2 sqrt(kappa R_p), so populations cycle
// at 2 pi / Omega_col.
LindbladSystem build_system(const EffectiveParams& eff, const PulseShape& shape,
                            double detuning = 0.0);

// Forward photon rate from the input-output composition
//   r = R_p + kappa rho_WW + 2 sqrt(kappa R_p) Im rho_WG.
// The coherence sign is fixed so that weak resonant driving transmits less
// than R_p; with the drive off this is exactly kappa rho_WW.
double forward_rate(const Matrix& rho, const EffectiveParams& eff, double r_p_now);

struct GridSpec {
    double t_start;           // us, at or before the pulse start
    double t_end;             // us, end of the post-pulse observation window
    double bin_width = 0.02;  // us
};

struct SimulatedTrace {
    PhotonTrace trace;
    std::vector<double> times;   // bin centers
    std::vector<Matrix> states;  // density matrix at each bin center
    PropagationDiagnostics diagnostics;
};

// Propagates from |G><G| across the grid and evaluates the forward rate at
// bin centers.
SimulatedTrace simulate_trace(const EffectiveParams& eff, const PulseShape& shape,
                              const GridSpec& grid, const PropagateOptions& opts = {});

}  // namespace superatom

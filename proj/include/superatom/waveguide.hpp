#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "superatom/lindblad.hpp"
#include "superatom/pulse.hpp"

namespace superatom {

struct ThermalMotion {
    double spin_wavelength = 1.0;  // um
    double velocity_scale = 0.0;   // um/us, sigma of the 1D velocity draw
};

// N emitters chirally coupled to one waveguide mode, restricted to the
// single-excitation sector. State index 0 is the collective ground state,
// 1..N the singly excited atoms in input order.
struct WaveguideConfig {
    int n_atoms = 1;
    double kappa = 0.0;        // bright-state waveguide decay (1/us)
    double gamma_raman = 0.0;  // per-atom decay out of the sector (1/us)
    std::vector<double> positions;  // um, strictly distinct
    double k0 = 1.0;                // rad/um
    std::function<double(double)> drive_amplitude;  // sqrt(photons/us)
    std::vector<double> detunings;  // per-atom diagonal (rad/us); empty = 0
    std::optional<ThermalMotion> thermal;

    void validate() const;
};

// Deterministic equally spaced positions 0, 1, ..., n-1. Only the ordering
// enters the dynamics.
std::vector<double> ordered_positions(int n);
std::vector<double> random_positions(int n, std::uint64_t seed);

// Drive amplitude following the square root of the instantaneous pulse
// rate, so its squared modulus is the photon rate.
std::function<double(double)> drive_from_pulse(const PulseShape& shape);

// Excited-sector exchange Hamiltonian:
//   H[l,j] = (i kappa / 2N) sign(k0 (x_l - x_j)).
Matrix build_exchange_position(const WaveguideConfig& config);

struct EigenmodeBasis {
    Vector couplings;   // kappa_j = kappa (i + cot(pi j / N)) / 2N, j = 1..N-1
    Eigen::VectorXd energies;  // eps_j = -kappa cot(pi j / N) / 2N
    Matrix transform;   // columns: bright state, then subradiant modes C_j
};

// Bright/subradiant decomposition of the ordered-chain exchange
// Hamiltonian. Couplings and energies follow the closed forms; the basis
// transform is obtained by diagonalising the subradiant block, with mode
// phases aligned to the analytic couplings.
EigenmodeBasis build_exchange_eigenmode(int n_atoms, double kappa);

struct WaveguidePropagation {
    std::vector<double> times;
    std::vector<Matrix> states;  // dim (N+1) density matrices
    PropagationDiagnostics diagnostics;
};

// Full master-equation evolution from the collective ground state. The
// right-hand side uses the block structure of the single-excitation sector
// (cost O(N^2) per evaluation), so dense storage carries to N ~ 2000.
WaveguidePropagation propagate_density(const WaveguideConfig& config,
                                       std::span<const double> grid,
                                       const PropagateOptions& opts = {});

struct TrajectoryOptions {
    double max_step = 2e-3;  // us, fixed internal RK4 step bound
    int n_threads = 0;       // 0 = hardware concurrency
    // Time after which the drive stays zero; lets finished trajectories be
    // skipped once they have collapsed to the ground state.
    double drive_off_time = std::numeric_limits<double>::infinity();
};

struct TrajectoryEnsemble {
    std::vector<double> times;
    std::vector<double> bright_population;   // <P_W>
    std::vector<double> excited_population;  // total single-excitation weight
    std::vector<double> coherence_im;        // Im <W|rho|G>
    std::vector<double> bright_stderr;       // standard error of <P_W>
    long long n_trajectories = 0;
};

// Monte Carlo wavefunction unravelling: no-jump evolution under
// H - (i/2)(kappa |W><W| + Gamma P_exc), every jump projecting to |G>.
// The trajectory average is reduced in a fixed order, so results are
// bit-identical for a given seed regardless of thread count.
TrajectoryEnsemble propagate_trajectories(const WaveguideConfig& config,
                                          std::span<const double> grid, long long n_traj,
                                          std::uint64_t seed,
                                          const TrajectoryOptions& opts = {});

// Copy of the config with per-atom detunings 2 k_spin v_j, where
// k_spin = 2 pi / spin_wavelength and v_j ~ N(0, velocity_scale^2).
WaveguideConfig apply_thermal_detunings(const WaveguideConfig& config, std::uint64_t seed);

// Same input-output composition as the effective model's forward rate,
// with the bright-state projector: |alpha|^2 + kappa P_W + 2 sqrt(kappa)
// alpha Im<W|rho|G>. Reduces to kappa P_W once the drive is off.
double waveguide_emission(const Matrix& rho, const WaveguideConfig& config, double drive_now);
double waveguide_emission(double bright_population, double coherence_im,
                          const WaveguideConfig& config, double drive_now);

}  // namespace superatom

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace superatom {

using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

struct Jump {
    double rate = 0.0;  // 1/us
    Matrix op;
};

// Time-dependent master equation
//   drho/dt = -i [H(t), rho] + sum_k rate_k D[L_k] rho,
//   D[L] rho = L rho L^dag - (L^dag L rho + rho L^dag L) / 2.
// Immutable once built; shareable across concurrent propagations.
struct LindbladSystem {
    Eigen::Index dim = 0;
    std::function<Matrix(double)> hamiltonian;
    std::vector<Jump> jumps;

    void validate() const;
};

struct DensityDiagnostics {
    double trace_deviation = 0.0;   // |tr rho - 1|
    double hermiticity_dev = 0.0;   // max |rho - rho^dag| entry
    double min_eigenvalue = 0.0;
};

DensityDiagnostics check_density(const Matrix& rho);

// Maximally mixed-free helpers for building initial states.
Matrix pure_state_density(Eigen::Index dim, Eigen::Index level);

// Right-hand side of the master equation at time t.
Matrix rhs(const LindbladSystem& sys, const Matrix& rho, double t);

struct PropagateOptions {
    double rtol = 1e-8;
    double atol = 1e-10;
    double max_step = 0.05;      // us; also bounds how coarsely H(t) is sampled
    double min_step = 1e-12;     // us; underflow guard
    double trace_tol = 1e-8;
    double herm_tol = 1e-10;
    double positivity_tol = 1e-8;
    bool check_invariants = true;
    // Eigenvalue checks cost O(dim^3); run them every this many grid points.
    int positivity_stride = 16;
};

struct PropagationDiagnostics {
    double max_trace_drift = 0.0;
    double max_hermiticity_dev = 0.0;
    double min_eigenvalue = 1.0;
    double error_estimate = 0.0;  // accumulated local truncation error bound
    long accepted_steps = 0;
    long rejected_steps = 0;
};

struct Propagation {
    std::vector<Matrix> states;
    PropagationDiagnostics diagnostics;
};

// Embedded Dormand-Prince 5(4) with PI-free step control on an arbitrary
// matrix-valued ODE. Used by the master-equation propagator below and by
// the waveguide block propagator.
Propagation adaptive_propagate(const std::function<Matrix(const Matrix&, double)>& f,
                               const Matrix& y0, std::span<const double> grid,
                               const PropagateOptions& opts);

// Propagates rho0 through the grid times (strictly increasing). Aborts with
// a diagnostic when trace, hermiticity or positivity drift beyond tolerance.
Propagation propagate(const LindbladSystem& sys, const Matrix& rho0,
                      std::span<const double> grid, const PropagateOptions& opts = {});

// True when every entry of rho changes by less than tol across the trailing
// `window` states of the trajectory.
bool steady_state_reached(const std::vector<Matrix>& states, std::size_t window, double tol);

}  // namespace superatom

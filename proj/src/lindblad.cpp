#include "superatom/lindblad.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace superatom {

namespace {

const std::complex<double> kI{0.0, 1.0};

// Dormand-Prince 5(4) tableau, FSAL.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
// b - b_hat (5th minus embedded 4th order weights), k7 included.
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

double wrms_error(const Matrix& err, const Matrix& y0, const Matrix& y1, double atol,
                  double rtol) {
    double sum = 0.0;
    const auto n = err.size();
    for (Eigen::Index i = 0; i < n; ++i) {
        const double scale =
            atol + rtol * std::max(std::abs(y0.data()[i]), std::abs(y1.data()[i]));
        const double q = std::abs(err.data()[i]) / scale;
        sum += q * q;
    }
    return std::sqrt(sum / static_cast<double>(n));
}

}  // namespace

void LindbladSystem::validate() const {
    if (dim <= 0) throw std::invalid_argument("system dimension must be positive");
    if (!hamiltonian) throw std::invalid_argument("hamiltonian function missing");
    for (const auto& j : jumps) {
        if (j.rate < 0.0) throw std::invalid_argument("jump rates must be non-negative");
        if (j.op.rows() != dim || j.op.cols() != dim)
            throw std::invalid_argument("jump operator dimension mismatch");
    }
}

DensityDiagnostics check_density(const Matrix& rho) {
    DensityDiagnostics d;
    d.trace_deviation = std::abs(rho.trace() - std::complex<double>(1.0, 0.0));
    d.hermiticity_dev = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
    Eigen::SelfAdjointEigenSolver<Matrix> es(((rho + rho.adjoint()) / 2.0).eval(),
                                             Eigen::EigenvaluesOnly);
    d.min_eigenvalue = es.eigenvalues().minCoeff();
    return d;
}

Matrix pure_state_density(Eigen::Index dim, Eigen::Index level) {
    Matrix rho = Matrix::Zero(dim, dim);
    rho(level, level) = 1.0;
    return rho;
}

Matrix rhs(const LindbladSystem& sys, const Matrix& rho, double t) {
    if (rho.rows() != sys.dim || rho.cols() != sys.dim)
        throw std::invalid_argument("density matrix dimension mismatch");
    const Matrix H = sys.hamiltonian(t);
    Matrix out = -kI * (H * rho - rho * H);
    for (const auto& j : sys.jumps) {
        if (j.rate == 0.0) continue;
        const Matrix ldl = j.op.adjoint() * j.op;
        out.noalias() += j.rate * (j.op * rho * j.op.adjoint());
        out.noalias() -= (0.5 * j.rate) * (ldl * rho + rho * ldl);
    }
    return out;
}

Propagation adaptive_propagate(const std::function<Matrix(const Matrix&, double)>& f,
                               const Matrix& y0, std::span<const double> grid,
                               const PropagateOptions& opts) {
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1]))
            throw std::invalid_argument("time grid must be strictly increasing");

    Propagation result;
    result.states.reserve(grid.size());
    if (grid.empty()) return result;

    Matrix y = y0;
    double t = grid[0];
    result.states.push_back(y);

    double h = std::min(opts.max_step, 1e-3);
    Matrix k1 = f(y, t);
    auto& diag = result.diagnostics;

    for (std::size_t gi = 1; gi < grid.size(); ++gi) {
        const double t_target = grid[gi];
        while (t < t_target) {
            const double remaining = t_target - t;
            if (remaining <= 1e-13 * std::max(1.0, std::abs(t_target))) {
                t = t_target;  // roundoff-sized leftover
                break;
            }
            h = std::min({h, opts.max_step, remaining});
            if (h < opts.min_step) {
                std::ostringstream msg;
                msg << "step size underflow at t=" << t << " (h=" << h << ")";
                throw std::runtime_error(msg.str());
            }
            const Matrix k2 = f(y + h * (a21 * k1), t + c2 * h);
            const Matrix k3 = f(y + h * (a31 * k1 + a32 * k2), t + c3 * h);
            const Matrix k4 = f(y + h * (a41 * k1 + a42 * k2 + a43 * k3), t + c4 * h);
            const Matrix k5 = f(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4),
                                t + c5 * h);
            const Matrix k6 =
                f(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5), t + h);
            const Matrix y5 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
            const Matrix k7 = f(y5, t + h);
            const Matrix err =
                h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
            const double enorm = wrms_error(err, y, y5, opts.atol, opts.rtol);
            if (enorm <= 1.0) {
                t += h;
                y = y5;
                k1 = k7;
                diag.accepted_steps++;
                diag.error_estimate += err.cwiseAbs().maxCoeff();
            } else {
                diag.rejected_steps++;
            }
            const double factor =
                (enorm > 0.0) ? 0.9 * std::pow(enorm, -0.2) : 5.0;
            h *= std::clamp(factor, 0.2, 5.0);
        }
        result.states.push_back(y);
    }
    return result;
}

Propagation propagate(const LindbladSystem& sys, const Matrix& rho0,
                      std::span<const double> grid, const PropagateOptions& opts) {
    sys.validate();
    if (rho0.rows() != sys.dim || rho0.cols() != sys.dim)
        throw std::invalid_argument("initial state dimension mismatch");

    // L^dag L is time-independent; precompute for the hot loop.
    std::vector<Matrix> ldl;
    ldl.reserve(sys.jumps.size());
    for (const auto& j : sys.jumps) ldl.push_back(j.op.adjoint() * j.op);

    auto f = [&](const Matrix& rho, double t) {
        const Matrix H = sys.hamiltonian(t);
        Matrix out = -kI * (H * rho - rho * H);
        for (std::size_t k = 0; k < sys.jumps.size(); ++k) {
            const auto& j = sys.jumps[k];
            if (j.rate == 0.0) continue;
            out.noalias() += j.rate * (j.op * rho * j.op.adjoint());
            out.noalias() -= (0.5 * j.rate) * (ldl[k] * rho + rho * ldl[k]);
        }
        return out;
    };

    Propagation result = adaptive_propagate(f, rho0, grid, opts);

    if (opts.check_invariants) {
        auto& diag = result.diagnostics;
        for (std::size_t i = 0; i < result.states.size(); ++i) {
            const Matrix& rho = result.states[i];
            const double tr = std::abs(rho.trace() - std::complex<double>(1.0, 0.0));
            const double he = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
            diag.max_trace_drift = std::max(diag.max_trace_drift, tr);
            diag.max_hermiticity_dev = std::max(diag.max_hermiticity_dev, he);
            const bool check_pos = (opts.positivity_stride > 0) &&
                                   (i % static_cast<std::size_t>(opts.positivity_stride) == 0 ||
                                    i + 1 == result.states.size());
            if (check_pos) {
                Eigen::SelfAdjointEigenSolver<Matrix> es(
                    ((rho + rho.adjoint()) / 2.0).eval(), Eigen::EigenvaluesOnly);
                diag.min_eigenvalue =
                    std::min(diag.min_eigenvalue, es.eigenvalues().minCoeff());
            }
            if (tr > opts.trace_tol || he > opts.herm_tol ||
                diag.min_eigenvalue < -opts.positivity_tol) {
                std::ostringstream msg;
                msg << "density-matrix invariant violated at t=" << grid[i]
                    << ": trace drift " << tr << ", hermiticity " << he
                    << ", min eigenvalue " << diag.min_eigenvalue;
                throw std::runtime_error(msg.str());
            }
        }
    }
    return result;
}

bool steady_state_reached(const std::vector<Matrix>& states, std::size_t window, double tol) {
    if (window < 2) throw std::invalid_argument("window must cover at least two states");
    if (window > states.size())
        throw std::invalid_argument("window longer than trajectory");
    const Matrix& last = states.back();
    for (std::size_t k = states.size() - window; k + 1 < states.size(); ++k) {
        if ((states[k] - last).cwiseAbs().maxCoeff() >= tol) return false;
    }
    return true;
}

}  // namespace superatom

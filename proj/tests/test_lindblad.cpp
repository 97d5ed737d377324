#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <vector>

#include "superatom/four_level.hpp"
#include "superatom/lindblad.hpp"
#include "superatom/params.hpp"
#include "superatom/pulse.hpp"

using namespace superatom;

namespace {

const std::complex<double> kI{0.0, 1.0};

std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) out[i] = a + (b - a) * i / (n - 1);
    return out;
}

// Column-major vectorisation oracle: builds the full dim^2 x dim^2
// superoperator and applies it to vec(rho).
Matrix superoperator_rhs(const Matrix& h, const std::vector<Jump>& jumps, const Matrix& rho) {
    const Eigen::Index d = h.rows();
    Matrix super = Matrix::Zero(d * d, d * d);
    const Matrix id = Matrix::Identity(d, d);
    auto kron = [d](const Matrix& a, const Matrix& b) {
        Matrix out(d * d, d * d);
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = 0; j < d; ++j)
                out.block(i * d, j * d, d, d) = a(i, j) * b;
        return out;
    };
    super -= kI * (kron(id, h) - kron(h.transpose(), id));
    for (const auto& jump : jumps) {
        const Matrix ldl = jump.op.adjoint() * jump.op;
        super += jump.rate * kron(jump.op.conjugate(), jump.op);
        super -= 0.5 * jump.rate * (kron(id, ldl) + kron(ldl.transpose(), id));
    }
    Vector vec(d * d);
    for (Eigen::Index c = 0; c < d; ++c) vec.segment(c * d, d) = rho.col(c);
    const Vector dvec = super * vec;
    Matrix out(d, d);
    for (Eigen::Index c = 0; c < d; ++c) out.col(c) = dvec.segment(c * d, d);
    return out;
}

LindbladSystem amplitude_damping(double kappa) {
    LindbladSystem sys;
    sys.dim = 2;
    sys.hamiltonian = [](double) { return Matrix::Zero(2, 2); };
    Matrix lower = Matrix::Zero(2, 2);
    lower(0, 1) = 1.0;  // |g><e|
    sys.jumps = {{kappa, lower}};
    return sys;
}

}  // namespace

TEST_SUITE("lindblad") {

TEST_CASE("rhs vanishes without Hamiltonian or jumps") {
    LindbladSystem sys;
    sys.dim = 3;
    sys.hamiltonian = [](double) { return Matrix::Zero(3, 3); };
    Matrix rho = Matrix::Zero(3, 3);
    rho(0, 0) = 0.25;
    rho(1, 1) = 0.75;
    CHECK(rhs(sys, rho, 0.0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("rhs reproduces textbook amplitude damping") {
    const LindbladSystem sys = amplitude_damping(0.8);
    const Matrix rho = pure_state_density(2, 1);
    const Matrix d = rhs(sys, rho, 0.0);
    CHECK(std::real(d(1, 1)) == doctest::Approx(-0.8));
    CHECK(std::real(d(0, 0)) == doctest::Approx(0.8));
    CHECK(std::abs(d.trace()) < 1e-14);
}

TEST_CASE("rhs output is hermitian and traceless") {
    EffectiveParams eff{0.46, 0.31, 0.15, 0.85, 15.0};
    const PulseShape shape = make_pulse(2.0, 0.2, 15.0, 0.0);
    const LindbladSystem sys = build_system(eff, shape);
    Matrix rho = Matrix::Zero(4, 4);
    rho(G, G) = 0.55;
    rho(W, W) = 0.25;
    rho(C, C) = 0.15;
    rho(D, D) = 0.05;
    rho(G, W) = std::complex<double>(0.1, 0.05);
    rho(W, G) = std::conj(rho(G, W));
    rho(W, C) = std::complex<double>(-0.02, 0.07);
    rho(C, W) = std::conj(rho(W, C));
    const Matrix d = rhs(sys, rho, -1.0);
    CHECK((d - d.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(d.trace()) < 1e-12);
}

TEST_CASE("rhs matches a brute-force superoperator on the four-level model") {
    EffectiveParams eff{0.46, 0.31, 0.15, 0.85, 15.0};
    const PulseShape shape = make_pulse(2.0, 0.2, 15.0, 0.0);
    const LindbladSystem sys = build_system(eff, shape);
    Matrix rho = Matrix::Zero(4, 4);
    rho(G, G) = 0.5;
    rho(W, W) = 0.3;
    rho(C, C) = 0.2;
    rho(G, W) = std::complex<double>(0.05, -0.11);
    rho(W, G) = std::conj(rho(G, W));
    rho(C, G) = std::complex<double>(0.02, 0.03);
    rho(G, C) = std::conj(rho(C, G));
    const double t = -0.7;  // inside the pulse
    const Matrix direct = rhs(sys, rho, t);
    const Matrix oracle = superoperator_rhs(sys.hamiltonian(t), sys.jumps, rho);
    CHECK((direct - oracle).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("rhs rejects dimension mismatch") {
    const LindbladSystem sys = amplitude_damping(0.3);
    CHECK_THROWS_AS(rhs(sys, Matrix::Zero(3, 3), 0.0), std::invalid_argument);
}

TEST_CASE("propagated amplitude damping follows the closed form") {
    const double kappa = 0.9;
    const LindbladSystem sys = amplitude_damping(kappa);
    const auto grid = linspace(0.0, 5.0, 41);
    const Propagation prop = propagate(sys, pure_state_density(2, 1), grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(std::real(prop.states[i](1, 1)) ==
              doctest::Approx(std::exp(-kappa * grid[i])).epsilon(1e-6));
    }
    CHECK(prop.diagnostics.max_trace_drift <= 1e-8);
    CHECK(prop.diagnostics.max_hermiticity_dev <= 1e-10);
    CHECK(prop.diagnostics.min_eigenvalue >= -1e-8);
}

TEST_CASE("free evolution keeps the state constant") {
    LindbladSystem sys;
    sys.dim = 2;
    sys.hamiltonian = [](double) { return Matrix::Zero(2, 2); };
    Matrix rho = Matrix::Zero(2, 2);
    rho(0, 0) = 0.3;
    rho(1, 1) = 0.7;
    const auto grid = linspace(0.0, 3.0, 7);
    const Propagation prop = propagate(sys, rho, grid);
    CHECK((prop.states.back() - rho).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("driven two-level steady state matches the Bloch solution") {
    // H = g (sigma+ + sigma-) with total decay gamma: steady excited
    // population 4g^2/(gamma^2 + 8g^2), coherence i*2g(1-2p)/gamma.
    const double g = 0.7, gamma = 1.1;
    LindbladSystem sys;
    sys.dim = 2;
    sys.hamiltonian = [g](double) {
        Matrix h = Matrix::Zero(2, 2);
        h(0, 1) = g;
        h(1, 0) = g;
        return h;
    };
    Matrix lower = Matrix::Zero(2, 2);
    lower(0, 1) = 1.0;
    sys.jumps = {{gamma, lower}};
    const auto grid = linspace(0.0, 60.0, 61);
    const Propagation prop = propagate(sys, pure_state_density(2, 0), grid);
    const Matrix& ss = prop.states.back();
    const double p = 4.0 * g * g / (gamma * gamma + 8.0 * g * g);
    const std::complex<double> coh = kI * 2.0 * g * (1.0 - 2.0 * p) / gamma;
    CHECK(std::real(ss(1, 1)) == doctest::Approx(p).epsilon(1e-6));
    CHECK(std::abs(ss(0, 1) - coh) < 1e-6);
}

TEST_CASE("halving the tolerance stays within the error estimate") {
    EffectiveParams eff{0.46, 0.31, 0.15, 0.85, 15.0};
    const PulseShape shape = make_pulse(1.5, 0.2, 15.0, 0.0);
    const LindbladSystem sys = build_system(eff, shape);
    const auto grid = linspace(-1.7, 4.0, 20);
    PropagateOptions coarse;
    coarse.rtol = 1e-6;
    coarse.atol = 1e-8;
    PropagateOptions fine = coarse;
    fine.rtol = 5e-7;
    fine.atol = 4e-9;
    const Propagation a = propagate(sys, pure_state_density(4, G), grid, coarse);
    const Propagation b = propagate(sys, pure_state_density(4, G), grid, fine);
    const double diff = (a.states.back() - b.states.back()).cwiseAbs().maxCoeff();
    CHECK(diff < a.diagnostics.error_estimate);
}

TEST_CASE("propagate validates grids and steady_state_reached windows") {
    const LindbladSystem sys = amplitude_damping(0.5);
    std::vector<double> bad = {0.0, 1.0, 0.5};
    CHECK_THROWS_AS(propagate(sys, pure_state_density(2, 1), bad), std::invalid_argument);

    std::vector<Matrix> states(3, pure_state_density(2, 0));
    CHECK_THROWS_AS(steady_state_reached(states, 10, 1e-4), std::invalid_argument);
}

TEST_CASE("steady state detection") {
    std::vector<Matrix> constant(20, pure_state_density(2, 0));
    CHECK(steady_state_reached(constant, 8, 1e-10));

    // Pure Rabi oscillation never settles at a tolerance below its swing.
    LindbladSystem sys;
    sys.dim = 2;
    sys.hamiltonian = [](double) {
        Matrix h = Matrix::Zero(2, 2);
        h(0, 1) = 1.0;
        h(1, 0) = 1.0;
        return h;
    };
    const auto grid = linspace(0.0, 12.0, 121);
    const Propagation rabi = propagate(sys, pure_state_density(2, 0), grid);
    CHECK_FALSE(steady_state_reached(rabi.states, 40, 1e-2));

    // Constant drive at the calibrated rates settles on a 0.02 us grid.
    EffectiveParams eff{0.46, 0.31, 0.15, 0.85, 15.0};
    const PulseShape shape = make_pulse(30.0, 0.2, 15.0, 12.0);
    const LindbladSystem driven = build_system(eff, shape);
    std::vector<double> fine_grid;
    for (double t = 0.0; t <= 10.0 + 1e-9; t += 0.02) fine_grid.push_back(t);
    const Propagation prop = propagate(driven, pure_state_density(4, G), fine_grid);
    CHECK(steady_state_reached(prop.states, 3, 1e-4));
}

}  // TEST_SUITE

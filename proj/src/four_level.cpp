#include "superatom/four_level.hpp"

#include <cmath>
#include <stdexcept>

namespace superatom {

Matrix level_op(FourLevel a, FourLevel b) {
    Matrix op = Matrix::Zero(4, 4);
    op(a, b) = 1.0;
    return op;
}

LindbladSystem build_system(const EffectiveParams& eff, const PulseShape& shape,
                            double detuning) {
    eff.validate();
    shape.validate();

    LindbladSystem sys;
    sys.dim = 4;
    const double kappa = eff.kappa;
    const double vk = eff.varkappa;
    sys.hamiltonian = [kappa, vk, detuning, shape](double t) {
        Matrix h = Matrix::Zero(4, 4);
        const double g = std::sqrt(kappa * pulse_rate(shape, t));
        h(G, W) = g;
        h(W, G) = g;
        h(W, C) = vk;
        h(C, W) = vk;
        h(W, W) = detuning;
        h(C, C) = detuning;
        return h;
    };
    sys.jumps = {
        {eff.kappa + eff.gamma_raman, level_op(G, W)},
        {eff.gamma_d, level_op(D, W)},
        {eff.gamma_raman, level_op(G, D)},
        {eff.gamma_d, level_op(D, C)},
        {eff.gamma_raman, level_op(G, C)},
    };
    return sys;
}

double forward_rate(const Matrix& rho, const EffectiveParams& eff, double r_p_now) {
    if (rho.rows() != 4 || rho.cols() != 4)
        throw std::invalid_argument("four-level state expected");
    if (r_p_now < 0.0) throw std::invalid_argument("photon rate must be non-negative");
    const double emission = eff.kappa * std::real(rho(W, W));
    if (r_p_now == 0.0) return emission;
    return r_p_now + emission +
           2.0 * std::sqrt(eff.kappa * r_p_now) * std::imag(rho(W, G));
}

SimulatedTrace simulate_trace(const EffectiveParams& eff, const PulseShape& shape,
                              const GridSpec& grid, const PropagateOptions& opts) {
    if (grid.t_start > shape.start_time())
        throw std::invalid_argument("grid must start at or before the pulse");
    if (grid.t_end <= shape.end_time)
        throw std::invalid_argument("grid must extend past the pulse end");

    SimulatedTrace out;
    out.trace.bin_edges = uniform_bin_edges(grid.t_start, grid.t_end, grid.bin_width);
    const std::size_t bins = out.trace.bin_edges.size() - 1;
    out.times.resize(bins);
    for (std::size_t i = 0; i < bins; ++i) out.times[i] = out.trace.bin_center(i);

    const LindbladSystem sys = build_system(eff, shape);
    Propagation prop = propagate(sys, pure_state_density(4, G), out.times, opts);
    out.diagnostics = prop.diagnostics;
    out.states = std::move(prop.states);

    out.trace.rates.resize(bins);
    for (std::size_t i = 0; i < bins; ++i) {
        const double r = forward_rate(out.states[i], eff, pulse_rate(shape, out.times[i]));
        out.trace.rates[i] = std::max(r, 0.0);
    }
    return out;
}

}  // namespace superatom

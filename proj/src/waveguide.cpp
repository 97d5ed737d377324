#include "superatom/waveguide.hpp"

#include <algorithm>
#include <memory>
#include <atomic>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "superatom/rng.hpp"

namespace superatom {

namespace {

const std::complex<double> kI{0.0, 1.0};

std::vector<int> position_order(const std::vector<double>& positions, double k0) {
    std::vector<int> order(positions.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return k0 * positions[a] < k0 * positions[b];
    });
    return order;
}

// Applies the exchange block H_exc (i kappa/2N antisymmetric sign matrix
// plus per-atom diagonal) to each column of `in` through prefix sums in
// position order, O(N) per column.
struct ExchangeApply {
    double coeff;                 // kappa / (2N)
    std::vector<int> order;       // atom indices sorted along the waveguide
    const std::vector<double>* detunings = nullptr;

    void apply_vector(const std::complex<double>* in, std::complex<double>* out,
                      int n) const {
        std::complex<double> prefix{0.0, 0.0};
        std::complex<double> total{0.0, 0.0};
        for (int k = 0; k < n; ++k) total += in[order[k]];
        for (int k = 0; k < n; ++k) {
            const int atom = order[k];
            const std::complex<double> suffix = total - prefix - in[atom];
            out[atom] = kI * coeff * (prefix - suffix);
            prefix += in[atom];
        }
        if (detunings && !detunings->empty()) {
            for (int atom = 0; atom < n; ++atom) out[atom] += (*detunings)[atom] * in[atom];
        }
    }
};

struct BlockWorkspace {
    Matrix hb;   // H_e * B
    Matrix bh;   // B * H_e
    Vector tmp_in, tmp_out;
};

}  // namespace

void WaveguideConfig::validate() const {
    if (n_atoms < 1) throw std::invalid_argument("n_atoms must be at least 1");
    if (kappa < 0.0) throw std::invalid_argument("kappa must be non-negative");
    if (gamma_raman < 0.0) throw std::invalid_argument("gamma_raman must be non-negative");
    if (positions.size() != static_cast<std::size_t>(n_atoms))
        throw std::invalid_argument("positions must list every atom");
    for (std::size_t i = 0; i < positions.size(); ++i)
        for (std::size_t j = i + 1; j < positions.size(); ++j)
            if (positions[i] == positions[j])
                throw std::invalid_argument("atom positions must be distinct");
    if (!detunings.empty() && detunings.size() != static_cast<std::size_t>(n_atoms))
        throw std::invalid_argument("detunings must list every atom");
}

std::vector<double> ordered_positions(int n) {
    std::vector<double> x(n);
    std::iota(x.begin(), x.end(), 0.0);
    return x;
}

std::vector<double> random_positions(int n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> x(n);
    for (auto& xi : x) xi = rng.uniform();
    std::sort(x.begin(), x.end());
    for (int i = 1; i < n; ++i)
        if (x[i] <= x[i - 1]) x[i] = std::nextafter(x[i - 1], 2.0);
    return x;
}

std::function<double(double)> drive_from_pulse(const PulseShape& shape) {
    return [shape](double t) { return std::sqrt(pulse_rate(shape, t)); };
}

Matrix build_exchange_position(const WaveguideConfig& config) {
    config.validate();
    const int n = config.n_atoms;
    Matrix h = Matrix::Zero(n, n);
    const double coeff = config.kappa / (2.0 * n);
    for (int l = 0; l < n; ++l) {
        for (int j = 0; j < n; ++j) {
            if (l == j) continue;
            const double s = config.k0 * (config.positions[l] - config.positions[j]);
            h(l, j) = kI * coeff * (s > 0 ? 1.0 : (s < 0 ? -1.0 : 0.0));
        }
    }
    if (!config.detunings.empty())
        for (int j = 0; j < n; ++j) h(j, j) += config.detunings[j];
    return h;
}

EigenmodeBasis build_exchange_eigenmode(int n_atoms, double kappa) {
    if (n_atoms < 2) throw std::invalid_argument("eigenmode split needs at least 2 atoms");
    const int n = n_atoms;

    EigenmodeBasis basis;
    basis.couplings.resize(n - 1);
    basis.energies.resize(n - 1);
    for (int j = 1; j < n; ++j) {
        const double cot = 1.0 / std::tan(std::numbers::pi * j / n);
        basis.couplings(j - 1) = kappa * (kI + cot) / (2.0 * n);
        basis.energies(j - 1) = -kappa * cot / (2.0 * n);
    }

    WaveguideConfig cfg;
    cfg.n_atoms = n;
    cfg.kappa = kappa;
    cfg.positions = ordered_positions(n);
    const Matrix h = build_exchange_position(cfg);

    // Householder reflection mapping e_1 to the bright state; its trailing
    // columns are an orthonormal basis of the subradiant subspace.
    Vector w = Vector::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
    Vector u = w;
    u(0) -= 1.0;
    Matrix reflect = Matrix::Identity(n, n);
    const double un = u.squaredNorm();
    if (un > 1e-30) reflect -= (2.0 / un) * (u * u.adjoint());
    const Matrix complement = reflect.rightCols(n - 1);

    const Matrix block = complement.adjoint() * h * complement;
    Eigen::SelfAdjointEigenSolver<Matrix> es(block);
    // Eigenvalues ascend with j because cot decreases on (0, pi).
    Matrix modes = complement * es.eigenvectors();
    for (int j = 0; j < n - 1; ++j) {
        const std::complex<double> coupling = w.adjoint() * h * modes.col(j);
        const std::complex<double> target = basis.couplings(j);
        if (std::abs(coupling) > 1e-14)
            modes.col(j) *= (target / std::abs(target)) * (std::abs(coupling) / coupling);
    }
    basis.transform.resize(n, n);
    basis.transform.col(0) = w;
    basis.transform.rightCols(n - 1) = modes;
    return basis;
}

WaveguidePropagation propagate_density(const WaveguideConfig& config,
                                       std::span<const double> grid,
                                       const PropagateOptions& opts) {
    config.validate();
    const int n = config.n_atoms;
    if (n > 2000) throw std::invalid_argument("density backend is guarded at N <= 2000");

    ExchangeApply exch{config.kappa / (2.0 * n), position_order(config.positions, config.k0),
                       &config.detunings};
    const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
    const double kappa = config.kappa;
    const double gamma = config.gamma_raman;
    const auto& amp = config.drive_amplitude;

    auto shared_ws = std::make_shared<BlockWorkspace>();
    shared_ws->hb.resize(n, n);
    shared_ws->bh.resize(n, n);
    shared_ws->tmp_in.resize(n);
    shared_ws->tmp_out.resize(n);

    auto f = [=, &config](const Matrix& rho, double t) {
        BlockWorkspace& ws = *shared_ws;
        const auto b = rho.block(1, 1, n, n);
        const auto g_row = rho.block(0, 1, 1, n);
        const std::complex<double> rho_gg = rho(0, 0);
        const double a = amp ? amp(t) : 0.0;
        const double drive = std::sqrt(kappa) * a * inv_sqrt_n;

        for (int col = 0; col < n; ++col) {
            ws.tmp_in = b.col(col);
            exch.apply_vector(ws.tmp_in.data(), ws.tmp_out.data(), n);
            ws.hb.col(col) = ws.tmp_out;
        }
        for (int row = 0; row < n; ++row) {
            ws.tmp_in = b.row(row).adjoint();
            exch.apply_vector(ws.tmp_in.data(), ws.tmp_out.data(), n);
            ws.bh.row(row) = ws.tmp_out.adjoint();
        }

        // Bright-state pieces: W = ones/sqrt(N).
        Vector col_sums = b.colwise().sum().transpose() * inv_sqrt_n;   // W^dag B
        Vector row_sums = b.rowwise().sum() * inv_sqrt_n;               // B W
        const std::complex<double> wbw = col_sums.sum() * inv_sqrt_n;   // W^dag B W
        const std::complex<double> g_sum = g_row.sum();                 // rho_Ge W sqrt(N)
        const std::complex<double> tr_b = b.trace();

        Matrix out = Matrix::Zero(n + 1, n + 1);
        // ee block
        out.block(1, 1, n, n) = -kI * (ws.hb - ws.bh);
        if (drive != 0.0) {
            out.block(1, 1, n, n) -=
                kI * drive *
                (Matrix::Ones(n, 1) * g_row - g_row.adjoint() * Matrix::Ones(1, n));
        }
        out.block(1, 1, n, n) -=
            (0.5 * kappa * inv_sqrt_n) *
            (Vector::Ones(n) * col_sums.transpose() + row_sums * Eigen::RowVectorXcd::Ones(n));
        out.block(1, 1, n, n) -= gamma * b;
        // Ge row
        Eigen::RowVectorXcd dge = Eigen::RowVectorXcd::Zero(n);
        if (drive != 0.0)
            dge -= kI * drive * (b.colwise().sum() - rho_gg * Eigen::RowVectorXcd::Ones(n));
        ws.tmp_in = g_row.adjoint();
        exch.apply_vector(ws.tmp_in.data(), ws.tmp_out.data(), n);
        dge += kI * ws.tmp_out.adjoint();  // +i (rho_Ge H_e)
        dge -= (0.5 * kappa / n * g_sum) * Eigen::RowVectorXcd::Ones(n);
        dge -= (0.5 * gamma) * g_row;
        out.block(0, 1, 1, n) = dge;
        out.block(1, 0, n, 1) = dge.adjoint();
        // GG
        std::complex<double> dgg{0.0, 0.0};
        if (drive != 0.0) {
            const std::complex<double> cross = drive * g_sum;
            dgg += -kI * (std::conj(cross) - cross);
        }
        dgg += kappa * wbw + gamma * tr_b;
        out(0, 0) = dgg;
        return out;
    };

    Matrix rho0 = Matrix::Zero(n + 1, n + 1);
    rho0(0, 0) = 1.0;

    WaveguidePropagation result;
    result.times.assign(grid.begin(), grid.end());
    Propagation prop = adaptive_propagate(f, rho0, grid, opts);
    result.diagnostics = prop.diagnostics;
    result.states = std::move(prop.states);

    if (opts.check_invariants) {
        auto& diag = result.diagnostics;
        for (std::size_t i = 0; i < result.states.size(); ++i) {
            const Matrix& rho = result.states[i];
            diag.max_trace_drift = std::max(
                diag.max_trace_drift, std::abs(rho.trace() - std::complex<double>(1.0)));
            diag.max_hermiticity_dev = std::max(
                diag.max_hermiticity_dev, (rho - rho.adjoint()).cwiseAbs().maxCoeff());
        }
        Eigen::SelfAdjointEigenSolver<Matrix> es(
            ((result.states.back() + result.states.back().adjoint()) / 2.0).eval(),
            Eigen::EigenvaluesOnly);
        diag.min_eigenvalue = std::min(diag.min_eigenvalue, es.eigenvalues().minCoeff());
        if (diag.max_trace_drift > opts.trace_tol)
            throw std::runtime_error("waveguide propagation lost trace normalisation");
    }
    return result;
}

namespace {

struct TrajectoryAccumulator {
    std::vector<double> sum_pw, sum_pw2, sum_pexc, sum_coh_im;
    void init(std::size_t n) {
        sum_pw.assign(n, 0.0);
        sum_pw2.assign(n, 0.0);
        sum_pexc.assign(n, 0.0);
        sum_coh_im.assign(n, 0.0);
    }
    void add(const TrajectoryAccumulator& other) {
        for (std::size_t i = 0; i < sum_pw.size(); ++i) {
            sum_pw[i] += other.sum_pw[i];
            sum_pw2[i] += other.sum_pw2[i];
            sum_pexc[i] += other.sum_pexc[i];
            sum_coh_im[i] += other.sum_coh_im[i];
        }
    }
};

class TrajectoryRunner {
public:
    TrajectoryRunner(const WaveguideConfig& config, std::span<const double> grid,
                     const TrajectoryOptions& opts)
        : config_(config),
          grid_(grid.begin(), grid.end()),
          opts_(opts),
          n_(config.n_atoms),
          exch_{config.kappa / (2.0 * config.n_atoms),
                position_order(config.positions, config.k0), &config_.detunings},
          inv_sqrt_n_(1.0 / std::sqrt(static_cast<double>(config.n_atoms))) {}

    void run_one(Rng& rng, TrajectoryAccumulator& acc) const {
        Vector psi = Vector::Zero(n_ + 1);
        psi(0) = 1.0;
        double norm2 = 1.0;
        double threshold = rng.uniform();
        bool dead = false;

        Vector k1(n_ + 1), k2(n_ + 1), k3(n_ + 1), k4(n_ + 1), tmp(n_ + 1), prev(n_ + 1);

        record(0, psi, norm2, acc);
        for (std::size_t gi = 1; gi < grid_.size(); ++gi) {
            const double t0 = grid_[gi - 1];
            const double t1 = grid_[gi];
            if (!dead) {
                const int n_sub =
                    std::max(1, static_cast<int>(std::ceil((t1 - t0) / opts_.max_step)));
                const double h = (t1 - t0) / n_sub;
                double t = t0;
                for (int s = 0; s < n_sub; ++s) {
                    prev = psi;
                    const double norm_prev = norm2;
                    rk4_step(psi, t, h, k1, k2, k3, k4, tmp);
                    norm2 = psi.squaredNorm();
                    if (norm2 < threshold) {
                        // One linearly interpolated partial step locates the
                        // jump time to O(h^2) before projecting to |G>.
                        const double frac =
                            (norm_prev - threshold) /
                            std::max(norm_prev - norm2, 1e-300);
                        psi = prev;
                        rk4_step(psi, t, h * std::clamp(frac, 0.0, 1.0), k1, k2, k3, k4,
                                 tmp);
                        psi.setZero();
                        psi(0) = 1.0;
                        norm2 = 1.0;
                        threshold = rng.uniform();
                    }
                    t += h;
                }
                if (t1 >= opts_.drive_off_time &&
                    norm2 - std::norm(psi(0)) < 1e-26 * norm2) {
                    dead = true;
                }
            }
            if (dead) continue;
            record(gi, psi, norm2, acc);
        }
    }

private:
    void record(std::size_t gi, const Vector& psi, double norm2,
                TrajectoryAccumulator& acc) const {
        std::complex<double> s{0.0, 0.0};
        double pexc = 0.0;
        for (int j = 1; j <= n_; ++j) {
            s += psi(j);
            pexc += std::norm(psi(j));
        }
        s *= inv_sqrt_n_;
        const double pw = std::norm(s) / norm2;
        acc.sum_pw[gi] += pw;
        acc.sum_pw2[gi] += pw * pw;
        acc.sum_pexc[gi] += pexc / norm2;
        acc.sum_coh_im[gi] += std::imag(s * std::conj(psi(0))) / norm2;
    }

    // d psi = -i H_eff psi with H_eff = H_drive + H_exc + detunings
    //         - (i/2)(kappa |W><W| + Gamma P_exc).
    void derivative(const Vector& psi, double t, Vector& out) const {
        const double a = config_.drive_amplitude ? config_.drive_amplitude(t) : 0.0;
        const double drive = std::sqrt(config_.kappa) * a * inv_sqrt_n_;
        std::complex<double> s{0.0, 0.0};
        for (int j = 1; j <= n_; ++j) s += psi(j);

        exch_.apply_vector(psi.data() + 1, out.data() + 1, n_);
        const std::complex<double> wdecay =
            (0.5 * config_.kappa / static_cast<double>(n_)) * s;
        for (int j = 1; j <= n_; ++j) {
            std::complex<double> h = out(j) + drive * psi(0);
            out(j) = -kI * h - wdecay - 0.5 * config_.gamma_raman * psi(j);
        }
        out(0) = -kI * (drive * s);
    }

    void rk4_step(Vector& psi, double t, double h, Vector& k1, Vector& k2, Vector& k3,
                  Vector& k4, Vector& tmp) const {
        derivative(psi, t, k1);
        tmp = psi + (0.5 * h) * k1;
        derivative(tmp, t + 0.5 * h, k2);
        tmp = psi + (0.5 * h) * k2;
        derivative(tmp, t + 0.5 * h, k3);
        tmp = psi + h * k3;
        derivative(tmp, t + h, k4);
        psi += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }

    const WaveguideConfig& config_;
    std::vector<double> grid_;
    TrajectoryOptions opts_;
    int n_;
    ExchangeApply exch_;
    double inv_sqrt_n_;
};

}  // namespace

TrajectoryEnsemble propagate_trajectories(const WaveguideConfig& config,
                                          std::span<const double> grid, long long n_traj,
                                          std::uint64_t seed,
                                          const TrajectoryOptions& opts) {
    config.validate();
    if (n_traj < 1) throw std::invalid_argument("n_traj must be at least 1");
    if (grid.size() < 2) throw std::invalid_argument("grid needs at least two points");

    TrajectoryRunner runner(config, grid, opts);

    constexpr long long kBlock = 64;
    const long long n_blocks = (n_traj + kBlock - 1) / kBlock;
    std::vector<TrajectoryAccumulator> block_acc(n_blocks);

    int n_threads = opts.n_threads > 0
                        ? opts.n_threads
                        : static_cast<int>(std::thread::hardware_concurrency());
    n_threads = std::max<int>(
        1, static_cast<int>(std::min<long long>(n_threads, n_blocks)));

    std::atomic<long long> next_block{0};
    auto worker = [&]() {
        for (;;) {
            const long long b = next_block.fetch_add(1);
            if (b >= n_blocks) break;
            auto& acc = block_acc[b];
            acc.init(grid.size());
            const long long lo = b * kBlock;
            const long long hi = std::min(n_traj, lo + kBlock);
            for (long long i = lo; i < hi; ++i) {
                Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(i));
                runner.run_one(rng, acc);
            }
        }
    };
    std::vector<std::thread> pool;
    for (int i = 1; i < n_threads; ++i) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    TrajectoryAccumulator total;
    total.init(grid.size());
    for (const auto& acc : block_acc) total.add(acc);

    TrajectoryEnsemble out;
    out.times.assign(grid.begin(), grid.end());
    out.n_trajectories = n_traj;
    const double inv = 1.0 / static_cast<double>(n_traj);
    out.bright_population.resize(grid.size());
    out.excited_population.resize(grid.size());
    out.coherence_im.resize(grid.size());
    out.bright_stderr.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double mean = total.sum_pw[i] * inv;
        const double var = std::max(0.0, total.sum_pw2[i] * inv - mean * mean);
        out.bright_population[i] = mean;
        out.excited_population[i] = total.sum_pexc[i] * inv;
        out.coherence_im[i] = total.sum_coh_im[i] * inv;
        out.bright_stderr[i] = std::sqrt(var * inv);
    }
    return out;
}

WaveguideConfig apply_thermal_detunings(const WaveguideConfig& config, std::uint64_t seed) {
    if (!config.thermal)
        throw std::invalid_argument("thermal block missing from waveguide config");
    WaveguideConfig out = config;
    const double k_spin = 2.0 * std::numbers::pi / config.thermal->spin_wavelength;
    Rng rng(seed);
    out.detunings.resize(config.n_atoms);
    for (int j = 0; j < config.n_atoms; ++j) {
        const double v = config.thermal->velocity_scale * rng.normal();
        // The chiral geometry folds the motional phase into a static
        // detuning at twice the Doppler shift.
        out.detunings[j] = 2.0 * k_spin * v;
    }
    return out;
}

double waveguide_emission(const Matrix& rho, const WaveguideConfig& config,
                          double drive_now) {
    const int n = config.n_atoms;
    if (rho.rows() != n + 1) throw std::invalid_argument("state dimension mismatch");
    const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
    std::complex<double> pw{0.0, 0.0}, coh{0.0, 0.0};
    for (int l = 1; l <= n; ++l) {
        coh += rho(l, 0);
        for (int j = 1; j <= n; ++j) pw += rho(l, j);
    }
    pw *= inv_sqrt_n * inv_sqrt_n;
    coh *= inv_sqrt_n;
    return waveguide_emission(std::real(pw), std::imag(coh), config, drive_now);
}

double waveguide_emission(double bright_population, double coherence_im,
                          const WaveguideConfig& config, double drive_now) {
    const double rate = drive_now * drive_now + config.kappa * bright_population;
    if (drive_now == 0.0) return rate;
    return rate + 2.0 * std::sqrt(config.kappa) * drive_now * coherence_im;
}

}  // namespace superatom

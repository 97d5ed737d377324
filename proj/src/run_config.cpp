#include "superatom/run_config.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>

#include <CLI11.hpp>

#include "superatom/analysis.hpp"
#include "superatom/calibration.hpp"
#include "superatom/four_level.hpp"
#include "superatom/trace_io.hpp"
#include "superatom/units.hpp"
#include "superatom/waveguide.hpp"

namespace superatom {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void require_keys(const json& j, const std::string& context,
                  const std::set<std::string>& allowed) {
    if (!j.is_object()) throw ConfigError(context + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key))
            throw ConfigError("unknown key '" + key + "' in " + context);
    }
}

double require_number(const json& j, const std::string& context, const std::string& key) {
    if (!j.contains(key)) throw ConfigError(context + " is missing '" + key + "'");
    if (!j.at(key).is_number()) throw ConfigError(context + "." + key + " must be a number");
    return j.at(key).get<double>();
}

double number_or(const json& j, const std::string& key, double fallback) {
    return j.contains(key) ? j.at(key).get<double>() : fallback;
}

// Frequencies enter either already angular (rad/us) or as 2pi x MHz via an
// explicit key suffix, so no implicit 2pi convention can slip in.
double angular_field(const json& j, const std::string& context, const std::string& base) {
    const std::string mhz_key = base + "_2pi_mhz";
    const std::string rad_key = base + "_rad_us";
    const bool has_mhz = j.contains(mhz_key);
    const bool has_rad = j.contains(rad_key);
    if (has_mhz == has_rad)
        throw ConfigError(context + " needs exactly one of '" + mhz_key + "' or '" +
                          rad_key + "'");
    return has_mhz ? angular_from_mhz(j.at(mhz_key).get<double>())
                   : j.at(rad_key).get<double>();
}

EffectiveParams effective_from_config(const json& config) {
    if (config.contains("effective")) {
        const json& j = config.at("effective");
        require_keys(j, "effective", {"kappa", "varkappa", "gamma_raman", "gamma_d", "r_p"});
        EffectiveParams eff;
        eff.kappa = require_number(j, "effective", "kappa");
        eff.varkappa = require_number(j, "effective", "varkappa");
        eff.gamma_raman = require_number(j, "effective", "gamma_raman");
        eff.gamma_d = require_number(j, "effective", "gamma_d");
        eff.r_p = require_number(j, "effective", "r_p");
        eff.validate();
        return eff;
    }
    if (!config.contains("experiment"))
        throw ConfigError("config needs an 'effective' or 'experiment' block");
    const json& j = config.at("experiment");
    require_keys(j, "experiment",
                 {"delta_2pi_mhz", "delta_rad_us", "omega_c_2pi_mhz", "omega_c_rad_us",
                  "gamma_e_2pi_mhz", "gamma_e_rad_us", "g0_rad_us", "n_atoms", "r_p_per_us",
                  "varkappa_per_us", "gamma_d_per_us"});
    ExperimentParams params;
    params.delta = angular_field(j, "experiment", "delta");
    params.omega_c = angular_field(j, "experiment", "omega_c");
    params.gamma_e = angular_field(j, "experiment", "gamma_e");
    params.g0 = require_number(j, "experiment", "g0_rad_us");
    params.n_atoms = require_number(j, "experiment", "n_atoms");
    params.r_p = require_number(j, "experiment", "r_p_per_us");
    EffectiveParams eff = derive_effective(params);
    eff.varkappa = number_or(j, "varkappa_per_us", 0.0);
    eff.gamma_d = number_or(j, "gamma_d_per_us", 0.0);
    eff.validate();
    return eff;
}

PulseShape pulse_from_config(const json& config, double duration) {
    const json& j = config.at("pulse");
    return make_pulse(duration, number_or(j, "taper_us", 0.2),
                      require_number(j, "pulse", "peak_rate_per_us"),
                      number_or(j, "end_time_us", 0.0));
}

std::vector<double> pulse_durations(const json& config) {
    const json& j = config.at("pulse");
    require_keys(j, "pulse", {"duration_us", "taper_us", "peak_rate_per_us", "end_time_us"});
    if (!j.contains("duration_us")) throw ConfigError("pulse is missing 'duration_us'");
    const json& d = j.at("duration_us");
    if (d.is_number()) return {d.get<double>()};
    if (d.is_array()) {
        std::vector<double> out;
        for (const auto& v : d) out.push_back(v.get<double>());
        if (out.empty()) throw ConfigError("pulse.duration_us must not be empty");
        return out;
    }
    throw ConfigError("pulse.duration_us must be a number or an array");
}

GridSpec grid_from_config(const json& config) {
    const json& j = config.at("grid");
    require_keys(j, "grid", {"t_start_us", "t_end_us", "bin_width_us"});
    GridSpec grid{require_number(j, "grid", "t_start_us"),
                  require_number(j, "grid", "t_end_us"),
                  number_or(j, "bin_width_us", 0.02)};
    return grid;
}

struct WaveguideSetup {
    WaveguideConfig config;
    std::string backend;
    long long n_trajectories = 4000;
    double max_step = 2e-3;
};

WaveguideSetup waveguide_from_config(const json& config, std::uint64_t seed) {
    const json& j = config.at("waveguide");
    require_keys(j, "waveguide",
                 {"n_atoms", "kappa", "gamma_raman", "backend", "n_trajectories",
                  "max_step_us", "positions", "position_seed", "thermal", "thermal_seed"});
    WaveguideSetup setup;
    auto& cfg = setup.config;
    cfg.n_atoms = static_cast<int>(require_number(j, "waveguide", "n_atoms"));
    cfg.kappa = require_number(j, "waveguide", "kappa");
    cfg.gamma_raman = number_or(j, "gamma_raman", 0.0);
    const std::string positions = j.contains("positions") ? j.at("positions").get<std::string>()
                                                          : std::string("ordered");
    if (positions == "ordered") {
        cfg.positions = ordered_positions(cfg.n_atoms);
    } else if (positions == "random") {
        const auto pos_seed = static_cast<std::uint64_t>(number_or(j, "position_seed", 1.0));
        cfg.positions = random_positions(cfg.n_atoms, pos_seed);
    } else {
        throw ConfigError("waveguide.positions must be 'ordered' or 'random'");
    }
    if (j.contains("thermal")) {
        const json& th = j.at("thermal");
        require_keys(th, "waveguide.thermal",
                     {"spin_wavelength_um", "velocity_scale_um_per_us"});
        ThermalMotion motion;
        motion.spin_wavelength = require_number(th, "thermal", "spin_wavelength_um");
        motion.velocity_scale = require_number(th, "thermal", "velocity_scale_um_per_us");
        cfg.thermal = motion;
        const auto th_seed = static_cast<std::uint64_t>(
            number_or(j, "thermal_seed", static_cast<double>(seed)));
        cfg = apply_thermal_detunings(cfg, th_seed);
    }
    setup.backend = j.contains("backend") ? j.at("backend").get<std::string>()
                                          : std::string("auto");
    if (setup.backend == "auto")
        setup.backend = cfg.n_atoms <= 200 ? "density" : "trajectories";
    if (setup.backend != "density" && setup.backend != "trajectories")
        throw ConfigError("waveguide.backend must be auto, density or trajectories");
    setup.n_trajectories = static_cast<long long>(number_or(j, "n_trajectories", 4000.0));
    setup.max_step = number_or(j, "max_step_us", 2e-3);
    return setup;
}

struct OutputSpec {
    fs::path dir = ".";
    std::string prefix = "run";
    std::string format = "csv";
};

OutputSpec output_from_config(const json& config, const CliOverrides& overrides) {
    OutputSpec out;
    if (config.contains("output")) {
        const json& j = config.at("output");
        require_keys(j, "output", {"dir", "prefix", "format"});
        if (j.contains("dir")) out.dir = j.at("dir").get<std::string>();
        if (j.contains("prefix")) out.prefix = j.at("prefix").get<std::string>();
        if (j.contains("format")) out.format = j.at("format").get<std::string>();
    }
    if (overrides.out_dir) out.dir = *overrides.out_dir;
    if (overrides.format) out.format = *overrides.format;
    if (out.format != "csv" && out.format != "json")
        throw ConfigError("output.format must be 'csv' or 'json'");
    fs::create_directories(out.dir);
    return out;
}

std::uint64_t seed_from_config(const json& config, const CliOverrides& overrides) {
    if (overrides.seed) return *overrides.seed;
    return static_cast<std::uint64_t>(number_or(config, "seed", 0.0));
}

int threads_from_config(const json& config, const CliOverrides& overrides) {
    if (overrides.threads) return *overrides.threads;
    if (config.contains("threads")) return config.at("threads").get<int>();
    if (const char* env = std::getenv("SUPERATOM_THREADS")) return std::atoi(env);
    return 0;
}

void write_trace_files(const OutputSpec& out, const std::string& stem,
                       const PhotonTrace& trace, const TraceMetadata& meta) {
    if (out.format == "csv") {
        write_trace_csv(out.dir / (stem + ".csv"), trace);
    } else {
        json jt;
        jt["t_bin_center_us"] = json::array();
        jt["rate_per_us"] = json::array();
        for (std::size_t i = 0; i < trace.size(); ++i) {
            jt["t_bin_center_us"].push_back(trace.bin_center(i));
            jt["rate_per_us"].push_back(trace.rates[i]);
        }
        if (trace.has_counts()) jt["counts"] = trace.counts;
        std::ofstream f(out.dir / (stem + ".data.json"));
        f << jt.dump(2) << '\n';
    }
    write_trace_metadata(out.dir / (stem + ".json"), meta);
}

json base_metadata(const json& config, std::uint64_t seed, const std::string& command) {
    json extra;
    extra["command"] = command;
    extra["seed"] = seed;
    extra["config_hash"] = config_hash(config);
    extra["config"] = config;
    return extra;
}

ThresholdOptions threshold_from_json(const json& j) {
    ThresholdOptions opts;
    if (j.contains("threshold")) {
        const json& t = j.at("threshold");
        require_keys(t, "threshold", {"min_counts", "relative_floor"});
        opts.min_counts = static_cast<long long>(number_or(t, "min_counts", 50.0));
        opts.relative_floor = number_or(t, "relative_floor", 1e-3);
    }
    return opts;
}

const std::set<std::string> kTopLevelKeys = {
    "model", "effective", "experiment", "pulse",     "grid",   "waveguide",
    "poissonize", "sweep", "calibrate",  "seed",     "threads", "output"};

}  // namespace

json load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config file not found: " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
}

void validate_config(const json& config, const std::string& command) {
    require_keys(config, "config", kTopLevelKeys);
    const std::string model = config.contains("model")
                                  ? config.at("model").get<std::string>()
                                  : std::string("four_level");
    if (model != "four_level" && model != "waveguide")
        throw ConfigError("model must be 'four_level' or 'waveguide'");

    if (command == "simulate" || command == "sweep") {
        if (!config.contains("pulse")) throw ConfigError("config is missing 'pulse'");
        pulse_durations(config);
        if (model == "four_level") effective_from_config(config);
        if (model == "waveguide") {
            if (!config.contains("waveguide"))
                throw ConfigError("config is missing 'waveguide'");
            waveguide_from_config(config, 0);
        }
    }
    if (command == "simulate") {
        if (!config.contains("grid")) throw ConfigError("config is missing 'grid'");
        grid_from_config(config);
    }
    if (command == "sweep") {
        if (!config.contains("sweep")) throw ConfigError("config is missing 'sweep'");
        const json& j = config.at("sweep");
        require_keys(j, "sweep",
                     {"lengths_us", "lengths", "post_window_us", "pre_margin_us",
                      "bin_width_us", "threshold", "detrend_window_us"});
        if (!j.contains("lengths_us") && !j.contains("lengths"))
            throw ConfigError("sweep needs 'lengths_us' or 'lengths'");
        if (j.contains("lengths_us")) {
            if (!j.at("lengths_us").is_array() || j.at("lengths_us").empty())
                throw ConfigError("sweep.lengths_us must be a non-empty array");
        } else {
            const json& r = j.at("lengths");
            require_keys(r, "sweep.lengths", {"min_us", "max_us", "count"});
            if (require_number(r, "sweep.lengths", "count") < 1)
                throw ConfigError("sweep.lengths.count must be at least 1");
        }
    }
    if (command == "calibrate") {
        if (!config.contains("calibrate")) throw ConfigError("config is missing 'calibrate'");
        const json& j = config.at("calibrate");
        require_keys(j, "calibrate",
                     {"datasets", "share_gamma_d", "multistarts", "fix_gamma_d",
                      "gamma_d_value", "bounds", "compare_with_independent",
                      "post_pulse_gamma_d_adjust"});
        if (!j.contains("datasets") || !j.at("datasets").is_array() ||
            j.at("datasets").empty())
            throw ConfigError("calibrate.datasets must be a non-empty array");
        for (const auto& d : j.at("datasets")) {
            require_keys(d, "calibrate.datasets[]",
                         {"traces", "delta_2pi_mhz", "delta_rad_us", "r_p_per_us",
                          "gamma_raman_per_us"});
            if (!d.contains("traces") || !d.at("traces").is_array() || d.at("traces").empty())
                throw ConfigError("every dataset needs a non-empty 'traces' array");
        }
    }
}

int cmd_validate(const json& config) {
    for (const std::string cmd : {"simulate", "sweep", "calibrate"}) {
        try {
            validate_config(config, cmd);
            return 0;  // valid for at least one command
        } catch (const ConfigError&) {
            continue;
        }
    }
    // Re-run the most likely command to surface the error message.
    validate_config(config, "simulate");
    return 0;
}

int cmd_simulate(const json& config, const CliOverrides& overrides) {
    validate_config(config, "simulate");
    const std::string model = config.contains("model")
                                  ? config.at("model").get<std::string>()
                                  : std::string("four_level");
    const OutputSpec out = output_from_config(config, overrides);
    const std::uint64_t seed = seed_from_config(config, overrides);
    const int threads = threads_from_config(config, overrides);
    const GridSpec grid = grid_from_config(config);
    const std::vector<double> durations = pulse_durations(config);

    long long n_meas = 0;
    double efficiency = 1.0;
    if (config.contains("poissonize")) {
        const json& p = config.at("poissonize");
        require_keys(p, "poissonize", {"n_measurements", "efficiency"});
        n_meas = static_cast<long long>(require_number(p, "poissonize", "n_measurements"));
        efficiency = number_or(p, "efficiency", 1.0);
    }

    int index = 0;
    for (const double duration : durations) {
        const PulseShape shape = pulse_from_config(config, duration);
        PhotonTrace trace;
        TraceMetadata meta;
        meta.pulse = shape;
        meta.extra = base_metadata(config, seed, "simulate");
        meta.extra["pulse_index"] = index;

        if (model == "four_level") {
            const EffectiveParams eff = effective_from_config(config);
            SimulatedTrace sim = simulate_trace(eff, shape, grid);
            trace = std::move(sim.trace);
            meta.effective = eff;
        } else {
            WaveguideSetup setup = waveguide_from_config(config, seed);
            setup.config.drive_amplitude = drive_from_pulse(shape);
            const auto edges = uniform_bin_edges(grid.t_start, grid.t_end, grid.bin_width);
            std::vector<double> centers(edges.size() - 1);
            for (std::size_t i = 0; i < centers.size(); ++i)
                centers[i] = 0.5 * (edges[i] + edges[i + 1]);
            trace.bin_edges = edges;
            trace.rates.resize(centers.size());
            if (setup.backend == "density") {
                WaveguidePropagation prop = propagate_density(setup.config, centers);
                for (std::size_t i = 0; i < centers.size(); ++i)
                    trace.rates[i] = std::max(
                        waveguide_emission(prop.states[i], setup.config,
                                           setup.config.drive_amplitude(centers[i])),
                        0.0);
            } else {
                TrajectoryOptions topts;
                topts.max_step = setup.max_step;
                topts.n_threads = threads;
                topts.drive_off_time = shape.end_time;
                TrajectoryEnsemble ens = propagate_trajectories(
                    setup.config, centers, setup.n_trajectories, seed + index, topts);
                for (std::size_t i = 0; i < centers.size(); ++i)
                    trace.rates[i] = std::max(
                        waveguide_emission(ens.bright_population[i], ens.coherence_im[i],
                                           setup.config,
                                           setup.config.drive_amplitude(centers[i])),
                        0.0);
                meta.extra["n_trajectories"] = setup.n_trajectories;
            }
            meta.extra["waveguide"] = {{"n_atoms", setup.config.n_atoms},
                                       {"kappa", setup.config.kappa},
                                       {"gamma_raman", setup.config.gamma_raman},
                                       {"backend", setup.backend}};
        }
        if (n_meas > 0) trace = poissonize(trace, n_meas, efficiency, seed + index);

        std::string stem = out.prefix;
        if (durations.size() > 1) stem += "_" + std::to_string(index);
        write_trace_files(out, stem, trace, meta);
        ++index;
    }
    return 0;
}

int cmd_sweep(const json& config, const CliOverrides& overrides) {
    validate_config(config, "sweep");
    const std::string model = config.contains("model")
                                  ? config.at("model").get<std::string>()
                                  : std::string("four_level");
    if (model != "four_level")
        throw ConfigError("sweep currently drives the four_level model");
    const OutputSpec out = output_from_config(config, overrides);
    const std::uint64_t seed = seed_from_config(config, overrides);
    const json& j = config.at("sweep");

    std::vector<double> lengths;
    if (j.contains("lengths_us")) {
        for (const auto& v : j.at("lengths_us")) lengths.push_back(v.get<double>());
    } else {
        const json& r = j.at("lengths");
        const double lo = require_number(r, "sweep.lengths", "min_us");
        const double hi = require_number(r, "sweep.lengths", "max_us");
        const int count = static_cast<int>(require_number(r, "sweep.lengths", "count"));
        for (int i = 0; i < count; ++i)
            lengths.push_back(count == 1 ? lo : lo + (hi - lo) * i / (count - 1));
    }

    const EffectiveParams eff = effective_from_config(config);
    const json& pulse_block = config.at("pulse");
    SweepOptions opts;
    opts.taper_time = number_or(pulse_block, "taper_us", 0.2);
    opts.end_time = number_or(pulse_block, "end_time_us", 0.0);
    opts.post_window = number_or(j, "post_window_us", 6.0);
    opts.pre_margin = number_or(j, "pre_margin_us", 0.1);
    opts.bin_width = number_or(j, "bin_width_us", 0.02);
    opts.threshold = threshold_from_json(j);
    opts.n_threads = threads_from_config(config, overrides);
    opts.seed = seed;
    if (config.contains("poissonize")) {
        const json& p = config.at("poissonize");
        opts.n_measurements =
            static_cast<long long>(require_number(p, "poissonize", "n_measurements"));
        opts.efficiency = number_or(p, "efficiency", 1.0);
    }

    const SweepResult sweep = sweep_pulse_lengths(eff, lengths, opts);

    std::ofstream csv(out.dir / (out.prefix + "_sweep.csv"));
    csv << "pulse_length_us,gamma,gamma_err,i0,i0_err\n";
    char buf[256];
    for (std::size_t i = 0; i < sweep.pulse_lengths.size(); ++i) {
        if (!sweep.fits[i]) continue;
        const FitResult& f = *sweep.fits[i];
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      sweep.pulse_lengths[i], f.gamma, std::sqrt(f.covariance(1, 1)),
                      f.i0, std::sqrt(f.covariance(0, 0)));
        csv << buf;
    }

    json meta = base_metadata(config, seed, "sweep");
    meta["schema"] = "superatom-sweep/1";
    meta["version"] = kVersion;
    meta["effective"] = effective_to_json(eff);
    meta["omega_col"] = sweep.omega_col;
    json failures = json::array();
    for (std::size_t i = 0; i < sweep.pulse_lengths.size(); ++i)
        if (!sweep.fits[i])
            failures.push_back(
                {{"pulse_length_us", sweep.pulse_lengths[i]}, {"error", sweep.failures[i]}});
    meta["failures"] = failures;
    const double detrend =
        number_or(j, "detrend_window_us",
                  sweep.omega_col > 0 ? two_pi / sweep.omega_col : 1.0);
    try {
        const PhaseCorrelation pc = phase_correlation(sweep, detrend);
        meta["phase_correlation"] = {{"pearson", pc.pearson},
                                     {"degenerate", pc.degenerate},
                                     {"n_used", pc.n_used}};
    } catch (const std::exception& e) {
        meta["phase_correlation"] = {{"error", e.what()}};
    }
    std::ofstream mf(out.dir / (out.prefix + "_sweep.json"));
    mf << meta.dump(2) << '\n';
    return 0;
}

int cmd_calibrate(const json& config, const CliOverrides& overrides) {
    validate_config(config, "calibrate");
    const OutputSpec out = output_from_config(config, overrides);
    const json& j = config.at("calibrate");

    CalibrationSettings settings;
    settings.seed = seed_from_config(config, overrides);
    settings.n_threads = threads_from_config(config, overrides);
    settings.multistarts = static_cast<int>(number_or(j, "multistarts", 8.0));
    settings.fix_gamma_d = j.contains("fix_gamma_d") && j.at("fix_gamma_d").get<bool>();
    settings.gamma_d_value = number_or(j, "gamma_d_value", 0.0);
    if (j.contains("post_pulse_gamma_d_adjust"))
        settings.post_pulse_gamma_d_adjust = j.at("post_pulse_gamma_d_adjust").get<bool>();
    if (j.contains("bounds")) {
        const json& b = j.at("bounds");
        require_keys(b, "calibrate.bounds", {"kappa", "varkappa", "gamma_d"});
        auto span = [&](const std::string& key, double& lo, double& hi) {
            if (!b.contains(key)) return;
            lo = b.at(key).at(0).get<double>();
            hi = b.at(key).at(1).get<double>();
        };
        span("kappa", settings.kappa_lo, settings.kappa_hi);
        span("varkappa", settings.varkappa_lo, settings.varkappa_hi);
        span("gamma_d", settings.gamma_d_lo, settings.gamma_d_hi);
    }

    std::vector<CalibrationDataset> datasets;
    for (const auto& dj : j.at("datasets")) {
        CalibrationDataset ds;
        ds.delta = angular_field(dj, "dataset", "delta");
        ds.gamma_raman = require_number(dj, "dataset", "gamma_raman_per_us");
        ds.r_p = require_number(dj, "dataset", "r_p_per_us");
        for (const auto& tf : dj.at("traces")) {
            const fs::path csv_path = tf.get<std::string>();
            if (!fs::exists(csv_path))
                throw std::runtime_error("trace file not found: " + csv_path.string());
            fs::path meta_path = csv_path;
            meta_path.replace_extension(".json");
            ds.traces.push_back(read_trace_csv(csv_path));
            ds.pulses.push_back(read_trace_metadata(meta_path).pulse);
        }
        datasets.push_back(std::move(ds));
    }

    const bool share = !j.contains("share_gamma_d") || j.at("share_gamma_d").get<bool>();
    const bool compare = j.contains("compare_with_independent") &&
                         j.at("compare_with_independent").get<bool>();

    json report = base_metadata(config, settings.seed, "calibrate");
    report["schema"] = "superatom-calibration/1";
    report["version"] = kVersion;
    json rows = json::array();

    if (share && datasets.size() > 1) {
        const JointResult joint = joint_fit(datasets, settings, compare);
        for (std::size_t d = 0; d < datasets.size(); ++d) {
            rows.push_back({{"r_p", datasets[d].r_p},
                            {"delta_2pi_mhz", mhz_from_angular(datasets[d].delta)},
                            {"kappa", joint.kappas[d]},
                            {"gamma_raman", datasets[d].gamma_raman},
                            {"gamma_d", joint.gamma_d},
                            {"varkappa", joint.varkappas[d]},
                            {"stage1_kappa", joint.stage1_kappas[d]}});
        }
        report["joint"] = {{"kappa_ref", joint.kappa_ref},
                           {"delta_ref_2pi_mhz", mhz_from_angular(joint.delta_ref)},
                           {"gamma_d", joint.gamma_d},
                           {"loss", joint.loss},
                           {"converged", joint.converged},
                           {"pinned", joint.pinned},
                           {"start_losses", joint.start_losses}};
        if (compare)
            report["joint"]["consistency"] = {
                {"independent_loss_sum", joint.independent_loss_sum},
                {"ratio", joint.consistency_ratio},
                {"inconsistent", joint.inconsistent}};
        std::vector<std::vector<double>> cov(joint.covariance.rows());
        for (int r = 0; r < joint.covariance.rows(); ++r)
            for (int c = 0; c < joint.covariance.cols(); ++c)
                cov[r].push_back(joint.covariance(r, c));
        report["joint"]["covariance"] = cov;
    } else {
        std::vector<double> fitted_kappas, fitted_varkappas;
        for (const auto& ds : datasets) {
            const CalibrationResult fit = fit_model_to_traces(ds, settings);
            rows.push_back({{"r_p", ds.r_p},
                            {"delta_2pi_mhz", mhz_from_angular(ds.delta)},
                            {"kappa", fit.kappa},
                            {"gamma_raman", ds.gamma_raman},
                            {"gamma_d", fit.gamma_d},
                            {"varkappa", fit.varkappa},
                            {"stage1_kappa", fit.stage1_kappa},
                            {"loss", fit.loss},
                            {"converged", fit.converged},
                            {"pinned", fit.pinned}});
            fitted_kappas.push_back(fit.kappa);
            fitted_varkappas.push_back(fit.varkappa);
        }
        if (fitted_kappas.size() >= 3) {
            try {
                const ScalingFit scaling = kappa_scaling(fitted_kappas, fitted_varkappas);
                report["varkappa_scaling"] = {{"slope", scaling.slope},
                                              {"intercept", scaling.intercept},
                                              {"slope_err", scaling.slope_err},
                                              {"r_squared", scaling.r_squared}};
            } catch (const std::exception& e) {
                report["varkappa_scaling"] = {{"error", e.what()}};
            }
        }
    }
    report["parameters"] = rows;
    std::ofstream rf(out.dir / (out.prefix + "_calibration.json"));
    rf << report.dump(2) << '\n';
    return 0;
}

int run_cli(int argc, char** argv) {
    CLI::App app{"Collective-decay simulation and analysis for a driven superatom"};
    app.require_subcommand(1);

    std::string config_path;
    CliOverrides overrides;
    std::string out_dir, format;
    std::uint64_t seed = 0;
    int threads = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON configuration file")->required();
        sub->add_option("--out", out_dir, "output directory (overrides config)");
        sub->add_option("--seed", seed, "random seed (overrides config)");
        sub->add_option("--threads", threads, "worker threads (overrides config)");
        sub->add_option("--format", format, "output format: csv or json");
    };
    CLI::App* sim = app.add_subcommand("simulate", "simulate photon traces");
    CLI::App* swp = app.add_subcommand("sweep", "pulse-length sweep with decay fits");
    CLI::App* cal = app.add_subcommand("calibrate", "fit the effective model to traces");
    CLI::App* val = app.add_subcommand("validate-config", "check a configuration file");
    for (CLI::App* sub : {sim, swp, cal, val}) add_common(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << nlohmann::json{
                         {"error", {{"type", "usage"}, {"message", e.what()}}}}
                         .dump()
                  << '\n';
        return 2;
    }

    auto fill = [&](CLI::App* sub) {
        if (sub->count("--out")) overrides.out_dir = out_dir;
        if (sub->count("--seed")) overrides.seed = seed;
        if (sub->count("--threads")) overrides.threads = threads;
        if (sub->count("--format")) overrides.format = format;
    };

    try {
        nlohmann::json config = load_config(config_path);
        if (sim->parsed()) {
            fill(sim);
            return cmd_simulate(config, overrides);
        }
        if (swp->parsed()) {
            fill(swp);
            return cmd_sweep(config, overrides);
        }
        if (cal->parsed()) {
            fill(cal);
            return cmd_calibrate(config, overrides);
        }
        return cmd_validate(config);
    } catch (const ConfigError& e) {
        std::cerr << nlohmann::json{{"error", {{"type", "config"}, {"message", e.what()}}}}
                         .dump()
                  << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << nlohmann::json{{"error", {{"type", "domain"}, {"message", e.what()}}}}
                         .dump()
                  << '\n';
        return 1;
    }
}

}  // namespace superatom

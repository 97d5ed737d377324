#include "superatom/trace_io.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace superatom {

namespace {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void write_trace_csv(const std::filesystem::path& path, const PhotonTrace& trace) {
    trace.validate();
    for (std::size_t i = 1; i + 1 < trace.bin_edges.size(); ++i) {
        const double w0 = trace.bin_width(0), wi = trace.bin_width(i);
        if (std::abs(wi - w0) > 1e-9 * w0)
            throw std::invalid_argument("trace CSV requires uniform bins");
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << (trace.has_counts() ? "t_bin_center_us,rate_per_us,counts\n"
                               : "t_bin_center_us,rate_per_us\n");
    for (std::size_t i = 0; i < trace.size(); ++i) {
        out << format_double(trace.bin_center(i)) << ',' << format_double(trace.rates[i]);
        if (trace.has_counts()) out << ',' << trace.counts[i];
        out << '\n';
    }
}

PhotonTrace read_trace_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("trace file not found: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty trace file: " + path.string());
    const bool with_counts = line.find("counts") != std::string::npos;

    std::vector<double> centers, rates;
    std::vector<long long> counts;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::getline(ss, field, ',');
        centers.push_back(std::stod(field));
        std::getline(ss, field, ',');
        rates.push_back(std::stod(field));
        if (with_counts) {
            std::getline(ss, field, ',');
            counts.push_back(std::stoll(field));
        }
    }
    if (centers.size() < 2) throw std::runtime_error("trace needs at least two bins");
    const double width = centers[1] - centers[0];
    for (std::size_t i = 1; i < centers.size(); ++i)
        if (std::abs(centers[i] - centers[i - 1] - width) > 1e-6 * width)
            throw std::runtime_error("trace bins are not uniform");

    PhotonTrace trace;
    trace.bin_edges.resize(centers.size() + 1);
    for (std::size_t i = 0; i < centers.size(); ++i)
        trace.bin_edges[i] = centers[i] - width / 2.0;
    trace.bin_edges.back() = centers.back() + width / 2.0;
    trace.rates = std::move(rates);
    trace.counts = std::move(counts);
    return trace;
}

nlohmann::json pulse_to_json(const PulseShape& shape) {
    return {{"duration_us", shape.duration},
            {"taper_us", shape.taper_time},
            {"peak_rate_per_us", shape.peak_rate},
            {"end_time_us", shape.end_time}};
}

PulseShape pulse_from_json(const nlohmann::json& j) {
    PulseShape shape;
    shape.duration = j.at("duration_us").get<double>();
    shape.taper_time = j.at("taper_us").get<double>();
    shape.peak_rate = j.at("peak_rate_per_us").get<double>();
    shape.end_time = j.at("end_time_us").get<double>();
    shape.validate();
    return shape;
}

nlohmann::json effective_to_json(const EffectiveParams& eff) {
    return {{"kappa", eff.kappa},
            {"varkappa", eff.varkappa},
            {"gamma_raman", eff.gamma_raman},
            {"gamma_d", eff.gamma_d},
            {"r_p", eff.r_p}};
}

EffectiveParams effective_from_json(const nlohmann::json& j) {
    EffectiveParams eff;
    eff.kappa = j.at("kappa").get<double>();
    eff.varkappa = j.at("varkappa").get<double>();
    eff.gamma_raman = j.at("gamma_raman").get<double>();
    eff.gamma_d = j.at("gamma_d").get<double>();
    eff.r_p = j.at("r_p").get<double>();
    eff.validate();
    return eff;
}

void write_trace_metadata(const std::filesystem::path& path, const TraceMetadata& meta) {
    nlohmann::json j = meta.extra;
    j["schema"] = "superatom-trace/1";
    j["version"] = kVersion;
    j["pulse"] = pulse_to_json(meta.pulse);
    if (meta.effective) j["effective"] = effective_to_json(*meta.effective);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
}

TraceMetadata read_trace_metadata(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("metadata file not found: " + path.string());
    nlohmann::json j = nlohmann::json::parse(in);
    TraceMetadata meta;
    meta.pulse = pulse_from_json(j.at("pulse"));
    if (j.contains("effective")) meta.effective = effective_from_json(j.at("effective"));
    meta.extra = j;
    return meta;
}

std::string config_hash(const nlohmann::json& config) {
    const std::string canonical = config.dump();
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, hash);
    return buf;
}

}  // namespace superatom

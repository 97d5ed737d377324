#include "superatom/trace.hpp"

#include <cmath>
#include <stdexcept>

#include "superatom/rng.hpp"

namespace superatom {

void PhotonTrace::validate() const {
    if (bin_edges.size() != rates.size() + 1)
        throw std::invalid_argument("bin edges must bracket every rate bin");
    for (std::size_t i = 1; i < bin_edges.size(); ++i)
        if (!(bin_edges[i] > bin_edges[i - 1]))
            throw std::invalid_argument("bin edges must be increasing");
    for (double r : rates)
        if (r < 0.0 || !std::isfinite(r))
            throw std::invalid_argument("rates must be finite and non-negative");
    if (has_counts() && counts.size() != rates.size())
        throw std::invalid_argument("counts must match rate bins");
    if (detection_efficiency <= 0.0 || detection_efficiency > 1.0)
        throw std::invalid_argument("detection efficiency must be in (0, 1]");
}

std::vector<double> uniform_bin_edges(double t_start, double t_end, double bin_width) {
    if (!(t_end > t_start)) throw std::invalid_argument("empty time span");
    if (!(bin_width > 0.0)) throw std::invalid_argument("bin width must be positive");
    const auto n = static_cast<std::size_t>(std::ceil((t_end - t_start) / bin_width - 1e-9));
    std::vector<double> edges(n + 1);
    for (std::size_t i = 0; i <= n; ++i) edges[i] = t_start + bin_width * static_cast<double>(i);
    return edges;
}

PhotonTrace poissonize(const PhotonTrace& trace, long long n_measurements, double efficiency,
                       std::uint64_t seed) {
    if (efficiency <= 0.0 || efficiency > 1.0)
        throw std::invalid_argument("efficiency must be in (0, 1]");
    if (n_measurements <= 0) throw std::invalid_argument("n_measurements must be positive");
    trace.validate();

    PhotonTrace out;
    out.bin_edges = trace.bin_edges;
    out.n_measurements = n_measurements;
    out.detection_efficiency = efficiency;
    out.rates.resize(trace.size());
    out.counts.resize(trace.size());
    Rng rng(seed);
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const double scale =
            trace.bin_width(i) * static_cast<double>(n_measurements) * efficiency;
        const long long c = rng.poisson(trace.rates[i] * scale);
        out.counts[i] = c;
        out.rates[i] = static_cast<double>(c) / scale;
    }
    return out;
}

}  // namespace superatom

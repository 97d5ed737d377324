#pragma once

#include <cstdint>
#include <vector>

namespace superatom {

// Time-binned forward photon rate, optionally with Poisson-sampled counts
// accumulated over repeated measurements.
struct PhotonTrace {
    std::vector<double> bin_edges;      // us, size = bins + 1, increasing
    std::vector<double> rates;          // photons/us per bin
    std::vector<long long> counts;      // empty for noiseless model traces
    long long n_measurements = 0;
    double detection_efficiency = 1.0;

    std::size_t size() const { return rates.size(); }
    bool has_counts() const { return !counts.empty(); }
    double bin_center(std::size_t i) const {
        return 0.5 * (bin_edges[i] + bin_edges[i + 1]);
    }
    double bin_width(std::size_t i) const { return bin_edges[i + 1] - bin_edges[i]; }
    void validate() const;
};

// Uniform bin edges covering [t_start, t_end] with the given width.
std::vector<double> uniform_bin_edges(double t_start, double t_end, double bin_width);

// Counts ~ Poisson(rate * width * n_measurements * efficiency) per bin;
// rates are replaced by the observed counts converted back to photons/us.
PhotonTrace poissonize(const PhotonTrace& trace, long long n_measurements,
                       double efficiency, std::uint64_t seed);

}  // namespace superatom

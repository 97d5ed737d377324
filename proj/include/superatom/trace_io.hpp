#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "superatom/params.hpp"
#include "superatom/pulse.hpp"
#include "superatom/trace.hpp"

#include <json.hpp>

namespace superatom {

// Trace files travel as a CSV (t_bin_center_us, rate_per_us[, counts]) with
// uniform bins plus a JSON sidecar carrying everything needed to regenerate
// them. The same schema serves the effective-model and waveguide exporters,
// so calibration can ingest either source.

void write_trace_csv(const std::filesystem::path& path, const PhotonTrace& trace);
PhotonTrace read_trace_csv(const std::filesystem::path& path);

nlohmann::json pulse_to_json(const PulseShape& shape);
PulseShape pulse_from_json(const nlohmann::json& j);

nlohmann::json effective_to_json(const EffectiveParams& eff);
EffectiveParams effective_from_json(const nlohmann::json& j);

struct TraceMetadata {
    PulseShape pulse;
    std::optional<EffectiveParams> effective;
    nlohmann::json extra;  // model block, seed, config hash, version
};

void write_trace_metadata(const std::filesystem::path& path, const TraceMetadata& meta);
TraceMetadata read_trace_metadata(const std::filesystem::path& path);

// FNV-1a over the canonical serialization; stamped into metadata so outputs
// can be traced back to the exact configuration.
std::string config_hash(const nlohmann::json& config);

inline constexpr const char* kVersion = "0.1.0";

}  // namespace superatom

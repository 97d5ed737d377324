#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

namespace superatom {

// Configuration error: schema violations, unknown keys, bad values.
// Commands exit with code 2 on these and 1 on domain failures.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct CliOverrides {
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<std::string> format;
};

nlohmann::json load_config(const std::filesystem::path& path);

// Throws ConfigError on unknown keys or malformed blocks.
void validate_config(const nlohmann::json& config, const std::string& command);

int cmd_validate(const nlohmann::json& config);
int cmd_simulate(const nlohmann::json& config, const CliOverrides& overrides);
int cmd_sweep(const nlohmann::json& config, const CliOverrides& overrides);
int cmd_calibrate(const nlohmann::json& config, const CliOverrides& overrides);

// Full argv entry point used by the binary; maps exceptions to exit codes
// 2 (usage/config) and 1 (domain) and prints a machine-readable error JSON
// to stderr.
int run_cli(int argc, char** argv);

}  // namespace superatom

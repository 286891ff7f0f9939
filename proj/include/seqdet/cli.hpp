#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace seqdet::cli {

/// Command-line overrides layered on top of the configuration file.
struct Overrides {
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> trials;
    std::optional<int> threads;
    bool quiet = false;
};

int run_command(const std::filesystem::path& config_path, const Overrides& overrides);
int sweep_command(const std::filesystem::path& config_path, const Overrides& overrides);
int calibrate_delta_command(const std::filesystem::path& config_path, const Overrides& overrides);
int calibrate_thresholds_command(const std::filesystem::path& config_path,
                                 const Overrides& overrides);

/// Full argv entry point; returns the process exit status.
int main_entry(int argc, const char* const* argv);

} // namespace seqdet::cli

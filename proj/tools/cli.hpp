#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "iibr/geometry.hpp"

namespace cli {

using json = nlohmann::json;

inline constexpr const char* version = IIBR_VERSION;

/// Bad flags or values: exit code 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Names the pipeline stage for runtime error messages.
void set_stage(const std::string& stage);
const std::string& stage();

/// Common flags every subcommand accepts.
struct Common {
    std::string config;
    std::uint64_t seed = 42;
    int threads = 1;
};
void add_common(CLI::App* sub, Common& c);

/// Fills options not given on the command line from the --config JSON file.
/// Keys are option long names with '-' replaced by '_'; unknown keys are rejected.
void merge_config(CLI::App* sub, const Common& c);

/// Resolved option values of a subcommand, as printed and stored in reports.
json resolved_config(CLI::App* sub);
/// Prints {"command", "version", "seed", "config"} and returns it.
json announce(CLI::App* sub, const Common& c);

/// "9x9" style pair; throws UsageError.
std::pair<int, int> parse_pair(const std::string& s, const char* what);
iibr::GridGeometry parse_grid(const std::string& grid, int height, int width);

void register_scene_commands(CLI::App& app);
void register_train_commands(CLI::App& app);
void register_fx_commands(CLI::App& app);

} // namespace cli

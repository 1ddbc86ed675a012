#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sencache {

struct CliOptions {
    std::string config_path;
    std::string out_override;                                   // --out
    std::optional<std::vector<std::uint64_t>> seeds_override;   // --seeds
    std::string axis;             // sweep: epsilon | n | calib_size
    std::vector<double> values;   // sweep values
    std::size_t budget = 0;       // plan budget
};

void cmd_calibrate(const CliOptions& opts);
void cmd_sample(const CliOptions& opts);
void cmd_sweep(const CliOptions& opts);
void cmd_plan(const CliOptions& opts);
void cmd_diagnose(const CliOptions& opts);

// Dispatches one subcommand and maps exceptions onto exit codes
// (1 config, 2 numeric, 3 I/O).
int run_command(const std::string& name, const CliOptions& opts);

}  // namespace sencache

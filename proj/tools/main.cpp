#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sencache/commands.hpp"
#include "sencache/config.hpp"
#include "sencache/errors.hpp"

int main(int argc, char** argv) {
    CLI::App app{"sencache - sensitivity-aware caching for probability-flow ODE samplers"};
    app.require_subcommand(1);

    sencache::CliOptions opts;
    std::string seeds_text;
    std::string values_text;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", opts.config_path, "run configuration file")->required();
        cmd->add_option("--out", opts.out_override, "output directory (overrides [run] out)");
        cmd->add_option("--seeds", seeds_text, "comma-separated seed list (overrides [run] seeds)");
    };

    CLI::App* calibrate = app.add_subcommand(
        "calibrate", "estimate per-timestep sensitivities and write a profile");
    add_common(calibrate);

    CLI::App* sample = app.add_subcommand(
        "sample", "run reference + policy sampling and write run reports");
    add_common(sample);

    CLI::App* sweep = app.add_subcommand("sweep", "run a hyperparameter sweep");
    add_common(sweep);
    sweep->add_option("--axis", opts.axis, "epsilon | n | calib_size")->required();
    sweep->add_option("--values", values_text, "comma-separated sweep values")->required();

    CLI::App* plan = app.add_subcommand(
        "plan", "plan a sensitivity-guided step subset and compare with uniform selection");
    add_common(plan);
    plan->add_option("--budget", opts.budget, "number of evaluation steps to keep")->required();

    CLI::App* diagnose = app.add_subcommand(
        "diagnose", "consecutive-step output MAE per configured field");
    add_common(diagnose);

    CLI11_PARSE(app, argc, argv);

    try {
        if (!seeds_text.empty())
            opts.seeds_override = sencache::parse_seed_list(seeds_text);
        if (!values_text.empty())
            opts.values = sencache::parse_double_list(values_text);
    } catch (const sencache::error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.exit_code();
    }

    const std::string name = app.get_subcommands().front()->get_name();
    return sencache::run_command(name, opts);
}

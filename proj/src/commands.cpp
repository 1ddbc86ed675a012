#include "sencache/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>

#include "sencache/config.hpp"
#include "sencache/errors.hpp"
#include "sencache/metrics.hpp"
#include "sencache/policy.hpp"

namespace sencache {

namespace {

namespace fs = std::filesystem;

RunConfig load_config(const CliOptions& opts) {
    if (opts.config_path.empty()) throw config_error("missing --config <path>");
    RunConfig cfg = RunConfig::load(opts.config_path);
    if (!opts.out_override.empty()) cfg.run.out_dir = opts.out_override;
    if (opts.seeds_override) {
        if (opts.seeds_override->empty()) throw config_error("--seeds list is empty");
        cfg.run.seeds = *opts.seeds_override;
    }
    return cfg;
}

fs::path ensure_out_dir(const RunConfig& cfg) {
    fs::path dir(cfg.run.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw io_error("cannot create output directory '" + dir.string() + "'");
    return dir;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream os(path);
    if (!os) throw io_error("cannot open '" + path.string() + "' for writing");
    return os;
}

bool policy_needs_profile(const std::string& policy) {
    return policy == "sencache" || policy == "teacache_like" || policy == "magcache_like";
}

SensitivityProfile load_profile_checked(const RunConfig& cfg, const TimestepGrid& grid) {
    if (cfg.policy.profile_path.empty())
        throw config_error("policy '" + cfg.policy.policy +
                           "' needs a calibrated profile; set profile = <path> in [policy]");
    SensitivityProfile profile = SensitivityProfile::load(cfg.policy.profile_path);
    if (profile.grid_hash() != grid.hash_hex())
        throw config_error("grid mismatch: profile '" + cfg.policy.profile_path +
                           "' was calibrated for grid " + profile.grid_hash() +
                           " but the run grid hashes to " + grid.hash_hex());
    return profile;
}

void put(std::ostream& os, double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    os << buf;
}

}  // namespace

void cmd_calibrate(const CliOptions& opts) {
    const RunConfig cfg = load_config(opts);
    const auto field = cfg.make_field();
    const TimestepGrid grid = cfg.make_grid();
    const SensitivityProfile profile = calibrate(*field, grid, cfg.calibration);

    const fs::path dir = ensure_out_dir(cfg);
    const fs::path out = dir / "profile.csv";
    profile.save(out.string());
    std::cout << "wrote " << out.string() << " (+ .meta), " << profile.entries().size()
              << " entries\n";
}

void cmd_sample(const CliOptions& opts) {
    const RunConfig cfg = load_config(opts);
    const auto field = cfg.make_field();
    const TimestepGrid grid = cfg.make_grid();

    SensitivityProfile profile;
    if (policy_needs_profile(cfg.policy.policy)) profile = load_profile_checked(cfg, grid);

    const fs::path dir = ensure_out_dir(cfg);
    std::ofstream runs = open_out(dir / "runs.csv");
    write_report_header(runs);

    for (const std::uint64_t seed : cfg.run.seeds) {
        const Trajectory reference = sample_reference(*field, grid, seed);
        auto policy = cfg.make_policy(profile);
        PolicyRun run = sample_with_policy(*field, grid, seed, *policy);
        add_fidelity(run.report, compare_runs(reference, run.trajectory));
        write_report_row(runs, run.report, cfg.config_hash);

        std::ofstream steps = open_out(dir / ("steps_" + std::to_string(seed) + ".csv"));
        write_decisions_csv(steps, run.report);

        if (cfg.run.write_trajectories) {
            std::ofstream ref_csv =
                open_out(dir / ("trajectory_" + std::to_string(seed) + "_reference.csv"));
            write_trajectory_csv(ref_csv, reference);
            std::ofstream pol_csv =
                open_out(dir / ("trajectory_" + std::to_string(seed) + "_policy.csv"));
            write_trajectory_csv(pol_csv, run.trajectory);
        }
    }
    std::cout << "wrote " << (dir / "runs.csv").string() << " (" << cfg.run.seeds.size()
              << " seeds)\n";
}

namespace {

struct SweepRow {
    double value = 0.0;
    double mean_nfe = 0.0;
    double mean_cache_ratio = 0.0;
    double mean_terminal_mse = std::numeric_limits<double>::quiet_NaN();
    double mean_terminal_psnr = std::numeric_limits<double>::quiet_NaN();
    double mean_rel_l2 = std::numeric_limits<double>::quiet_NaN();
};

SweepRow run_value_adaptive(const RunConfig& cfg, const VelocityField& field,
                            const TimestepGrid& grid, const SensitivityProfile& profile,
                            double value) {
    SweepRow row;
    row.value = value;
    double nfe = 0, ratio = 0, mse_sum = 0, psnr_sum = 0, rel_sum = 0;
    for (const std::uint64_t seed : cfg.run.seeds) {
        const Trajectory reference = sample_reference(field, grid, seed);
        auto policy = cfg.make_policy(profile);
        PolicyRun run = sample_with_policy(field, grid, seed, *policy);
        const Fidelity f = compare_runs(reference, run.trajectory);
        nfe += static_cast<double>(run.report.nfe);
        ratio += run.report.cache_ratio;
        mse_sum += f.terminal_mse;
        psnr_sum += f.terminal_psnr;
        rel_sum += f.trajectory_rel_l2;
    }
    const auto n = static_cast<double>(cfg.run.seeds.size());
    row.mean_nfe = nfe / n;
    row.mean_cache_ratio = ratio / n;
    row.mean_terminal_mse = mse_sum / n;
    row.mean_terminal_psnr = psnr_sum / n;
    row.mean_rel_l2 = rel_sum / n;
    return row;
}

ScoreTerms terms_for_policy(const std::string& policy) {
    if (policy == "teacache_like") return ScoreTerms::TimestepOnly;
    if (policy == "magcache_like") return ScoreTerms::LatentOnly;
    return ScoreTerms::Combined;
}

SweepRow run_value_static(const RunConfig& cfg, const VelocityField& field,
                          const TimestepGrid& grid, const SensitivityProfile& profile,
                          double value) {
    SweepRow row;
    row.value = value;
    const EpsilonSchedule schedule = cfg.policy.cache.schedule();
    const ScoreTerms terms = terms_for_policy(cfg.policy.policy);
    double nfe = 0, ratio = 0;
    for (const std::uint64_t seed : cfg.run.seeds) {
        const Trajectory reference = sample_reference(field, grid, seed);
        const std::vector<double> scores = static_transition_scores(reference, profile, terms);
        const StaticRun sr = evaluate_static(scores, schedule, cfg.policy.cache.max_reuse);
        nfe += static_cast<double>(sr.nfe);
        ratio += static_cast<double>(sr.hits) / static_cast<double>(scores.size());
    }
    const auto n = static_cast<double>(cfg.run.seeds.size());
    row.mean_nfe = nfe / n;
    row.mean_cache_ratio = ratio / n;
    return row;
}

}  // namespace

void cmd_sweep(const CliOptions& opts) {
    RunConfig cfg = load_config(opts);
    if (opts.axis != "epsilon" && opts.axis != "n" && opts.axis != "calib_size")
        throw config_error("sweep axis must be epsilon|n|calib_size, got '" + opts.axis + "'");
    if (opts.values.empty()) throw config_error("sweep needs --values");

    const auto field = cfg.make_field();
    const TimestepGrid grid = cfg.make_grid();
    const fs::path dir = ensure_out_dir(cfg);
    const fs::path out = dir / ("sweep_" + opts.axis + ".csv");
    std::ofstream os = open_out(out);

    if (opts.axis == "calib_size") {
        // Profile stability study: deviation against the largest set size.
        std::vector<std::pair<double, SensitivityProfile>> profiles;
        CalibrationConfig calib = cfg.calibration;
        std::size_t largest = 0;
        for (const double v : opts.values) {
            const auto count = static_cast<std::size_t>(v);
            if (count < 1 || static_cast<double>(count) != v)
                throw config_error("calib_size values must be positive integers");
            calib.num_samples = count;
            profiles.emplace_back(v, calibrate(*field, grid, calib));
            largest = std::max(largest, count);
        }
        const SensitivityProfile* base = nullptr;
        for (const auto& [v, p] : profiles)
            if (static_cast<std::size_t>(v) == largest) base = &p;

        os << "axis,value,max_rel_dev_alpha_x,max_rel_dev_alpha_t\n";
        for (const auto& [v, p] : profiles) {
            double dev_x = 0.0, dev_t = 0.0;
            for (std::size_t i = 0; i < p.entries().size(); ++i) {
                const auto& e = p.entries()[i];
                const auto& b = base->entries()[i];
                if (b.alpha_x > 0.0)
                    dev_x = std::max(dev_x, std::fabs(e.alpha_x - b.alpha_x) / b.alpha_x);
                if (b.alpha_t > 0.0)
                    dev_t = std::max(dev_t, std::fabs(e.alpha_t - b.alpha_t) / b.alpha_t);
            }
            os << "calib_size," << static_cast<std::size_t>(v) << ',';
            put(os, dev_x);
            os << ',';
            put(os, dev_t);
            os << "\n";
        }
        std::cout << "wrote " << out.string() << "\n";
        return;
    }

    if (!policy_needs_profile(cfg.policy.policy))
        throw config_error("sweep axis '" + opts.axis +
                           "' needs a sensitivity policy (sencache|teacache_like|magcache_like)");
    const SensitivityProfile profile = load_profile_checked(cfg, grid);

    os << "axis,value,mode,mean_nfe,mean_cache_ratio,mean_terminal_mse,mean_terminal_psnr,"
          "mean_trajectory_rel_l2\n";
    for (const double v : opts.values) {
        if (opts.axis == "epsilon") {
            if (!(v > 0.0)) throw config_error("epsilon values must be positive");
            cfg.policy.cache.epsilon = v;
        } else {
            const auto n = static_cast<std::size_t>(v);
            if (n < 1 || static_cast<double>(n) != v)
                throw config_error("n values must be positive integers");
            cfg.policy.cache.max_reuse = n;
        }
        const SweepRow row = cfg.policy.mode == "static"
                                 ? run_value_static(cfg, *field, grid, profile, v)
                                 : run_value_adaptive(cfg, *field, grid, profile, v);
        os << opts.axis << ',';
        put(os, row.value);
        os << ',' << cfg.policy.mode << ',';
        put(os, row.mean_nfe);
        os << ',';
        put(os, row.mean_cache_ratio);
        os << ',';
        put(os, row.mean_terminal_mse);
        os << ',';
        put(os, row.mean_terminal_psnr);
        os << ',';
        put(os, row.mean_rel_l2);
        os << "\n";
    }
    std::cout << "wrote " << out.string() << "\n";
}

namespace {

// Uniform selection of `budget` transitions out of the reference grid:
// node indices round(i*K/budget), endpoints kept exactly.
TimestepGrid uniform_subgrid(const TimestepGrid& grid, std::size_t budget) {
    const std::size_t K = grid.transitions();
    std::vector<double> knots;
    knots.reserve(budget + 1);
    std::size_t prev = 0;
    knots.push_back(grid.knot(0));
    for (std::size_t i = 1; i < budget; ++i) {
        auto idx = static_cast<std::size_t>(
            std::llround(static_cast<double>(i) * static_cast<double>(K) /
                         static_cast<double>(budget)));
        idx = std::clamp(idx, prev + 1, K - (budget - i));
        knots.push_back(grid.knot(idx));
        prev = idx;
    }
    knots.push_back(grid.knot(K));
    return TimestepGrid::from_knots(std::move(knots));
}

}  // namespace

void cmd_plan(const CliOptions& opts) {
    const RunConfig cfg = load_config(opts);
    if (opts.budget < 2) throw config_error("plan needs --budget >= 2");
    const auto field = cfg.make_field();
    const TimestepGrid grid = cfg.make_grid();
    if (opts.budget > grid.transitions())
        throw config_error("budget " + std::to_string(opts.budget) + " exceeds the grid's " +
                           std::to_string(grid.transitions()) + " transitions");
    const SensitivityProfile profile = load_profile_checked(cfg, grid);

    // Plan once from the first seed's reference, evaluate on all seeds.
    const std::uint64_t planning_seed = cfg.run.seeds.front();
    const Trajectory planning_ref = sample_reference(*field, grid, planning_seed);
    const TimestepGrid planned = plan_schedule(profile, planning_ref, opts.budget);
    const TimestepGrid uniform = uniform_subgrid(grid, opts.budget);

    const fs::path dir = ensure_out_dir(cfg);
    {
        std::ofstream gs = open_out(dir / "planned_grid.csv");
        gs << "t\n";
        for (const double t : planned.knots()) {
            put(gs, t);
            gs << "\n";
        }
    }

    std::ofstream report = open_out(dir / "plan_report.csv");
    report << "seed,variant,budget,terminal_mse,terminal_psnr\n";
    for (const std::uint64_t seed : cfg.run.seeds) {
        const Trajectory full = sample_reference(*field, grid, seed);
        for (const auto& [variant, sub] :
             {std::pair<const char*, const TimestepGrid*>{"planned", &planned},
              std::pair<const char*, const TimestepGrid*>{"uniform", &uniform}}) {
            const Trajectory coarse = sample_reference(*field, *sub, seed);
            const TerminalError e = compare_terminal(full, coarse);
            report << seed << ',' << variant << ',' << opts.budget << ',';
            put(report, e.mse);
            report << ',';
            put(report, e.psnr);
            report << "\n";
        }
    }
    std::cout << "wrote " << (dir / "planned_grid.csv").string() << " and "
              << (dir / "plan_report.csv").string() << "\n";
}

void cmd_diagnose(const CliOptions& opts) {
    const RunConfig cfg = load_config(opts);
    const TimestepGrid grid = cfg.make_grid();
    const fs::path dir = ensure_out_dir(cfg);

    for (const auto& [label, spec] : cfg.fields) {
        const auto field = cfg.make_field(label);
        const std::size_t K = grid.transitions();
        std::vector<double> mean_mae(K, 0.0);
        for (const std::uint64_t seed : cfg.run.seeds) {
            const Trajectory reference = sample_reference(*field, grid, seed);
            const std::vector<double> mae = consecutive_step_mae(reference, *field);
            for (std::size_t i = 0; i < K; ++i) mean_mae[i] += mae[i];
        }
        for (auto& v : mean_mae) v /= static_cast<double>(cfg.run.seeds.size());

        std::ofstream os = open_out(dir / ("mae_" + label + ".csv"));
        os << "step,t_from,t_to,mean_mae\n";
        for (std::size_t i = 0; i < K; ++i) {
            os << i << ',';
            put(os, grid.knot(i));
            os << ',';
            put(os, grid.knot(i + 1));
            os << ',';
            put(os, mean_mae[i]);
            os << "\n";
        }
        std::cout << "wrote " << (dir / ("mae_" + label + ".csv")).string() << "\n";
    }
}

int run_command(const std::string& name, const CliOptions& opts) {
    try {
        if (name == "calibrate") cmd_calibrate(opts);
        else if (name == "sample") cmd_sample(opts);
        else if (name == "sweep") cmd_sweep(opts);
        else if (name == "plan") cmd_plan(opts);
        else if (name == "diagnose") cmd_diagnose(opts);
        else throw config_error("unknown command '" + name + "'");
        return 0;
    } catch (const error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace sencache

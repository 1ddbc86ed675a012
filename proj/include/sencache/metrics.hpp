#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string_view>
#include <vector>

#include "sencache/linalg.hpp"

namespace sencache {

struct Trajectory;
class VelocityField;

// One cache decision: made when the sampler arrives at step_index (node
// index in integration order, 1..K).
struct DecisionRecord {
    std::size_t step_index = 0;
    double t = 0.0;
    bool hit = false;
    double score = 0.0;
    double epsilon_used = 0.0;
};

// Efficiency and fidelity summary of one sampling run. The accounting
// identity nfe + hits == K + 1 holds for every policy run (K transitions
// plus the mandatory first evaluation). Fidelity fields stay NaN until
// filled against an uncached reference.
struct RunReport {
    std::uint64_t seed = 0;
    std::size_t transitions = 0;  // K
    std::size_t nfe = 0;
    std::size_t hits = 0;
    double cache_ratio = 0.0;  // hits / K
    std::vector<DecisionRecord> decisions;

    double terminal_mse = std::numeric_limits<double>::quiet_NaN();
    double terminal_psnr = std::numeric_limits<double>::quiet_NaN();
    double trajectory_rel_l2 = std::numeric_limits<double>::quiet_NaN();
};

// PSNR in dB, capped at kPsnrCapDb (the value reported for MSE == 0).
inline constexpr double kPsnrCapDb = 200.0;
double mse(const Vec& reference, const Vec& candidate);
double psnr(const Vec& reference, const Vec& candidate, double peak);

struct Fidelity {
    double terminal_mse = 0.0;
    double terminal_psnr = 0.0;
    double trajectory_rel_l2 = 0.0;
};

// Fidelity of a cached run against the uncached reference with the same grid
// and seed. PSNR peak is the max absolute component of the reference
// terminal state.
Fidelity compare_runs(const Trajectory& reference, const Trajectory& cached);

struct TerminalError {
    double mse = 0.0;
    double psnr = 0.0;
};

// Terminal-state error for runs on different grids of the same seed (both
// grids must end at t = 0).
TerminalError compare_terminal(const Trajectory& reference, const Trajectory& coarse);

void add_fidelity(RunReport& report, const Fidelity& f);

// Mean absolute difference of field outputs across consecutive trajectory
// states, one value per transition. Requires an uncached reference
// trajectory (all transition velocities freshly evaluated).
std::vector<double> consecutive_step_mae(const Trajectory& trajectory,
                                         const VelocityField& field);

// Spearman rank correlation (average ranks on ties).
double spearman(const std::vector<double>& a, const std::vector<double>& b);

// CSV writers. Summary: one row per run. Decisions: one row per step.
void write_report_header(std::ostream& os);
void write_report_row(std::ostream& os, const RunReport& report, std::string_view config_hash);
void write_decisions_csv(std::ostream& os, const RunReport& report);

}  // namespace sencache

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sencache/field.hpp"
#include "sencache/linalg.hpp"
#include "sencache/metrics.hpp"

namespace sencache {

class CachePolicy;

// Strictly decreasing timestep knots from T down to 0, stored in integration
// order: knot(0) == T, knot(K) == 0 with K == transitions().
class TimestepGrid {
public:
    static TimestepGrid uniform(std::size_t transitions,
                                double terminal_time = InterpolantSchedule::kTerminalTime);
    static TimestepGrid from_knots(std::vector<double> knots);

    std::size_t transitions() const { return knots_.size() - 1; }
    std::size_t nodes() const { return knots_.size(); }
    double knot(std::size_t i) const { return knots_[i]; }
    const std::vector<double>& knots() const { return knots_; }
    double min_spacing() const;

    // FNV-1a over the knots' bit patterns; identifies the grid in profile
    // metadata.
    std::string hash_hex() const;

private:
    explicit TimestepGrid(std::vector<double> knots) : knots_(std::move(knots)) {}
    std::vector<double> knots_;
};

// One node of a sampling run. `velocity` is the field output attached at
// (t, state): for non-terminal nodes it drives the outgoing Euler update.
// `evaluated == false` means the velocity is a reuse of the most recent
// evaluated one.
struct StepRecord {
    double t = 0.0;
    Vec state;
    Vec velocity;
    bool evaluated = false;
};

struct Trajectory {
    std::vector<StepRecord> steps;  // nodes() entries, decreasing t
    std::uint64_t seed = 0;

    std::size_t transitions() const { return steps.size() - 1; }
    const Vec& terminal_state() const { return steps.back().state; }
};

// Initial state at t = T: standard normal draw from the seeded generator.
Vec draw_initial_state(std::uint64_t seed, std::size_t dim);

// Explicit Euler integration from T down to 0 with a fresh field evaluation
// at every transition source. NFE == K; the terminal node reuses the last
// evaluated velocity (no evaluation is spent on a node with no outgoing
// transition). Throws diverged_error if a state leaves the finite range.
Trajectory sample_reference(const VelocityField& field, const TimestepGrid& grid,
                            std::uint64_t seed);

struct PolicyRun {
    Trajectory trajectory;
    RunReport report;
};

// Euler integration where every velocity after the mandatory first
// evaluation is supplied either fresh or from cache, as the policy decides.
// One decision per node 1..K, so nfe + hits == K + 1.
PolicyRun sample_with_policy(const VelocityField& field, const TimestepGrid& grid,
                             std::uint64_t seed, CachePolicy& policy);

// Columns: step_index,t,evaluated,x0..x{d-1}.
void write_trajectory_csv(std::ostream& os, const Trajectory& trajectory);

}  // namespace sencache

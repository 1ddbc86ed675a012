#include "sencache/sampler.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>

#include "sencache/errors.hpp"
#include "sencache/policy.hpp"
#include "sencache/rng.hpp"

namespace sencache {

namespace {

void check_knots(const std::vector<double>& knots, double terminal_time) {
    if (knots.size() < 2) throw config_error("grid needs at least two knots");
    if (knots.front() != terminal_time)
        throw config_error("grid must start at t = " + std::to_string(terminal_time));
    if (knots.back() != 0.0) throw config_error("grid must end at t = 0");
    for (std::size_t i = 1; i < knots.size(); ++i)
        if (!(knots[i] < knots[i - 1]))
            throw config_error("grid knots must be strictly decreasing");
}

std::uint64_t fnv1a_doubles(const std::vector<double>& v) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    const auto* p = reinterpret_cast<const unsigned char*>(v.data());
    for (std::size_t i = 0; i < v.size() * sizeof(double); ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

TimestepGrid TimestepGrid::uniform(std::size_t transitions, double terminal_time) {
    if (transitions == 0) throw config_error("grid needs at least one transition");
    std::vector<double> knots(transitions + 1);
    for (std::size_t i = 0; i <= transitions; ++i) {
        knots[i] = terminal_time * static_cast<double>(transitions - i) /
                   static_cast<double>(transitions);
    }
    knots.front() = terminal_time;  // exact endpoints
    knots.back() = 0.0;
    return TimestepGrid(std::move(knots));
}

TimestepGrid TimestepGrid::from_knots(std::vector<double> knots) {
    check_knots(knots, InterpolantSchedule::kTerminalTime);
    return TimestepGrid(std::move(knots));
}

double TimestepGrid::min_spacing() const {
    double m = knots_[0] - knots_[1];
    for (std::size_t i = 1; i + 1 < knots_.size(); ++i)
        m = std::min(m, knots_[i] - knots_[i + 1]);
    return m;
}

std::string TimestepGrid::hash_hex() const {
    std::uint64_t h = fnv1a_doubles(knots_);
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Vec draw_initial_state(std::uint64_t seed, std::size_t dim) {
    NormalSource normals(seed);
    return normals.vector(dim);
}

namespace {

void check_state_finite(const Vec& x, std::size_t step_index) {
    if (!all_finite(x))
        throw diverged_error("trajectory diverged at step " + std::to_string(step_index),
                             step_index);
}

}  // namespace

Trajectory sample_reference(const VelocityField& field, const TimestepGrid& grid,
                            std::uint64_t seed) {
    const std::size_t K = grid.transitions();
    Trajectory traj;
    traj.seed = seed;
    traj.steps.reserve(K + 1);

    Vec x = draw_initial_state(seed, field.dim());
    for (std::size_t i = 0; i < K; ++i) {
        const double t = grid.knot(i);
        Vec v = field.evaluate(x, t);
        traj.steps.push_back({t, x, v, true});
        const double dt = grid.knot(i + 1) - t;
        for (std::size_t c = 0; c < x.size(); ++c) x[c] += dt * v[c];
        check_state_finite(x, i + 1);
    }
    // No outgoing transition at t = 0; carry the last evaluated velocity.
    traj.steps.push_back({grid.knot(K), x, traj.steps.back().velocity, false});
    return traj;
}

PolicyRun sample_with_policy(const VelocityField& field, const TimestepGrid& grid,
                             std::uint64_t seed, CachePolicy& policy) {
    const std::size_t K = grid.transitions();
    PolicyRun run;
    Trajectory& traj = run.trajectory;
    RunReport& report = run.report;
    traj.seed = seed;
    traj.steps.reserve(K + 1);
    report.seed = seed;
    report.transitions = K;
    report.decisions.reserve(K);

    Vec x = draw_initial_state(seed, field.dim());
    Vec y = field.evaluate(x, grid.knot(0));  // mandatory first evaluation
    report.nfe = 1;
    traj.steps.push_back({grid.knot(0), x, y, true});
    policy.begin_run(x, grid.knot(0), y);

    for (std::size_t i = 0; i < K; ++i) {
        const double t_next = grid.knot(i + 1);
        const double dt = t_next - grid.knot(i);
        Vec step_dx(x.size());
        for (std::size_t c = 0; c < x.size(); ++c) {
            step_dx[c] = dt * y[c];
            x[c] += step_dx[c];
        }
        check_state_finite(x, i + 1);

        const PolicyDecision d = policy.decide(step_dx, dt, i, K);
        if (d.hit) {
            ++report.hits;
        } else {
            y = field.evaluate(x, t_next);
            ++report.nfe;
            policy.on_refresh(x, t_next, y);
        }
        traj.steps.push_back({t_next, x, y, !d.hit});
        report.decisions.push_back({i + 1, t_next, d.hit, d.score, d.epsilon_used});
    }

    report.cache_ratio = static_cast<double>(report.hits) / static_cast<double>(K);
    return run;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& trajectory) {
    os << "step_index,t,evaluated";
    const std::size_t d = trajectory.steps.empty() ? 0 : trajectory.steps.front().state.size();
    for (std::size_t c = 0; c < d; ++c) os << ",x" << c;
    os << "\n";
    char buf[32];
    for (std::size_t i = 0; i < trajectory.steps.size(); ++i) {
        const auto& s = trajectory.steps[i];
        std::snprintf(buf, sizeof(buf), "%.17g", s.t);
        os << i << ',' << buf << ',' << (s.evaluated ? 1 : 0);
        for (double v : s.state) {
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            os << ',' << buf;
        }
        os << "\n";
    }
}

}  // namespace sencache

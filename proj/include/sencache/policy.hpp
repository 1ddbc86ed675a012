#pragma once

#include <cstddef>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "sencache/linalg.hpp"
#include "sencache/sampler.hpp"
#include "sencache/sensitivity.hpp"

namespace sencache {

inline constexpr std::size_t kUnlimitedReuse = std::numeric_limits<std::size_t>::max();

// Piecewise-constant tolerance over the step fraction (completed transitions
// divided by K). Pieces are sorted by from_fraction; the first must start
// at 0.
struct EpsilonSchedule {
    struct Piece {
        double from_fraction = 0.0;
        double epsilon = 0.0;
    };
    std::vector<Piece> pieces;

    double at(double step_fraction) const;

    // Two-level default: eps_guard while step_fraction < guard_fraction,
    // eps afterwards.
    static EpsilonSchedule guarded(double epsilon, double epsilon_guard,
                                   double guard_fraction);
};

struct CachePolicyConfig {
    double epsilon = 0.05;
    double epsilon_guard = 0.01;
    double guard_fraction = 0.20;
    std::size_t max_reuse = 3;  // consecutive reuses allowed before a forced refresh
    std::vector<EpsilonSchedule::Piece> custom_pieces;  // overrides the two-level default

    EpsilonSchedule schedule() const;
    void validate() const;
};

// Running accumulators of the caching loop. After every refresh the drift,
// time gap and reuse count are zero and the reference triple points at the
// freshly evaluated step. reuse_count never exceeds max_reuse.
struct CacheState {
    Vec ref_state;
    double ref_time = 0.0;
    Vec ref_velocity;

    Vec drift;             // accumulated latent change since last refresh
    double time_gap = 0.0;       // accumulated (signed) timestep change
    std::size_t reuse_count = 0;

    double alpha_x = 0.0;  // sensitivities looked up at ref_time
    double alpha_t = 0.0;

    void refresh(const Vec& x, double t, const Vec& y, double ax, double at_);
};

// First-order predictor of the output change: alpha_x * ||drift|| +
// alpha_t * |time gap|. All inputs must be non-negative.
double sensitivity_score(double alpha_x, double alpha_t, double drift_norm,
                         double time_gap_abs);

struct PolicyDecision {
    bool hit = false;
    double score = 0.0;
    double epsilon_used = 0.0;
};

class CachePolicy {
public:
    virtual ~CachePolicy() = default;

    virtual std::string name() const = 0;

    // Called once after the mandatory first evaluation.
    virtual void begin_run(const Vec& x, double t, const Vec& y) = 0;

    // One call per transition, with the Euler increment just taken. A Hit
    // means the cached velocity is reused at the new node; a Miss must be
    // followed by on_refresh with the fresh evaluation.
    virtual PolicyDecision decide(const Vec& step_dx, double step_dt,
                                  std::size_t decision_index,
                                  std::size_t total_transitions) = 0;

    virtual void on_refresh(const Vec& x, double t, const Vec& y) = 0;
};

// Which terms of the sensitivity score a policy uses. The reduced variants
// reproduce the blind spots of timestep-only and latent-only heuristics.
enum class ScoreTerms {
    Combined,      // alpha_x*||d|| + alpha_t*|tau|
    TimestepOnly,  // alpha_t*|tau|
    LatentOnly,    // alpha_x*||d||
};

class SensitivityCachePolicy final : public CachePolicy {
public:
    SensitivityCachePolicy(const SensitivityProfile& profile, CachePolicyConfig config,
                           ScoreTerms terms = ScoreTerms::Combined);

    std::string name() const override;
    void begin_run(const Vec& x, double t, const Vec& y) override;
    PolicyDecision decide(const Vec& step_dx, double step_dt,
                          std::size_t decision_index,
                          std::size_t total_transitions) override;
    void on_refresh(const Vec& x, double t, const Vec& y) override;

    const CacheState& state() const { return state_; }

private:
    const SensitivityProfile* profile_;
    CachePolicyConfig config_;
    EpsilonSchedule schedule_;
    ScoreTerms terms_;
    CacheState state_;
};

std::unique_ptr<CachePolicy> make_sencache(const SensitivityProfile& profile,
                                           CachePolicyConfig config);
std::unique_ptr<CachePolicy> make_teacache_like(const SensitivityProfile& profile,
                                                CachePolicyConfig config);
std::unique_ptr<CachePolicy> make_magcache_like(const SensitivityProfile& profile,
                                                CachePolicyConfig config);

// Evaluates at every keep_every-th transition (the mandatory first
// evaluation covers transition 0) and reuses otherwise; no guard, no reuse
// budget. The terminal node always reuses.
class UniformSkipPolicy final : public CachePolicy {
public:
    explicit UniformSkipPolicy(std::size_t keep_every);

    std::string name() const override { return "uniform"; }
    void begin_run(const Vec& x, double t, const Vec& y) override;
    PolicyDecision decide(const Vec& step_dx, double step_dt,
                          std::size_t decision_index,
                          std::size_t total_transitions) override;
    void on_refresh(const Vec& x, double t, const Vec& y) override;

private:
    std::size_t keep_every_;
};

// Always evaluates; reproduces the reference trajectory bit-exactly with
// cache ratio 0.
class NeverCachePolicy final : public CachePolicy {
public:
    std::string name() const override { return "none"; }
    void begin_run(const Vec&, double, const Vec&) override {}
    PolicyDecision decide(const Vec&, double, std::size_t, std::size_t) override;
    void on_refresh(const Vec&, double, const Vec&) override {}
};

// --- teacher-forced (static) evaluation --------------------------------
//
// Per-transition scores computed on a frozen, fully evaluated reference
// trajectory: S_k = alpha_x(t_k)*||dx_k|| + alpha_t(t_k)*|dt_k| with lookups
// at each transition source. Decisions derived from these scores do not
// feed back into the trajectory, which makes tolerance monotonicity exact.
std::vector<double> static_transition_scores(const Trajectory& reference,
                                             const SensitivityProfile& profile,
                                             ScoreTerms terms = ScoreTerms::Combined);

// Transition indices with S_k <= epsilon (n unlimited, no guard). Hit sets
// nest monotonically in epsilon.
std::vector<std::size_t> static_hit_set(const std::vector<double>& scores, double epsilon);

struct StaticRun {
    std::vector<bool> hit;  // one entry per transition
    std::size_t nfe = 0;    // misses + the mandatory first evaluation
    std::size_t hits = 0;
};

// Walks the frozen scores with the full epsilon-schedule and reuse-budget
// machinery.
StaticRun evaluate_static(const std::vector<double>& scores, const EpsilonSchedule& schedule,
                          std::size_t max_reuse);

// Sensitivity-guided step planner: selects `budget` evaluation transitions
// out of the reference grid by splitting the cumulative transition score
// into equal-mass segments (endpoints always kept), and returns the induced
// sub-grid. budget must lie in [2, K].
TimestepGrid plan_schedule(const SensitivityProfile& profile, const Trajectory& reference,
                           std::size_t budget);

}  // namespace sencache

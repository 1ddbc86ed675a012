#include "sencache/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sencache/errors.hpp"

namespace sencache {

double EpsilonSchedule::at(double step_fraction) const {
    if (pieces.empty()) throw config_error("epsilon schedule has no pieces");
    double eps = pieces.front().epsilon;
    for (const auto& p : pieces) {
        if (step_fraction >= p.from_fraction) eps = p.epsilon;
        else break;
    }
    return eps;
}

EpsilonSchedule EpsilonSchedule::guarded(double epsilon, double epsilon_guard,
                                         double guard_fraction) {
    EpsilonSchedule s;
    if (guard_fraction <= 0.0) {
        s.pieces = {{0.0, epsilon}};
    } else if (guard_fraction >= 1.0) {
        s.pieces = {{0.0, epsilon_guard}};
    } else {
        s.pieces = {{0.0, epsilon_guard}, {guard_fraction, epsilon}};
    }
    return s;
}

EpsilonSchedule CachePolicyConfig::schedule() const {
    if (!custom_pieces.empty()) {
        EpsilonSchedule s{custom_pieces};
        if (s.pieces.front().from_fraction != 0.0)
            throw config_error("custom epsilon schedule must start at fraction 0");
        for (std::size_t i = 1; i < s.pieces.size(); ++i)
            if (!(s.pieces[i].from_fraction > s.pieces[i - 1].from_fraction))
                throw config_error("custom epsilon schedule fractions must increase");
        for (const auto& p : s.pieces)
            if (!(p.epsilon > 0.0)) throw config_error("epsilon values must be positive");
        return s;
    }
    return EpsilonSchedule::guarded(epsilon, epsilon_guard, guard_fraction);
}

void CachePolicyConfig::validate() const {
    if (!(epsilon > 0.0)) throw config_error("epsilon must be positive");
    if (!(epsilon_guard > 0.0)) throw config_error("epsilon_guard must be positive");
    if (!(guard_fraction >= 0.0 && guard_fraction <= 1.0))
        throw config_error("guard_fraction must lie in [0, 1]");
    if (max_reuse < 1) throw config_error("max_reuse must be >= 1");
    (void)schedule();
}

void CacheState::refresh(const Vec& x, double t, const Vec& y, double ax, double at_) {
    ref_state = x;
    ref_time = t;
    ref_velocity = y;
    drift.assign(x.size(), 0.0);
    time_gap = 0.0;
    reuse_count = 0;
    alpha_x = ax;
    alpha_t = at_;
}

double sensitivity_score(double alpha_x, double alpha_t, double drift_norm,
                         double time_gap_abs) {
    if (alpha_x < 0.0 || alpha_t < 0.0 || drift_norm < 0.0 || time_gap_abs < 0.0)
        throw domain_error("sensitivity_score: negative input");
    return alpha_x * drift_norm + alpha_t * time_gap_abs;
}

// ---- SensitivityCachePolicy -----------------------------------------------

SensitivityCachePolicy::SensitivityCachePolicy(const SensitivityProfile& profile,
                                               CachePolicyConfig config, ScoreTerms terms)
    : profile_(&profile), config_(config), schedule_(config.schedule()), terms_(terms) {
    config_.validate();
    if (profile.empty()) throw config_error("sensitivity policy needs a non-empty profile");
}

std::string SensitivityCachePolicy::name() const {
    switch (terms_) {
        case ScoreTerms::TimestepOnly: return "teacache_like";
        case ScoreTerms::LatentOnly: return "magcache_like";
        default: return "sencache";
    }
}

void SensitivityCachePolicy::begin_run(const Vec& x, double t, const Vec& y) {
    on_refresh(x, t, y);
}

void SensitivityCachePolicy::on_refresh(const Vec& x, double t, const Vec& y) {
    const ProfileEntry& e = profile_->lookup(t);
    state_.refresh(x, t, y, e.alpha_x, e.alpha_t);
}

PolicyDecision SensitivityCachePolicy::decide(const Vec& step_dx, double step_dt,
                                              std::size_t decision_index,
                                              std::size_t total_transitions) {
    if (state_.drift.size() != step_dx.size())
        throw config_error("policy used before begin_run");
    for (std::size_t i = 0; i < step_dx.size(); ++i) state_.drift[i] += step_dx[i];
    state_.time_gap += step_dt;

    const double drift_norm = norm2(state_.drift);
    const double gap_abs = std::fabs(state_.time_gap);
    double score = 0.0;
    switch (terms_) {
        case ScoreTerms::Combined:
            score = sensitivity_score(state_.alpha_x, state_.alpha_t, drift_norm, gap_abs);
            break;
        case ScoreTerms::TimestepOnly:
            score = state_.alpha_t * gap_abs;
            break;
        case ScoreTerms::LatentOnly:
            score = state_.alpha_x * drift_norm;
            break;
    }

    const double fraction =
        static_cast<double>(decision_index) / static_cast<double>(total_transitions);
    const double eps = schedule_.at(fraction);
    if (score <= eps && state_.reuse_count < config_.max_reuse) {
        ++state_.reuse_count;
        return {true, score, eps};
    }
    return {false, score, eps};
}

std::unique_ptr<CachePolicy> make_sencache(const SensitivityProfile& profile,
                                           CachePolicyConfig config) {
    return std::make_unique<SensitivityCachePolicy>(profile, config, ScoreTerms::Combined);
}

std::unique_ptr<CachePolicy> make_teacache_like(const SensitivityProfile& profile,
                                                CachePolicyConfig config) {
    return std::make_unique<SensitivityCachePolicy>(profile, config, ScoreTerms::TimestepOnly);
}

std::unique_ptr<CachePolicy> make_magcache_like(const SensitivityProfile& profile,
                                                CachePolicyConfig config) {
    return std::make_unique<SensitivityCachePolicy>(profile, config, ScoreTerms::LatentOnly);
}

// ---- UniformSkipPolicy ------------------------------------------------------

UniformSkipPolicy::UniformSkipPolicy(std::size_t keep_every) : keep_every_(keep_every) {
    if (keep_every_ < 1) throw config_error("keep_every must be >= 1");
}

void UniformSkipPolicy::begin_run(const Vec&, double, const Vec&) {}
void UniformSkipPolicy::on_refresh(const Vec&, double, const Vec&) {}

PolicyDecision UniformSkipPolicy::decide(const Vec&, double, std::size_t decision_index,
                                         std::size_t total_transitions) {
    // Decision j sets the velocity at node j+1, the source of transition
    // j+1. Evaluate every keep_every-th transition; the terminal node has no
    // outgoing transition and always reuses.
    const std::size_t node = decision_index + 1;
    const bool evaluate = node < total_transitions && node % keep_every_ == 0;
    return {!evaluate, 0.0, 0.0};
}

PolicyDecision NeverCachePolicy::decide(const Vec&, double, std::size_t, std::size_t) {
    return {false, 0.0, 0.0};
}

// ---- teacher-forced evaluation ---------------------------------------------

std::vector<double> static_transition_scores(const Trajectory& reference,
                                             const SensitivityProfile& profile,
                                             ScoreTerms terms) {
    const std::size_t K = reference.transitions();
    for (std::size_t i = 0; i < K; ++i)
        if (!reference.steps[i].evaluated)
            throw domain_error("static scores need a fully evaluated reference trajectory");

    std::vector<double> scores(K);
    for (std::size_t i = 0; i < K; ++i) {
        const auto& src = reference.steps[i];
        const auto& dst = reference.steps[i + 1];
        Vec dx(src.state.size());
        for (std::size_t c = 0; c < dx.size(); ++c) dx[c] = dst.state[c] - src.state[c];
        const ProfileEntry& e = profile.lookup(src.t);
        const double drift_norm = norm2(dx);
        const double gap_abs = std::fabs(dst.t - src.t);
        switch (terms) {
            case ScoreTerms::Combined:
                scores[i] = sensitivity_score(e.alpha_x, e.alpha_t, drift_norm, gap_abs);
                break;
            case ScoreTerms::TimestepOnly:
                scores[i] = e.alpha_t * gap_abs;
                break;
            case ScoreTerms::LatentOnly:
                scores[i] = e.alpha_x * drift_norm;
                break;
        }
    }
    return scores;
}

std::vector<std::size_t> static_hit_set(const std::vector<double>& scores, double epsilon) {
    std::vector<std::size_t> hits;
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (scores[i] <= epsilon) hits.push_back(i);
    return hits;
}

StaticRun evaluate_static(const std::vector<double>& scores, const EpsilonSchedule& schedule,
                          std::size_t max_reuse) {
    StaticRun run;
    run.hit.resize(scores.size());
    run.nfe = 1;  // mandatory first evaluation
    std::size_t consecutive = 0;
    const auto total = static_cast<double>(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const double eps = schedule.at(static_cast<double>(i) / total);
        const bool hit = scores[i] <= eps && consecutive < max_reuse;
        run.hit[i] = hit;
        if (hit) {
            ++run.hits;
            ++consecutive;
        } else {
            ++run.nfe;
            consecutive = 0;
        }
    }
    return run;
}

// ---- planner ---------------------------------------------------------------

TimestepGrid plan_schedule(const SensitivityProfile& profile, const Trajectory& reference,
                           std::size_t budget) {
    const std::size_t K = reference.transitions();
    if (budget < 2) throw domain_error("plan_schedule: budget must be >= 2");
    if (budget > K)
        throw domain_error("plan_schedule: budget " + std::to_string(budget) +
                           " exceeds the " + std::to_string(K) + " reference transitions");

    const std::vector<double> scores = static_transition_scores(reference, profile);
    const double total = std::accumulate(scores.begin(), scores.end(), 0.0);

    // Interior cut nodes: after the transition where the cumulative score
    // mass first reaches i/budget of the total. Zero total mass degenerates
    // to equal-count selection.
    std::vector<std::size_t> cuts(budget - 1);
    if (total > 0.0) {
        const double tol = 1e-9 * total;
        double cum = 0.0;
        std::size_t j = 0;
        for (std::size_t i = 1; i < budget; ++i) {
            const double threshold = total * static_cast<double>(i) / static_cast<double>(budget);
            while (j < K && cum + scores[j] < threshold - tol) cum += scores[j++];
            if (j < K) cum += scores[j++];
            cuts[i - 1] = j;  // node index after the crossing transition
        }
    } else {
        for (std::size_t i = 1; i < budget; ++i)
            cuts[i - 1] = i * K / budget;
    }

    // Force cuts onto distinct interior nodes, keeping room for later cuts.
    std::size_t prev = 0;
    for (std::size_t i = 0; i < cuts.size(); ++i) {
        const std::size_t remaining = cuts.size() - 1 - i;
        const std::size_t hi = K - 1 - remaining;
        cuts[i] = std::clamp(cuts[i], prev + 1, hi);
        prev = cuts[i];
    }

    std::vector<double> knots;
    knots.reserve(budget + 1);
    knots.push_back(reference.steps.front().t);
    for (std::size_t node : cuts) knots.push_back(reference.steps[node].t);
    knots.push_back(reference.steps.back().t);
    return TimestepGrid::from_knots(std::move(knots));
}

}  // namespace sencache

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "sencache/errors.hpp"
#include "sencache/policy.hpp"
#include "sencache/rng.hpp"
#include "test_support.hpp"

using namespace sencache;

namespace {

const InterpolantSchedule kLinear{ScheduleKind::LinearRectifiedFlow};

// Profile with constant sensitivities over a uniform grid.
SensitivityProfile flat_profile(const TimestepGrid& grid, double alpha_x, double alpha_t) {
    std::vector<ProfileEntry> entries;
    for (std::size_t i = 0; i < grid.transitions(); ++i)
        entries.push_back({grid.knot(i), alpha_x, alpha_t, 1});
    return SensitivityProfile(std::move(entries), "flat", "linear", grid.hash_hex(), "");
}

CachePolicyConfig no_guard(double epsilon, std::size_t n) {
    CachePolicyConfig c;
    c.epsilon = epsilon;
    c.guard_fraction = 0.0;
    c.max_reuse = n;
    return c;
}

Vec vec_with_norm(std::size_t d, double norm) {
    Vec v(d, 0.0);
    v[0] = norm;
    return v;
}

}  // namespace

TEST_CASE("sensitivity score arithmetic") {
    CHECK(sensitivity_score(1.0, 4.0, 0.2, 0.05) == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(sensitivity_score(3.0, 7.0, 0.0, 0.0) == 0.0);
    CHECK_THROWS_AS((void)sensitivity_score(-1.0, 0.0, 0.0, 0.0), domain_error);
    CHECK_THROWS_AS((void)sensitivity_score(0.0, 0.0, -0.1, 0.0), domain_error);
}

TEST_CASE("epsilon schedule pieces") {
    const EpsilonSchedule s = EpsilonSchedule::guarded(0.1, 0.01, 0.2);
    CHECK(s.at(0.0) == 0.01);
    CHECK(s.at(0.19) == 0.01);
    CHECK(s.at(0.2) == 0.1);
    CHECK(s.at(0.99) == 0.1);

    const EpsilonSchedule flat = EpsilonSchedule::guarded(0.1, 0.01, 0.0);
    CHECK(flat.at(0.0) == 0.1);

    EpsilonSchedule custom{{{0.0, 0.02}, {0.5, 0.2}, {0.9, 0.5}}};
    CHECK(custom.at(0.4) == 0.02);
    CHECK(custom.at(0.6) == 0.2);
    CHECK(custom.at(0.95) == 0.5);
}

TEST_CASE("cache policy config validation") {
    CachePolicyConfig c;
    CHECK_NOTHROW(c.validate());
    c.epsilon = 0.0;
    CHECK_THROWS_AS(c.validate(), config_error);
    c.epsilon = 0.1;
    c.max_reuse = 0;
    CHECK_THROWS_AS(c.validate(), config_error);
    c.max_reuse = 1;
    c.guard_fraction = 1.5;
    CHECK_THROWS_AS(c.validate(), config_error);
    c.guard_fraction = 0.2;
    c.custom_pieces = {{0.1, 0.5}};  // must start at 0
    CHECK_THROWS_AS(c.validate(), config_error);
}

TEST_CASE("decision rule applications") {
    const TimestepGrid grid = TimestepGrid::uniform(10);

    SUBCASE("hit within tolerance and budget") {
        // alpha_x = 1, alpha_t = 0: score tracks the accumulated drift norm.
        const SensitivityProfile p = flat_profile(grid, 1.0, 0.0);
        SensitivityCachePolicy policy(p, no_guard(0.5, 3));
        policy.begin_run(Vec(2, 0.0), 1.0, Vec(2, 0.0));
        const PolicyDecision d = policy.decide(vec_with_norm(2, 0.4), -0.1, 5, 10);
        CHECK(d.hit);
        CHECK(d.score == doctest::Approx(0.4));
        CHECK(policy.state().reuse_count == 1);
    }
    SUBCASE("reuse budget exhaustion forces a miss") {
        const SensitivityProfile p = flat_profile(grid, 0.0, 0.0);
        SensitivityCachePolicy policy(p, no_guard(0.5, 3));
        policy.begin_run(Vec(2, 0.0), 1.0, Vec(2, 0.0));
        for (int i = 0; i < 3; ++i)
            CHECK(policy.decide(Vec(2, 0.0), -0.1, i, 10).hit);
        const PolicyDecision d = policy.decide(Vec(2, 0.0), -0.1, 3, 10);
        CHECK(!d.hit);  // m == n
        CHECK(policy.state().reuse_count == 3);
    }
    SUBCASE("guard window forces early misses") {
        const SensitivityProfile p = flat_profile(grid, 1.0, 0.0);
        CachePolicyConfig c;  // defaults: guard 0.01 on the first 20%
        c.epsilon = 0.5;
        SensitivityCachePolicy policy(p, c);
        policy.begin_run(Vec(2, 0.0), 1.0, Vec(2, 0.0));
        // step_fraction 0.1, score 0.02 < base epsilon but above the guard
        const PolicyDecision d = policy.decide(vec_with_norm(2, 0.02), -0.1, 1, 10);
        CHECK(!d.hit);
        CHECK(d.epsilon_used == 0.01);
    }
    SUBCASE("miss resets accumulators through on_refresh") {
        const SensitivityProfile p = flat_profile(grid, 1.0, 2.0);
        SensitivityCachePolicy policy(p, no_guard(0.01, 3));
        policy.begin_run(Vec(2, 0.0), 1.0, Vec(2, 0.0));
        CHECK(!policy.decide(vec_with_norm(2, 1.0), -0.1, 5, 10).hit);
        policy.on_refresh(Vec(2, 0.5), 0.4, Vec(2, 0.1));
        CHECK(policy.state().reuse_count == 0);
        CHECK(policy.state().time_gap == 0.0);
        CHECK(norm2(policy.state().drift) == 0.0);
        CHECK(policy.state().ref_time == 0.4);
    }
}

TEST_CASE("timestep-only policy ignores latent drift") {
    const TimestepGrid grid = TimestepGrid::uniform(10);
    const SensitivityProfile p = flat_profile(grid, 5.0, 1.0);
    SensitivityCachePolicy tea(p, no_guard(0.5, 10), ScoreTerms::TimestepOnly);
    tea.begin_run(Vec(2, 0.0), 1.0, Vec(2, 0.0));

    // Huge drift, tiny time gap: the reduced score stays near zero.
    const PolicyDecision d = tea.decide(vec_with_norm(2, 100.0), -1e-6, 5, 10);
    CHECK(d.hit);
    CHECK(d.score == doctest::Approx(1e-6));

    // A full grid spacing with large alpha_t misses.
    SensitivityCachePolicy tea2(p, no_guard(0.05, 10), ScoreTerms::TimestepOnly);
    tea2.begin_run(Vec(2, 0.0), 1.0, Vec(2, 0.0));
    CHECK(!tea2.decide(Vec(2, 0.0), -0.1, 5, 10).hit);
}

TEST_CASE("latent-only policy ignores the time gap") {
    const TimestepGrid grid = TimestepGrid::uniform(10);
    const SensitivityProfile p = flat_profile(grid, 1.0, 50.0);
    SensitivityCachePolicy mag(p, no_guard(0.5, 10), ScoreTerms::LatentOnly);
    mag.begin_run(Vec(2, 0.0), 1.0, Vec(2, 0.0));

    // Zero drift, large accumulated time gap: still a hit.
    CHECK(mag.decide(Vec(2, 0.0), -0.3, 5, 10).hit);

    // Large drift misses.
    CHECK(!mag.decide(vec_with_norm(2, 2.0), -0.05, 6, 10).hit);
}

TEST_CASE("blind spot separation between the combined and reduced scores") {
    const TimestepGrid grid = TimestepGrid::uniform(10);
    const SensitivityProfile p = flat_profile(grid, 1.0, 1.0);

    // Latent drift the timestep-only score cannot see.
    SensitivityCachePolicy sen(p, no_guard(0.1, 10));
    SensitivityCachePolicy tea(p, no_guard(0.1, 10), ScoreTerms::TimestepOnly);
    sen.begin_run(Vec(2, 0.0), 1.0, Vec(2, 0.0));
    tea.begin_run(Vec(2, 0.0), 1.0, Vec(2, 0.0));
    const Vec big_dx = vec_with_norm(2, 1.0);
    CHECK(tea.decide(big_dx, -1e-4, 5, 10).hit);
    CHECK(!sen.decide(big_dx, -1e-4, 5, 10).hit);

    // Time gap the latent-only score cannot see.
    SensitivityCachePolicy sen2(p, no_guard(0.1, 10));
    SensitivityCachePolicy mag(p, no_guard(0.1, 10), ScoreTerms::LatentOnly);
    sen2.begin_run(Vec(2, 0.0), 1.0, Vec(2, 0.0));
    mag.begin_run(Vec(2, 0.0), 1.0, Vec(2, 0.0));
    CHECK(mag.decide(Vec(2, 0.0), -0.3, 5, 10).hit);
    CHECK(!sen2.decide(Vec(2, 0.0), -0.3, 5, 10).hit);
}

TEST_CASE("reuse budget ceiling holds on adaptive runs") {
    const GaussianMixtureField mix = test::default_mixture();
    const TimestepGrid grid = TimestepGrid::uniform(60);
    CalibrationConfig calib;
    calib.num_samples = 2;
    calib.seed = 21;
    const SensitivityProfile profile = calibrate(mix, grid, calib);

    for (std::size_t n : {1u, 2u, 3u, 5u}) {
        for (std::uint64_t seed : {1u, 2u, 3u}) {
            auto policy = make_sencache(profile, no_guard(0.5, n));
            const PolicyRun run = sample_with_policy(mix, grid, seed, *policy);
            std::size_t consecutive = 0;
            for (const auto& d : run.report.decisions) {
                consecutive = d.hit ? consecutive + 1 : 0;
                CHECK(consecutive <= n);
            }
            CHECK(run.report.nfe + run.report.hits == grid.transitions() + 1);
        }
    }
}

TEST_CASE("zero tolerance reproduces the reference bit-exactly") {
    const GaussianMixtureField mix = test::default_mixture();
    const TimestepGrid grid = TimestepGrid::uniform(40);
    CalibrationConfig calib;
    calib.num_samples = 2;
    calib.seed = 8;
    const SensitivityProfile profile = calibrate(mix, grid, calib);

    const Trajectory ref = sample_reference(mix, grid, 5);
    const std::vector<double> scores = static_transition_scores(ref, profile);
    const double min_score = *std::min_element(scores.begin(), scores.end());
    REQUIRE(min_score > 0.0);

    CachePolicyConfig config = no_guard(min_score * 0.5, 4);
    config.epsilon_guard = min_score * 0.5;
    auto policy = make_sencache(profile, config);
    const PolicyRun run = sample_with_policy(mix, grid, 5, *policy);
    CHECK(run.report.hits == 0);
    CHECK(run.report.nfe == grid.transitions() + 1);
    for (std::size_t i = 0; i < ref.steps.size(); ++i)
        CHECK(ref.steps[i].state == run.trajectory.steps[i].state);
}

TEST_CASE("static hit sets nest monotonically in the tolerance") {
    Pcg32 g(55);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> scores(100);
        for (auto& s : scores) s = g.next_unit();
        double eps1 = 0.2 * g.next_unit();
        double eps2 = eps1 + 0.5 * g.next_unit();
        const auto h1 = static_hit_set(scores, eps1);
        const auto h2 = static_hit_set(scores, eps2);
        CHECK(std::includes(h2.begin(), h2.end(), h1.begin(), h1.end()));
    }
}

TEST_CASE("static NFE is non-increasing in the reuse budget") {
    Pcg32 g(66);
    const EpsilonSchedule flat = EpsilonSchedule::guarded(0.5, 0.5, 0.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> scores(80);
        for (auto& s : scores) s = g.next_unit();  // ~half above epsilon
        std::size_t prev_nfe = scores.size() + 2;
        for (std::size_t n = 1; n <= 8; ++n) {
            const StaticRun run = evaluate_static(scores, flat, n);
            CHECK(run.nfe <= prev_nfe);
            CHECK(run.nfe + run.hits == scores.size() + 1);
            prev_nfe = run.nfe;
        }
    }
}

TEST_CASE("static evaluation honours guard and budget") {
    const std::vector<double> scores{0.02, 0.02, 0.02, 0.02, 0.02, 0.02, 0.02, 0.02, 0.02, 0.02};
    // Guard 0.01 on the first 30%: transitions 0..2 miss, the rest hit in
    // runs of at most two.
    const EpsilonSchedule sched{{{0.0, 0.01}, {0.3, 0.1}}};
    const StaticRun run = evaluate_static(scores, sched, 2);
    CHECK(!run.hit[0]);
    CHECK(!run.hit[1]);
    CHECK(!run.hit[2]);
    CHECK(run.hit[3]);
    CHECK(run.hit[4]);
    CHECK(!run.hit[5]);  // budget
    CHECK(run.hit[6]);
}

TEST_CASE("planner selects the whole grid at full budget") {
    const GaussianMixtureField mix = test::default_mixture();
    const TimestepGrid grid = TimestepGrid::uniform(20);
    CalibrationConfig calib;
    calib.num_samples = 1;
    calib.seed = 2;
    const SensitivityProfile profile = calibrate(mix, grid, calib);
    const Trajectory ref = sample_reference(mix, grid, 13);

    const TimestepGrid planned = plan_schedule(profile, ref, 20);
    REQUIRE(planned.nodes() == 21);
    for (std::size_t i = 0; i <= 20; ++i) CHECK(planned.knot(i) == grid.knot(i));
}

TEST_CASE("planner reduces to uniform selection for constant scores") {
    // A profile with alpha_x = 0 and alpha_t = 1 scores every uniform
    // transition identically.
    const auto f = test::zero_field(2);
    const TimestepGrid grid = TimestepGrid::uniform(250);
    std::vector<ProfileEntry> entries;
    for (std::size_t i = 0; i < 250; ++i) entries.push_back({grid.knot(i), 0.0, 1.0, 1});
    const SensitivityProfile profile(std::move(entries), "z", "linear", grid.hash_hex(), "");
    const Trajectory ref = sample_reference(f, grid, 1);

    const TimestepGrid planned = plan_schedule(profile, ref, 25);
    REQUIRE(planned.transitions() == 25);
    for (std::size_t i = 0; i <= 25; ++i)
        CHECK(planned.knot(i) == doctest::Approx(grid.knot(i * 10)).epsilon(1e-14));
}

TEST_CASE("planner validates the budget") {
    const GaussianMixtureField mix = test::default_mixture();
    const TimestepGrid grid = TimestepGrid::uniform(10);
    CalibrationConfig calib;
    calib.num_samples = 1;
    const SensitivityProfile profile = calibrate(mix, grid, calib);
    const Trajectory ref = sample_reference(mix, grid, 1);
    CHECK_THROWS_AS((void)plan_schedule(profile, ref, 11), domain_error);
    CHECK_THROWS_AS((void)plan_schedule(profile, ref, 1), domain_error);
    CHECK_NOTHROW((void)plan_schedule(profile, ref, 10));
    CHECK_NOTHROW((void)plan_schedule(profile, ref, 2));
}

TEST_CASE("planner segment masses obey the equal-mass bound") {
    const GaussianMixtureField mix = test::default_mixture();
    const TimestepGrid grid = TimestepGrid::uniform(120);
    CalibrationConfig calib;
    calib.num_samples = 2;
    calib.seed = 31;
    const SensitivityProfile profile = calibrate(mix, grid, calib);
    const Trajectory ref = sample_reference(mix, grid, 17);
    const std::vector<double> scores = static_transition_scores(ref, profile);
    const double total = std::accumulate(scores.begin(), scores.end(), 0.0);
    const double max_step = *std::max_element(scores.begin(), scores.end());

    for (std::size_t budget : {4u, 10u, 30u, 60u}) {
        const TimestepGrid planned = plan_schedule(profile, ref, budget);
        // Map planned knots back to reference node indices.
        std::vector<std::size_t> kept;
        std::size_t j = 0;
        for (std::size_t i = 0; i < planned.nodes(); ++i) {
            while (ref.steps[j].t != planned.knot(i)) ++j;
            kept.push_back(j);
        }
        REQUIRE(kept.size() == budget + 1);
        const double bound =
            total / static_cast<double>(budget - 1) + max_step + 1e-12;
        for (std::size_t s = 0; s + 1 < kept.size(); ++s) {
            double mass = 0.0;
            for (std::size_t k = kept[s]; k < kept[s + 1]; ++k) mass += scores[k];
            CHECK(mass <= bound);
        }
    }
}

TEST_CASE("planner requires a fully evaluated reference") {
    const GaussianMixtureField mix = test::default_mixture();
    const TimestepGrid grid = TimestepGrid::uniform(20);
    CalibrationConfig calib;
    calib.num_samples = 1;
    const SensitivityProfile profile = calibrate(mix, grid, calib);

    UniformSkipPolicy skip(2);
    const PolicyRun cached = sample_with_policy(mix, grid, 3, skip);
    CHECK_THROWS_AS((void)plan_schedule(profile, cached.trajectory, 5), domain_error);
}

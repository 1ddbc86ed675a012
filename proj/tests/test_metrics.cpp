#include <doctest.h>

#include <cmath>
#include <sstream>

#include "sencache/errors.hpp"
#include "sencache/metrics.hpp"
#include "sencache/policy.hpp"
#include "sencache/rng.hpp"
#include "sencache/sampler.hpp"
#include "test_support.hpp"

using namespace sencache;

namespace {

const InterpolantSchedule kLinear{ScheduleKind::LinearRectifiedFlow};

GaussianField std_normal_field(std::size_t d = 2) {
    return GaussianField(Vec(d, 0.0), Vec(d, 1.0), kLinear);
}

}  // namespace

TEST_CASE("psnr oracle values") {
    const Vec a{1.0, 0.5, -0.25, 0.0};
    CHECK(psnr(a, a, 1.0) == 200.0);  // zero-MSE cap

    // MSE 0.01 with peak 1 -> 20 dB.
    Vec b = a;
    for (auto& v : b) v += 0.1;
    CHECK(psnr(a, b, 1.0) == doctest::Approx(20.0).epsilon(1e-12));

    // MSE 1 with peak 1 -> 0 dB.
    Vec c = a;
    for (auto& v : c) v += 1.0;
    CHECK(psnr(a, c, 1.0) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("psnr is strictly decreasing in mse") {
    const Vec ref(8, 0.0);
    double prev = 201.0;
    for (double delta : {1e-6, 1e-4, 1e-2, 0.1, 1.0, 10.0}) {
        const Vec cand(8, delta);
        const double p = psnr(ref, cand, 1.0);
        CHECK(p < prev);
        prev = p;
    }
}

TEST_CASE("psnr input validation") {
    CHECK_THROWS_AS((void)psnr({1.0}, {1.0, 2.0}, 1.0), domain_error);
    CHECK_THROWS_AS((void)psnr({1.0}, {1.0}, 0.0), domain_error);
    CHECK_THROWS_AS((void)psnr({1.0}, {1.0}, -1.0), domain_error);
}

TEST_CASE("compare_runs oracle values") {
    const GaussianField f = std_normal_field(4);
    const TimestepGrid g = TimestepGrid::uniform(20);
    const Trajectory ref = sample_reference(f, g, 3);

    SUBCASE("identical trajectories") {
        const Fidelity fid = compare_runs(ref, ref);
        CHECK(fid.terminal_mse == 0.0);
        CHECK(fid.terminal_psnr == 200.0);
        CHECK(fid.trajectory_rel_l2 == 0.0);
    }
    SUBCASE("one perturbed terminal coordinate") {
        Trajectory cand = ref;
        const double delta = 0.125;
        cand.steps.back().state[2] += delta;
        const Fidelity fid = compare_runs(ref, cand);
        CHECK(fid.terminal_mse == doctest::Approx(delta * delta / 4.0).epsilon(1e-12));
        CHECK(fid.trajectory_rel_l2 > 0.0);
    }
    SUBCASE("mismatched runs are rejected") {
        Trajectory other_seed = sample_reference(f, g, 4);
        CHECK_THROWS_AS((void)compare_runs(ref, other_seed), domain_error);
        Trajectory other_grid = sample_reference(f, TimestepGrid::uniform(21), 3);
        CHECK_THROWS_AS((void)compare_runs(ref, other_grid), domain_error);
    }
}

TEST_CASE("terminal comparison across different grids") {
    const GaussianField f = std_normal_field(2);
    const Trajectory fine = sample_reference(f, TimestepGrid::uniform(200), 9);
    const Trajectory coarse = sample_reference(f, TimestepGrid::uniform(20), 9);
    const TerminalError e = compare_terminal(fine, coarse);
    CHECK(e.mse > 0.0);
    CHECK(e.psnr < 200.0);

    const Trajectory wrong_seed = sample_reference(f, TimestepGrid::uniform(20), 10);
    CHECK_THROWS_AS((void)compare_terminal(fine, wrong_seed), domain_error);
}

TEST_CASE("consecutive-step MAE on the zero field is identically zero") {
    const auto f = test::zero_field(3);
    const TimestepGrid g = TimestepGrid::uniform(15);
    const Trajectory ref = sample_reference(f, g, 2);
    for (double v : consecutive_step_mae(ref, f)) CHECK(v == 0.0);
}

TEST_CASE("consecutive-step MAE matches the coefficient oracle at mid-time") {
    const GaussianField f = std_normal_field(2);
    const TimestepGrid g = TimestepGrid::uniform(10);  // knots 1.0, 0.9, ..., 0.0
    const Trajectory ref = sample_reference(f, g, 5);
    const std::vector<double> mae = consecutive_step_mae(ref, f);

    // Transition from t=0.6 to t=0.5 (nodes 4 -> 5) straddles the
    // coefficient's zero crossing.
    const double c_from = test::std_normal_coefficient(0.6);
    const double c_to = test::std_normal_coefficient(0.5);
    const Vec& x_from = ref.steps[4].state;
    const Vec& x_to = ref.steps[5].state;
    double expected = 0.0;
    for (std::size_t i = 0; i < 2; ++i)
        expected += std::fabs(c_to * x_to[i] - c_from * x_from[i]);
    expected /= 2.0;
    CHECK(mae[4] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("consecutive-step MAE rejects cached trajectories") {
    const GaussianField f = std_normal_field(2);
    const TimestepGrid g = TimestepGrid::uniform(10);
    UniformSkipPolicy skip(2);
    const PolicyRun run = sample_with_policy(f, g, 1, skip);
    CHECK_THROWS_AS((void)consecutive_step_mae(run.trajectory, f), domain_error);
}

TEST_CASE("consecutive-step MAE is deterministic across reruns") {
    const GaussianMixtureField mix = test::default_mixture();
    const TimestepGrid g = TimestepGrid::uniform(25);
    const auto a = consecutive_step_mae(sample_reference(mix, g, 7), mix);
    const auto b = consecutive_step_mae(sample_reference(mix, g, 7), mix);
    CHECK(a == b);
}

TEST_CASE("spearman rank correlation") {
    CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
    CHECK(spearman({1, 2, 3, 4}, {9, 7, 5, 3}) == doctest::Approx(-1.0));
    // Monotone under any strictly increasing transform.
    CHECK(spearman({1, 2, 3, 4}, {1, 8, 27, 64}) == doctest::Approx(1.0));
    // Classic small example with one swap.
    CHECK(spearman({1, 2, 3, 4, 5}, {1, 2, 4, 3, 5}) == doctest::Approx(0.9));
    CHECK_THROWS_AS((void)spearman({1.0}, {1.0}), domain_error);
    CHECK_THROWS_AS((void)spearman({1, 2}, {1, 1}), domain_error);
}

TEST_CASE("run report accounting identity across policies") {
    const GaussianMixtureField mix = test::default_mixture();
    const TimestepGrid g = TimestepGrid::uniform(30);
    CalibrationConfig calib;
    calib.num_samples = 2;
    calib.seed = 4;
    const SensitivityProfile profile = calibrate(mix, g, calib);

    CachePolicyConfig cfg;
    cfg.epsilon = 0.3;
    std::vector<std::unique_ptr<CachePolicy>> policies;
    policies.push_back(make_sencache(profile, cfg));
    policies.push_back(make_teacache_like(profile, cfg));
    policies.push_back(make_magcache_like(profile, cfg));
    policies.push_back(std::make_unique<UniformSkipPolicy>(3));
    policies.push_back(std::make_unique<NeverCachePolicy>());

    for (auto& p : policies) {
        const PolicyRun run = sample_with_policy(mix, g, 42, *p);
        CHECK(run.report.nfe + run.report.hits == g.transitions() + 1);
        CHECK(run.report.cache_ratio ==
              doctest::Approx(static_cast<double>(run.report.hits) / 30.0));
        CHECK(run.report.decisions.size() == 30);
    }
}

TEST_CASE("report csv writers") {
    RunReport r;
    r.seed = 5;
    r.transitions = 4;
    r.nfe = 3;
    r.hits = 2;
    r.cache_ratio = 0.5;
    r.decisions = {{1, 0.75, false, 0.2, 0.01}, {2, 0.5, true, 0.005, 0.1}};
    r.terminal_mse = 1e-4;
    r.terminal_psnr = 40.0;
    r.trajectory_rel_l2 = 1e-3;

    std::ostringstream sum;
    write_report_header(sum);
    write_report_row(sum, r, "cafe0123");
    const std::string text = sum.str();
    CHECK(text.find("config_hash,seed,nfe,cache_ratio,terminal_mse,terminal_psnr,"
                    "trajectory_rel_l2\n") == 0);
    CHECK(text.find("cafe0123,5,3,0.5,") != std::string::npos);

    std::ostringstream dec;
    write_decisions_csv(dec, r);
    CHECK(dec.str().find("step,t,decision,S,epsilon_used\n") == 0);
    CHECK(dec.str().find("1,0.75,miss,") != std::string::npos);
    CHECK(dec.str().find("2,0.5,hit,") != std::string::npos);
}

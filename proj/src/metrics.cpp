#include "sencache/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "sencache/errors.hpp"
#include "sencache/field.hpp"
#include "sencache/sampler.hpp"

namespace sencache {

double mse(const Vec& reference, const Vec& candidate) {
    if (reference.size() != candidate.size())
        throw domain_error("mse: shape mismatch (" + std::to_string(reference.size()) +
                           " vs " + std::to_string(candidate.size()) + ")");
    if (reference.empty()) throw domain_error("mse: empty input");
    double s = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const double d = reference[i] - candidate[i];
        s += d * d;
    }
    return s / static_cast<double>(reference.size());
}

double psnr(const Vec& reference, const Vec& candidate, double peak) {
    if (!(peak > 0.0)) throw domain_error("psnr: peak must be positive");
    const double m = mse(reference, candidate);
    if (m == 0.0) return kPsnrCapDb;
    return std::min(10.0 * std::log10(peak * peak / m), kPsnrCapDb);
}

namespace {

void check_same_run(const Trajectory& reference, const Trajectory& cached) {
    if (reference.seed != cached.seed)
        throw domain_error("run comparison: seed mismatch");
    if (reference.steps.size() != cached.steps.size())
        throw domain_error("run comparison: grid size mismatch");
    for (std::size_t i = 0; i < reference.steps.size(); ++i)
        if (reference.steps[i].t != cached.steps[i].t)
            throw domain_error("run comparison: grid mismatch at node " + std::to_string(i));
}

double terminal_peak(const Trajectory& reference) {
    const double p = max_abs(reference.terminal_state());
    return p > 0.0 ? p : 1.0;  // degenerate all-zero reference
}

}  // namespace

Fidelity compare_runs(const Trajectory& reference, const Trajectory& cached) {
    check_same_run(reference, cached);
    Fidelity f;
    f.terminal_mse = mse(reference.terminal_state(), cached.terminal_state());
    f.terminal_psnr = psnr(reference.terminal_state(), cached.terminal_state(),
                           terminal_peak(reference));

    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < reference.steps.size(); ++i) {
        const Vec& r = reference.steps[i].state;
        const Vec& c = cached.steps[i].state;
        for (std::size_t j = 0; j < r.size(); ++j) {
            const double d = r[j] - c[j];
            num += d * d;
            den += r[j] * r[j];
        }
    }
    f.trajectory_rel_l2 = den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
    return f;
}

TerminalError compare_terminal(const Trajectory& reference, const Trajectory& coarse) {
    if (reference.seed != coarse.seed)
        throw domain_error("terminal comparison: seed mismatch");
    if (reference.steps.back().t != 0.0 || coarse.steps.back().t != 0.0)
        throw domain_error("terminal comparison: trajectories must end at t = 0");
    TerminalError e;
    e.mse = mse(reference.terminal_state(), coarse.terminal_state());
    e.psnr = psnr(reference.terminal_state(), coarse.terminal_state(),
                  terminal_peak(reference));
    return e;
}

void add_fidelity(RunReport& report, const Fidelity& f) {
    report.terminal_mse = f.terminal_mse;
    report.terminal_psnr = f.terminal_psnr;
    report.trajectory_rel_l2 = f.trajectory_rel_l2;
}

std::vector<double> consecutive_step_mae(const Trajectory& trajectory,
                                         const VelocityField& field) {
    const std::size_t K = trajectory.transitions();
    for (std::size_t i = 0; i < K; ++i)
        if (!trajectory.steps[i].evaluated)
            throw domain_error("consecutive-step MAE needs a fully evaluated reference "
                               "trajectory (cache reuse at node " + std::to_string(i) + ")");

    // Transition-source outputs are the stored velocities; the terminal node
    // carries a reuse, so its output is evaluated here.
    std::vector<double> out(K);
    Vec prev = trajectory.steps[0].velocity;
    const double d = static_cast<double>(field.dim());
    for (std::size_t i = 1; i <= K; ++i) {
        Vec cur = (i < K) ? trajectory.steps[i].velocity
                          : field.evaluate(trajectory.steps[i].state, trajectory.steps[i].t);
        double s = 0.0;
        for (std::size_t c = 0; c < cur.size(); ++c) s += std::fabs(cur[c] - prev[c]);
        out[i - 1] = s / d;
        prev = std::move(cur);
    }
    return out;
}

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // average rank, 1-based
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2)
        throw domain_error("spearman: need two equally sized sequences of length >= 2");
    const std::vector<double> ra = ranks(a);
    const std::vector<double> rb = ranks(b);
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = ra[i] - ma;
        const double db = rb[i] - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    if (va == 0.0 || vb == 0.0)
        throw domain_error("spearman: constant sequence has no rank correlation");
    return cov / std::sqrt(va * vb);
}

namespace {

void put(std::ostream& os, double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    os << buf;
}

}  // namespace

void write_report_header(std::ostream& os) {
    os << "config_hash,seed,nfe,cache_ratio,terminal_mse,terminal_psnr,trajectory_rel_l2\n";
}

void write_report_row(std::ostream& os, const RunReport& report, std::string_view config_hash) {
    os << config_hash << ',' << report.seed << ',' << report.nfe << ',';
    put(os, report.cache_ratio);
    os << ',';
    put(os, report.terminal_mse);
    os << ',';
    put(os, report.terminal_psnr);
    os << ',';
    put(os, report.trajectory_rel_l2);
    os << "\n";
}

void write_decisions_csv(std::ostream& os, const RunReport& report) {
    os << "step,t,decision,S,epsilon_used\n";
    for (const auto& d : report.decisions) {
        os << d.step_index << ',';
        put(os, d.t);
        os << ',' << (d.hit ? "hit" : "miss") << ',';
        put(os, d.score);
        os << ',';
        put(os, d.epsilon_used);
        os << "\n";
    }
}

}  // namespace sencache

#include "sencache/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sencache/errors.hpp"
#include "sencache/rng.hpp"

namespace sencache {

double estimate_jx(const VelocityField& field, const Vec& x, double t, const Vec& dx) {
    if (dx.size() != x.size()) throw domain_error("estimate_jx: probe dimension mismatch");
    const double h = norm2(dx);
    if (!(h > 0.0)) throw domain_error("estimate_jx: zero-norm probe");
    Vec xp(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) xp[i] = x[i] + dx[i];
    const Vec v0 = field.evaluate(x, t);
    const Vec v1 = field.evaluate(xp, t);
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = v1[i] - v0[i];
        s += d * d;
    }
    return std::sqrt(s) / h;
}

double estimate_jt(const VelocityField& field, const Vec& x, double t, double dt) {
    if (dt == 0.0) throw domain_error("estimate_jt: zero time probe");
    check_time_in_domain(t);
    check_time_in_domain(t + dt);  // throws when the probe leaves [0,T]
    const Vec v0 = field.evaluate(x, t);
    const Vec v1 = field.evaluate(x, t + dt);
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = v1[i] - v0[i];
        s += d * d;
    }
    return std::sqrt(s) / std::fabs(dt);
}

double CalibrationConfig::resolve_dt_probe(const TimestepGrid& grid) const {
    return dt_probe > 0.0 ? dt_probe : 0.25 * grid.min_spacing();
}

void CalibrationConfig::validate(const TimestepGrid& grid) const {
    if (num_samples < 1) throw config_error("calibration num_samples must be >= 1");
    if (!(perturbation_scale > 0.0))
        throw config_error("calibration perturbation_scale must be positive");
    const double probe = resolve_dt_probe(grid);
    if (!(probe > 0.0) || probe >= grid.min_spacing())
        throw config_error("calibration dt_probe must lie in (0, min grid spacing)");
}

SensitivityProfile::SensitivityProfile(std::vector<ProfileEntry> entries, std::string field_id,
                                       std::string schedule_id, std::string grid_hash,
                                       std::string calibration_desc)
    : entries_(std::move(entries)),
      field_id_(std::move(field_id)),
      schedule_id_(std::move(schedule_id)),
      grid_hash_(std::move(grid_hash)),
      calibration_desc_(std::move(calibration_desc)) {
    for (std::size_t i = 1; i < entries_.size(); ++i)
        if (!(entries_[i].t < entries_[i - 1].t))
            throw config_error("profile entries must be strictly decreasing in t");
    for (const auto& e : entries_)
        if (e.alpha_x < 0.0 || e.alpha_t < 0.0)
            throw config_error("profile sensitivities must be non-negative");
}

const ProfileEntry& SensitivityProfile::lookup(double t_ref) const {
    if (entries_.empty()) throw domain_error("lookup on empty sensitivity profile");
    // Entries are in decreasing t; pick the nearest, ties toward larger t.
    const ProfileEntry* best = &entries_.front();
    double best_dist = std::fabs(t_ref - best->t);
    for (const auto& e : entries_) {
        const double d = std::fabs(t_ref - e.t);
        if (d < best_dist) {
            best = &e;
            best_dist = d;
        }
    }
    return *best;
}

SensitivityProfile calibrate(const VelocityField& field, const TimestepGrid& grid,
                             const CalibrationConfig& config) {
    config.validate(grid);
    const std::size_t K = grid.transitions();
    const double dt_probe = config.resolve_dt_probe(grid);

    std::vector<double> sum_jx(K, 0.0), sum_jt(K, 0.0);
    std::uint64_t seed_stream = config.seed;
    for (std::size_t s = 0; s < config.num_samples; ++s) {
        const std::uint64_t sample_seed = splitmix64(seed_stream);
        Trajectory traj;
        try {
            traj = sample_reference(field, grid, sample_seed);
        } catch (const diverged_error& e) {
            throw numeric_error("calibration sample " + std::to_string(s) +
                                " diverged: " + e.what());
        }
        for (std::size_t i = 0; i < K; ++i) {
            const double t = grid.knot(i);
            const Vec& x = traj.steps[i].state;
            const Vec& v = traj.steps[i].velocity;
            const double step_dt = grid.knot(i + 1) - t;

            // Probe along the actual Euler increment, scaled down.
            Vec dx(x.size());
            for (std::size_t c = 0; c < x.size(); ++c)
                dx[c] = config.perturbation_scale * step_dt * v[c];
            const double jx = norm2(dx) > 0.0 ? estimate_jx(field, x, t, dx) : 0.0;
            const double jt = estimate_jt(field, x, t, -dt_probe);

            if (config.aggregate == Aggregate::Mean) {
                sum_jx[i] += jx;
                sum_jt[i] += jt;
            } else {
                sum_jx[i] = std::max(sum_jx[i], jx);
                sum_jt[i] = std::max(sum_jt[i], jt);
            }
        }
    }

    const double denom = config.aggregate == Aggregate::Mean
                             ? static_cast<double>(config.num_samples)
                             : 1.0;
    std::vector<ProfileEntry> entries(K);
    for (std::size_t i = 0; i < K; ++i)
        entries[i] = {grid.knot(i), sum_jx[i] / denom, sum_jt[i] / denom, config.num_samples};

    std::ostringstream desc;
    desc << "num_samples = " << config.num_samples << "\nseed = " << config.seed
         << "\nperturbation_scale = ";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", config.perturbation_scale);
    desc << buf << "\ndt_probe = ";
    std::snprintf(buf, sizeof(buf), "%.17g", dt_probe);
    desc << buf << "\naggregate = " << (config.aggregate == Aggregate::Mean ? "mean" : "max");

    return SensitivityProfile(std::move(entries), field.id(), field.schedule_id(), grid.hash_hex(),
                              desc.str());
}

void SensitivityProfile::write_csv(std::ostream& os) const {
    os << "t,alpha_x,alpha_t,samples\n";
    char buf[32];
    for (const auto& e : entries_) {
        std::snprintf(buf, sizeof(buf), "%.17g", e.t);
        os << buf << ',';
        std::snprintf(buf, sizeof(buf), "%.17g", e.alpha_x);
        os << buf << ',';
        std::snprintf(buf, sizeof(buf), "%.17g", e.alpha_t);
        os << buf << ',' << e.samples << "\n";
    }
}

void SensitivityProfile::write_meta(std::ostream& os) const {
    os << "field_id = " << field_id_ << "\n";
    os << "schedule_id = " << schedule_id_ << "\n";
    os << "grid_hash = " << grid_hash_ << "\n";
    os << calibration_desc_ << "\n";
}

void SensitivityProfile::save(const std::string& csv_path) const {
    std::ofstream csv(csv_path);
    if (!csv) throw io_error("cannot open '" + csv_path + "' for writing");
    write_csv(csv);
    if (!csv) throw io_error("write failed for '" + csv_path + "'");

    std::ofstream meta(csv_path + ".meta");
    if (!meta) throw io_error("cannot open '" + csv_path + ".meta' for writing");
    write_meta(meta);
    if (!meta) throw io_error("write failed for '" + csv_path + ".meta'");
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

SensitivityProfile SensitivityProfile::load(const std::string& csv_path) {
    std::ifstream csv(csv_path);
    if (!csv) throw io_error("cannot open profile '" + csv_path + "'");
    std::string line;
    if (!std::getline(csv, line) || trim(line) != "t,alpha_x,alpha_t,samples")
        throw io_error("bad profile header in '" + csv_path + "'");

    std::vector<ProfileEntry> entries;
    while (std::getline(csv, line)) {
        if (trim(line).empty()) continue;
        ProfileEntry e;
        unsigned long long samples = 0;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%llu", &e.t, &e.alpha_x, &e.alpha_t,
                        &samples) != 4)
            throw io_error("bad profile row '" + line + "' in '" + csv_path + "'");
        e.samples = static_cast<std::size_t>(samples);
        entries.push_back(e);
    }

    std::string field_id, schedule_id, grid_hash, desc;
    std::ifstream meta(csv_path + ".meta");
    if (!meta) throw io_error("cannot open profile metadata '" + csv_path + ".meta'");
    while (std::getline(meta, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "field_id") field_id = value;
        else if (key == "schedule_id") schedule_id = value;
        else if (key == "grid_hash") grid_hash = value;
        else desc += (desc.empty() ? "" : "\n") + key + " = " + value;
    }
    return SensitivityProfile(std::move(entries), std::move(field_id), std::move(schedule_id),
                              std::move(grid_hash), std::move(desc));
}

}  // namespace sencache

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sencache/field.hpp"
#include "sencache/sampler.hpp"

namespace sencache {

struct ProfileEntry {
    double t = 0.0;
    double alpha_x = 0.0;  // estimated ||dv/dx|| along the solver step direction
    double alpha_t = 0.0;  // estimated ||dv/dt||
    std::size_t samples = 0;
};

enum class Aggregate { Mean, Max };

struct CalibrationConfig {
    std::size_t num_samples = 8;
    std::uint64_t seed = 0;
    double perturbation_scale = 0.1;  // relative to the Euler step magnitude
    double dt_probe = 0.0;            // 0 -> 0.25 * min grid spacing
    Aggregate aggregate = Aggregate::Mean;

    double resolve_dt_probe(const TimestepGrid& grid) const;
    void validate(const TimestepGrid& grid) const;
};

// Per-timestep sensitivity table, one entry per grid node that has an
// outgoing transition (every knot except t = 0), stored in decreasing t.
class SensitivityProfile {
public:
    SensitivityProfile() = default;
    SensitivityProfile(std::vector<ProfileEntry> entries, std::string field_id,
                       std::string schedule_id, std::string grid_hash,
                       std::string calibration_desc);

    const std::vector<ProfileEntry>& entries() const { return entries_; }
    const std::string& field_id() const { return field_id_; }
    const std::string& schedule_id() const { return schedule_id_; }
    const std::string& grid_hash() const { return grid_hash_; }
    const std::string& calibration_desc() const { return calibration_desc_; }
    bool empty() const { return entries_.empty(); }

    // Entry at the grid timestep nearest to t_ref; ties resolve toward the
    // larger t; out-of-range t_ref clamps to the nearest boundary entry.
    const ProfileEntry& lookup(double t_ref) const;

    // Persistence. CSV columns t,alpha_x,alpha_t,samples with 17 significant
    // digits (bit-exact round trip); metadata goes to a sidecar file at
    // <csv_path>.meta.
    void save(const std::string& csv_path) const;
    static SensitivityProfile load(const std::string& csv_path);

    void write_csv(std::ostream& os) const;
    void write_meta(std::ostream& os) const;

private:
    std::vector<ProfileEntry> entries_;
    std::string field_id_;
    std::string schedule_id_;
    std::string grid_hash_;
    std::string calibration_desc_;
};

// Directional secant estimate of ||dv/dx||: ||v(x+dx,t) - v(x,t)|| / ||dx||.
// Exact for fields affine in x. Throws domain_error on a zero-norm probe.
double estimate_jx(const VelocityField& field, const Vec& x, double t, const Vec& dx);

// Secant estimate of ||dv/dt||: ||v(x,t+dt) - v(x,t)|| / |dt|. Requires
// dt != 0 and t+dt within [0,T].
double estimate_jt(const VelocityField& field, const Vec& x, double t, double dt);

// Runs config.num_samples seeded reference trajectories and, at every node
// with an outgoing transition, estimates the two sensitivities: the x-probe
// is perturbation_scale times the actual Euler step, the t-probe is
// -dt_probe (toward the integration direction). A node whose Euler step is
// exactly zero contributes 0 to alpha_x. Entries aggregate per-sample
// estimates with the configured statistic.
SensitivityProfile calibrate(const VelocityField& field, const TimestepGrid& grid,
                             const CalibrationConfig& config);

}  // namespace sencache

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sencache/field.hpp"
#include "sencache/policy.hpp"
#include "sencache/sampler.hpp"
#include "sencache/sensitivity.hpp"

namespace sencache {

// Flat key-value config with [section] headers, '#' or ';' comments.
// Unknown keys are rejected so typos fail loudly.
class IniFile {
public:
    static IniFile parse_file(const std::string& path);
    static IniFile parse_string(const std::string& text, const std::string& origin = "<string>");

    bool has_section(const std::string& section) const;
    bool has(const std::string& section, const std::string& key) const;
    std::string get(const std::string& section, const std::string& key) const;
    std::string get_or(const std::string& section, const std::string& key,
                       const std::string& fallback) const;
    std::vector<std::string> section_names() const;
    std::vector<std::string> keys(const std::string& section) const;

    const std::string& raw_text() const { return raw_text_; }

private:
    std::map<std::string, std::map<std::string, std::string>> sections_;
    std::vector<std::string> section_order_;
    std::string raw_text_;
    std::string origin_;
};

struct FieldSpec {
    std::string family;  // gaussian | gaussian_mixture | stiff
    std::size_t dim = 0;
    Vec mean, cov;                            // gaussian
    std::vector<GaussianComponent> components;  // gaussian_mixture
    double omega = 0.0, amplitude = 0.0;      // stiff
    std::string condition;
};

struct GridSpec {
    std::size_t steps = 50;
    std::vector<double> knots;  // explicit grid; overrides steps when non-empty
};

struct PolicySpec {
    std::string policy = "none";  // sencache | teacache_like | magcache_like | uniform | none
    CachePolicyConfig cache;
    std::size_t keep_every = 1;
    std::string profile_path;  // required for the sensitivity policies
    std::string mode = "adaptive";  // adaptive | static (sweeps only)
};

struct RunSpec {
    std::vector<std::uint64_t> seeds{0};
    std::string out_dir = "out";
    bool write_trajectories = false;
};

struct RunConfig {
    InterpolantSchedule schedule{ScheduleKind::LinearRectifiedFlow};
    std::map<std::string, FieldSpec> fields;  // "default" plus extra diagnose fields
    GridSpec grid;
    PolicySpec policy;
    CalibrationConfig calibration;
    RunSpec run;
    std::string config_hash;  // FNV-1a of the config file bytes

    static RunConfig load(const std::string& path);
    static RunConfig from_ini(const IniFile& ini);

    const FieldSpec& default_field() const;
    std::unique_ptr<VelocityField> make_field() const;
    std::unique_ptr<VelocityField> make_field(const std::string& label) const;
    TimestepGrid make_grid() const;
    std::unique_ptr<CachePolicy> make_policy(const SensitivityProfile& profile) const;
};

// Helpers shared with the CLI.
std::vector<double> parse_double_list(const std::string& text);
std::vector<std::uint64_t> parse_seed_list(const std::string& text);
std::string hash_bytes_hex(const std::string& bytes);

}  // namespace sencache

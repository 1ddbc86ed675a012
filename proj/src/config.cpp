#include "sencache/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "sencache/errors.hpp"

namespace sencache {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string strip_quotes(std::string v) {
    if (v.size() >= 2 && ((v.front() == '"' && v.back() == '"') ||
                          (v.front() == '\'' && v.back() == '\'')))
        return v.substr(1, v.size() - 2);
    return v;
}

double parse_double(const std::string& text, const std::string& what) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(text, &pos);
        if (pos != text.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw config_error("cannot parse '" + text + "' as a number for " + what);
    }
}

std::uint64_t parse_u64(const std::string& text, const std::string& what) {
    try {
        if (text.find('-') != std::string::npos)
            throw std::invalid_argument("negative value");
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(text, &pos);
        if (pos != text.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw config_error("cannot parse '" + text + "' as a non-negative integer for " + what);
    }
}

bool parse_bool(const std::string& text, const std::string& what) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw config_error("cannot parse '" + text + "' as a boolean for " + what);
}

}  // namespace

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(parse_double(item, "list entry"));
    }
    return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(parse_u64(item, "seed list entry"));
    }
    return out;
}

std::string hash_bytes_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

IniFile IniFile::parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str(), path);
}

IniFile IniFile::parse_string(const std::string& text, const std::string& origin) {
    IniFile ini;
    ini.raw_text_ = text;
    ini.origin_ = origin;
    std::stringstream ss(text);
    std::string line;
    std::string section;
    std::size_t lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#' || stripped[0] == ';') continue;
        if (stripped.front() == '[') {
            if (stripped.back() != ']')
                throw config_error(origin + ":" + std::to_string(lineno) +
                                   ": malformed section header '" + stripped + "'");
            section = trim(stripped.substr(1, stripped.size() - 2));
            if (section.empty())
                throw config_error(origin + ":" + std::to_string(lineno) + ": empty section name");
            if (!ini.sections_.count(section)) {
                ini.sections_[section] = {};
                ini.section_order_.push_back(section);
            }
            continue;
        }
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw config_error(origin + ":" + std::to_string(lineno) +
                               ": expected 'key = value', got '" + stripped + "'");
        if (section.empty())
            throw config_error(origin + ":" + std::to_string(lineno) +
                               ": key outside any [section]");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = strip_quotes(trim(stripped.substr(eq + 1)));
        if (key.empty())
            throw config_error(origin + ":" + std::to_string(lineno) + ": empty key");
        if (ini.sections_[section].count(key))
            throw config_error(origin + ":" + std::to_string(lineno) + ": duplicate key '" +
                               key + "' in [" + section + "]");
        ini.sections_[section][key] = value;
    }
    return ini;
}

bool IniFile::has_section(const std::string& section) const {
    return sections_.count(section) != 0;
}

bool IniFile::has(const std::string& section, const std::string& key) const {
    const auto it = sections_.find(section);
    return it != sections_.end() && it->second.count(key) != 0;
}

std::string IniFile::get(const std::string& section, const std::string& key) const {
    const auto it = sections_.find(section);
    if (it == sections_.end())
        throw config_error(origin_ + ": missing section [" + section + "]");
    const auto kit = it->second.find(key);
    if (kit == it->second.end())
        throw config_error(origin_ + ": missing key '" + key + "' in [" + section + "]");
    return kit->second;
}

std::string IniFile::get_or(const std::string& section, const std::string& key,
                            const std::string& fallback) const {
    return has(section, key) ? get(section, key) : fallback;
}

std::vector<std::string> IniFile::section_names() const { return section_order_; }

std::vector<std::string> IniFile::keys(const std::string& section) const {
    std::vector<std::string> out;
    const auto it = sections_.find(section);
    if (it == sections_.end()) return out;
    for (const auto& [k, v] : it->second) out.push_back(k);
    return out;
}

namespace {

void reject_unknown_keys(const IniFile& ini, const std::string& section,
                         const std::set<std::string>& known) {
    for (const auto& key : ini.keys(section))
        if (!known.count(key))
            throw config_error("unknown key '" + key + "' in [" + section + "]");
}

FieldSpec parse_field_section(const IniFile& ini, const std::string& section) {
    FieldSpec spec;
    spec.family = ini.get(section, "family");
    spec.condition = ini.get_or(section, "condition", "");

    if (spec.family == "gaussian") {
        reject_unknown_keys(ini, section, {"family", "dim", "mean", "cov", "condition"});
        spec.dim = parse_u64(ini.get(section, "dim"), "field dim");
        spec.mean = ini.has(section, "mean") ? parse_double_list(ini.get(section, "mean"))
                                             : Vec(spec.dim, 0.0);
        spec.cov = ini.has(section, "cov") ? parse_double_list(ini.get(section, "cov"))
                                           : Vec(spec.dim, 1.0);
        if (spec.mean.size() == 1 && spec.dim > 1) spec.mean.assign(spec.dim, spec.mean[0]);
        if (spec.cov.size() == 1 && spec.dim > 1) spec.cov.assign(spec.dim, spec.cov[0]);
    } else if (spec.family == "gaussian_mixture") {
        std::set<std::string> known{"family", "dim", "weights", "condition"};
        spec.dim = parse_u64(ini.get(section, "dim"), "field dim");
        const Vec weights = parse_double_list(ini.get(section, "weights"));
        for (std::size_t j = 0; j < weights.size(); ++j) {
            const std::string mk = "mean_" + std::to_string(j);
            const std::string ck = "cov_" + std::to_string(j);
            known.insert(mk);
            known.insert(ck);
            GaussianComponent comp;
            comp.weight = weights[j];
            comp.mean = parse_double_list(ini.get(section, mk));
            comp.cov_diag = ini.has(section, ck) ? parse_double_list(ini.get(section, ck))
                                                 : Vec(spec.dim, 1.0);
            if (comp.cov_diag.size() == 1 && spec.dim > 1)
                comp.cov_diag.assign(spec.dim, comp.cov_diag[0]);
            spec.components.push_back(std::move(comp));
        }
        reject_unknown_keys(ini, section, known);
    } else if (spec.family == "stiff") {
        reject_unknown_keys(ini, section, {"family", "dim", "omega", "amplitude", "condition"});
        spec.dim = parse_u64(ini.get(section, "dim"), "field dim");
        spec.omega = parse_double(ini.get(section, "omega"), "stiff omega");
        spec.amplitude = parse_double(ini.get(section, "amplitude"), "stiff amplitude");
    } else {
        throw config_error("unknown field family '" + spec.family +
                           "' (expected gaussian|gaussian_mixture|stiff)");
    }
    return spec;
}

}  // namespace

RunConfig RunConfig::load(const std::string& path) {
    return from_ini(IniFile::parse_file(path));
}

RunConfig RunConfig::from_ini(const IniFile& ini) {
    RunConfig cfg;
    cfg.config_hash = hash_bytes_hex(ini.raw_text());

    reject_unknown_keys(ini, "schedule", {"kind"});
    cfg.schedule = InterpolantSchedule::from_name(ini.get_or("schedule", "kind", "linear"));

    if (!ini.has_section("field")) throw config_error("missing section [field]");
    cfg.fields["default"] = parse_field_section(ini, "field");
    for (const auto& name : ini.section_names()) {
        if (name.rfind("field:", 0) == 0) {
            const std::string label = name.substr(6);
            if (label.empty() || label == "default")
                throw config_error("bad extra field section [" + name + "]");
            cfg.fields[label] = parse_field_section(ini, name);
        }
    }

    reject_unknown_keys(ini, "grid", {"steps", "knots"});
    if (ini.has("grid", "knots")) {
        cfg.grid.knots = parse_double_list(ini.get("grid", "knots"));
    } else {
        cfg.grid.steps = parse_u64(ini.get_or("grid", "steps", "50"), "grid steps");
    }

    reject_unknown_keys(ini, "policy",
                        {"policy", "epsilon", "epsilon_guard", "guard_fraction", "n",
                         "keep_every", "profile", "mode", "epsilon_schedule"});
    cfg.policy.policy = ini.get_or("policy", "policy", "none");
    cfg.policy.cache.epsilon =
        parse_double(ini.get_or("policy", "epsilon", "0.05"), "epsilon");
    cfg.policy.cache.epsilon_guard =
        parse_double(ini.get_or("policy", "epsilon_guard", "0.01"), "epsilon_guard");
    cfg.policy.cache.guard_fraction =
        parse_double(ini.get_or("policy", "guard_fraction", "0.2"), "guard_fraction");
    cfg.policy.cache.max_reuse = parse_u64(ini.get_or("policy", "n", "3"), "n");
    cfg.policy.keep_every =
        parse_u64(ini.get_or("policy", "keep_every", "1"), "keep_every");
    cfg.policy.profile_path = ini.get_or("policy", "profile", "");
    cfg.policy.mode = ini.get_or("policy", "mode", "adaptive");
    if (cfg.policy.mode != "adaptive" && cfg.policy.mode != "static")
        throw config_error("policy mode must be adaptive|static");
    if (ini.has("policy", "epsilon_schedule")) {
        // "0:0.01,0.2:0.1" -> pieces (from_fraction, epsilon)
        std::stringstream ss(ini.get("policy", "epsilon_schedule"));
        std::string piece;
        while (std::getline(ss, piece, ',')) {
            const auto colon = piece.find(':');
            if (colon == std::string::npos)
                throw config_error("epsilon_schedule pieces must look like fraction:epsilon");
            cfg.policy.cache.custom_pieces.push_back(
                {parse_double(trim(piece.substr(0, colon)), "schedule fraction"),
                 parse_double(trim(piece.substr(colon + 1)), "schedule epsilon")});
        }
    }

    reject_unknown_keys(ini, "calibration",
                        {"num_samples", "seed", "perturbation_scale", "dt_probe", "aggregate"});
    cfg.calibration.num_samples =
        parse_u64(ini.get_or("calibration", "num_samples", "8"), "num_samples");
    cfg.calibration.seed = parse_u64(ini.get_or("calibration", "seed", "0"), "calibration seed");
    cfg.calibration.perturbation_scale = parse_double(
        ini.get_or("calibration", "perturbation_scale", "0.1"), "perturbation_scale");
    cfg.calibration.dt_probe =
        parse_double(ini.get_or("calibration", "dt_probe", "0"), "dt_probe");
    const std::string agg = ini.get_or("calibration", "aggregate", "mean");
    if (agg == "mean") cfg.calibration.aggregate = Aggregate::Mean;
    else if (agg == "max") cfg.calibration.aggregate = Aggregate::Max;
    else throw config_error("calibration aggregate must be mean|max");

    reject_unknown_keys(ini, "run", {"seeds", "out", "write_trajectories"});
    if (ini.has("run", "seeds")) cfg.run.seeds = parse_seed_list(ini.get("run", "seeds"));
    if (cfg.run.seeds.empty()) throw config_error("run seeds list is empty");
    cfg.run.out_dir = ini.get_or("run", "out", "out");
    cfg.run.write_trajectories =
        parse_bool(ini.get_or("run", "write_trajectories", "false"), "write_trajectories");

    // Surface validation problems now, before any computation.
    cfg.make_grid();
    for (const auto& [label, spec] : cfg.fields) cfg.make_field(label);
    if (cfg.policy.policy == "sencache" || cfg.policy.policy == "teacache_like" ||
        cfg.policy.policy == "magcache_like") {
        cfg.policy.cache.validate();
    } else if (cfg.policy.policy == "uniform") {
        if (cfg.policy.keep_every < 1) throw config_error("keep_every must be >= 1");
    } else if (cfg.policy.policy != "none") {
        throw config_error("unknown policy '" + cfg.policy.policy +
                           "' (expected sencache|teacache_like|magcache_like|uniform|none)");
    }
    return cfg;
}

const FieldSpec& RunConfig::default_field() const {
    const auto it = fields.find("default");
    if (it == fields.end()) throw config_error("missing section [field]");
    return it->second;
}

std::unique_ptr<VelocityField> RunConfig::make_field() const { return make_field("default"); }

std::unique_ptr<VelocityField> RunConfig::make_field(const std::string& label) const {
    const auto it = fields.find(label);
    if (it == fields.end()) throw config_error("no field labelled '" + label + "'");
    const FieldSpec& spec = it->second;
    if (spec.dim == 0) throw config_error("field dim must be >= 1");

    if (spec.family == "gaussian") {
        if (spec.mean.size() != spec.dim || spec.cov.size() != spec.dim)
            throw config_error("gaussian mean/cov length must match dim");
        return std::make_unique<GaussianField>(spec.mean, spec.cov, schedule, spec.condition);
    }
    if (spec.family == "gaussian_mixture") {
        for (const auto& c : spec.components)
            if (c.mean.size() != spec.dim)
                throw config_error("mixture component mean length must match dim");
        return std::make_unique<GaussianMixtureField>(spec.components, schedule,
                                                      spec.condition);
    }
    if (spec.family == "stiff")
        return std::make_unique<StiffSyntheticField>(spec.omega, spec.amplitude, spec.dim,
                                                     spec.condition);
    throw config_error("unknown field family '" + spec.family + "'");
}

TimestepGrid RunConfig::make_grid() const {
    if (!grid.knots.empty()) return TimestepGrid::from_knots(grid.knots);
    return TimestepGrid::uniform(grid.steps);
}

std::unique_ptr<CachePolicy> RunConfig::make_policy(const SensitivityProfile& profile) const {
    if (policy.policy == "sencache") return make_sencache(profile, policy.cache);
    if (policy.policy == "teacache_like") return make_teacache_like(profile, policy.cache);
    if (policy.policy == "magcache_like") return make_magcache_like(profile, policy.cache);
    if (policy.policy == "uniform") return std::make_unique<UniformSkipPolicy>(policy.keep_every);
    if (policy.policy == "none") return std::make_unique<NeverCachePolicy>();
    throw config_error("unknown policy '" + policy.policy + "'");
}

}  // namespace sencache

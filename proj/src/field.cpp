#include "sencache/field.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "sencache/errors.hpp"

namespace sencache {

namespace {

// Schedule values bundled per evaluation point.
struct ScheduleAt {
    double a, sig, adot, sdot, addot, sddot;
    ScheduleAt(const InterpolantSchedule& s, double t)
        : a(s.alpha(t)),
          sig(s.sigma(t)),
          adot(s.alpha_dot(t)),
          sdot(s.sigma_dot(t)),
          addot(s.alpha_ddot(t)),
          sddot(s.sigma_ddot(t)) {}
};

// Marginal variance of coordinate i at time t: a^2*cov_i + sig^2. Strictly
// positive on [0,T] because alpha and sigma never vanish together.
inline double marginal_var(const ScheduleAt& s, double cov_i) {
    return s.a * s.a * cov_i + s.sig * s.sig;
}

// Linear-part coefficient of the per-component posterior velocity.
inline double posterior_coefficient(const ScheduleAt& s, double cov_i) {
    return (s.adot * s.a * cov_i + s.sdot * s.sig) / marginal_var(s, cov_i);
}

// d/dt of posterior_coefficient via the quotient rule.
inline double posterior_coefficient_dot(const ScheduleAt& s, double cov_i) {
    const double num = s.adot * s.a * cov_i + s.sdot * s.sig;
    const double den = marginal_var(s, cov_i);
    const double num_dot = (s.addot * s.a + s.adot * s.adot) * cov_i +
                           s.sddot * s.sig + s.sdot * s.sdot;
    const double den_dot = 2.0 * s.a * s.adot * cov_i + 2.0 * s.sig * s.sdot;
    return (num_dot * den - num * den_dot) / (den * den);
}

// v_i = adot*mean_i + c_i*(x_i - a*mean_i), written into out.
void posterior_velocity(const ScheduleAt& s, const Vec& mean, const Vec& cov,
                        const Vec& x, Vec& out) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double c = posterior_coefficient(s, cov[i]);
        out[i] = s.adot * mean[i] + c * (x[i] - s.a * mean[i]);
    }
}

// dv_i/dt = addot*mean_i + cdot_i*(x_i - a*mean_i) - c_i*adot*mean_i.
void posterior_velocity_dt(const ScheduleAt& s, const Vec& mean, const Vec& cov,
                           const Vec& x, Vec& out) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double c = posterior_coefficient(s, cov[i]);
        const double cdot = posterior_coefficient_dot(s, cov[i]);
        out[i] = s.addot * mean[i] + cdot * (x[i] - s.a * mean[i]) - c * s.adot * mean[i];
    }
}

// log N(x; a*mean, diag(marginal_var)).
double component_log_likelihood(const ScheduleAt& s, const Vec& mean, const Vec& cov,
                                const Vec& x) {
    double ll = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = marginal_var(s, cov[i]);
        const double r = x[i] - s.a * mean[i];
        ll += -0.5 * (std::log(2.0 * std::numbers::pi * v) + r * r / v);
    }
    return ll;
}

// d/dt of component_log_likelihood at fixed x.
double component_log_likelihood_dt(const ScheduleAt& s, const Vec& mean, const Vec& cov,
                                   const Vec& x) {
    double lt = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = marginal_var(s, cov[i]);
        const double vdot = 2.0 * s.a * s.adot * cov[i] + 2.0 * s.sig * s.sdot;
        const double r = x[i] - s.a * mean[i];
        const double mdot = s.adot * mean[i];
        lt += -0.5 * vdot / v + r * mdot / v + 0.5 * r * r * vdot / (v * v);
    }
    return lt;
}

std::uint64_t fnv1a(const void* bytes, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string short_hex(std::uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[h & 0xf];
        h >>= 4;
    }
    return s;
}

std::uint64_t hash_vec(const Vec& v, std::uint64_t h) {
    return v.empty() ? h : fnv1a(v.data(), v.size() * sizeof(double), h);
}

void check_positive_cov(const Vec& cov) {
    for (double c : cov)
        if (!(c > 0.0)) throw config_error("covariance entries must be positive");
}

}  // namespace

void VelocityField::check_input(const Vec& x, double t) const {
    if (x.size() != dim())
        throw domain_error("input dimension " + std::to_string(x.size()) +
                           " does not match field dimension " + std::to_string(dim()));
    if (!all_finite(x)) throw numeric_error("non-finite input state");
    check_time_in_domain(t);
}

Vec VelocityField::evaluate(const Vec& x, double t) const {
    check_input(x, t);
    return velocity(x, t);
}

Matrix VelocityField::exact_jacobian_x(const Vec& x, double t) const {
    check_input(x, t);
    return jacobian_x(x, t);
}

Vec VelocityField::exact_jacobian_t(const Vec& x, double t) const {
    check_input(x, t);
    return jacobian_t(x, t);
}

Matrix VelocityField::jacobian_x(const Vec&, double) const {
    throw unsupported_error("field '" + id() + "' provides no exact x-Jacobian");
}

Vec VelocityField::jacobian_t(const Vec&, double) const {
    throw unsupported_error("field '" + id() + "' provides no exact t-Jacobian");
}

// ---- GaussianField -----------------------------------------------------

GaussianField::GaussianField(Vec mean, Vec cov_diag, InterpolantSchedule schedule,
                             std::string condition)
    : VelocityField(std::move(condition)),
      mean_(std::move(mean)),
      cov_diag_(std::move(cov_diag)),
      schedule_(schedule) {
    if (mean_.empty()) throw config_error("gaussian field needs dimension >= 1");
    if (cov_diag_.size() != mean_.size())
        throw config_error("gaussian field mean/cov dimension mismatch");
    check_positive_cov(cov_diag_);
}

std::string GaussianField::id() const {
    std::uint64_t h = hash_vec(cov_diag_, hash_vec(mean_, 0xcbf29ce484222325ULL));
    return "gaussian(d=" + std::to_string(dim()) + "," + schedule_.name() + "," +
           short_hex(h) + ")";
}

double GaussianField::coefficient(double t, std::size_t i) const {
    check_time_in_domain(t);
    return posterior_coefficient(ScheduleAt(schedule_, t), cov_diag_[i]);
}

double GaussianField::coefficient_dot(double t, std::size_t i) const {
    check_time_in_domain(t);
    return posterior_coefficient_dot(ScheduleAt(schedule_, t), cov_diag_[i]);
}

Vec GaussianField::velocity(const Vec& x, double t) const {
    const ScheduleAt s(schedule_, t);
    Vec out(x.size());
    posterior_velocity(s, mean_, cov_diag_, x, out);
    return out;
}

Matrix GaussianField::jacobian_x(const Vec&, double t) const {
    const ScheduleAt s(schedule_, t);
    Vec diag(dim());
    for (std::size_t i = 0; i < dim(); ++i) diag[i] = posterior_coefficient(s, cov_diag_[i]);
    return Matrix::diagonal(diag);
}

Vec GaussianField::jacobian_t(const Vec& x, double t) const {
    const ScheduleAt s(schedule_, t);
    Vec out(x.size());
    posterior_velocity_dt(s, mean_, cov_diag_, x, out);
    return out;
}

// ---- GaussianMixtureField ------------------------------------------------

GaussianMixtureField::GaussianMixtureField(std::vector<GaussianComponent> components,
                                           InterpolantSchedule schedule,
                                           std::string condition)
    : VelocityField(std::move(condition)),
      components_(std::move(components)),
      schedule_(schedule) {
    if (components_.empty()) throw config_error("mixture needs at least one component");
    const std::size_t d = components_.front().mean.size();
    if (d == 0) throw config_error("mixture components need dimension >= 1");
    double total = 0.0;
    for (const auto& c : components_) {
        if (c.mean.size() != d || c.cov_diag.size() != d)
            throw config_error("mixture component dimension mismatch");
        if (!(c.weight > 0.0)) throw config_error("mixture weights must be positive");
        check_positive_cov(c.cov_diag);
        total += c.weight;
    }
    if (std::fabs(total - 1.0) > 1e-12)
        throw config_error("mixture weights sum to " + std::to_string(total) +
                           ", expected 1 within 1e-12");
}

std::size_t GaussianMixtureField::dim() const { return components_.front().mean.size(); }

std::string GaussianMixtureField::id() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& c : components_) {
        h = fnv1a(&c.weight, sizeof(double), h);
        h = hash_vec(c.mean, h);
        h = hash_vec(c.cov_diag, h);
    }
    return "mixture(k=" + std::to_string(components_.size()) +
           ",d=" + std::to_string(dim()) + "," + schedule_.name() + "," + short_hex(h) + ")";
}

namespace {

// Max-subtracted softmax of per-component log-likelihoods.
std::vector<double> responsibilities(const std::vector<double>& loglik) {
    const double m = *std::max_element(loglik.begin(), loglik.end());
    std::vector<double> r(loglik.size());
    double z = 0.0;
    for (std::size_t j = 0; j < loglik.size(); ++j) {
        r[j] = std::exp(loglik[j] - m);
        z += r[j];
    }
    for (auto& v : r) v /= z;
    return r;
}

}  // namespace

Vec GaussianMixtureField::velocity(const Vec& x, double t) const {
    const ScheduleAt s(schedule_, t);
    const std::size_t k = components_.size();

    std::vector<double> loglik(k);
    for (std::size_t j = 0; j < k; ++j)
        loglik[j] = std::log(components_[j].weight) +
                    component_log_likelihood(s, components_[j].mean, components_[j].cov_diag, x);
    const std::vector<double> r = responsibilities(loglik);

    Vec out(x.size(), 0.0);
    Vec vj(x.size());
    for (std::size_t j = 0; j < k; ++j) {
        posterior_velocity(s, components_[j].mean, components_[j].cov_diag, x, vj);
        for (std::size_t i = 0; i < x.size(); ++i) out[i] += r[j] * vj[i];
    }
    return out;
}

Matrix GaussianMixtureField::jacobian_x(const Vec& x, double t) const {
    const ScheduleAt s(schedule_, t);
    const std::size_t k = components_.size();
    const std::size_t d = x.size();

    std::vector<double> loglik(k);
    std::vector<Vec> vels(k, Vec(d));
    std::vector<Vec> grads(k, Vec(d));  // d(loglik_j)/dx
    for (std::size_t j = 0; j < k; ++j) {
        const auto& c = components_[j];
        loglik[j] = std::log(c.weight) + component_log_likelihood(s, c.mean, c.cov_diag, x);
        posterior_velocity(s, c.mean, c.cov_diag, x, vels[j]);
        for (std::size_t i = 0; i < d; ++i)
            grads[j][i] = -(x[i] - s.a * c.mean[i]) / marginal_var(s, c.cov_diag[i]);
    }
    const std::vector<double> r = responsibilities(loglik);

    Vec grad_bar(d, 0.0);
    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t i = 0; i < d; ++i) grad_bar[i] += r[j] * grads[j][i];

    // J = sum_j r_j * (diag(c_j) + v_j (grad_j - grad_bar)^T)
    Matrix jac(d, d);
    for (std::size_t j = 0; j < k; ++j) {
        const auto& c = components_[j];
        for (std::size_t a = 0; a < d; ++a) {
            jac.at(a, a) += r[j] * posterior_coefficient(s, c.cov_diag[a]);
            for (std::size_t b = 0; b < d; ++b)
                jac.at(a, b) += r[j] * vels[j][a] * (grads[j][b] - grad_bar[b]);
        }
    }
    return jac;
}

Vec GaussianMixtureField::jacobian_t(const Vec& x, double t) const {
    const ScheduleAt s(schedule_, t);
    const std::size_t k = components_.size();
    const std::size_t d = x.size();

    std::vector<double> loglik(k), loglik_dt(k);
    std::vector<Vec> vels(k, Vec(d)), vels_dt(k, Vec(d));
    for (std::size_t j = 0; j < k; ++j) {
        const auto& c = components_[j];
        loglik[j] = std::log(c.weight) + component_log_likelihood(s, c.mean, c.cov_diag, x);
        loglik_dt[j] = component_log_likelihood_dt(s, c.mean, c.cov_diag, x);
        posterior_velocity(s, c.mean, c.cov_diag, x, vels[j]);
        posterior_velocity_dt(s, c.mean, c.cov_diag, x, vels_dt[j]);
    }
    const std::vector<double> r = responsibilities(loglik);

    double lt_bar = 0.0;
    for (std::size_t j = 0; j < k; ++j) lt_bar += r[j] * loglik_dt[j];

    // dv/dt = sum_j [ r_j*(dl_j/dt - lt_bar) * v_j + r_j * dv_j/dt ]
    Vec out(d, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
        const double rdot = r[j] * (loglik_dt[j] - lt_bar);
        for (std::size_t i = 0; i < d; ++i) out[i] += rdot * vels[j][i] + r[j] * vels_dt[j][i];
    }
    return out;
}

// ---- StiffSyntheticField ---------------------------------------------------

StiffSyntheticField::StiffSyntheticField(double omega, double amplitude, std::size_t dim,
                                         std::string condition)
    : VelocityField(std::move(condition)), omega_(omega), amplitude_(amplitude), dim_(dim) {
    if (dim_ == 0) throw config_error("stiff field needs dimension >= 1");
    if (!(omega_ > 0.0)) throw config_error("stiff field omega must be positive");
}

std::string StiffSyntheticField::id() const {
    std::uint64_t h = fnv1a(&omega_, sizeof(double));
    h = fnv1a(&amplitude_, sizeof(double), h);
    return "stiff(d=" + std::to_string(dim_) + "," + short_hex(h) + ")";
}

Vec StiffSyntheticField::velocity(const Vec& x, double t) const {
    const double sx = amplitude_ * std::sin(omega_ * t);
    const double cx = amplitude_ * std::cos(omega_ * t);
    Vec out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = sx * x[i] + cx;
    return out;
}

Matrix StiffSyntheticField::jacobian_x(const Vec&, double t) const {
    const double sx = amplitude_ * std::sin(omega_ * t);
    return Matrix::diagonal(Vec(dim_, sx));
}

Vec StiffSyntheticField::jacobian_t(const Vec& x, double t) const {
    const double ds = amplitude_ * omega_ * std::cos(omega_ * t);
    const double dc = -amplitude_ * omega_ * std::sin(omega_ * t);
    Vec out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = ds * x[i] + dc;
    return out;
}

}  // namespace sencache

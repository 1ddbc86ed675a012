#pragma once

#include <memory>
#include <string>
#include <vector>

#include "sencache/linalg.hpp"
#include "sencache/schedule.hpp"

namespace sencache {

// Velocity field v(x, t, c) driving the probability-flow ODE. Evaluation is
// deterministic: identical (x, t, c) gives bit-identical output. The
// condition token c is opaque and held fixed for the lifetime of the field.
class VelocityField {
public:
    virtual ~VelocityField() = default;

    virtual std::size_t dim() const = 0;

    // Stable identifier (family, dimension, parameter hash); recorded in
    // calibration profile metadata.
    virtual std::string id() const = 0;

    // Name of the interpolant schedule the field is built on, or "none".
    virtual std::string schedule_id() const { return "none"; }

    const std::string& condition() const { return condition_; }

    // Validates inputs (finite x of the right dimension, t in [0,T]) and
    // returns v(x, t).
    Vec evaluate(const Vec& x, double t) const;

    virtual bool has_exact_jacobians() const { return false; }

    // Exact dv/dx and dv/dt for analytic fields; throws unsupported_error
    // otherwise.
    Matrix exact_jacobian_x(const Vec& x, double t) const;
    Vec exact_jacobian_t(const Vec& x, double t) const;

protected:
    explicit VelocityField(std::string condition) : condition_(std::move(condition)) {}

    virtual Vec velocity(const Vec& x, double t) const = 0;
    virtual Matrix jacobian_x(const Vec& x, double t) const;
    virtual Vec jacobian_t(const Vec& x, double t) const;

    void check_input(const Vec& x, double t) const;

private:
    std::string condition_;
};

// Gaussian data x0 ~ N(mean, diag(cov)) under an interpolant schedule. The
// posterior expectation is linear in x_t, so the velocity is affine in x for
// every fixed t:
//
//   v_i(x, t) = alpha_dot * mean_i + c_i(t) * (x_i - alpha * mean_i)
//   c_i(t)    = (alpha_dot*alpha*cov_i + sigma_dot*sigma) / (alpha^2*cov_i + sigma^2)
//
// dv/dx = diag(c_i(t)) exactly; for mean 0, unit covariance, linear schedule
// this reduces to c(t) = (2t-1)/((1-t)^2 + t^2).
class GaussianField final : public VelocityField {
public:
    GaussianField(Vec mean, Vec cov_diag, InterpolantSchedule schedule,
                  std::string condition = "");

    std::size_t dim() const override { return mean_.size(); }
    std::string id() const override;
    std::string schedule_id() const override { return schedule_.name(); }
    bool has_exact_jacobians() const override { return true; }

    const InterpolantSchedule& schedule() const { return schedule_; }

    // Linear-part coefficient c_i(t) of the affine velocity map and its time
    // derivative.
    double coefficient(double t, std::size_t i) const;
    double coefficient_dot(double t, std::size_t i) const;

protected:
    Vec velocity(const Vec& x, double t) const override;
    Matrix jacobian_x(const Vec& x, double t) const override;
    Vec jacobian_t(const Vec& x, double t) const override;

private:
    Vec mean_;
    Vec cov_diag_;
    InterpolantSchedule schedule_;
};

struct GaussianComponent {
    double weight = 0.0;
    Vec mean;
    Vec cov_diag;
};

// Mixture of diagonal Gaussians. The velocity is the responsibility-weighted
// combination of per-component posterior velocities; responsibilities are
// softmax over per-component log-likelihoods of x_t, max-subtracted so that
// log-likelihood gaps of 1e4 and beyond stay finite. Nonlinear in x, with
// closed-form Jacobians in both x and t.
class GaussianMixtureField final : public VelocityField {
public:
    GaussianMixtureField(std::vector<GaussianComponent> components,
                         InterpolantSchedule schedule, std::string condition = "");

    std::size_t dim() const override;
    std::string id() const override;
    std::string schedule_id() const override { return schedule_.name(); }
    bool has_exact_jacobians() const override { return true; }

    const std::vector<GaussianComponent>& components() const { return components_; }
    const InterpolantSchedule& schedule() const { return schedule_; }

protected:
    Vec velocity(const Vec& x, double t) const override;
    Matrix jacobian_x(const Vec& x, double t) const override;
    Vec jacobian_t(const Vec& x, double t) const override;

private:
    std::vector<GaussianComponent> components_;
    InterpolantSchedule schedule_;
};

// Synthetic stress field with time-localized sensitivity spikes:
//
//   v(x, t) = a * sin(w t) * x + a * cos(w t) * 1
//
// dv/dx = a*sin(w t)*I stays bounded by |a| while dv/dt scales with a*w, so
// large w produces regions where the timestep term dominates the latent term.
class StiffSyntheticField final : public VelocityField {
public:
    StiffSyntheticField(double omega, double amplitude, std::size_t dim,
                        std::string condition = "");

    std::size_t dim() const override { return dim_; }
    std::string id() const override;
    bool has_exact_jacobians() const override { return true; }

    double omega() const { return omega_; }
    double amplitude() const { return amplitude_; }

protected:
    Vec velocity(const Vec& x, double t) const override;
    Matrix jacobian_x(const Vec& x, double t) const override;
    Vec jacobian_t(const Vec& x, double t) const override;

private:
    double omega_;
    double amplitude_;
    std::size_t dim_;
};

}  // namespace sencache

#pragma once

#include <string>
#include <string_view>

namespace sencache {

enum class ScheduleKind {
    LinearRectifiedFlow,
    Trigonometric,
};

// Scalar interpolation path between data (t=0) and noise (t=T=1):
//   x_t = alpha(t) * x0 + sigma(t) * eps
// with alpha(0)=1, sigma(0)=0, alpha(T)=0, sigma(T)=1; alpha non-increasing
// and sigma non-decreasing on [0,T]. Derivatives are analytic.
//
//   linear: alpha = 1-t,        sigma = t
//   trig:   alpha = cos(pi t/2), sigma = sin(pi t/2)
class InterpolantSchedule {
public:
    static constexpr double kTerminalTime = 1.0;

    explicit InterpolantSchedule(ScheduleKind kind) : kind_(kind) {}

    // Accepts "linear" or "trig".
    static InterpolantSchedule from_name(std::string_view name);

    ScheduleKind kind() const { return kind_; }
    std::string name() const;

    double alpha(double t) const;
    double sigma(double t) const;
    double alpha_dot(double t) const;
    double sigma_dot(double t) const;

    // Second derivatives; needed by the exact time-Jacobians of the
    // analytic fields.
    double alpha_ddot(double t) const;
    double sigma_ddot(double t) const;

private:
    ScheduleKind kind_;
};

// Throws domain_error unless 0 <= t <= T.
void check_time_in_domain(double t);

}  // namespace sencache

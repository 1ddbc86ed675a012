#include "sencache/schedule.hpp"

#include <cmath>
#include <numbers>

#include "sencache/errors.hpp"

namespace sencache {

namespace {
constexpr double kHalfPi = std::numbers::pi / 2.0;
}

void check_time_in_domain(double t) {
    if (!(t >= 0.0 && t <= InterpolantSchedule::kTerminalTime)) {
        throw domain_error("time " + std::to_string(t) + " outside [0, " +
                           std::to_string(InterpolantSchedule::kTerminalTime) + "]");
    }
}

InterpolantSchedule InterpolantSchedule::from_name(std::string_view name) {
    if (name == "linear") return InterpolantSchedule(ScheduleKind::LinearRectifiedFlow);
    if (name == "trig") return InterpolantSchedule(ScheduleKind::Trigonometric);
    throw config_error("unknown schedule '" + std::string(name) + "' (expected linear|trig)");
}

std::string InterpolantSchedule::name() const {
    return kind_ == ScheduleKind::LinearRectifiedFlow ? "linear" : "trig";
}

double InterpolantSchedule::alpha(double t) const {
    check_time_in_domain(t);
    return kind_ == ScheduleKind::LinearRectifiedFlow ? 1.0 - t : std::cos(kHalfPi * t);
}

double InterpolantSchedule::sigma(double t) const {
    check_time_in_domain(t);
    return kind_ == ScheduleKind::LinearRectifiedFlow ? t : std::sin(kHalfPi * t);
}

double InterpolantSchedule::alpha_dot(double t) const {
    check_time_in_domain(t);
    return kind_ == ScheduleKind::LinearRectifiedFlow ? -1.0
                                                      : -kHalfPi * std::sin(kHalfPi * t);
}

double InterpolantSchedule::sigma_dot(double t) const {
    check_time_in_domain(t);
    return kind_ == ScheduleKind::LinearRectifiedFlow ? 1.0
                                                      : kHalfPi * std::cos(kHalfPi * t);
}

double InterpolantSchedule::alpha_ddot(double t) const {
    check_time_in_domain(t);
    return kind_ == ScheduleKind::LinearRectifiedFlow
               ? 0.0
               : -kHalfPi * kHalfPi * std::cos(kHalfPi * t);
}

double InterpolantSchedule::sigma_ddot(double t) const {
    check_time_in_domain(t);
    return kind_ == ScheduleKind::LinearRectifiedFlow
               ? 0.0
               : -kHalfPi * kHalfPi * std::sin(kHalfPi * t);
}

}  // namespace sencache

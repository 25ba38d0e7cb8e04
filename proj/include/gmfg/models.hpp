#pragma once

// Reward models shared by the PDE solver and the n-player simulator. The state
// drift b(t, x, a) never depends on the population; the running reward
// f(t, x, m, a) and terminal reward g(x, m) receive the neighborhood measure m.

#include <cmath>
#include <concepts>
#include <string>
#include <variant>

#include "gmfg/measure.hpp"

namespace gmfg {

template <class R>
concept RewardModel = requires(const R& r, double t, double x, double a, const ParticleMeasure& m) {
    { r.drift(t, x, a) } -> std::convertible_to<double>;
    { r.running(t, x, m, a) } -> std::convertible_to<double>;
    { r.terminal(x, m) } -> std::convertible_to<double>;
    { R::running_uses_measure } -> std::convertible_to<bool>;
};

/// Rewards that only read the mass and raw first moment of m. The simulator
/// then skips building neighborhood measures atom by atom.
template <class R>
concept MomentRewardModel = RewardModel<R> && requires(const R& r, double t, double x, double a, double mass,
                                                       double moment) {
    { r.running_moments(t, x, mass, moment, a) } -> std::convertible_to<double>;
    { r.terminal_moments(x, mass, moment) } -> std::convertible_to<double>;
};

/// b = a, f = -a^2/2, g = -(c/2)(x - mean(m))^2.
struct LqRewards {
    double c = 1.0;
    static constexpr bool running_uses_measure = false;

    double drift(double, double, double a) const noexcept { return a; }
    double running(double, double, const ParticleMeasure&, double a) const noexcept { return -0.5 * a * a; }
    double terminal(double x, const ParticleMeasure& m) const noexcept { return terminal_moments(x, m.mass(), m.mean()); }
    double running_moments(double, double, double, double, double a) const noexcept { return -0.5 * a * a; }
    double terminal_moments(double x, double, double moment) const noexcept {
        const double d = x - moment;
        return -0.5 * c * d * d;
    }
    std::string name() const { return "lq_truncated"; }
};

/// b = a, f = -a^2/2 - kappa m([x - radius, x + radius]),
/// g = -(c/2)(x - anchor)^2.
struct CrowdAversionRewards {
    double kappa = 1.0;
    double radius = 0.5;
    double c = 1.0;
    double anchor = 0.0;
    static constexpr bool running_uses_measure = true;

    double drift(double, double, double a) const noexcept { return a; }
    double running(double, double x, const ParticleMeasure& m, double a) const {
        return -0.5 * a * a - kappa * m.mass_in(x - radius, x + radius);
    }
    double terminal(double x, const ParticleMeasure&) const noexcept {
        const double d = x - anchor;
        return -0.5 * c * d * d;
    }
    std::string name() const { return "crowd_aversion"; }
};

/// Population-free benchmark: b = a, f = -a^2/2, g = -(c/2)(x - target)^2.
struct DecoupledRewards {
    double c = 1.0;
    double target = 0.0;
    static constexpr bool running_uses_measure = false;

    double drift(double, double, double a) const noexcept { return a; }
    double running(double, double, const ParticleMeasure&, double a) const noexcept { return -0.5 * a * a; }
    double terminal(double x, const ParticleMeasure&) const noexcept { return terminal_moments(x, 0.0, 0.0); }
    double running_moments(double, double, double, double, double a) const noexcept { return -0.5 * a * a; }
    double terminal_moments(double x, double, double) const noexcept {
        const double d = x - target;
        return -0.5 * c * d * d;
    }
    std::string name() const { return "decoupled_test"; }
};

using AnyRewards = std::variant<LqRewards, CrowdAversionRewards, DecoupledRewards>;

}  // namespace gmfg

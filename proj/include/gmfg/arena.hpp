#pragma once

// n-player game simulator: Euler-Maruyama for dX^i = b(t, X^i, a^i) dt +
// sigma dB^i under per-player feedback rules, with trapezoidal objectives
// J_i = E[ int_0^T f(t, X^i, M^{n,i}_t, a^i) dt + g(X^i_T, M^{n,i}_T) ].
//
// Every (path, player) pair owns a random stream, so re-simulating one player
// under a different rule reuses exactly the same initial draw and Brownian
// increments (common random numbers).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gmfg/common.hpp"
#include "gmfg/initial_law.hpp"
#include "gmfg/interaction.hpp"
#include "gmfg/lqflock.hpp"
#include "gmfg/measure.hpp"
#include "gmfg/mfgpde.hpp"
#include "gmfg/models.hpp"
#include "gmfg/netgen.hpp"

namespace gmfg {

/// Decentralized feedback rule a = rule(t, x) of one player.
using Policy = std::function<double(double, double)>;

struct StrategyProfile {
    std::vector<Policy> rules;
    std::vector<std::string> kinds;

    int size() const noexcept { return static_cast<int>(rules.size()); }

    StrategyProfile with_deviation(int i, Policy rule) const {
        require(i >= 0 && i < size(), "deviating player out of range");
        StrategyProfile out = *this;
        out.rules[static_cast<std::size_t>(i)] = std::move(rule);
        out.kinds[static_cast<std::size_t>(i)] = "deviation";
        return out;
    }
};

inline StrategyProfile uniform_profile(int n, const Policy& rule, const std::string& kind = "explicit") {
    return {std::vector<Policy>(static_cast<std::size_t>(n), rule),
            std::vector<std::string>(static_cast<std::size_t>(n), kind)};
}

/// a^i(t, x) = alpha(t, u_i, x).
inline StrategyProfile graphon_profile(const LabelAssignment& labels,
                                       const std::function<double(double, double, double)>& alpha) {
    StrategyProfile out;
    for (double u : labels.labels) {
        out.rules.emplace_back([alpha, u](double t, double x) { return alpha(t, u, x); });
        out.kinds.emplace_back("graphon");
    }
    return out;
}

/// phi(t) (M(u_i) - x) with M read at the label cell of u_i.
inline StrategyProfile lq_profile(const LQSolution& sol, const LabelAssignment& labels) {
    StrategyProfile out;
    for (double u : labels.labels) {
        const double m = sol.target_at(u);
        const double c = sol.c, T = sol.T;
        out.rules.emplace_back([m, c, T](double t, double x) { return c / (c * (T - t) + 1.0) * (m - x); });
        out.kinds.emplace_back("graphon");
    }
    return out;
}

/// Time index of the left endpoint of the step containing t.
inline int time_node(const SolverGrid& g, double t) {
    const int k = static_cast<int>(std::floor(t / g.dt() + 1e-9));
    return std::clamp(k, 0, g.steps);
}

/// Rule read from a solver control table of one label cell.
inline Policy table_policy(const SolverGrid& g, const GridField& control, int l) {
    return [g, &control, l](double t, double x) { return control_at(g, control, time_node(g, t), l, x); };
}

/// a^i(t, x) read from the equilibrium control at the label cell of u_i.
inline StrategyProfile field_profile(const EquilibriumField& field, const LabelAssignment& labels) {
    StrategyProfile out;
    const LabelGrid lg = field.grid.label_grid();
    for (double u : labels.labels) {
        out.rules.push_back(table_policy(field.grid, field.control, lg.cell_of(u)));
        out.kinds.emplace_back("graphon");
    }
    return out;
}

template <RewardModel R>
struct GameModel {
    R rewards;
    double sigma = 0.0;
    double T = 1.0;
    InitialLaw initial;
};

struct SimulationOptions {
    long paths = 1000;
    double dt = 0.01;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    bool record_paths = false;
    std::vector<double> snapshot_times;  // neighborhood measures of path 0
};

struct Snapshot {
    double time = 0.0;
    int step = 0;
    std::vector<ParticleMeasure> neighborhoods;
};

struct SimulationResult {
    int n = 0;
    long paths = 0;
    int steps = 0;
    double dt = 0.0;
    std::vector<double> samples;          // [i * paths + p]: objective of player i on path p
    std::vector<MeanEstimate> objectives;
    std::vector<double> terminal_states;  // [p * n + i]
    std::vector<double> terminal_moment;  // [p * n + i]: first moment of M^{n,i}_T
    std::vector<double> trajectory;       // [(p * (steps + 1) + k) * n + i] when recorded
    std::vector<Snapshot> snapshots;

    std::span<const double> player_samples(int i) const {
        return {samples.data() + static_cast<std::size_t>(i) * paths, static_cast<std::size_t>(paths)};
    }
    double state(long p, int k, int i) const {
        return trajectory[(static_cast<std::size_t>(p) * (steps + 1) + k) * n + i];
    }
};

/// (J_i estimate, standard error).
inline MeanEstimate objective(const SimulationResult& result, int i) {
    require(i >= 0 && i < result.n, "player index out of range");
    return result.objectives[static_cast<std::size_t>(i)];
}

namespace detail {

inline int step_count(double T, double dt) {
    require(dt > 0.0, "dt must be positive");
    return std::max(1, static_cast<int>(std::lround(T / dt)));
}

/// Running rewards of all players at one time node.
template <RewardModel R>
void running_all(const R& rewards, const InteractionMatrix& xi, double t, std::span<const double> x,
                 std::span<const double> a, std::span<double> out) {
    const int n = xi.size();
    if constexpr (!R::running_uses_measure) {
        const ParticleMeasure none;
        for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = rewards.running(t, x[static_cast<std::size_t>(i)], none, a[static_cast<std::size_t>(i)]);
    } else if constexpr (MomentRewardModel<R>) {
        const Eigen::Map<const Eigen::VectorXd> xv(x.data(), n);
        const Eigen::VectorXd mom = xi.values() * xv / static_cast<double>(n);
        const Eigen::VectorXd mass = xi.values().rowwise().sum() / static_cast<double>(n);
        for (int i = 0; i < n; ++i)
            out[static_cast<std::size_t>(i)] = rewards.running_moments(t, x[static_cast<std::size_t>(i)], mass(i), mom(i), a[static_cast<std::size_t>(i)]);
    } else {
        for (int i = 0; i < n; ++i)
            out[static_cast<std::size_t>(i)] =
                rewards.running(t, x[static_cast<std::size_t>(i)], neighborhood_measure(xi, x, i), a[static_cast<std::size_t>(i)]);
    }
}

}  // namespace detail

template <RewardModel R>
SimulationResult simulate(const InteractionMatrix& xi, const LabelAssignment& labels, const StrategyProfile& profile,
                          const GameModel<R>& model, const SimulationOptions& opt) {
    const int n = xi.size();
    require(labels.size() == n && profile.size() == n, "labels and rules must match the matrix size");
    require(opt.paths >= 1, "paths must be positive");
    require(model.sigma >= 0.0, "diffusion must be nonnegative");
    const int steps = detail::step_count(model.T, opt.dt);
    const double h = model.T / steps;
    const double sq = model.sigma * std::sqrt(h);
    const bool record = opt.record_paths || R::running_uses_measure;

    SimulationResult out;
    out.n = n;
    out.paths = opt.paths;
    out.steps = steps;
    out.dt = h;
    out.samples.assign(static_cast<std::size_t>(n) * opt.paths, 0.0);
    out.terminal_states.assign(static_cast<std::size_t>(n) * opt.paths, 0.0);
    out.terminal_moment.assign(static_cast<std::size_t>(n) * opt.paths, 0.0);
    if (record) out.trajectory.assign(static_cast<std::size_t>(opt.paths) * (steps + 1) * n, 0.0);
    std::vector<int> snap_steps;
    for (double t : opt.snapshot_times) {
        snap_steps.push_back(std::clamp(static_cast<int>(std::lround(t / h)), 0, steps));
        out.snapshots.push_back({snap_steps.back() * h, snap_steps.back(), {}});
    }
    const Eigen::VectorXd mass = n > 0 ? Eigen::VectorXd(xi.values().rowwise().sum() / static_cast<double>(n))
                                       : Eigen::VectorXd();

    parallel_for(static_cast<std::size_t>(opt.paths), opt.threads, [&](std::size_t pu) {
        const auto p = static_cast<long>(pu);
        std::vector<Rng> rngs;
        rngs.reserve(static_cast<std::size_t>(n));
        std::vector<double> x(static_cast<std::size_t>(n)), a(x.size()), f(x.size()), acc(x.size(), 0.0);
        for (int i = 0; i < n; ++i) {
            rngs.emplace_back(derive_seed(opt.seed, static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(i)));
            x[static_cast<std::size_t>(i)] = model.initial.sample(labels.labels[static_cast<std::size_t>(i)], rngs.back());
        }
        for (int k = 0; k <= steps; ++k) {
            const double t = k * h;
            for (int i = 0; i < n; ++i)
                a[static_cast<std::size_t>(i)] = profile.rules[static_cast<std::size_t>(i)](t, x[static_cast<std::size_t>(i)]);
            detail::running_all(model.rewards, xi, t, x, a, f);
            const double w = (k == 0 || k == steps) ? 0.5 * h : h;
            for (std::size_t i = 0; i < x.size(); ++i) acc[i] += w * f[i];
            if (record)
                std::copy(x.begin(), x.end(),
                          out.trajectory.begin() + static_cast<std::ptrdiff_t>((pu * (steps + 1) + k) * n));
            if (p == 0)
                for (std::size_t s = 0; s < snap_steps.size(); ++s)
                    if (snap_steps[s] == k)
                        for (int i = 0; i < n; ++i) out.snapshots[s].neighborhoods.push_back(neighborhood_measure(xi, x, i));
            if (k == steps) break;
            for (int i = 0; i < n; ++i) {
                auto& xi_ = x[static_cast<std::size_t>(i)];
                xi_ += model.rewards.drift(t, xi_, a[static_cast<std::size_t>(i)]) * h;
                if (sq > 0.0) xi_ += sq * rngs[static_cast<std::size_t>(i)].normal();
            }
        }
        const Eigen::Map<const Eigen::VectorXd> xv(x.data(), n);
        const Eigen::VectorXd mom = xi.values() * xv / static_cast<double>(n);
        for (int i = 0; i < n; ++i) {
            const auto iu = static_cast<std::size_t>(i);
            double g;
            if constexpr (MomentRewardModel<R>)
                g = model.rewards.terminal_moments(x[iu], mass(i), mom(i));
            else
                g = model.rewards.terminal(x[iu], neighborhood_measure(xi, x, i));
            out.samples[iu * static_cast<std::size_t>(opt.paths) + pu] = acc[iu] + g;
            out.terminal_states[pu * n + iu] = x[iu];
            out.terminal_moment[pu * n + iu] = mom(i);
        }
    });

    for (int i = 0; i < n; ++i) {
        const auto s = out.player_samples(i);
        out.objectives.push_back(mean_and_stderr(std::vector<double>(s.begin(), s.end())));
    }
    return out;
}

/// Per-path objective of player i under `rule` while every other player keeps
/// the profile that produced `base`. Uses the same random streams as `base`,
/// which must come from `simulate` with the same options.
template <RewardModel R>
std::vector<double> deviation_samples(const InteractionMatrix& xi, const LabelAssignment& labels,
                                      const GameModel<R>& model, const SimulationResult& base, int i,
                                      const Policy& rule, const SimulationOptions& opt) {
    const int n = xi.size();
    require(i >= 0 && i < n, "deviating player out of range");
    require(base.paths == opt.paths && base.n == n, "base simulation does not match the options");
    const int steps = base.steps;
    const double h = base.dt;
    const double sq = model.sigma * std::sqrt(h);
    if constexpr (R::running_uses_measure)
        require(!base.trajectory.empty(), "measure-dependent rewards need recorded co-player paths");
    const Eigen::VectorXd masses = xi.values().rowwise().sum() / static_cast<double>(n);
    const double mass = masses(i);
    std::vector<double> out(static_cast<std::size_t>(opt.paths));
    const auto iu = static_cast<std::size_t>(i);

    parallel_for(static_cast<std::size_t>(opt.paths), opt.threads, [&](std::size_t pu) {
        Rng rng(derive_seed(opt.seed, static_cast<std::uint64_t>(pu), static_cast<std::uint64_t>(i)));
        double x = model.initial.sample(labels.labels[iu], rng);
        double acc = 0.0;
        std::vector<double> others;
        for (int k = 0; k <= steps; ++k) {
            const double t = k * h;
            const double a = rule(t, x);
            double f;
            if constexpr (!R::running_uses_measure) {
                f = model.rewards.running(t, x, ParticleMeasure{}, a);
            } else {
                others.assign(base.trajectory.begin() + static_cast<std::ptrdiff_t>((pu * (steps + 1) + k) * n),
                              base.trajectory.begin() + static_cast<std::ptrdiff_t>((pu * (steps + 1) + k + 1) * n));
                if constexpr (MomentRewardModel<R>) {
                    CompensatedSum mom;
                    for (int j = 0; j < n; ++j) mom.add(xi(i, j) * others[static_cast<std::size_t>(j)]);
                    f = model.rewards.running_moments(t, x, mass, mom.value() / n, a);
                } else {
                    f = model.rewards.running(t, x, neighborhood_measure(xi, others, i), a);
                }
            }
            acc += ((k == 0 || k == steps) ? 0.5 * h : h) * f;
            if (k == steps) break;
            x += model.rewards.drift(t, x, a) * h;
            if (sq > 0.0) x += sq * rng.normal();
        }
        double g;
        if constexpr (MomentRewardModel<R>) {
            g = model.rewards.terminal_moments(x, mass, base.terminal_moment[pu * n + iu]);
        } else {
            std::vector<double> final_states(base.terminal_states.begin() + static_cast<std::ptrdiff_t>(pu * n),
                                             base.terminal_states.begin() + static_cast<std::ptrdiff_t>((pu + 1) * n));
            g = model.rewards.terminal(x, neighborhood_measure(xi, final_states, i));
        }
        out[pu] = acc + g;
    });
    return out;
}

}  // namespace gmfg

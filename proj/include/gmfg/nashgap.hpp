#pragma once

// Per-player equilibrium gap estimates for the graphon control assigned to a
// finite game, sweeps over n, and the empirical neighborhood-measure
// convergence harness.
//
// Gaps are estimated against decentralized Markovian deviations only, so
// every estimate is a lower bound for the sup over full-state feedback.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "gmfg/arena.hpp"
#include "gmfg/common.hpp"
#include "gmfg/kernel.hpp"
#include "gmfg/lqflock.hpp"
#include "gmfg/measure.hpp"
#include "gmfg/mfgpde.hpp"
#include "gmfg/netgen.hpp"

namespace gmfg {

inline constexpr const char* kGapCaveat =
    "lower-bound estimate: deviations searched over decentralized Markovian controls against the "
    "path-averaged neighborhood flow, not over full-state feedback";

struct PlayerGap {
    int player = 0;
    double label = 0.0;
    double eps_hat = 0.0;  // raw, never clamped at zero
    double std_error = 0.0;
};

struct NashGapReport {
    int n = 0;
    LabelScheme scheme = LabelScheme::midpoint;
    std::string estimator;
    std::vector<PlayerGap> players;
    double mean = 0.0;
    double max = 0.0;
    std::string caveat = kGapCaveat;

    /// Fraction of players with eps_hat > eps.
    double fraction_above(double eps) const {
        if (players.empty()) return 0.0;
        const auto k = std::count_if(players.begin(), players.end(), [eps](const PlayerGap& g) { return g.eps_hat > eps; });
        return static_cast<double>(k) / static_cast<double>(players.size());
    }

    void aggregate() {
        CompensatedSum s;
        max = players.empty() ? 0.0 : players.front().eps_hat;
        for (const auto& g : players) {
            s.add(g.eps_hat);
            max = std::max(max, g.eps_hat);
        }
        mean = players.empty() ? 0.0 : s.value() / static_cast<double>(players.size());
    }
};

struct GapOptions {
    long paths = 2000;
    double dt = 0.01;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

namespace detail {

inline PlayerGap paired_gap(std::span<const double> deviation, std::span<const double> incumbent, int i, double u) {
    std::vector<double> diff(deviation.size());
    for (std::size_t p = 0; p < diff.size(); ++p) diff[p] = deviation[p] - incumbent[p];
    const auto est = mean_and_stderr(diff);
    return {i, u, est.mean, est.std_error};
}

}  // namespace detail

/// Closed-form deviation for the linear-quadratic game: player i tracks the
/// path-averaged target zbar_i = E[mean(M^{n,i}_T)] with the equilibrium gain.
/// zbar_i comes from an independent pilot run; incumbent and deviation share
/// random numbers. `players` empty means all players.
inline NashGapReport estimate_gaps_lq(const InteractionMatrix& xi, const LabelAssignment& labels,
                                      const LQSolution& sol, const LQParams& params, const GapOptions& opt,
                                      std::vector<int> players = {}) {
    const int n = xi.size();
    const GameModel<LqRewards> game{LqRewards{params.c}, params.sigma, params.T, params.initial};
    const StrategyProfile incumbent = lq_profile(sol, labels);
    if (players.empty()) {
        players.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) players[static_cast<std::size_t>(i)] = i;
    }

    SimulationOptions pilot{opt.paths, opt.dt, derive_seed(opt.seed, "pilot"), opt.threads, false, {}};
    const SimulationResult pre = simulate(xi, labels, incumbent, game, pilot);
    std::vector<double> zbar(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        CompensatedSum s;
        for (long p = 0; p < pre.paths; ++p) s.add(pre.terminal_moment[static_cast<std::size_t>(p) * n + i]);
        zbar[static_cast<std::size_t>(i)] = s.value() / static_cast<double>(pre.paths);
    }

    SimulationOptions crn{opt.paths, opt.dt, derive_seed(opt.seed, "crn"), opt.threads, false, {}};
    const SimulationResult base = simulate(xi, labels, incumbent, game, crn);

    NashGapReport report;
    report.n = n;
    report.scheme = labels.scheme;
    report.estimator = "lq_closed_form";
    const double c = params.c, T = params.T;
    for (int i : players) {
        const double z = zbar[static_cast<std::size_t>(i)];
        const Policy beta = [z, c, T](double t, double x) { return c / (c * (T - t) + 1.0) * (z - x); };
        const auto dev = deviation_samples(xi, labels, game, base, i, beta, crn);
        report.players.push_back(
            detail::paired_gap(dev, base.player_samples(i), i, labels.labels[static_cast<std::size_t>(i)]));
    }
    report.aggregate();
    return report;
}

/// Averaged neighborhood flow of player i on the solver's time nodes and state
/// cells, from recorded paths (states outside the box go to the wall cells).
inline std::vector<ParticleMeasure> averaged_neighborhood_flow(const InteractionMatrix& xi, const SimulationResult& sim,
                                                               const SolverGrid& g, int i) {
    require(!sim.trajectory.empty() && sim.steps == g.steps, "need recorded paths on the solver time grid");
    const int n = xi.size();
    const auto centers = g.centers();
    std::vector<ParticleMeasure> out;
    for (int k = 0; k <= g.steps; ++k) {
        std::vector<double> masses(static_cast<std::size_t>(g.states), 0.0);
        for (long p = 0; p < sim.paths; ++p)
            for (int j = 0; j < n; ++j) {
                const double w = xi(i, j);
                if (w == 0.0) continue;
                const double x = sim.state(p, k, j);
                const int cell = std::clamp(static_cast<int>(std::floor((x - g.x_min) / g.dx())), 0, g.states - 1);
                masses[static_cast<std::size_t>(cell)] += w;
            }
        for (auto& m : masses) m /= static_cast<double>(n) * static_cast<double>(sim.paths);
        out.push_back(grid_measure(centers, masses));
    }
    return out;
}

/// Best response from the single-agent HJB against each player's averaged
/// neighborhood flow. The simulation step is the solver time step.
template <RewardModel R>
NashGapReport estimate_gaps_hjb(const InteractionMatrix& xi, const LabelAssignment& labels, const ModelSpec<R>& model,
                                const StrategyProfile& incumbent, const GapOptions& opt, std::vector<int> players = {}) {
    const int n = xi.size();
    const auto& g = model.grid;
    const GameModel<R> game{model.rewards, model.sigma, g.T, model.initial};
    if (players.empty()) {
        players.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) players[static_cast<std::size_t>(i)] = i;
    }
    SimulationOptions pilot{opt.paths, g.dt(), derive_seed(opt.seed, "pilot"), opt.threads, true, {}};
    const SimulationResult pre = simulate(xi, labels, incumbent, game, pilot);
    SimulationOptions crn{opt.paths, g.dt(), derive_seed(opt.seed, "crn"), opt.threads, R::running_uses_measure, {}};
    const SimulationResult base = simulate(xi, labels, incumbent, game, crn);

    NashGapReport report;
    report.n = n;
    report.scheme = labels.scheme;
    report.estimator = "hjb_best_response";
    for (int i : players) {
        const HjbResult best = hjb_single(model, averaged_neighborhood_flow(xi, pre, g, i));
        const Policy beta = [g, control = best.control](double t, double x) {
            return control_at(g, control, time_node(g, t), 0, x);
        };
        const auto dev = deviation_samples(xi, labels, game, base, i, beta, crn);
        report.players.push_back(
            detail::paired_gap(dev, base.player_samples(i), i, labels.labels[static_cast<std::size_t>(i)]));
    }
    report.aggregate();
    return report;
}

// =============================================================================
// Sweeps
// =============================================================================

enum class Generator { erdos_renyi, sampled_weighted, sampled_simple, midpoint_weighted };

inline const char* to_string(Generator g) {
    switch (g) {
        case Generator::erdos_renyi: return "erdos_renyi";
        case Generator::sampled_weighted: return "sampled_weighted";
        case Generator::sampled_simple: return "sampled_simple";
        case Generator::midpoint_weighted: return "midpoint_weighted";
    }
    return "?";
}

enum class Aggregate { mean, max };

struct SweepSpec {
    Generator generator = Generator::erdos_renyi;
    double p = 0.5;           // edge probability for erdos_renyi
    bool normalize = true;    // divide erdos_renyi entries by p
    Kernel generator_kernel;  // kernel sampled by the graphon generators
    LabelScheme scheme = LabelScheme::random_per_cell;
    Aggregate aggregate = Aggregate::mean;
    std::vector<int> sizes;
    int trials = 1;
    int label_cells = 64;  // resolution of the closed-form solve
    LQParams lq;           // lq.kernel is the limit kernel of the sequence
    GapOptions gap;
};

struct SweepTrial {
    int n = 0;
    int trial = 0;
    NashGapReport report;
    double aggregate = 0.0;
};

struct SweepSummary {
    int n = 0;
    double aggregate_mean = 0.0;  // across trials
    double aggregate_std_error = 0.0;
};

struct SweepResult {
    std::vector<SweepTrial> trials;
    std::vector<SweepSummary> summary;
};

/// Draws an interaction matrix and labels for one (n, trial) of a sweep.
inline SampledGraph generate(const SweepSpec& spec, int n, std::uint64_t seed) {
    switch (spec.generator) {
        case Generator::erdos_renyi:
            return {erdos_renyi(n, spec.p, spec.normalize, derive_seed(seed, "graph")),
                    assign_labels(n, spec.scheme, derive_seed(seed, "labels"))};
        case Generator::sampled_weighted: return sample_from_graphon(spec.generator_kernel, n, true, seed);
        case Generator::sampled_simple: return sample_from_graphon(spec.generator_kernel, n, false, seed);
        case Generator::midpoint_weighted: {
            SampledGraph out;
            out.labels = assign_labels(n, spec.scheme, derive_seed(seed, "labels"));
            Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    if (i != j) m(i, j) = spec.generator_kernel(out.labels.labels[static_cast<std::size_t>(i)],
                                                                out.labels.labels[static_cast<std::size_t>(j)]);
            out.xi = InteractionMatrix(std::move(m), "weighted(" + spec.generator_kernel.name() + ")");
            return out;
        }
    }
    throw InvalidArgument("unknown generator");
}

inline SweepResult gap_sweep(const SweepSpec& spec) {
    require(!spec.sizes.empty() && spec.trials >= 1, "sweep needs sizes and trials");
    require(std::is_sorted(spec.sizes.begin(), spec.sizes.end()), "sweep sizes must be increasing");
    const LQSolution sol = solve_lq(spec.lq, spec.label_cells);
    SweepResult out;
    for (int n : spec.sizes) {
        std::vector<double> aggregates;
        for (int trial = 0; trial < spec.trials; ++trial) {
            const std::uint64_t seed =
                derive_seed(spec.gap.seed, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(trial));
            const SampledGraph graph = generate(spec, n, seed);
            GapOptions gap = spec.gap;
            gap.seed = derive_seed(seed, "gaps");
            SweepTrial t{n, trial, estimate_gaps_lq(graph.xi, graph.labels, sol, spec.lq, gap), 0.0};
            t.aggregate = spec.aggregate == Aggregate::mean ? t.report.mean : t.report.max;
            aggregates.push_back(t.aggregate);
            out.trials.push_back(std::move(t));
        }
        const auto est = mean_and_stderr(aggregates);
        out.summary.push_back({n, est.mean, est.std_error});
    }
    return out;
}

// =============================================================================
// Empirical neighborhood measures
// =============================================================================

struct ConvergenceRow {
    int n = 0;
    double distance = 0.0;  // (1/n) sum_i ||M_i - W mu(u_i)||_BL, averaged over trials
    double std_error = 0.0;
};

/// Conditional state laws of a label-state measure, grouped by label value.
class ConditionalSampler {
public:
    explicit ConditionalSampler(const LabelStateMeasure& mu) {
        std::vector<LabelAtom> atoms = mu.atoms();
        std::stable_sort(atoms.begin(), atoms.end(), [](const LabelAtom& a, const LabelAtom& b) { return a.u < b.u; });
        for (const auto& a : atoms) {
            if (a.w <= 0.0) continue;
            if (labels_.empty() || labels_.back() != a.u) {
                labels_.push_back(a.u);
                states_.emplace_back();
                cumulative_.emplace_back();
            }
            states_.back().push_back(a.x);
            const double prev = cumulative_.back().empty() ? 0.0 : cumulative_.back().back();
            cumulative_.back().push_back(prev + a.w);
        }
        require(!labels_.empty(), "measure has no mass");
    }

    /// Draw from the conditional law at the atom label nearest to u.
    double sample(double u, Rng& rng) const {
        auto it = std::lower_bound(labels_.begin(), labels_.end(), u);
        std::size_t g;
        if (it == labels_.begin()) g = 0;
        else if (it == labels_.end()) g = labels_.size() - 1;
        else {
            g = static_cast<std::size_t>(it - labels_.begin());
            if (u - labels_[g - 1] <= labels_[g] - u) --g;
        }
        return states_[g][rng.discrete(cumulative_[g])];
    }

private:
    std::vector<double> labels_;
    std::vector<std::vector<double>> states_;
    std::vector<std::vector<double>> cumulative_;
};

using GraphGenerator = std::function<SampledGraph(int n, std::uint64_t seed)>;

/// Independent states X_j ~ mu_{u_j}; distance between each M^{n,i} and
/// W mu(u_i) in bounded-Lipschitz norm, averaged over players and trials.
inline std::vector<ConvergenceRow> empirical_measure_convergence(const Kernel& w, const GraphGenerator& generator,
                                                                 const LabelStateMeasure& mu,
                                                                 const std::vector<int>& sizes, int trials,
                                                                 std::uint64_t seed, unsigned threads = 1) {
    require(trials >= 1, "need at least one trial");
    const ConditionalSampler sampler(mu);
    std::vector<ConvergenceRow> out;
    for (int n : sizes) {
        std::vector<double> per_trial(static_cast<std::size_t>(trials));
        parallel_for(static_cast<std::size_t>(trials), threads, [&](std::size_t tu) {
            const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(n), tu);
            const SampledGraph graph = generator(n, derive_seed(s, "graph"));
            Rng rng(derive_seed(s, "states"));
            std::vector<double> states(static_cast<std::size_t>(n));
            for (int j = 0; j < n; ++j)
                states[static_cast<std::size_t>(j)] = sampler.sample(graph.labels.labels[static_cast<std::size_t>(j)], rng);
            CompensatedSum total;
            for (int i = 0; i < n; ++i) {
                const double u = graph.labels.labels[static_cast<std::size_t>(i)];
                total.add(bl_distance(neighborhood_measure(graph.xi, states, i), apply_to_measure(w, mu, u)));
            }
            per_trial[tu] = total.value() / n;
        });
        const auto est = mean_and_stderr(per_trial);
        out.push_back({n, est.mean, est.std_error});
    }
    return out;
}

/// Generator with midpoint labels and xi_ij = W(u_i, u_j).
inline GraphGenerator midpoint_weighted_generator(const Kernel& w) {
    return [w](int n, std::uint64_t) {
        SweepSpec spec;
        spec.generator = Generator::midpoint_weighted;
        spec.generator_kernel = w;
        spec.scheme = LabelScheme::midpoint;
        return generate(spec, n, 0);
    };
}

}  // namespace gmfg

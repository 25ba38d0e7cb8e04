#pragma once

// Forward-backward PDE solver for graphon games on a truncated state box.
//
// For every label cell the value function solves a one-dimensional HJB
// equation backward in time and the state density solves a Fokker-Planck
// equation forward in time; label cells couple only through the neighborhood
// measures W mu_t(u). A damped Picard loop iterates the pair to a fixed point.
//
// Discretization: cell-centred state grid with J cells, uniform time steps,
// explicit upwind Hamiltonian with implicit diffusion (Neumann walls) for the
// HJB, conservative upwind finite volumes with implicit diffusion (no-flux
// walls) for the density. The explicit parts are substepped so that
// |b| h / dx <= 1/2.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "gmfg/common.hpp"
#include "gmfg/initial_law.hpp"
#include "gmfg/kernel.hpp"
#include "gmfg/measure.hpp"
#include "gmfg/models.hpp"

namespace gmfg {

struct SolverGrid {
    double T = 1.0;
    int steps = 200;  // time steps K
    int labels = 16;  // label cells L
    double x_min = -4.0;
    double x_max = 6.0;
    int states = 200;  // state cells J
    double a_min = -5.0;
    double a_max = 5.0;
    int actions = 201;

    double dt() const noexcept { return T / steps; }
    double dx() const noexcept { return (x_max - x_min) / states; }
    double time(int k) const noexcept { return T * k / steps; }
    double x(int j) const noexcept { return x_min + (j + 0.5) * dx(); }
    double action(int q) const noexcept { return a_min + (a_max - a_min) * q / (actions - 1); }
    LabelGrid label_grid() const { return LabelGrid(labels); }

    std::vector<double> centers() const {
        std::vector<double> out(static_cast<std::size_t>(states));
        for (int j = 0; j < states; ++j) out[static_cast<std::size_t>(j)] = x(j);
        return out;
    }
    std::vector<double> edges() const {
        std::vector<double> out(static_cast<std::size_t>(states) + 1);
        for (int j = 0; j <= states; ++j) out[static_cast<std::size_t>(j)] = x_min + j * dx();
        return out;
    }

    void validate() const {
        require(T > 0.0, "horizon must be positive");
        require(steps >= 1 && labels >= 1 && states >= 2, "grid needs >= 1 step, >= 1 label, >= 2 states");
        require(x_max > x_min, "state box must be nonempty");
        require(actions >= 2 && a_max > a_min, "action grid needs >= 2 points");
    }
};

template <RewardModel R>
struct ModelSpec {
    R rewards;
    double sigma = 0.3;
    Kernel kernel;
    InitialLaw initial;
    SolverGrid grid;

    void validate() const {
        grid.validate();
        require(sigma > 0.0 && std::isfinite(sigma), "diffusion must be positive");
    }
};

/// Dense array indexed [time node][label cell][state cell].
class GridField {
public:
    GridField() = default;
    GridField(int times, int labels, int states, double fill = 0.0)
        : times_(times), labels_(labels), states_(states),
          data_(static_cast<std::size_t>(times) * labels * states, fill) {}

    int times() const noexcept { return times_; }
    int labels() const noexcept { return labels_; }
    int states() const noexcept { return states_; }

    double& operator()(int k, int l, int j) { return data_[index(k, l, j)]; }
    double operator()(int k, int l, int j) const { return data_[index(k, l, j)]; }

    std::span<double> row(int k, int l) { return {data_.data() + index(k, l, 0), static_cast<std::size_t>(states_)}; }
    std::span<const double> row(int k, int l) const {
        return {data_.data() + index(k, l, 0), static_cast<std::size_t>(states_)};
    }

    const std::vector<double>& data() const noexcept { return data_; }
    std::vector<double>& data() noexcept { return data_; }

    friend bool operator==(const GridField&, const GridField&) = default;

private:
    std::size_t index(int k, int l, int j) const noexcept {
        return (static_cast<std::size_t>(k) * labels_ + l) * states_ + j;
    }

    int times_ = 0;
    int labels_ = 0;
    int states_ = 0;
    std::vector<double> data_;
};

namespace detail {

/// Thomas factorization of I - r * (discrete Laplacian with Neumann walls).
class ImplicitDiffusion {
public:
    ImplicitDiffusion() = default;
    ImplicitDiffusion(int n, double r) : r_(r), upper_(static_cast<std::size_t>(n)), inv_(static_cast<std::size_t>(n)) {
        for (int i = 0; i < n; ++i) {
            const int neighbors = (i > 0) + (i + 1 < n);
            double diag = 1.0 + r * neighbors;
            if (i > 0) diag += r * upper_[static_cast<std::size_t>(i) - 1];
            inv_[static_cast<std::size_t>(i)] = 1.0 / diag;
            upper_[static_cast<std::size_t>(i)] = (i + 1 < n ? -r : 0.0) * inv_[static_cast<std::size_t>(i)];
        }
    }

    void solve(std::span<double> d) const {
        const std::size_t n = d.size();
        d[0] *= inv_[0];
        for (std::size_t i = 1; i < n; ++i) d[i] = (d[i] + r_ * d[i - 1]) * inv_[i];
        for (std::size_t i = n - 1; i-- > 0;) d[i] -= upper_[i] * d[i + 1];
    }

private:
    double r_ = 0.0;
    std::vector<double> upper_;
    std::vector<double> inv_;
};

}  // namespace detail

/// Quantities shared by every sweep of one model.
struct PdeOperators {
    Eigen::MatrixXd label_matrix;  // K(l, k) = integral over cell k of W(u_l, v) dv
    std::vector<double> actions;
    std::vector<double> centers;
    int substeps = 1;
    double h = 0.0;  // substep length
    detail::ImplicitDiffusion diffusion;
};

template <RewardModel R>
PdeOperators make_operators(const ModelSpec<R>& model) {
    model.validate();
    const auto& g = model.grid;
    PdeOperators ops;
    ops.label_matrix = grid_matrix(model.kernel, g.label_grid());
    ops.centers = g.centers();
    ops.actions.resize(static_cast<std::size_t>(g.actions));
    for (int q = 0; q < g.actions; ++q) ops.actions[static_cast<std::size_t>(q)] = g.action(q);
    double bmax = 0.0;
    for (int k = 0; k <= g.steps; ++k)
        for (double x : ops.centers)
            for (double a : ops.actions) bmax = std::max(bmax, std::abs(model.rewards.drift(g.time(k), x, a)));
    const double ratio = g.dt() * bmax / (0.5 * g.dx());
    ops.substeps = std::max(1, static_cast<int>(std::ceil(ratio - 1e-9)));
    ops.h = g.dt() / ops.substeps;
    const double r = 0.5 * model.sigma * model.sigma * ops.h / (g.dx() * g.dx());
    ops.diffusion = detail::ImplicitDiffusion(g.states, r);
    return ops;
}

/// Per-label probability masses of lambda on the state cells (rows sum to 1).
template <RewardModel R>
GridField initial_masses(const ModelSpec<R>& model) {
    const auto& g = model.grid;
    const LabelGrid lg = g.label_grid();
    const auto edges = g.edges();
    GridField out(1, g.labels, g.states);
    for (int l = 0; l < g.labels; ++l) {
        const auto h = model.initial.cell_histogram(lg.lower(l), lg.upper(l), edges);
        std::copy(h.begin(), h.end(), out.row(0, l).begin());
    }
    return out;
}

/// Masses of W mu_t(u_l) on the state cells.
inline std::vector<double> neighborhood_masses(const PdeOperators& ops, const GridField& flow, int k, int l) {
    std::vector<double> out(static_cast<std::size_t>(flow.states()), 0.0);
    for (int m = 0; m < flow.labels(); ++m) {
        const double w = ops.label_matrix(l, m);
        if (w == 0.0) continue;
        const auto r = flow.row(k, m);
        for (std::size_t j = 0; j < out.size(); ++j) out[j] += w * r[j];
    }
    return out;
}

inline ParticleMeasure grid_measure(std::span<const double> centers, std::span<const double> masses) {
    std::vector<Atom> atoms;
    atoms.reserve(masses.size());
    for (std::size_t j = 0; j < masses.size(); ++j)
        if (masses[j] > 0.0) atoms.push_back({centers[j], masses[j]});
    return ParticleMeasure(std::move(atoms));
}

// =============================================================================
// Backward sweep
// =============================================================================

namespace detail {

/// One label of the HJB sweep. `measure_at(k)` returns W mu_{t_k}(u_l).
/// With `policy` set, the action at each node is read from it instead of
/// maximized, which evaluates that policy.
template <RewardModel R, class MeasureAt>
void hjb_label(const ModelSpec<R>& model, const PdeOperators& ops, int l, MeasureAt&& measure_at,
               const GridField* policy, GridField& value, GridField& control) {
    const auto& g = model.grid;
    const int J = g.states;
    const double dx = g.dx();
    std::vector<double> v(static_cast<std::size_t>(J));
    {
        const ParticleMeasure terminal = measure_at(g.steps);
        for (int j = 0; j < J; ++j) {
            v[static_cast<std::size_t>(j)] = model.rewards.terminal(ops.centers[static_cast<std::size_t>(j)], terminal);
            value(g.steps, l, j) = v[static_cast<std::size_t>(j)];
        }
    }
    const ParticleMeasure none;
    std::vector<double> w(static_cast<std::size_t>(J));
    for (int k = g.steps - 1; k >= 0; --k) {
        const double t = g.time(k);
        ParticleMeasure m;
        if constexpr (R::running_uses_measure) m = measure_at(k);
        const ParticleMeasure& mref = R::running_uses_measure ? m : none;
        for (int s = 0; s < ops.substeps; ++s) {
            const bool last = s + 1 == ops.substeps;
            for (int j = 0; j < J; ++j) {
                const auto ju = static_cast<std::size_t>(j);
                const double x = ops.centers[ju];
                const double dplus = j + 1 < J ? (v[ju + 1] - v[ju]) / dx : 0.0;
                const double dminus = j > 0 ? (v[ju] - v[ju - 1]) / dx : 0.0;
                double best = -std::numeric_limits<double>::infinity();
                double arg = ops.actions.front();
                if (policy) {
                    arg = (*policy)(k, l, j);
                    const double b = model.rewards.drift(t, x, arg);
                    best = b * (b > 0.0 ? dplus : dminus) + model.rewards.running(t, x, mref, arg);
                } else {
                    for (double a : ops.actions) {
                        const double b = model.rewards.drift(t, x, a);
                        const double ham = b * (b > 0.0 ? dplus : dminus) + model.rewards.running(t, x, mref, a);
                        if (ham > best) {
                            best = ham;
                            arg = a;
                        }
                    }
                }
                w[ju] = v[ju] + ops.h * best;
                if (last) control(k, l, j) = arg;
            }
            ops.diffusion.solve(w);
            std::swap(v, w);
        }
        std::copy(v.begin(), v.end(), value.row(k, l).begin());
    }
    for (int j = 0; j < J; ++j) control(g.steps, l, j) = control(std::max(g.steps - 1, 0), l, j);
}

}  // namespace detail

struct HjbResult {
    GridField value;
    GridField control;  // node K repeats node K - 1
};

template <RewardModel R>
HjbResult hjb_backward(const ModelSpec<R>& model, const PdeOperators& ops, const GridField& flow,
                       unsigned threads = 1) {
    const auto& g = model.grid;
    require(flow.times() == g.steps + 1 && flow.labels() == g.labels && flow.states() == g.states,
            "flow must live on the solver grid");
    HjbResult out{GridField(g.steps + 1, g.labels, g.states), GridField(g.steps + 1, g.labels, g.states)};
    parallel_for(static_cast<std::size_t>(g.labels), threads, [&](std::size_t lu) {
        const int l = static_cast<int>(lu);
        auto measure_at = [&](int k) { return grid_measure(ops.centers, neighborhood_masses(ops, flow, k, l)); };
        detail::hjb_label(model, ops, l, measure_at, nullptr, out.value, out.control);
    });
    return out;
}

template <RewardModel R>
HjbResult hjb_backward(const ModelSpec<R>& model, const GridField& flow, unsigned threads = 1) {
    return hjb_backward(model, make_operators(model), flow, threads);
}

/// Value of a fixed feedback policy against a frozen flow, same scheme.
template <RewardModel R>
GridField evaluate_policy(const ModelSpec<R>& model, const GridField& flow, const GridField& policy,
                          unsigned threads = 1) {
    const auto ops = make_operators(model);
    const auto& g = model.grid;
    GridField value(g.steps + 1, g.labels, g.states), scratch(g.steps + 1, g.labels, g.states);
    parallel_for(static_cast<std::size_t>(g.labels), threads, [&](std::size_t lu) {
        const int l = static_cast<int>(lu);
        auto measure_at = [&](int k) { return grid_measure(ops.centers, neighborhood_masses(ops, flow, k, l)); };
        detail::hjb_label(model, ops, l, measure_at, &policy, value, scratch);
    });
    return value;
}

/// Single-agent HJB against an exogenous measure flow (one measure per time
/// node). Returns value and control on a one-label grid.
template <RewardModel R>
HjbResult hjb_single(const ModelSpec<R>& model, const std::vector<ParticleMeasure>& flow) {
    const auto ops = make_operators(model);
    const auto& g = model.grid;
    require(static_cast<int>(flow.size()) == g.steps + 1, "one measure per time node");
    HjbResult out{GridField(g.steps + 1, 1, g.states), GridField(g.steps + 1, 1, g.states)};
    auto measure_at = [&](int k) { return flow[static_cast<std::size_t>(k)]; };
    detail::hjb_label(model, ops, 0, measure_at, nullptr, out.value, out.control);
    return out;
}

// =============================================================================
// Forward sweep
// =============================================================================

template <RewardModel R>
GridField fp_forward(const ModelSpec<R>& model, const PdeOperators& ops, const GridField& control,
                     unsigned threads = 1) {
    const auto& g = model.grid;
    require(control.times() == g.steps + 1 && control.labels() == g.labels && control.states() == g.states,
            "control must live on the solver grid");
    const int J = g.states;
    const double ratio = ops.h / g.dx();
    const GridField init = initial_masses(model);
    GridField out(g.steps + 1, g.labels, J);
    parallel_for(static_cast<std::size_t>(g.labels), threads, [&](std::size_t lu) {
        const int l = static_cast<int>(lu);
        std::vector<double> q(init.row(0, l).begin(), init.row(0, l).end());
        std::copy(q.begin(), q.end(), out.row(0, l).begin());
        std::vector<double> face(static_cast<std::size_t>(J) - 1), flux(static_cast<std::size_t>(J) - 1);
        for (int k = 0; k < g.steps; ++k) {
            const double t = g.time(k);
            for (int j = 0; j + 1 < J; ++j) {
                const double b0 = model.rewards.drift(t, ops.centers[static_cast<std::size_t>(j)], control(k, l, j));
                const double b1 =
                    model.rewards.drift(t, ops.centers[static_cast<std::size_t>(j) + 1], control(k, l, j + 1));
                face[static_cast<std::size_t>(j)] = 0.5 * (b0 + b1);
            }
            for (int s = 0; s < ops.substeps; ++s) {
                CompensatedSum before;
                for (double v : q) before.add(v);
                for (std::size_t f = 0; f < face.size(); ++f)
                    flux[f] = std::max(face[f], 0.0) * q[f] + std::min(face[f], 0.0) * q[f + 1];
                for (std::size_t j = 0; j < q.size(); ++j) {
                    const double in = j > 0 ? flux[j - 1] : 0.0;
                    const double outflow = j + 1 < q.size() ? flux[j] : 0.0;
                    q[j] -= ratio * (outflow - in);
                }
                ops.diffusion.solve(q);
                CompensatedSum after;
                for (double v : q) after.add(v);
                const double drift = std::abs(after.value() - before.value());
                if (drift > 1e-6)
                    throw MassConservationError("density mass drift " + std::to_string(drift) + " at label " +
                                                std::to_string(l) + ", step " + std::to_string(k));
            }
            std::copy(q.begin(), q.end(), out.row(k + 1, l).begin());
        }
    });
    return out;
}

template <RewardModel R>
GridField fp_forward(const ModelSpec<R>& model, const GridField& control, unsigned threads = 1) {
    return fp_forward(model, make_operators(model), control, threads);
}

// =============================================================================
// Distances between grid flows
// =============================================================================

/// sum over labels of ||mu_t(u_l) - nu_t(u_l)||_BL at one time node, with each
/// label carrying mass 1/L.
inline double node_distance(std::span<const double> centers, const GridField& a, const GridField& b, int k) {
    const int L = a.labels();
    std::vector<double> diff(centers.size());
    CompensatedSum total;
    for (int l = 0; l < L; ++l) {
        const auto ra = a.row(k, l);
        const auto rb = b.row(k, l);
        bool zero = true;
        for (std::size_t j = 0; j < diff.size(); ++j) {
            diff[j] = (ra[j] - rb[j]) / L;
            zero = zero && diff[j] == 0.0;
        }
        if (!zero) total.add(bl_norm_sorted(centers, diff));
    }
    return total.value();
}

/// Grid-BL proxy: max over time nodes of node_distance.
inline double flow_distance(std::span<const double> centers, const GridField& a, const GridField& b) {
    require(a.times() == b.times() && a.labels() == b.labels() && a.states() == b.states(),
            "flows must share a grid");
    double out = 0.0;
    for (int k = 0; k < a.times(); ++k) out = std::max(out, node_distance(centers, a, b, k));
    return out;
}

/// State marginal at node k: sum over labels of mu_t(u_l) / L.
inline std::vector<double> second_marginal_masses(const GridField& flow, int k) {
    std::vector<double> out(static_cast<std::size_t>(flow.states()), 0.0);
    for (int l = 0; l < flow.labels(); ++l) {
        const auto r = flow.row(k, l);
        for (std::size_t j = 0; j < out.size(); ++j) out[j] += r[j] / flow.labels();
    }
    return out;
}

// =============================================================================
// Fixed point
// =============================================================================

struct FixedPointOptions {
    double damping = 0.5;
    int max_iter = 200;
    double tol = 1e-6;
    unsigned threads = 1;
};

struct EquilibriumField {
    SolverGrid grid;
    GridField value;
    GridField control;
    GridField mass;  // per-label probabilities on state cells; rows sum to 1
    int iterations = 0;
    std::vector<double> gaps;
    bool converged = false;
    double tol = 0.0;
    int substeps = 1;
    double boundary_mass = 0.0;  // max over nodes and labels of the mass in the two wall cells
    bool psd_kernel = true;      // uniqueness diagnostic; false flags possible multiple fixed points

    /// Density with sum_j density * dx = 1 / L per label.
    double density(int k, int l, int j) const { return mass(k, l, j) / (grid.dx() * grid.labels); }
};

inline double boundary_mass(const GridField& flow) {
    double out = 0.0;
    const int J = flow.states();
    for (int k = 0; k < flow.times(); ++k)
        for (int l = 0; l < flow.labels(); ++l) out = std::max(out, flow(k, l, 0) + flow(k, l, J - 1));
    return out;
}

template <RewardModel R>
EquilibriumField solve_fixed_point(const ModelSpec<R>& model, FixedPointOptions opt = {}) {
    require(opt.damping > 0.0 && opt.damping <= 1.0, "damping must lie in (0, 1]");
    require(opt.tol > 0.0, "tolerance must be positive");
    require(opt.max_iter >= 1, "need at least one iteration");
    const auto ops = make_operators(model);
    const auto& g = model.grid;

    const double mid = 0.5 * (g.a_min + g.a_max);
    GridField mu = fp_forward(model, ops, GridField(g.steps + 1, g.labels, g.states, mid), opt.threads);
    GridField best = mu;
    double best_gap = std::numeric_limits<double>::infinity();

    EquilibriumField out;
    out.grid = g;
    out.tol = opt.tol;
    out.substeps = ops.substeps;
    for (int it = 1; it <= opt.max_iter; ++it) {
        const HjbResult hj = hjb_backward(model, ops, mu, opt.threads);
        const GridField nu = fp_forward(model, ops, hj.control, opt.threads);
        GridField next = nu;
        if (opt.damping < 1.0) {
            auto& d = next.data();
            const auto& m = mu.data();
            for (std::size_t i = 0; i < d.size(); ++i) d[i] = (1.0 - opt.damping) * m[i] + opt.damping * d[i];
        }
        const double gap = flow_distance(ops.centers, mu, next);
        out.gaps.push_back(gap);
        out.iterations = it;
        mu = std::move(next);
        if (gap <= opt.tol) {
            out.converged = true;
            best = mu;
            break;
        }
        if (gap < best_gap) {
            best_gap = gap;
            best = mu;
        }
    }
    HjbResult final_hj = hjb_backward(model, ops, best, opt.threads);
    out.value = std::move(final_hj.value);
    out.control = std::move(final_hj.control);
    out.mass = std::move(best);
    out.boundary_mass = boundary_mass(out.mass);
    out.psd_kernel = psd_check(model.kernel, g.label_grid()).psd;
    return out;
}

// =============================================================================
// Diagnostics
// =============================================================================

struct ProductStructureReport {
    int bins = 1;
    double spread = 0.0;           // max over time nodes
    double terminal_spread = 0.0;  // at t = T
};

/// Max pairwise grid-BL distance between the conditional state laws of equal
/// label bins.
inline ProductStructureReport product_structure_check(const EquilibriumField& field, int bins) {
    require(bins >= 1, "need at least one bin");
    const auto& g = field.grid;
    const LabelGrid lg = g.label_grid();
    const auto centers = g.centers();
    ProductStructureReport out;
    out.bins = bins;
    for (int k = 0; k <= g.steps; ++k) {
        std::vector<std::vector<double>> law(static_cast<std::size_t>(bins),
                                             std::vector<double>(static_cast<std::size_t>(g.states), 0.0));
        std::vector<int> count(static_cast<std::size_t>(bins), 0);
        for (int l = 0; l < g.labels; ++l) {
            const int b = std::min(bins - 1, static_cast<int>(std::floor(lg.midpoint(l) * bins)));
            const auto r = field.mass.row(k, l);
            for (int j = 0; j < g.states; ++j) law[static_cast<std::size_t>(b)][static_cast<std::size_t>(j)] += r[static_cast<std::size_t>(j)];
            ++count[static_cast<std::size_t>(b)];
        }
        double spread = 0.0;
        std::vector<double> diff(static_cast<std::size_t>(g.states));
        for (int a = 0; a < bins; ++a) {
            if (count[static_cast<std::size_t>(a)] == 0) continue;
            for (int b = a + 1; b < bins; ++b) {
                if (count[static_cast<std::size_t>(b)] == 0) continue;
                for (int j = 0; j < g.states; ++j) {
                    const auto ju = static_cast<std::size_t>(j);
                    diff[ju] = law[static_cast<std::size_t>(a)][ju] / count[static_cast<std::size_t>(a)] -
                               law[static_cast<std::size_t>(b)][ju] / count[static_cast<std::size_t>(b)];
                }
                spread = std::max(spread, bl_norm_sorted(centers, diff));
            }
        }
        out.spread = std::max(out.spread, spread);
        if (k == g.steps) out.terminal_spread = spread;
    }
    return out;
}

/// Label-state measures with atoms (u_l, x_j, mass / L).
inline MeasureFlow to_measure_flow(const EquilibriumField& field) {
    const auto& g = field.grid;
    const LabelGrid lg = g.label_grid();
    std::vector<double> times;
    std::vector<LabelStateMeasure> nodes;
    for (int k = 0; k <= g.steps; ++k) {
        times.push_back(g.time(k));
        std::vector<LabelAtom> atoms;
        CompensatedSum total;
        for (int l = 0; l < g.labels; ++l)
            for (int j = 0; j < g.states; ++j) {
                const double w = field.mass(k, l, j) / g.labels;
                if (w > 0.0) {
                    atoms.push_back({lg.midpoint(l), g.x(j), w});
                    total.add(w);
                }
            }
        for (auto& a : atoms) a.w /= total.value();
        nodes.emplace_back(std::move(atoms), true);
    }
    return MeasureFlow(std::move(times), std::move(nodes));
}

/// Feedback control at time node k, label cell l, linearly interpolated in x
/// between cell centres and held constant beyond the outer centres.
inline double control_at(const SolverGrid& g, const GridField& control, int k, int l, double x) {
    const double s = (x - g.x_min) / g.dx() - 0.5;
    if (s <= 0.0) return control(k, l, 0);
    if (s >= g.states - 1) return control(k, l, g.states - 1);
    const int j = static_cast<int>(s);
    const double f = s - j;
    return (1.0 - f) * control(k, l, j) + f * control(k, l, j + 1);
}

/// Monte-Carlo value of the grid control from (t = 0, label cell l, x0)
/// against the frozen flow: left-point rule in time, reflection at the walls.
template <RewardModel R>
MeanEstimate monte_carlo_value(const ModelSpec<R>& model, const GridField& flow, const GridField& control, int l,
                               double x0, long paths, std::uint64_t seed) {
    const auto ops = make_operators(model);
    const auto& g = model.grid;
    std::vector<ParticleMeasure> measures;
    for (int k = 0; k <= g.steps; ++k) measures.push_back(grid_measure(ops.centers, neighborhood_masses(ops, flow, k, l)));
    const double dt = g.dt();
    const double sq = model.sigma * std::sqrt(dt);
    std::vector<double> samples(static_cast<std::size_t>(paths));
    for (long p = 0; p < paths; ++p) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(p)));
        double x = x0;
        CompensatedSum acc;
        for (int k = 0; k < g.steps; ++k) {
            const double t = g.time(k);
            const double a = control_at(g, control, k, l, x);
            acc.add(dt * model.rewards.running(t, x, measures[static_cast<std::size_t>(k)], a));
            x += model.rewards.drift(t, x, a) * dt + sq * rng.normal();
            if (x < g.x_min) x = 2.0 * g.x_min - x;
            if (x > g.x_max) x = 2.0 * g.x_max - x;
        }
        acc.add(model.rewards.terminal(x, measures.back()));
        samples[static_cast<std::size_t>(p)] = acc.value();
    }
    return mean_and_stderr(samples);
}

}  // namespace gmfg

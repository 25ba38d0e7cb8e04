#pragma once

// Finitely supported measures on the state line and on label x state, the
// neighborhood empirical measure, and the exact bounded-Lipschitz distance in
// one dimension.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "gmfg/common.hpp"
#include "gmfg/interaction.hpp"

namespace gmfg {

struct Atom {
    double x = 0.0;
    double w = 0.0;

    friend bool operator==(const Atom&, const Atom&) = default;
};

/// Nonnegative measure with finitely many atoms, kept sorted by position with
/// identical positions merged and zero-mass atoms dropped.
class ParticleMeasure {
public:
    ParticleMeasure() = default;

    explicit ParticleMeasure(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
        for (const auto& a : atoms_) {
            require(std::isfinite(a.x), "atom position must be finite");
            require(std::isfinite(a.w) && a.w >= 0.0, "atom mass must be finite and nonnegative");
        }
        std::stable_sort(atoms_.begin(), atoms_.end(),
                         [](const Atom& a, const Atom& b) { return a.x < b.x; });
        std::size_t out = 0;
        for (std::size_t i = 0; i < atoms_.size(); ++i) {
            if (atoms_[i].w == 0.0) continue;
            if (out > 0 && atoms_[out - 1].x == atoms_[i].x) {
                atoms_[out - 1].w += atoms_[i].w;
            } else {
                atoms_[out++] = atoms_[i];
            }
        }
        atoms_.resize(out);
        finish();
    }

    static ParticleMeasure dirac(double x, double w = 1.0) { return ParticleMeasure({{x, w}}); }

    const std::vector<Atom>& atoms() const noexcept { return atoms_; }
    std::size_t size() const noexcept { return atoms_.size(); }
    bool empty() const noexcept { return atoms_.empty(); }
    double mass() const noexcept { return mass_; }

    /// Raw first moment: sum of w * x. Zero for the zero measure.
    double mean() const noexcept { return first_moment_; }

    /// Mass of the closed interval [lo, hi].
    double mass_in(double lo, double hi) const {
        if (hi < lo || atoms_.empty()) return 0.0;
        auto first = std::lower_bound(atoms_.begin(), atoms_.end(), lo,
                                      [](const Atom& a, double v) { return a.x < v; });
        auto last = std::upper_bound(atoms_.begin(), atoms_.end(), hi,
                                     [](double v, const Atom& a) { return v < a.x; });
        const auto i0 = static_cast<std::size_t>(first - atoms_.begin());
        const auto i1 = static_cast<std::size_t>(last - atoms_.begin());
        return cumulative_[i1] - cumulative_[i0];
    }

    ParticleMeasure scaled(double factor) const {
        require(factor >= 0.0, "measures scale by nonnegative factors only");
        std::vector<Atom> out = atoms_;
        for (auto& a : out) a.w *= factor;
        return ParticleMeasure(std::move(out));
    }

    friend ParticleMeasure operator+(const ParticleMeasure& a, const ParticleMeasure& b) {
        std::vector<Atom> all = a.atoms_;
        all.insert(all.end(), b.atoms_.begin(), b.atoms_.end());
        return ParticleMeasure(std::move(all));
    }

private:
    void finish() {
        cumulative_.assign(atoms_.size() + 1, 0.0);
        CompensatedSum m, fm;
        for (std::size_t i = 0; i < atoms_.size(); ++i) {
            m.add(atoms_[i].w);
            fm.add(atoms_[i].w * atoms_[i].x);
            cumulative_[i + 1] = m.value();
        }
        mass_ = m.value();
        first_moment_ = fm.value();
    }

    std::vector<Atom> atoms_;
    std::vector<double> cumulative_{0.0};
    double mass_ = 0.0;
    double first_moment_ = 0.0;
};

/// Raw first moment of m.
inline double mean(const ParticleMeasure& m) noexcept { return m.mean(); }

struct LabelAtom {
    double u = 0.0;
    double x = 0.0;
    double w = 0.0;
};

/// Finitely supported measure on [0,1] x R.
class LabelStateMeasure {
public:
    LabelStateMeasure() = default;

    LabelStateMeasure(std::vector<LabelAtom> atoms, bool normalized)
        : atoms_(std::move(atoms)), normalized_(normalized) {
        CompensatedSum total;
        for (const auto& a : atoms_) {
            require(a.u >= 0.0 && a.u <= 1.0, "labels must lie in [0, 1]");
            require(std::isfinite(a.x), "states must be finite");
            require(std::isfinite(a.w) && a.w >= 0.0, "label-state masses must be nonnegative");
            total.add(a.w);
        }
        if (normalized_)
            require(std::abs(total.value() - 1.0) <= 1e-9,
                    "normalized label-state measure must have unit mass");
    }

    /// (1/n) sum_i delta_(u_i, x_i).
    static LabelStateMeasure empirical(std::span<const double> labels, std::span<const double> states) {
        require(labels.size() == states.size(), "labels and states must have equal length");
        require(!labels.empty(), "empirical measure needs at least one atom");
        const double w = 1.0 / static_cast<double>(labels.size());
        std::vector<LabelAtom> atoms(labels.size());
        for (std::size_t i = 0; i < labels.size(); ++i) atoms[i] = {labels[i], states[i], w};
        return LabelStateMeasure(std::move(atoms), true);
    }

    const std::vector<LabelAtom>& atoms() const noexcept { return atoms_; }
    bool normalized() const noexcept { return normalized_; }

    double mass() const {
        CompensatedSum s;
        for (const auto& a : atoms_) s.add(a.w);
        return s.value();
    }

private:
    std::vector<LabelAtom> atoms_;
    bool normalized_ = false;
};

/// Time-indexed label-state measures.
class MeasureFlow {
public:
    MeasureFlow() = default;

    MeasureFlow(std::vector<double> times, std::vector<LabelStateMeasure> nodes)
        : times_(std::move(times)), nodes_(std::move(nodes)) {
        require(!times_.empty(), "measure flow needs at least one time node");
        require(times_.size() == nodes_.size(), "one measure per time node");
        for (std::size_t k = 1; k < times_.size(); ++k)
            require(times_[k] > times_[k - 1], "time grid must be strictly increasing");
        for (const auto& m : nodes_)
            require(m.normalized() == nodes_.front().normalized(),
                    "all flow nodes share the normalization convention");
    }

    const std::vector<double>& times() const noexcept { return times_; }
    const std::vector<LabelStateMeasure>& nodes() const noexcept { return nodes_; }

private:
    std::vector<double> times_;
    std::vector<LabelStateMeasure> nodes_;
};

// =============================================================================
// Operations
// =============================================================================

/// M^{n,i} = (1/n) sum_j xi_ij delta_{x_j}.
inline ParticleMeasure neighborhood_measure(const InteractionMatrix& xi, std::span<const double> states,
                                            int i) {
    const int n = xi.size();
    require(static_cast<int>(states.size()) == n, "one state per player");
    require(i >= 0 && i < n, "player index out of range");
    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<Atom> atoms;
    atoms.reserve(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        const double w = inv_n * xi(i, j);
        if (w > 0.0) atoms.push_back({states[static_cast<std::size_t>(j)], w});
    }
    return ParticleMeasure(std::move(atoms));
}

inline ParticleMeasure second_marginal(const LabelStateMeasure& m) {
    std::vector<Atom> atoms;
    atoms.reserve(m.atoms().size());
    for (const auto& a : m.atoms()) atoms.push_back({a.x, a.w});
    return ParticleMeasure(std::move(atoms));
}

struct FlowSample {
    LabelStateMeasure measure;
    std::size_t node = 0;
    bool off_grid = false;  // t was outside [t_0, t_K]; nearest node used
};

/// Measure at the time node nearest to t.
inline FlowSample marginal_at(const MeasureFlow& flow, double t) {
    const auto& ts = flow.times();
    FlowSample out;
    out.off_grid = t < ts.front() || t > ts.back();
    auto it = std::lower_bound(ts.begin(), ts.end(), t);
    std::size_t k;
    if (it == ts.begin()) {
        k = 0;
    } else if (it == ts.end()) {
        k = ts.size() - 1;
    } else {
        k = static_cast<std::size_t>(it - ts.begin());
        if (t - ts[k - 1] <= ts[k] - t) --k;
    }
    out.node = k;
    out.measure = flow.nodes()[k];
    return out;
}

/// Mass-weighted state mean per label bin. `edges` partition [0,1]
/// (edges.front() == 0, edges.back() == 1); the last bin is closed. Empty bins
/// come back as std::nullopt.
inline std::vector<std::optional<double>> conditional_mean_by_bin(const LabelStateMeasure& m,
                                                                  std::span<const double> edges) {
    require(edges.size() >= 2, "need at least one bin");
    require(edges.front() == 0.0 && edges.back() == 1.0, "bins must partition [0, 1]");
    for (std::size_t b = 1; b < edges.size(); ++b)
        require(edges[b] > edges[b - 1], "bin edges must be increasing");
    const std::size_t bins = edges.size() - 1;
    std::vector<CompensatedSum> mass(bins), moment(bins);
    for (const auto& a : m.atoms()) {
        auto it = std::upper_bound(edges.begin(), edges.end(), a.u);
        std::size_t b = static_cast<std::size_t>(it - edges.begin());
        b = std::clamp<std::size_t>(b, 1, bins) - 1;
        mass[b].add(a.w);
        moment[b].add(a.w * a.x);
    }
    std::vector<std::optional<double>> out(bins);
    for (std::size_t b = 0; b < bins; ++b)
        if (mass[b].value() > 0.0) out[b] = moment[b].value() / mass[b].value();
    return out;
}

// =============================================================================
// Bounded-Lipschitz distance
// =============================================================================

namespace detail {

/// Concave piecewise-linear function on [-1, 1] given by its breakpoints.
struct ConcavePiecewise {
    std::vector<double> pos;
    std::vector<double> val;

    double at(double p) const {
        if (p <= pos.front()) return val.front();
        if (p >= pos.back()) return val.back();
        auto it = std::upper_bound(pos.begin(), pos.end(), p);
        const auto k = static_cast<std::size_t>(it - pos.begin());
        const double t = (p - pos[k - 1]) / (pos[k] - pos[k - 1]);
        return val[k - 1] + t * (val[k] - val[k - 1]);
    }
};

}  // namespace detail

/// sup { sum_k c_k phi_k : |phi_k| <= 1, |phi_{k+1} - phi_k| <= x_{k+1} - x_k }
/// for strictly increasing support x. This equals the bounded-Lipschitz norm of
/// the signed measure sum_k c_k delta_{x_k}: on the line, Lipschitz bounds
/// between adjacent support points imply all pairwise bounds, and any feasible
/// vector extends to a test function on R by linear interpolation.
///
/// Dynamic programming over phi: F_k(p) is the best partial sum with phi_k = p.
/// Each F_k is concave piecewise linear; the window maximization splits it at
/// its argmax and shifts the two flanks outward by the gap.
inline double bl_norm_sorted(std::span<const double> x, std::span<const double> c) {
    require(x.size() == c.size(), "support and weights must have equal length");
    if (x.empty()) return 0.0;
    detail::ConcavePiecewise f{{-1.0, 1.0}, {-c[0], c[0]}};
    std::vector<double> np, nv;
    for (std::size_t k = 1; k < x.size(); ++k) {
        const double gap = std::min(x[k] - x[k - 1], 2.0);
        require(gap > 0.0, "support must be strictly increasing");
        // argmax range [a, b] of the current concave function
        std::size_t a = 0;
        for (std::size_t i = 1; i < f.val.size(); ++i)
            if (f.val[i] > f.val[a]) a = i;
        std::size_t b = a;
        while (b + 1 < f.val.size() && f.val[b + 1] == f.val[a]) ++b;

        np.clear();
        nv.clear();
        for (std::size_t i = 0; i <= a; ++i) {
            np.push_back(f.pos[i] - gap);
            nv.push_back(f.val[i]);
        }
        for (std::size_t i = b; i < f.pos.size(); ++i) {
            np.push_back(f.pos[i] + gap);
            nv.push_back(f.val[i]);
        }
        detail::ConcavePiecewise shifted{np, nv};
        // clip the shifted function to [-1, 1]
        detail::ConcavePiecewise g;
        g.pos.push_back(-1.0);
        g.val.push_back(shifted.at(-1.0));
        for (std::size_t i = 0; i < np.size(); ++i) {
            if (np[i] > -1.0 && np[i] < 1.0 && np[i] > g.pos.back()) {
                g.pos.push_back(np[i]);
                g.val.push_back(nv[i]);
            }
        }
        g.pos.push_back(1.0);
        g.val.push_back(shifted.at(1.0));
        for (std::size_t i = 0; i < g.pos.size(); ++i) g.val[i] += c[k] * g.pos[i];
        f = std::move(g);
    }
    return *std::max_element(f.val.begin(), f.val.end());
}

/// Exact ||m1 - m2||_BL for measures on the real line.
inline double bl_distance(const ParticleMeasure& m1, const ParticleMeasure& m2) {
    const auto& a = m1.atoms();
    const auto& b = m2.atoms();
    std::vector<double> xs, cs;
    xs.reserve(a.size() + b.size());
    cs.reserve(a.size() + b.size());
    std::size_t i = 0, j = 0;
    while (i < a.size() || j < b.size()) {
        if (j == b.size() || (i < a.size() && a[i].x < b[j].x)) {
            xs.push_back(a[i].x);
            cs.push_back(a[i].w);
            ++i;
        } else if (i == a.size() || b[j].x < a[i].x) {
            xs.push_back(b[j].x);
            cs.push_back(-b[j].w);
            ++j;
        } else {
            xs.push_back(a[i].x);
            cs.push_back(a[i].w - b[j].w);
            ++i;
            ++j;
        }
    }
    return bl_norm_sorted(xs, cs);
}

}  // namespace gmfg

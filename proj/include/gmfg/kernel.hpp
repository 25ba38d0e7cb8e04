#pragma once

// Nonnegative kernels W on [0,1]^2: step kernels backed by a matrix and a few
// analytic rules. Norms, degree functions, the integral operator on label
// functions and on label-state measures, and a PSD diagnostic.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "gmfg/common.hpp"
#include "gmfg/measure.hpp"

namespace gmfg {

// =============================================================================
// Label grid
// =============================================================================

/// Uniform partition of [0,1] into `cells` intervals with midpoint
/// representatives (l + 1/2) / cells and weights 1 / cells.
class LabelGrid {
public:
    explicit LabelGrid(int cells) : cells_(cells) { require(cells >= 1, "label grid needs >= 1 cell"); }

    int cells() const noexcept { return cells_; }
    double weight() const noexcept { return 1.0 / cells_; }
    double midpoint(int l) const noexcept { return (l + 0.5) / cells_; }
    double lower(int l) const noexcept { return static_cast<double>(l) / cells_; }
    double upper(int l) const noexcept { return static_cast<double>(l + 1) / cells_; }

    /// Cell containing u; intervals are half-open except the last.
    int cell_of(double u) const noexcept {
        const int l = static_cast<int>(std::floor(u * cells_));
        return std::clamp(l, 0, cells_ - 1);
    }

    std::vector<double> midpoints() const {
        std::vector<double> out(static_cast<std::size_t>(cells_));
        for (int l = 0; l < cells_; ++l) out[static_cast<std::size_t>(l)] = midpoint(l);
        return out;
    }

private:
    int cells_;
};

// =============================================================================
// Kernel
// =============================================================================

/// W(u,v) = values(i,j) on I_i x I_j with I_i = [i/n, (i+1)/n).
struct StepRule {
    Eigen::MatrixXd values;
};

struct ConstantRule {
    double p = 1.0;
};

/// Two equal blocks split at 1/2.
struct TwoBlockRule {
    double w11 = 0.0, w12 = 0.0, w21 = 0.0, w22 = 0.0;
};

/// W(u,v) = min(u,v).
struct MinRule {};

/// Nodal values on a uniform (G x G) grid over [0,1]^2 with bilinear
/// interpolation; continuous by construction.
struct TabulatedRule {
    Eigen::MatrixXd nodes;
};

class Kernel {
public:
    using Rule = std::variant<StepRule, ConstantRule, TwoBlockRule, MinRule, TabulatedRule>;

    Kernel() : rule_(ConstantRule{0.0}) {}

    explicit Kernel(Rule rule) : rule_(std::move(rule)) { validate(); }

    static Kernel constant(double p) { return Kernel(ConstantRule{p}); }
    static Kernel two_block(double w11, double w12, double w21, double w22) {
        return Kernel(TwoBlockRule{w11, w12, w21, w22});
    }
    static Kernel min_kernel() { return Kernel(MinRule{}); }
    static Kernel tabulated(Eigen::MatrixXd nodes) { return Kernel(TabulatedRule{std::move(nodes)}); }

    const Rule& rule() const noexcept { return rule_; }

    double operator()(double u, double v) const {
        return std::visit([u, v](const auto& r) { return eval(r, u, v); }, rule_);
    }

    /// Matrix of the equivalent step kernel, when W is piecewise constant on a
    /// uniform block grid.
    std::optional<Eigen::MatrixXd> step_matrix() const {
        if (const auto* s = std::get_if<StepRule>(&rule_)) return s->values;
        if (const auto* c = std::get_if<ConstantRule>(&rule_)) return Eigen::MatrixXd::Constant(1, 1, c->p);
        if (const auto* t = std::get_if<TwoBlockRule>(&rule_)) {
            Eigen::MatrixXd m(2, 2);
            m << t->w11, t->w12, t->w21, t->w22;
            return m;
        }
        return std::nullopt;
    }

    /// Upper bound on W over [0,1]^2.
    double sup() const {
        if (auto m = step_matrix()) return m->maxCoeff();
        if (std::holds_alternative<MinRule>(rule_)) return 1.0;
        return std::get<TabulatedRule>(rule_).nodes.maxCoeff();
    }

    std::string name() const {
        struct Namer {
            std::string operator()(const StepRule& r) const { return "step(" + std::to_string(r.values.rows()) + ")"; }
            std::string operator()(const ConstantRule&) const { return "constant"; }
            std::string operator()(const TwoBlockRule&) const { return "two_block"; }
            std::string operator()(const MinRule&) const { return "min"; }
            std::string operator()(const TabulatedRule& r) const {
                return "tabulated(" + std::to_string(r.nodes.rows()) + ")";
            }
        };
        return std::visit(Namer{}, rule_);
    }

private:
    static int block(double u, Eigen::Index n) {
        const auto i = static_cast<Eigen::Index>(std::floor(u * static_cast<double>(n)));
        return static_cast<int>(std::clamp<Eigen::Index>(i, 0, n - 1));
    }
    static double eval(const StepRule& r, double u, double v) {
        return r.values(block(u, r.values.rows()), block(v, r.values.cols()));
    }
    static double eval(const ConstantRule& r, double, double) { return r.p; }
    static double eval(const TwoBlockRule& r, double u, double v) {
        const bool lo_u = u < 0.5;
        const bool lo_v = v < 0.5;
        if (lo_u) return lo_v ? r.w11 : r.w12;
        return lo_v ? r.w21 : r.w22;
    }
    static double eval(const MinRule&, double u, double v) { return std::min(u, v); }
    static double eval(const TabulatedRule& r, double u, double v) {
        const Eigen::Index g = r.nodes.rows();
        if (g == 1) return r.nodes(0, 0);
        const double su = std::clamp(u, 0.0, 1.0) * static_cast<double>(g - 1);
        const double sv = std::clamp(v, 0.0, 1.0) * static_cast<double>(g - 1);
        const Eigen::Index i = std::min<Eigen::Index>(static_cast<Eigen::Index>(su), g - 2);
        const Eigen::Index j = std::min<Eigen::Index>(static_cast<Eigen::Index>(sv), g - 2);
        const double fu = su - static_cast<double>(i);
        const double fv = sv - static_cast<double>(j);
        return (1 - fu) * (1 - fv) * r.nodes(i, j) + (1 - fu) * fv * r.nodes(i, j + 1) +
               fu * (1 - fv) * r.nodes(i + 1, j) + fu * fv * r.nodes(i + 1, j + 1);
    }

    void validate() const {
        auto check_matrix = [](const Eigen::MatrixXd& m, const char* what) {
            require(m.rows() >= 1 && m.rows() == m.cols(), std::string(what) + " must be square and nonempty");
            require(m.allFinite(), std::string(what) + " entries must be finite");
            require(m.minCoeff() >= 0.0, std::string(what) + " entries must be nonnegative");
        };
        if (const auto* s = std::get_if<StepRule>(&rule_)) check_matrix(s->values, "step kernel");
        if (const auto* t = std::get_if<TabulatedRule>(&rule_)) check_matrix(t->nodes, "tabulated kernel");
        if (const auto* c = std::get_if<ConstantRule>(&rule_))
            require(std::isfinite(c->p) && c->p >= 0.0, "constant kernel must be nonnegative");
        if (const auto* b = std::get_if<TwoBlockRule>(&rule_))
            require(b->w11 >= 0 && b->w12 >= 0 && b->w21 >= 0 && b->w22 >= 0,
                    "two-block kernel entries must be nonnegative");
    }

    Rule rule_;
};

/// Step kernel W_xi of an n x n nonnegative matrix.
inline Kernel step_kernel(Eigen::MatrixXd matrix) { return Kernel(StepRule{std::move(matrix)}); }

/// Midpoint rule resolution for kernels without an exact block form.
struct Quadrature {
    int nodes = 1024;
};

// =============================================================================
// Degree and norms
// =============================================================================

/// Out-degree integral_0^1 W(u,v) dv.
inline double degree(const Kernel& w, double u, Quadrature q = {}) {
    if (auto m = w.step_matrix()) {
        const Eigen::Index n = m->rows();
        const auto i = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::floor(u * n)), 0, n - 1);
        return m->row(i).sum() / static_cast<double>(n);
    }
    CompensatedSum s;
    for (int k = 0; k < q.nodes; ++k) s.add(w(u, (k + 0.5) / q.nodes));
    return s.value() / q.nodes;
}

/// max over the label grid of |degree(u) - 1| <= tol.
inline bool is_constant_degree(const Kernel& w, double tol, LabelGrid grid = LabelGrid(256), Quadrature q = {}) {
    require(tol > 0.0, "tolerance must be positive");
    if (auto m = w.step_matrix()) {
        const Eigen::VectorXd deg = m->rowwise().sum() / static_cast<double>(m->rows());
        return (deg.array() - 1.0).abs().maxCoeff() <= tol;
    }
    for (int l = 0; l < grid.cells(); ++l)
        if (std::abs(degree(w, grid.midpoint(l), q) - 1.0) > tol) return false;
    return true;
}

inline double l1_norm(const Kernel& w, Quadrature q = {}) {
    if (auto m = w.step_matrix()) return m->cwiseAbs().sum() / static_cast<double>(m->size());
    CompensatedSum s;
    for (int i = 0; i < q.nodes; ++i)
        for (int j = 0; j < q.nodes; ++j) s.add(std::abs(w((i + 0.5) / q.nodes, (j + 0.5) / q.nodes)));
    return s.value() / (static_cast<double>(q.nodes) * q.nodes);
}

inline double l2_norm(const Kernel& w, Quadrature q = {}) {
    if (auto m = w.step_matrix()) return std::sqrt(m->squaredNorm() / static_cast<double>(m->size()));
    CompensatedSum s;
    for (int i = 0; i < q.nodes; ++i)
        for (int j = 0; j < q.nodes; ++j) {
            const double v = w((i + 0.5) / q.nodes, (j + 0.5) / q.nodes);
            s.add(v * v);
        }
    return std::sqrt(s.value() / (static_cast<double>(q.nodes) * q.nodes));
}

// =============================================================================
// Operator on label functions
// =============================================================================

/// K(l, k) = integral over label cell k of W(u_l, v) dv. Exact for step
/// kernels (block overlaps), midpoint collocation W(u_l, u_k) / L otherwise.
inline Eigen::MatrixXd grid_matrix(const Kernel& w, const LabelGrid& grid) {
    const int L = grid.cells();
    Eigen::MatrixXd out(L, L);
    if (auto m = w.step_matrix()) {
        const Eigen::Index n = m->rows();
        for (int l = 0; l < L; ++l) {
            const auto i = std::clamp<Eigen::Index>(
                static_cast<Eigen::Index>(std::floor(grid.midpoint(l) * static_cast<double>(n))), 0, n - 1);
            for (int k = 0; k < L; ++k) {
                const double lo = grid.lower(k), hi = grid.upper(k);
                const auto j0 = std::clamp<Eigen::Index>(
                    static_cast<Eigen::Index>(std::floor(lo * static_cast<double>(n))), 0, n - 1);
                const auto j1 = std::clamp<Eigen::Index>(
                    static_cast<Eigen::Index>(std::ceil(hi * static_cast<double>(n))) - 1, 0, n - 1);
                double acc = 0.0;
                for (Eigen::Index j = j0; j <= j1; ++j) {
                    const double b_lo = static_cast<double>(j) / static_cast<double>(n);
                    const double b_hi = static_cast<double>(j + 1) / static_cast<double>(n);
                    const double overlap = std::min(hi, b_hi) - std::max(lo, b_lo);
                    if (overlap > 0.0) acc += (*m)(i, j) * overlap;
                }
                out(l, k) = acc;
            }
        }
        return out;
    }
    for (int l = 0; l < L; ++l)
        for (int k = 0; k < L; ++k) out(l, k) = w(grid.midpoint(l), grid.midpoint(k)) * grid.weight();
    return out;
}

/// (W phi)(u_l) for phi tabulated on a label grid of phi.size() cells.
inline std::vector<double> apply_to_function(const Kernel& w, std::span<const double> phi) {
    for (double v : phi) require(std::isfinite(v), "function values must be finite");
    const LabelGrid grid(static_cast<int>(phi.size()));
    const Eigen::MatrixXd k = grid_matrix(w, grid);
    const Eigen::Map<const Eigen::VectorXd> p(phi.data(), static_cast<Eigen::Index>(phi.size()));
    const Eigen::VectorXd r = k * p;
    return {r.data(), r.data() + r.size()};
}

// =============================================================================
// Operator on label-state measures
// =============================================================================

/// (W m)(u) = sum_j w_j W(u, v_j) delta_{x_j}.
inline ParticleMeasure apply_to_measure(const Kernel& w, const LabelStateMeasure& m, double u) {
    std::vector<Atom> atoms;
    atoms.reserve(m.atoms().size());
    for (const auto& a : m.atoms()) {
        const double mass = a.w * w(u, a.u);
        if (mass > 0.0) atoms.push_back({a.x, mass});
    }
    return ParticleMeasure(std::move(atoms));
}

// =============================================================================
// Positive semidefiniteness diagnostic
// =============================================================================

struct PsdReport {
    bool psd = false;
    double min_eigenvalue = 0.0;
};

/// Smallest eigenvalue of the symmetric part of K(l,k) = W(u_l,u_k) / L.
inline PsdReport psd_check(const Kernel& w, const LabelGrid& grid, double tol = 1e-9) {
    const int L = grid.cells();
    Eigen::MatrixXd k(L, L);
    for (int l = 0; l < L; ++l)
        for (int j = 0; j < L; ++j) k(l, j) = w(grid.midpoint(l), grid.midpoint(j)) * grid.weight();
    const Eigen::MatrixXd sym = 0.5 * (k + k.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym, Eigen::EigenvaluesOnly);
    PsdReport out;
    out.min_eigenvalue = solver.eigenvalues().minCoeff();
    out.psd = out.min_eigenvalue > -tol;
    return out;
}

}  // namespace gmfg

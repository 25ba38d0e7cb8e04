#pragma once

// Interaction-matrix generators (Erdos-Renyi, graphon sampling, random-walk
// Laplacian), label assignments, and convergence diagnostics against a
// target kernel.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "gmfg/common.hpp"
#include "gmfg/cut_norm.hpp"
#include "gmfg/interaction.hpp"
#include "gmfg/kernel.hpp"

namespace gmfg {

enum class LabelScheme { random_per_cell, midpoint, sampled };

inline const char* to_string(LabelScheme s) {
    switch (s) {
        case LabelScheme::random_per_cell: return "random_per_cell";
        case LabelScheme::midpoint: return "midpoint";
        case LabelScheme::sampled: return "sampled";
    }
    return "?";
}

/// Labels u_1..u_n for the players. Per-cell schemes place u_i in
/// [(i-1)/n, i/n]; the sampled scheme holds sorted iid uniforms.
struct LabelAssignment {
    std::vector<double> labels;
    LabelScheme scheme = LabelScheme::midpoint;

    int size() const noexcept { return static_cast<int>(labels.size()); }
};

inline LabelAssignment assign_labels(int n, LabelScheme scheme, std::uint64_t seed = 0) {
    require(n >= 1, "need at least one player");
    LabelAssignment out;
    out.scheme = scheme;
    out.labels.resize(static_cast<std::size_t>(n));
    Rng rng(derive_seed(seed, "labels"));
    for (int i = 0; i < n; ++i) {
        auto& u = out.labels[static_cast<std::size_t>(i)];
        switch (scheme) {
            case LabelScheme::midpoint: u = (i + 0.5) / n; break;
            case LabelScheme::random_per_cell: u = (i + rng.uniform()) / n; break;
            case LabelScheme::sampled: u = rng.uniform(); break;
        }
    }
    if (scheme == LabelScheme::sampled) std::sort(out.labels.begin(), out.labels.end());
    return out;
}

// =============================================================================
// Generators
// =============================================================================

/// Adjacency matrix of G(n, p); divided by p when `normalize`.
inline InteractionMatrix erdos_renyi(int n, double p, bool normalize, std::uint64_t seed) {
    require(n >= 1, "need at least one vertex");
    require(p > 0.0 && p <= 1.0, "edge probability must lie in (0, 1]");
    Rng rng(derive_seed(seed, "erdos_renyi"));
    const double weight = normalize ? 1.0 / p : 1.0;
    Eigen::MatrixXd xi = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (rng.bernoulli(p)) xi(i, j) = xi(j, i) = weight;
    return InteractionMatrix(std::move(xi), "er(p=" + std::to_string(p) + (normalize ? ",normalized)" : ")"));
}

struct SampledGraph {
    InteractionMatrix xi;
    LabelAssignment labels;
};

/// Sorted iid uniform labels U_(1) < ... < U_(n); weighted: xi_ij = W(U_i, U_j),
/// simple: Bernoulli(W(U_i, U_j)) edges, symmetric.
inline SampledGraph sample_from_graphon(const Kernel& w, int n, bool weighted, std::uint64_t seed) {
    require(n >= 1, "need at least one vertex");
    if (!weighted) require(w.sup() <= 1.0, "simple sampling needs W <= 1");
    SampledGraph out;
    out.labels.scheme = LabelScheme::sampled;
    out.labels.labels.resize(static_cast<std::size_t>(n));
    Rng rng(derive_seed(seed, "graphon_sample"));
    for (auto& u : out.labels.labels) u = rng.uniform();
    std::sort(out.labels.labels.begin(), out.labels.labels.end());
    const auto& u = out.labels.labels;
    Eigen::MatrixXd xi = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            if (weighted) {
                xi(i, j) = w(u[static_cast<std::size_t>(i)], u[static_cast<std::size_t>(j)]);
            } else if (j > i) {
                const double prob = w(u[static_cast<std::size_t>(i)], u[static_cast<std::size_t>(j)]);
                if (rng.bernoulli(prob)) xi(i, j) = xi(j, i) = 1.0;
            }
        }
    }
    out.xi = InteractionMatrix(std::move(xi), std::string(weighted ? "sampled_weighted(" : "sampled_simple(") +
                                                  w.name() + ")");
    return out;
}

/// xi_ij = (n / d_i) 1{i ~ j}.
inline InteractionMatrix laplacian_matrix(const Eigen::MatrixXd& adjacency) {
    require(adjacency.rows() == adjacency.cols(), "adjacency must be square");
    const Eigen::Index n = adjacency.rows();
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            const double a = adjacency(i, j);
            require(a == 0.0 || a == 1.0, "adjacency entries must be 0 or 1");
            require(a == adjacency(j, i), "adjacency must be symmetric");
            require(i != j || a == 0.0, "adjacency must have no self-loops");
        }
    Eigen::MatrixXd xi = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double d = adjacency.row(i).sum();
        if (d < 1.0) throw InvalidArgument("isolated vertex " + std::to_string(i) + " has no neighbors");
        xi.row(i) = adjacency.row(i) * (static_cast<double>(n) / d);
    }
    return InteractionMatrix(std::move(xi), "laplacian");
}

/// (1/n^3) sum_ij xi_ij^2; vanishing along a sequence is the mild density
/// condition used for approximate equilibria.
inline double condition_A(const InteractionMatrix& xi) {
    const double n = xi.size();
    return xi.values().squaredNorm() / (n * n * n);
}

// =============================================================================
// Convergence diagnostics
// =============================================================================

/// Cell averages of W on an m x m grid: exact block averages for step
/// kernels when the grids align, midpoint values otherwise.
inline Eigen::MatrixXd discretize_kernel(const Kernel& w, int m) {
    const LabelGrid grid(m);
    return grid_matrix(w, grid) * static_cast<double>(m);
}

/// Refines an n x n block matrix to an m x m block matrix (n divides m).
inline Eigen::MatrixXd refine_blocks(const Eigen::MatrixXd& a, int m) {
    const auto n = static_cast<int>(a.rows());
    require(m % n == 0, "refinement size must be a multiple of the block count");
    const int f = m / n;
    Eigen::MatrixXd out(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) out(i, j) = a(i / f, j / f);
    return out;
}

struct CutDistance {
    NormResult norm;     // lower bound with certificate on the refined grid
    int grid_cells = 0;  // lcm(n, resolution)
};

/// Heuristic cut norm of W_xi - W, with W discretized on `resolution` label
/// cells and both sides refined to the common lcm grid.
inline CutDistance cut_distance_to(const InteractionMatrix& xi, const Kernel& w, int resolution,
                                   HeuristicOptions opt = {}) {
    require(resolution >= 1, "resolution must be positive");
    const int n = xi.size();
    const int m = std::lcm(n, resolution);
    const Eigen::MatrixXd diff = refine_blocks(xi.values(), m) - refine_blocks(discretize_kernel(w, resolution), m);
    CutDistance out;
    out.grid_cells = m;
    out.norm = cut_norm_step(diff, NormMode::heuristic, opt);
    return out;
}

/// ||W_xi - W||_L1 on the common refinement grid.
inline double l1_distance_to(const InteractionMatrix& xi, const Kernel& w, int resolution) {
    const int n = xi.size();
    const int m = std::lcm(n, resolution);
    const Eigen::MatrixXd diff = refine_blocks(xi.values(), m) - refine_blocks(discretize_kernel(w, resolution), m);
    return diff.cwiseAbs().sum() / (static_cast<double>(m) * m);
}

inline constexpr int kOperatorDictionarySize = 16;

/// Fixed test-function dictionary on the label line: indicators of the 14
/// dyadic intervals of lengths 1/2, 1/4, 1/8, then u and u^2.
inline double dictionary_function(int k, double u) {
    if (k < 14) {
        int level = 1, offset = k;
        while (offset >= (1 << level)) {
            offset -= 1 << level;
            ++level;
        }
        const double width = 1.0 / (1 << level);
        const double lo = offset * width;
        const double hi = lo + width;
        return (u >= lo && (u < hi || (hi == 1.0 && u <= 1.0))) ? 1.0 : 0.0;
    }
    return k == 14 ? u : u * u;
}

/// Strong-operator-topology diagnostic: ||(W_xi - W) phi_k||_L1 for each
/// dictionary function phi_k, on the common refinement grid.
inline std::vector<double> operator_gaps(const InteractionMatrix& xi, const Kernel& w, int resolution) {
    const int n = xi.size();
    const int m = std::lcm(n, resolution);
    const Eigen::MatrixXd diff = refine_blocks(xi.values(), m) - refine_blocks(discretize_kernel(w, resolution), m);
    std::vector<double> out(kOperatorDictionarySize);
    for (int k = 0; k < kOperatorDictionarySize; ++k) {
        Eigen::VectorXd phi(m);
        for (int j = 0; j < m; ++j) phi(j) = dictionary_function(k, (j + 0.5) / m);
        const Eigen::VectorXd r = diff * phi / static_cast<double>(m);
        out[static_cast<std::size_t>(k)] = r.cwiseAbs().sum() / m;
    }
    return out;
}

}  // namespace gmfg

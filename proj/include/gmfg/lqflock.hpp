#pragma once

// Linear-quadratic flocking game: closed-form equilibrium target, Katz
// centrality, and Monte-Carlo self-consistency of the equilibrium dynamics.
//
// Player objective: -E[ int_0^T a_t^2 / 2 dt + (c/2)(X_T - mean(W mu_T(U)))^2 ].
// The equilibrium control is phi(t)(M(u) - x) with phi(t) = c / (c(T-t) + 1),
// and the target solves M = (1/(cT+1)) K (I - aK)^{-1} psi, a = cT / (cT+1).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "gmfg/common.hpp"
#include "gmfg/initial_law.hpp"
#include "gmfg/kernel.hpp"

namespace gmfg {

struct LQParams {
    double c = 1.0;
    double T = 1.0;
    double sigma = 0.0;
    Kernel kernel;
    InitialLaw initial;

    void validate() const {
        require(c > 0.0 && std::isfinite(c), "c must be positive");
        require(T > 0.0 && std::isfinite(T), "T must be positive");
        require(sigma >= 0.0 && std::isfinite(sigma), "sigma must be nonnegative");
    }
};

struct LQSolution {
    LabelGrid grid{1};
    double c = 1.0;
    double T = 1.0;
    double sigma = 0.0;
    std::vector<double> target;  // M(u_l)
    std::vector<double> psi;     // E[X_0 | U in cell l]
    double katz_parameter = 0.0;
    double kernel_l2 = 0.0;  // L2 norm of the grid discretization
    double bound = 0.0;      // 1 + 1/(cT)

    double margin() const noexcept { return bound - kernel_l2; }

    /// Feedback gain c / (c(T - t) + 1).
    double phi(double t) const noexcept { return c / (c * (T - t) + 1.0); }

    /// Constant term of the value function, (sigma^2 / 2) log(c(T - t) + 1).
    double value_offset(double t) const noexcept { return 0.5 * sigma * sigma * std::log(c * (T - t) + 1.0); }

    /// M at the label cell containing u.
    double target_at(double u) const { return target[static_cast<std::size_t>(grid.cell_of(u))]; }
};

/// M = (1/(cT+1)) K y with (I - aK) y = psi.
inline std::vector<double> lq_target(const Eigen::MatrixXd& k, const std::vector<double>& psi, double c, double T) {
    const Eigen::Index L = k.rows();
    require(static_cast<Eigen::Index>(psi.size()) == L, "psi must have one value per label cell");
    const double a = c * T / (c * T + 1.0);
    const Eigen::Map<const Eigen::VectorXd> p(psi.data(), L);
    const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(L, L) - a * k;
    const Eigen::VectorXd y = system.partialPivLu().solve(p);
    const Eigen::VectorXd m = k * y / (c * T + 1.0);
    return {m.data(), m.data() + m.size()};
}

/// Solves the equilibrium target on an L-cell label grid. Throws
/// SolvabilityError when the grid L2 norm of W reaches 1 + 1/(cT) and the
/// initial conditional mean is not identically zero.
inline LQSolution solve_lq(const LQParams& params, int L) {
    params.validate();
    LQSolution sol;
    sol.grid = LabelGrid(L);
    sol.c = params.c;
    sol.T = params.T;
    sol.sigma = params.sigma;
    sol.katz_parameter = params.c * params.T / (params.c * params.T + 1.0);
    sol.bound = 1.0 + 1.0 / (params.c * params.T);

    const Eigen::MatrixXd k = grid_matrix(params.kernel, sol.grid);
    sol.kernel_l2 = std::sqrt(k.squaredNorm());
    sol.psi.resize(static_cast<std::size_t>(L));
    for (int l = 0; l < L; ++l)
        sol.psi[static_cast<std::size_t>(l)] = params.initial.cell_mean(sol.grid.lower(l), sol.grid.upper(l));

    // relative slack absorbs rounding in the quadrature at the boundary itself
    if (sol.kernel_l2 >= sol.bound * (1.0 - 1e-12)) {
        const bool psi_zero = std::all_of(sol.psi.begin(), sol.psi.end(), [](double v) { return v == 0.0; });
        if (!psi_zero) throw SolvabilityError(sol.kernel_l2, sol.bound);
        sol.target.assign(static_cast<std::size_t>(L), 0.0);
        return sol;
    }
    sol.target = lq_target(k, sol.psi, params.c, params.T);
    for (double m : sol.target)
        if (!std::isfinite(m)) throw SolvabilityError(sol.kernel_l2, sol.bound);
    return sol;
}

/// phi(t) (M(u) - x).
inline double equilibrium_control(const LQSolution& sol, double t, double u, double x) {
    return sol.phi(t) * (sol.target_at(u) - x);
}

/// [(I - alpha K)^{-1} - I] 1 on the label grid.
inline std::vector<double> katz_centrality(const Kernel& w, double alpha, int L) {
    const LabelGrid grid(L);
    const Eigen::MatrixXd k = alpha * grid_matrix(w, grid);
    const double radius = k.eigenvalues().cwiseAbs().maxCoeff();
    if (!(radius < 1.0)) throw SpectralError("katz centrality diverges", radius);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(L);
    const Eigen::VectorXd r = (Eigen::MatrixXd::Identity(L, L) - k).partialPivLu().solve(ones) - ones;
    return {r.data(), r.data() + r.size()};
}

// =============================================================================
// Monte-Carlo self-consistency
// =============================================================================

struct McKeanVlasovReport {
    std::vector<double> labels;
    std::vector<double> estimate;   // E[W(u_l, U) X_T]
    std::vector<double> std_error;  // of the estimate
    std::vector<double> target;     // M(u_l)
    std::vector<double> residual;   // |estimate - target|
    long paths = 0;
    double dt = 0.0;
    int steps = 0;
};

/// Simulates dX = phi(t)(M(U) - X) dt + sigma dB with (U, X_0) ~ lambda by
/// Euler-Maruyama and compares E[W(u_l, U) X_T] with M(u_l) at every label cell.
inline McKeanVlasovReport verify_mckean_vlasov(const LQSolution& sol, const LQParams& params, long paths, double dt,
                                               std::uint64_t seed, unsigned threads = 1) {
    require(paths >= 2, "need at least two paths");
    require(dt > 0.0, "dt must be positive");
    const int steps = std::max(1, static_cast<int>(std::lround(sol.T / dt)));
    const double h = sol.T / steps;
    const double sq = std::sqrt(h) * sol.sigma;
    const int L = sol.grid.cells();
    std::vector<double> gain(static_cast<std::size_t>(steps));
    for (int k = 0; k < steps; ++k) gain[static_cast<std::size_t>(k)] = sol.phi(k * h) * h;

    // Fixed partition of paths into blocks; partial sums are reduced in
    // block order so the result does not depend on the thread count.
    constexpr long kBlocks = 64;
    const long per_block = (paths + kBlocks - 1) / kBlocks;
    std::vector<std::vector<CompensatedSum>> sums(kBlocks, std::vector<CompensatedSum>(static_cast<std::size_t>(L)));
    std::vector<std::vector<CompensatedSum>> squares = sums;
    const auto midpoints = sol.grid.midpoints();

    parallel_for(static_cast<std::size_t>(kBlocks), threads, [&](std::size_t b) {
        const long lo = static_cast<long>(b) * per_block;
        const long hi = std::min(paths, lo + per_block);
        for (long p = lo; p < hi; ++p) {
            Rng rng(derive_seed(seed, static_cast<std::uint64_t>(p)));
            const double u = rng.uniform();
            double x = params.initial.sample(u, rng);
            const double m = sol.target_at(u);
            for (int k = 0; k < steps; ++k) {
                x += gain[static_cast<std::size_t>(k)] * (m - x);
                if (sq > 0.0) x += sq * rng.normal();
            }
            for (int l = 0; l < L; ++l) {
                const double v = params.kernel(midpoints[static_cast<std::size_t>(l)], u) * x;
                sums[b][static_cast<std::size_t>(l)].add(v);
                squares[b][static_cast<std::size_t>(l)].add(v * v);
            }
        }
    });

    McKeanVlasovReport out;
    out.paths = paths;
    out.dt = h;
    out.steps = steps;
    out.labels = midpoints;
    const auto np = static_cast<double>(paths);
    for (int l = 0; l < L; ++l) {
        CompensatedSum s, s2;
        for (long b = 0; b < kBlocks; ++b) {
            s.add(sums[static_cast<std::size_t>(b)][static_cast<std::size_t>(l)].value());
            s2.add(squares[static_cast<std::size_t>(b)][static_cast<std::size_t>(l)].value());
        }
        const double mean = s.value() / np;
        const double var = std::max(0.0, (s2.value() - np * mean * mean) / (np - 1.0));
        out.estimate.push_back(mean);
        out.std_error.push_back(std::sqrt(var / np));
        out.target.push_back(sol.target[static_cast<std::size_t>(l)]);
        out.residual.push_back(std::abs(mean - sol.target[static_cast<std::size_t>(l)]));
    }
    return out;
}

}  // namespace gmfg

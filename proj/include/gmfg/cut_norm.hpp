#pragma once

// Cut norm and infinity-to-one operator norm of step kernels.
//
// For a step kernel the supremum over measurable set pairs is attained on
// unions of blocks, so both norms reduce to combinatorial maximizations over
// indicator (or sign) vectors of length n. Exact mode enumerates one side with
// a Gray code and solves the other side in closed form; heuristic mode runs
// alternating maximization from random starts and reports a lower bound.

#include <Eigen/Dense>

#include <bit>
#include <cstdint>
#include <vector>

#include "gmfg/common.hpp"

namespace gmfg {

enum class NormMode { exact, heuristic };

inline const char* to_string(NormMode m) { return m == NormMode::exact ? "exact" : "heuristic"; }

inline constexpr int kExactNormMaxSize = 20;

struct NormResult {
    double value = 0.0;
    NormMode mode = NormMode::exact;
    /// Certificate, 0-based. Cut norm: the row set S1 and column set S2.
    /// Operator norm: indices where the row / column sign vector is +1.
    std::vector<int> rows;
    std::vector<int> cols;
    /// True when `value` is only certified from below.
    bool lower_bound = false;
};

struct HeuristicOptions {
    int restarts = 64;
    std::uint64_t seed = 0;
    int max_sweeps = 10000;
};

namespace detail {

inline std::vector<int> indices_where(const std::vector<char>& flags) {
    std::vector<int> out;
    for (std::size_t i = 0; i < flags.size(); ++i)
        if (flags[i]) out.push_back(static_cast<int>(i));
    return out;
}

/// Best row set for fixed column indicator: rows with positive sums.
inline double best_rows_cut(const Eigen::VectorXd& r, std::vector<char>& rows) {
    double v = 0.0;
    for (Eigen::Index i = 0; i < r.size(); ++i) {
        rows[static_cast<std::size_t>(i)] = r(i) > 0.0;
        if (r(i) > 0.0) v += r(i);
    }
    return v;
}

inline double best_rows_sign(const Eigen::VectorXd& r, std::vector<char>& rows) {
    double v = 0.0;
    for (Eigen::Index i = 0; i < r.size(); ++i) {
        rows[static_cast<std::size_t>(i)] = r(i) >= 0.0;
        v += std::abs(r(i));
    }
    return v;
}

/// Exhaustive search over column indicators for max_{S1,S2} sum_{S1 x S2} a.
inline NormResult exact_cut_branch(const Eigen::MatrixXd& a) {
    const int n = static_cast<int>(a.cols());
    Eigen::VectorXd r = Eigen::VectorXd::Zero(a.rows());
    std::vector<char> cols(static_cast<std::size_t>(n), 0), rows(static_cast<std::size_t>(a.rows()), 0);
    NormResult best;
    best.value = best_rows_cut(r, rows);  // empty column set
    best.rows = indices_where(rows);
    const std::uint64_t total = std::uint64_t{1} << n;
    for (std::uint64_t g = 1; g < total; ++g) {
        const int flip = std::countr_zero(g);
        auto& c = cols[static_cast<std::size_t>(flip)];
        c = !c;
        if (c)
            r += a.col(flip);
        else
            r -= a.col(flip);
        const double v = best_rows_cut(r, rows);
        if (v > best.value) {
            best.value = v;
            best.rows = indices_where(rows);
            best.cols = indices_where(cols);
        }
    }
    return best;
}

inline NormResult heuristic_cut_branch(const Eigen::MatrixXd& a, const HeuristicOptions& opt,
                                       std::uint64_t stream) {
    const Eigen::Index n = a.cols();
    NormResult best;
    std::vector<char> rows(static_cast<std::size_t>(a.rows())), cols(static_cast<std::size_t>(n));
    for (int restart = 0; restart < opt.restarts; ++restart) {
        Rng rng(derive_seed(opt.seed, stream, static_cast<std::uint64_t>(restart)));
        Eigen::VectorXd t(n);
        for (Eigen::Index j = 0; j < n; ++j) {
            cols[static_cast<std::size_t>(j)] = rng.bernoulli(0.5);
            t(j) = cols[static_cast<std::size_t>(j)];
        }
        double value = -1.0;
        for (int sweep = 0; sweep < opt.max_sweeps; ++sweep) {
            const Eigen::VectorXd r = a * t;
            best_rows_cut(r, rows);
            Eigen::VectorXd s(a.rows());
            for (Eigen::Index i = 0; i < a.rows(); ++i) s(i) = rows[static_cast<std::size_t>(i)];
            const Eigen::VectorXd c = a.transpose() * s;
            const double v = best_rows_cut(c, cols);
            for (Eigen::Index j = 0; j < n; ++j) t(j) = cols[static_cast<std::size_t>(j)];
            if (v <= value) break;
            value = v;
        }
        if (value > best.value) {
            best.value = value;
            best.rows = indices_where(rows);
            best.cols = indices_where(cols);
        }
    }
    best.value = std::max(best.value, 0.0);
    return best;
}

}  // namespace detail

/// ||W_xi||_cut = max_{S1,S2} |sum_{i in S1, j in S2} xi_ij| / n^2.
/// Works for signed matrices (differences of kernels).
inline NormResult cut_norm_step(const Eigen::MatrixXd& xi, NormMode mode, HeuristicOptions opt = {}) {
    require(xi.rows() == xi.cols() && xi.rows() >= 1, "cut norm needs a square nonempty matrix");
    const double scale = 1.0 / static_cast<double>(xi.rows() * xi.rows());
    NormResult pos, neg;
    if (mode == NormMode::exact) {
        if (xi.rows() > kExactNormMaxSize)
            throw SizeError("exact cut norm supports n <= 20, got n = " + std::to_string(xi.rows()));
        pos = detail::exact_cut_branch(xi);
        neg = detail::exact_cut_branch(-xi);
    } else {
        require(opt.restarts >= 1, "heuristic search needs at least one restart");
        pos = detail::heuristic_cut_branch(xi, opt, 1);
        neg = detail::heuristic_cut_branch(-xi, opt, 2);
    }
    NormResult out = neg.value > pos.value ? neg : pos;
    out.value *= scale;
    out.mode = mode;
    out.lower_bound = mode == NormMode::heuristic;
    return out;
}

/// ||W_xi||_{inf->1} = max_{s,t in {-1,1}^n} s^T xi t / n^2.
inline NormResult opnorm_inf_to_1(const Eigen::MatrixXd& xi, NormMode mode, HeuristicOptions opt = {}) {
    require(xi.rows() == xi.cols() && xi.rows() >= 1, "operator norm needs a square nonempty matrix");
    const Eigen::Index n = xi.rows();
    const double scale = 1.0 / static_cast<double>(n * n);
    NormResult best;
    best.mode = mode;
    std::vector<char> rows(static_cast<std::size_t>(n)), cols(static_cast<std::size_t>(n), 1);
    if (mode == NormMode::exact) {
        if (n > kExactNormMaxSize)
            throw SizeError("exact operator norm supports n <= 20, got n = " + std::to_string(n));
        // t and -t give the same value, so t_0 = +1 is fixed.
        Eigen::VectorXd r = xi.rowwise().sum();
        best.value = detail::best_rows_sign(r, rows);
        best.rows = detail::indices_where(rows);
        best.cols = detail::indices_where(cols);
        const std::uint64_t total = std::uint64_t{1} << (n - 1);
        for (std::uint64_t g = 1; g < total; ++g) {
            const int flip = std::countr_zero(g) + 1;
            auto& c = cols[static_cast<std::size_t>(flip)];
            c = !c;
            if (c)
                r += 2.0 * xi.col(flip);
            else
                r -= 2.0 * xi.col(flip);
            const double v = detail::best_rows_sign(r, rows);
            if (v > best.value) {
                best.value = v;
                best.rows = detail::indices_where(rows);
                best.cols = detail::indices_where(cols);
            }
        }
    } else {
        require(opt.restarts >= 1, "heuristic search needs at least one restart");
        best.value = -1.0;
        for (int restart = 0; restart < opt.restarts; ++restart) {
            Rng rng(derive_seed(opt.seed, 3, static_cast<std::uint64_t>(restart)));
            Eigen::VectorXd t(n);
            for (Eigen::Index j = 0; j < n; ++j) t(j) = rng.bernoulli(0.5) ? 1.0 : -1.0;
            double value = -1.0;
            for (int sweep = 0; sweep < opt.max_sweeps; ++sweep) {
                const Eigen::VectorXd r = xi * t;
                detail::best_rows_sign(r, rows);
                Eigen::VectorXd s(n);
                for (Eigen::Index i = 0; i < n; ++i) s(i) = rows[static_cast<std::size_t>(i)] ? 1.0 : -1.0;
                const Eigen::VectorXd c = xi.transpose() * s;
                const double v = detail::best_rows_sign(c, cols);
                for (Eigen::Index j = 0; j < n; ++j) t(j) = cols[static_cast<std::size_t>(j)] ? 1.0 : -1.0;
                if (v <= value) break;
                value = v;
            }
            if (value > best.value) {
                best.value = value;
                best.rows = detail::indices_where(rows);
                best.cols = detail::indices_where(cols);
            }
        }
        best.lower_bound = true;
    }
    best.value *= scale;
    return best;
}

}  // namespace gmfg

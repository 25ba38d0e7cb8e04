#pragma once

// Initial label-state law lambda(du, dx) = du lambda_u(dx), with uniform label
// marginal. Supports independent laws, deterministic maps x0 = h(u), and
// per-bin particle lists.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "gmfg/common.hpp"
#include "gmfg/measure.hpp"

namespace gmfg {

/// x0 = h(u): h affine (offset + slope * u) or tabulated on a uniform label
/// grid (cell-constant).
struct DeterministicLaw {
    double offset = 0.0;
    double slope = 1.0;
    std::vector<double> table;

    double operator()(double u) const {
        if (table.empty()) return offset + slope * u;
        const auto n = static_cast<double>(table.size());
        const auto i = std::clamp<std::size_t>(static_cast<std::size_t>(std::floor(u * n)), 0, table.size() - 1);
        return table[i];
    }
};

/// Normal(mean, sd^2) independent of the label, optionally truncated to
/// mean +/- truncation * sd (symmetric, so the mean is preserved).
struct NormalLaw {
    double mean = 0.0;
    double sd = 1.0;
    double truncation = 0.0;  // 0: no truncation
};

/// Uniform(lo, hi) independent of the label.
struct UniformLaw {
    double lo = 0.0;
    double hi = 1.0;
};

/// lambda_u = normalized particle list of the uniform label bin containing u.
struct BinnedParticleLaw {
    std::vector<std::vector<Atom>> bins;
};

class InitialLaw {
public:
    using Rep = std::variant<DeterministicLaw, NormalLaw, UniformLaw, BinnedParticleLaw>;

    InitialLaw() : rep_(DeterministicLaw{0.0, 0.0, {}}) {}

    explicit InitialLaw(Rep rep) : rep_(std::move(rep)) { validate(); }

    static InitialLaw identity() { return InitialLaw(DeterministicLaw{0.0, 1.0, {}}); }
    static InitialLaw point(double x0) { return InitialLaw(DeterministicLaw{x0, 0.0, {}}); }
    static InitialLaw normal(double mean, double sd, double truncation = 0.0) {
        return InitialLaw(NormalLaw{mean, sd, truncation});
    }
    static InitialLaw uniform(double lo, double hi) { return InitialLaw(UniformLaw{lo, hi}); }

    const Rep& rep() const noexcept { return rep_; }

    /// True when lambda_u does not depend on u.
    bool product_form() const {
        if (const auto* d = std::get_if<DeterministicLaw>(&rep_)) {
            if (!d->table.empty())
                return std::all_of(d->table.begin(), d->table.end(), [&](double v) { return v == d->table[0]; });
            return d->slope == 0.0;
        }
        if (const auto* b = std::get_if<BinnedParticleLaw>(&rep_)) return b->bins.size() == 1;
        return true;
    }

    /// psi(u) = E[X0 | U = u].
    double conditional_mean(double u) const {
        struct Visitor {
            double u;
            double operator()(const DeterministicLaw& d) const { return d(u); }
            double operator()(const NormalLaw& n) const { return n.mean; }
            double operator()(const UniformLaw& un) const { return 0.5 * (un.lo + un.hi); }
            double operator()(const BinnedParticleLaw& b) const {
                const auto& bin = b.bins[bin_of(b, u)];
                CompensatedSum m, fm;
                for (const auto& a : bin) {
                    m.add(a.w);
                    fm.add(a.w * a.x);
                }
                return fm.value() / m.value();
            }
        };
        return std::visit(Visitor{u}, rep_);
    }

    /// Average of psi over the label interval [lo, hi].
    double cell_mean(double lo, double hi, int subsamples = 64) const {
        if (const auto* d = std::get_if<DeterministicLaw>(&rep_); d && d->table.empty())
            return d->offset + d->slope * 0.5 * (lo + hi);
        CompensatedSum s;
        for (int k = 0; k < subsamples; ++k) s.add(conditional_mean(lo + (hi - lo) * (k + 0.5) / subsamples));
        return s.value() / subsamples;
    }

    /// Draw X0 ~ lambda_u.
    double sample(double u, Rng& rng) const {
        struct Visitor {
            double u;
            Rng& rng;
            double operator()(const DeterministicLaw& d) const { return d(u); }
            double operator()(const NormalLaw& n) const {
                for (;;) {
                    const double z = rng.normal();
                    if (n.truncation <= 0.0 || std::abs(z) <= n.truncation) return n.mean + n.sd * z;
                }
            }
            double operator()(const UniformLaw& un) const { return rng.uniform(un.lo, un.hi); }
            double operator()(const BinnedParticleLaw& b) const {
                const auto& bin = b.bins[bin_of(b, u)];
                std::vector<double> cumulative(bin.size());
                double acc = 0.0;
                for (std::size_t i = 0; i < bin.size(); ++i) cumulative[i] = (acc += bin[i].w);
                return bin[rng.discrete(cumulative)].x;
            }
        };
        return std::visit(Visitor{u, rng}, rep_);
    }

    /// Probability mass of lambda averaged over labels in [u_lo, u_hi], binned
    /// onto state cells with the given edges (size J + 1). Mass outside the
    /// edges is assigned to the outermost cells; the returned vector sums to 1.
    std::vector<double> cell_histogram(double u_lo, double u_hi, std::span<const double> edges) const {
        require(edges.size() >= 2, "need at least one state cell");
        const std::size_t cells = edges.size() - 1;
        std::vector<double> out(cells, 0.0);
        auto deposit = [&](double x, double w) {
            auto it = std::upper_bound(edges.begin(), edges.end(), x);
            std::size_t j = static_cast<std::size_t>(it - edges.begin());
            j = std::clamp<std::size_t>(j, 1, cells) - 1;
            out[j] += w;
        };
        if (const auto* d = std::get_if<DeterministicLaw>(&rep_)) {
            constexpr int kSub = 1024;
            for (int k = 0; k < kSub; ++k) deposit((*d)(u_lo + (u_hi - u_lo) * (k + 0.5) / kSub), 1.0 / kSub);
        } else if (const auto* n = std::get_if<NormalLaw>(&rep_)) {
            const double lo_z = n->truncation > 0.0 ? -n->truncation : -INFINITY;
            const double hi_z = n->truncation > 0.0 ? n->truncation : INFINITY;
            auto cdf = [&](double x) {
                const double z = std::clamp((x - n->mean) / n->sd, lo_z, hi_z);
                return 0.5 * std::erfc(-z / std::numbers::sqrt2);
            };
            const double total = cdf(INFINITY) - cdf(-INFINITY);
            for (std::size_t j = 0; j < cells; ++j) {
                const double a = j == 0 ? -INFINITY : edges[j];
                const double b = j + 1 == cells ? INFINITY : edges[j + 1];
                out[j] = (cdf(b) - cdf(a)) / total;
            }
        } else if (const auto* un = std::get_if<UniformLaw>(&rep_)) {
            const double width = un->hi - un->lo;
            for (std::size_t j = 0; j < cells; ++j) {
                const double a = j == 0 ? -INFINITY : edges[j];
                const double b = j + 1 == cells ? INFINITY : edges[j + 1];
                out[j] = std::max(0.0, std::min(b, un->hi) - std::max(a, un->lo)) / width;
            }
        } else {
            const auto& b = std::get<BinnedParticleLaw>(rep_);
            constexpr int kSub = 64;
            for (int k = 0; k < kSub; ++k) {
                const auto& bin = b.bins[bin_of(b, u_lo + (u_hi - u_lo) * (k + 0.5) / kSub)];
                double total = 0.0;
                for (const auto& a : bin) total += a.w;
                for (const auto& a : bin) deposit(a.x, a.w / total / kSub);
            }
        }
        return out;
    }

private:
    static std::size_t bin_of(const BinnedParticleLaw& b, double u) {
        const auto n = static_cast<double>(b.bins.size());
        return std::clamp<std::size_t>(static_cast<std::size_t>(std::floor(u * n)), 0, b.bins.size() - 1);
    }

    void validate() const {
        if (const auto* n = std::get_if<NormalLaw>(&rep_)) {
            require(n->sd > 0.0 && std::isfinite(n->mean), "normal law needs sd > 0");
            require(n->truncation >= 0.0, "truncation must be nonnegative");
        }
        if (const auto* u = std::get_if<UniformLaw>(&rep_)) require(u->hi > u->lo, "uniform law needs hi > lo");
        if (const auto* d = std::get_if<DeterministicLaw>(&rep_)) {
            require(std::isfinite(d->offset) && std::isfinite(d->slope), "deterministic map must be finite");
            for (double v : d->table) require(std::isfinite(v), "tabulated map must be finite");
        }
        if (const auto* b = std::get_if<BinnedParticleLaw>(&rep_)) {
            require(!b->bins.empty(), "binned law needs at least one bin");
            for (const auto& bin : b->bins) {
                double total = 0.0;
                for (const auto& a : bin) {
                    require(std::isfinite(a.x) && a.w >= 0.0, "particles need finite states and nonnegative mass");
                    total += a.w;
                }
                require(total > 0.0, "every bin needs positive mass");
            }
        }
    }

    Rep rep_;
};

}  // namespace gmfg

#pragma once

// Shared plumbing: error types, reproducible random streams, compensated
// summation and a deterministic parallel loop.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace gmfg {

inline constexpr const char* kVersion = "0.3.0";

// =============================================================================
// Errors
// =============================================================================

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Rejected input: negative kernel entries, malformed matrices, bad ranges.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Exact combinatorial routines refuse problems beyond their size limit.
class SizeError : public Error {
public:
    using Error::Error;
};

/// The linear-quadratic fixed point has no solution on this kernel.
class SolvabilityError : public Error {
public:
    SolvabilityError(double kernel_l2, double bound)
        : Error("no equilibrium: requires ||W||_L2 < 1 + 1/(cT), got ||W||_L2 = " +
                std::to_string(kernel_l2) + " >= bound " + std::to_string(bound)),
          kernel_l2_(kernel_l2),
          bound_(bound) {}

    double kernel_l2() const noexcept { return kernel_l2_; }
    double bound() const noexcept { return bound_; }

private:
    double kernel_l2_;
    double bound_;
};

/// A resolvent (I - aK)^{-1} does not exist or its Neumann series diverges.
class SpectralError : public Error {
public:
    SpectralError(std::string what, double radius) : Error(std::move(what)), radius_(radius) {}
    double spectral_radius() const noexcept { return radius_; }

private:
    double radius_;
};

/// Forward transport lost or created mass beyond the conservation budget.
class MassConservationError : public Error {
public:
    using Error::Error;
};

inline void require(bool condition, const std::string& message) {
    if (!condition) throw InvalidArgument(message);
}

// =============================================================================
// Seeds and random streams
// =============================================================================

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Child seed for a named stage; adding a stage never shifts another's stream.
inline constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view label) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
    for (char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return splitmix64(root ^ splitmix64(h));
}

/// Child seed for a counter-indexed stream (path, player, restart, ...).
inline constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t a,
                                           std::uint64_t b = 0) noexcept {
    return splitmix64(splitmix64(root ^ splitmix64(a + 0x632BE59BD9B4E019ULL)) ^
                      splitmix64(b + 0x8CB92BA72F3D8DD7ULL));
}

/// xoshiro256** with portable uniform and normal draws, so that a seed
/// reproduces bit-identical output across standard library versions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) noexcept {
        std::uint64_t s = seed;
        for (auto& word : state_) {
            s = splitmix64(s);
            word = s;
        }
    }

    std::uint64_t next() noexcept {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform on the open interval (0, 1).
    double uniform() noexcept {
        return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    bool bernoulli(double p) noexcept { return uniform() < p; }

    /// Standard normal by Box-Muller; the second variate is cached.
    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double theta = 2.0 * std::numbers::pi * uniform();
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    /// Index drawn from unnormalized nonnegative weights.
    std::size_t discrete(const std::vector<double>& cumulative) noexcept {
        const double target = uniform() * cumulative.back();
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
        if (it == cumulative.end()) --it;
        return static_cast<std::size_t>(it - cumulative.begin());
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4]{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// =============================================================================
// Summation
// =============================================================================

/// Neumaier compensated sum.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Sample mean and standard error of the mean.
struct MeanEstimate {
    double mean = 0.0;
    double std_error = 0.0;
};

inline MeanEstimate mean_and_stderr(const std::vector<double>& samples) {
    MeanEstimate out;
    const auto n = samples.size();
    if (n == 0) return out;
    CompensatedSum s;
    for (double x : samples) s.add(x);
    out.mean = s.value() / static_cast<double>(n);
    if (n < 2) return out;
    CompensatedSum ss;
    for (double x : samples) ss.add((x - out.mean) * (x - out.mean));
    const double var = ss.value() / static_cast<double>(n - 1);
    out.std_error = std::sqrt(var / static_cast<double>(n));
    return out;
}

// =============================================================================
// Parallel loop
// =============================================================================

/// Runs fn(i) for i in [0, n) over at most `threads` workers with a fixed
/// contiguous partition. Callers write results into per-index slots and reduce
/// afterwards, so output never depends on the thread count.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
    const unsigned workers =
        static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), std::max<std::size_t>(n, 1)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace gmfg

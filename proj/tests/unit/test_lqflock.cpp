#include <gtest/gtest.h>

#include <cmath>

#include "gmfg/lqflock.hpp"
#include "oracles.hpp"

using namespace gmfg;

namespace {

LQParams params(Kernel w, InitialLaw init, double c = 1.0, double T = 1.0, double sigma = 0.3) {
    LQParams p;
    p.c = c;
    p.T = T;
    p.sigma = sigma;
    p.kernel = std::move(w);
    p.initial = std::move(init);
    return p;
}

}  // namespace

TEST(SolveLq, ConstantKernelReturnsInitialMean) {
    for (double m0 : {0.0, 1.0, -2.5}) {
        const auto sol = solve_lq(params(Kernel::constant(1.0), InitialLaw::point(m0), 0.7, 1.3), 32);
        for (double m : sol.target) EXPECT_NEAR(m, m0, 1e-12);
    }
}

TEST(SolveLq, ZeroKernelGivesZeroTarget) {
    const auto sol = solve_lq(params(Kernel::constant(0.0), InitialLaw::identity()), 16);
    for (double m : sol.target) EXPECT_EQ(m, 0.0);
}

TEST(SolveLq, NonExistenceBoundary) {
    const double c = 1.0, T = 1.0;
    const Kernel w = Kernel::constant(1.0 + 1.0 / (c * T));
    try {
        solve_lq(params(w, InitialLaw::point(1.0), c, T), 16);
        FAIL() << "expected rejection";
    } catch (const SolvabilityError& e) {
        EXPECT_NEAR(e.bound(), 2.0, 1e-15);
        EXPECT_NEAR(e.kernel_l2(), 2.0, 1e-12);
        EXPECT_NE(std::string(e.what()).find("1 + 1/(cT)"), std::string::npos);
    }
    const auto zero = solve_lq(params(w, InitialLaw::point(0.0), c, T), 16);
    for (double m : zero.target) EXPECT_EQ(m, 0.0);
}

TEST(SolveLq, BoundaryRejectedWhenBoundIsInexact) {
    const double c = 0.5, T = 3.0;
    const Kernel w = Kernel::constant(1.0 + 1.0 / (c * T));
    EXPECT_THROW(solve_lq(params(w, InitialLaw::point(1.0), c, T), 16), SolvabilityError);
    EXPECT_NO_THROW(solve_lq(params(Kernel::constant(0.999 * (1.0 + 1.0 / (c * T))), InitialLaw::point(1.0), c, T), 16));
}

TEST(SolveLq, MatchesNeumannSeriesOnAsymmetricKernel) {
    const Kernel w = Kernel::two_block(1.6, 0.4, 0.2, 1.0);
    const auto sol = solve_lq(params(w, InitialLaw::identity()), 64);
    const auto ref = oracle::neumann_target(grid_matrix(w, LabelGrid(64)), sol.psi, 1.0, 1.0);
    for (int l = 0; l < 64; ++l) EXPECT_NEAR(sol.target[l], ref[l], 1e-10);
    EXPECT_NEAR(sol.katz_parameter, 0.5, 1e-15);
    EXPECT_NEAR(sol.bound, 2.0, 1e-15);
    EXPECT_GT(sol.margin(), 0.0);
}

TEST(SolveLq, ResolventConsistency) {
    const Kernel w = Kernel::min_kernel();
    const auto p = params(w, InitialLaw::normal(0.5, 1.0), 2.0, 0.8);
    const auto sol = solve_lq(p, 40);
    const Eigen::MatrixXd k = grid_matrix(w, sol.grid);
    const double a = sol.katz_parameter;
    Eigen::VectorXd m = Eigen::Map<const Eigen::VectorXd>(sol.target.data(), 40);
    Eigen::VectorXd psi = Eigen::Map<const Eigen::VectorXd>(sol.psi.data(), 40);
    // (I - aK) M (cT + 1) = K psi
    const Eigen::VectorXd lhs = (Eigen::MatrixXd::Identity(40, 40) - a * k) * m * (p.c * p.T + 1.0);
    EXPECT_LT((lhs - k * psi).lpNorm<Eigen::Infinity>(), 1e-10);
}

TEST(SolveLq, LinearInInitialMean) {
    const Kernel w = Kernel::two_block(1.6, 0.4, 0.2, 1.0);
    const std::vector<double> t1{0.3, -1.0, 2.0, 0.5}, t2{1.0, 1.0, -0.5, 0.0};
    std::vector<double> sum(4);
    for (int i = 0; i < 4; ++i) sum[i] = 2.0 * t1[i] - 0.5 * t2[i];
    auto table = [](std::vector<double> v) { return InitialLaw(DeterministicLaw{0.0, 0.0, std::move(v)}); };
    const auto s1 = solve_lq(params(w, table(t1)), 16), s2 = solve_lq(params(w, table(t2)), 16),
               s = solve_lq(params(w, table(sum)), 16);
    for (int l = 0; l < 16; ++l) EXPECT_NEAR(s.target[l], 2.0 * s1.target[l] - 0.5 * s2.target[l], 1e-12);
}

TEST(SolveLq, StepKernelTargetStableUnderRefinement) {
    Eigen::MatrixXd xi(2, 2);
    xi << 1.6, 0.4, 0.2, 1.0;
    const auto table = InitialLaw(DeterministicLaw{0.0, 0.0, {0.25, 0.75}});
    const auto a = solve_lq(params(step_kernel(xi), table), 8);
    const auto b = solve_lq(params(step_kernel(xi), table), 16);
    for (int l = 0; l < 16; ++l) EXPECT_NEAR(b.target[l], a.target[l / 2], 1e-12);
}

TEST(SolveLq, RefinementConvergesForLipschitzKernel) {
    const Kernel w = Kernel::min_kernel();
    const auto p = params(w, InitialLaw::identity());
    const auto coarse = solve_lq(p, 32), fine = solve_lq(p, 64);
    for (int l = 0; l < 32; ++l) {
        const double avg = 0.5 * (fine.target[2 * l] + fine.target[2 * l + 1]);
        EXPECT_LT(std::abs(avg - coarse.target[l]), 1.0 / 32);
    }
}

TEST(Coefficients, GainAndValueOffset) {
    LQSolution sol;
    sol.c = 1.5;
    sol.T = 2.0;
    sol.sigma = 0.4;
    EXPECT_DOUBLE_EQ(sol.phi(2.0), 1.5);
    EXPECT_DOUBLE_EQ(sol.value_offset(2.0), 0.0);
    double prev = 0.0;
    const int steps = 4000;
    for (int k = 0; k <= steps; ++k) {
        const double t = 2.0 * k / steps;
        EXPECT_GT(sol.phi(t), prev);
        prev = sol.phi(t);
        if (k > 0 && k < steps) {
            const double h = 2.0 / steps;
            const double deriv = (sol.phi(t + h) - sol.phi(t - h)) / (2 * h);
            EXPECT_NEAR(deriv, sol.phi(t) * sol.phi(t), 1e-5);
        }
    }
}

TEST(EquilibriumControl, ClosedFormCases) {
    auto sol = solve_lq(params(Kernel::constant(1.0), InitialLaw::point(1.0)), 8);
    EXPECT_NEAR(equilibrium_control(sol, 1.0, 0.3, 0.25), 1.0 * (1.0 - 0.25), 1e-12);
    for (double t : {0.0, 0.4, 1.0}) EXPECT_NEAR(equilibrium_control(sol, t, 0.6, 1.0), 0.0, 1e-12);
    EXPECT_NEAR(equilibrium_control(sol, 0.0, 0.5, 0.0), 0.5, 1e-12);
}

TEST(Katz, ConstantKernelGeometricSeries) {
    const double w = 0.8, alpha = 0.5;
    for (double v : katz_centrality(Kernel::constant(w), alpha, 12)) EXPECT_NEAR(v, alpha * w / (1 - alpha * w), 1e-12);
    for (double v : katz_centrality(Kernel::constant(w), 0.0, 12)) EXPECT_EQ(v, 0.0);
}

TEST(Katz, MatchesTruncatedNeumannSeries) {
    const Kernel w = Kernel::two_block(1.6, 0.4, 0.2, 1.0);
    const auto katz = katz_centrality(w, 0.5, 64);
    const auto ref = oracle::neumann_katz(grid_matrix(w, LabelGrid(64)), 0.5, 40);
    for (int l = 0; l < 64; ++l) EXPECT_NEAR(katz[l], ref[l], 1e-10);
}

TEST(Katz, DivergentParameterRejected) {
    EXPECT_THROW(katz_centrality(Kernel::constant(2.0), 0.5, 8), SpectralError);
}

TEST(McKeanVlasov, NoNoiseNoInteraction) {
    const auto p = params(Kernel::constant(0.0), InitialLaw::point(2.0), 1.0, 1.0, 0.0);
    const auto sol = solve_lq(p, 8);
    const auto r = verify_mckean_vlasov(sol, p, 100, 0.01, 1);
    for (std::size_t l = 0; l < r.residual.size(); ++l) {
        EXPECT_EQ(r.residual[l], 0.0);
        EXPECT_EQ(r.std_error[l], 0.0);
    }
}

TEST(McKeanVlasov, ConstantKernelTruncatedNormal) {
    const auto p = params(Kernel::constant(1.0), InitialLaw::normal(0.7, 1.0, 3.0), 1.0, 1.0, 0.3);
    const auto sol = solve_lq(p, 8);
    const auto r = verify_mckean_vlasov(sol, p, 20000, 0.01, 5);
    for (std::size_t l = 0; l < r.residual.size(); ++l) {
        EXPECT_NEAR(r.target[l], 0.7, 1e-12);
        EXPECT_LE(r.residual[l], 3.0 * r.std_error[l]);
    }
}

TEST(McKeanVlasov, ThreadCountDoesNotChangeEstimates) {
    const auto p = params(Kernel::two_block(1.6, 0.4, 0.2, 1.0), InitialLaw::identity());
    const auto sol = solve_lq(p, 16);
    const auto a = verify_mckean_vlasov(sol, p, 3000, 0.02, 9, 1);
    const auto b = verify_mckean_vlasov(sol, p, 3000, 0.02, 9, 3);
    for (std::size_t l = 0; l < a.estimate.size(); ++l) EXPECT_NEAR(a.estimate[l], b.estimate[l], 1e-12);
}

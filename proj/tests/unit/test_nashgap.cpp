#include <gtest/gtest.h>

#include <cmath>

#include "gmfg/nashgap.hpp"

using namespace gmfg;

namespace {

LQParams lq(Kernel w, InitialLaw init, double sigma = 0.3) {
    LQParams p;
    p.c = 1.0;
    p.T = 1.0;
    p.sigma = sigma;
    p.kernel = std::move(w);
    p.initial = std::move(init);
    return p;
}

InteractionMatrix empty_graph(int n) { return InteractionMatrix(Eigen::MatrixXd::Zero(n, n), "explicit"); }

}  // namespace

TEST(LqGap, DecoupledPlayersHaveNoProfitableDeviation) {
    const int n = 6;
    const auto p = lq(Kernel::constant(0.0), InitialLaw::normal(0.5, 1.0));
    const auto sol = solve_lq(p, 8);
    GapOptions opt;
    opt.paths = 2000;
    opt.seed = 3;
    const auto report = estimate_gaps_lq(empty_graph(n), assign_labels(n, LabelScheme::midpoint), sol, p, opt);
    ASSERT_EQ(report.players.size(), static_cast<std::size_t>(n));
    for (const auto& g : report.players) EXPECT_LE(std::abs(g.eps_hat), 3.0 * g.std_error + 1e-12);
}

TEST(LqGap, RawEstimatesAreNotClamped) {
    const int n = 10;
    const auto p = lq(Kernel::constant(1.0), InitialLaw::normal(0.0, 1.0));
    const auto sol = solve_lq(p, 8);
    GapOptions opt;
    opt.paths = 200;
    opt.seed = 11;
    const auto report = estimate_gaps_lq(erdos_renyi(n, 0.5, true, 1), assign_labels(n, LabelScheme::midpoint), sol, p, opt);
    bool negative = false;
    for (const auto& g : report.players) negative = negative || g.eps_hat < 0.0;
    EXPECT_TRUE(negative);
    EXPECT_LE(report.mean, report.max);
    EXPECT_EQ(report.estimator, "lq_closed_form");
    EXPECT_FALSE(report.caveat.empty());
}

TEST(LqGap, SubsetOfPlayersAndReproducibility) {
    const int n = 8;
    const auto p = lq(Kernel::two_block(1.6, 0.4, 0.2, 1.0), InitialLaw::identity());
    const auto sol = solve_lq(p, 8);
    GapOptions opt;
    opt.paths = 100;
    opt.seed = 5;
    const auto xi = sample_from_graphon(p.kernel, n, true, 2);
    const auto a = estimate_gaps_lq(xi.xi, xi.labels, sol, p, opt, {1, 4});
    const auto b = estimate_gaps_lq(xi.xi, xi.labels, sol, p, opt, {1, 4});
    ASSERT_EQ(a.players.size(), 2u);
    EXPECT_EQ(a.players[1].player, 4);
    for (std::size_t k = 0; k < 2; ++k) {
        EXPECT_EQ(a.players[k].eps_hat, b.players[k].eps_hat);
        EXPECT_EQ(a.players[k].std_error, b.players[k].std_error);
    }
    GapOptions three = opt;
    three.threads = 3;
    const auto c = estimate_gaps_lq(xi.xi, xi.labels, sol, p, three, {1, 4});
    EXPECT_EQ(a.players[0].eps_hat, c.players[0].eps_hat);
}

TEST(Report, AggregatesAndFractions) {
    NashGapReport r;
    for (double e : {-0.02, 0.01, 0.04, 0.10}) r.players.push_back({0, 0.0, e, 0.0});
    r.aggregate();
    EXPECT_NEAR(r.mean, 0.0325, 1e-15);
    EXPECT_EQ(r.max, 0.10);
    EXPECT_EQ(r.fraction_above(0.0), 0.75);
    double prev = 1.0;
    for (double eps = -0.05; eps <= 0.12; eps += 0.01) {
        EXPECT_LE(r.fraction_above(eps), prev);
        prev = r.fraction_above(eps);
    }
    EXPECT_EQ(r.fraction_above(0.2), 0.0);
}

TEST(HjbGap, DecoupledIncumbentIsBestResponse) {
    SolverGrid g;
    g.steps = 50;
    g.labels = 2;
    g.states = 100;
    g.actions = 101;
    const ModelSpec<DecoupledRewards> model{DecoupledRewards{1.0, 0.5}, 0.3, Kernel::constant(1.0),
                                           InitialLaw::normal(0.5, 0.5), g};
    const auto field = solve_fixed_point(model);
    const int n = 4;
    const auto labels = assign_labels(n, LabelScheme::midpoint);
    GapOptions opt;
    opt.paths = 500;
    opt.seed = 8;
    const auto report = estimate_gaps_hjb(empty_graph(n), labels, model, field_profile(field, labels), opt);
    EXPECT_EQ(report.estimator, "hjb_best_response");
    for (const auto& p : report.players) EXPECT_LE(std::abs(p.eps_hat), 3.0 * p.std_error + 1e-12);
}

TEST(Sweep, OneSummaryPerSizeAndDeterministic) {
    SweepSpec spec;
    spec.generator = Generator::erdos_renyi;
    spec.sizes = {4, 8};
    spec.trials = 2;
    spec.label_cells = 8;
    spec.lq = lq(Kernel::constant(1.0), InitialLaw::normal(1.0, 0.5));
    spec.gap.paths = 50;
    spec.gap.seed = 21;
    const auto a = gap_sweep(spec);
    const auto b = gap_sweep(spec);
    ASSERT_EQ(a.summary.size(), 2u);
    EXPECT_EQ(a.summary[0].n, 4);
    EXPECT_EQ(a.trials.size(), 4u);
    for (std::size_t k = 0; k < a.trials.size(); ++k) EXPECT_EQ(a.trials[k].aggregate, b.trials[k].aggregate);
    spec.sizes = {8, 4};
    EXPECT_THROW(gap_sweep(spec), InvalidArgument);
}

TEST(Sweep, MaxAggregateDominatesMean) {
    SweepSpec spec;
    spec.sizes = {6};
    spec.trials = 2;
    spec.label_cells = 8;
    spec.lq = lq(Kernel::constant(1.0), InitialLaw::normal(1.0, 0.5));
    spec.gap.paths = 50;
    spec.gap.seed = 2;
    const auto mean = gap_sweep(spec);
    spec.aggregate = Aggregate::max;
    const auto max = gap_sweep(spec);
    EXPECT_LE(mean.summary[0].aggregate_mean, max.summary[0].aggregate_mean);
}

TEST(EmpiricalConvergence, ZeroKernelAndSinglePlayer) {
    const LabelStateMeasure mu({{0.25, 0.0, 0.5}, {0.75, 1.0, 0.5}}, true);
    const Kernel zero = Kernel::constant(0.0);
    const auto rows = empirical_measure_convergence(zero, midpoint_weighted_generator(zero), mu, {1, 5, 20}, 2, 1);
    for (const auto& r : rows) EXPECT_EQ(r.distance, 0.0);

    const Kernel one = Kernel::constant(1.0);
    const auto single = empirical_measure_convergence(one, midpoint_weighted_generator(one), mu, {1}, 1, 1);
    EXPECT_NEAR(single[0].distance, 1.0, 1e-12);
}

TEST(EmpiricalConvergence, DistanceDecreasesWithSize) {
    std::vector<LabelAtom> atoms;
    for (int a = 0; a < 8; ++a)
        for (int j = 0; j < 10; ++j) atoms.push_back({(a + 0.5) / 8, -1.0 + 0.3 * j + 0.1 * a, 1.0 / 80});
    const LabelStateMeasure mu(atoms, true);
    Eigen::MatrixXd nodes(2, 2);
    nodes << 1.6, 0.4, 0.2, 1.0;
    const Kernel w = Kernel::tabulated(nodes);
    const auto rows = empirical_measure_convergence(w, midpoint_weighted_generator(w), mu, {16, 64, 256}, 4, 7);
    EXPECT_GT(rows[0].distance, rows[1].distance);
    EXPECT_GT(rows[1].distance, rows[2].distance);
}

// End-to-end acceptance checks. One PASS/FAIL line per criterion; the exit
// status is nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "gmfg/arena.hpp"
#include "gmfg/cut_norm.hpp"
#include "gmfg/lqflock.hpp"
#include "gmfg/measure.hpp"
#include "gmfg/mfgpde.hpp"
#include "gmfg/nashgap.hpp"
#include "gmfg/netgen.hpp"
#include "oracles.hpp"

using namespace gmfg;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

LQParams lq_params(Kernel w, InitialLaw init, double c = 1.0, double T = 1.0, double sigma = 0.3) {
    LQParams p;
    p.c = c;
    p.T = T;
    p.sigma = sigma;
    p.kernel = std::move(w);
    p.initial = std::move(init);
    return p;
}

const Kernel two_block_a = Kernel::two_block(1.6, 0.4, 0.2, 1.0);

SolverGrid full_grid() {
    SolverGrid g;  // T = 1, K = 200, L = 16, box [-4, 6] with J = 200, A = [-5, 5] with 201 actions
    return g;
}

// Equilibrium of the truncated LQ model on the reference grid, shared by two criteria.
const EquilibriumField& reference_field() {
    static const EquilibriumField field = [] {
        const ModelSpec<LqRewards> model{LqRewards{1.0}, 0.3, two_block_a, InitialLaw::identity(), full_grid()};
        return solve_fixed_point(model, FixedPointOptions{0.5, 200, 1e-6, 1});
    }();
    return field;
}

Outcome lq_self_consistency() {
    const auto p = lq_params(two_block_a, InitialLaw::identity());
    const int L = 64;
    const auto sol = solve_lq(p, L);
    const auto r = verify_mckean_vlasov(sol, p, 100000, 0.005, 20240101);
    double worst = -INFINITY;
    int failures = 0;
    for (int q = 0; q < 16; ++q) {
        const auto l = static_cast<std::size_t>(4 * q + 2);
        const double slack = r.residual[l] - (3.0 * r.std_error[l] + 2.0 / L);
        worst = std::max(worst, slack);
        failures += slack > 0.0;
    }
    return {failures == 0, "16 probes, max(residual - tolerance) = " + num(worst)};
}

Outcome lq_constant_kernel() {
    double worst = 0.0, oracle_gap = 0.0;
    for (const InitialLaw& init : {InitialLaw::identity(), InitialLaw::normal(-0.7, 1.3), InitialLaw::uniform(1.0, 4.0)}) {
        const auto p = lq_params(Kernel::constant(1.0), init, 0.8, 1.7);
        const auto sol = solve_lq(p, 64);
        double mean = 0.0;
        for (double v : sol.psi) mean += v / 64.0;
        const auto ref = oracle::neumann_target(grid_matrix(p.kernel, sol.grid), sol.psi, p.c, p.T);
        for (int l = 0; l < 64; ++l) {
            worst = std::max(worst, std::abs(sol.target[static_cast<std::size_t>(l)] - mean));
            oracle_gap = std::max(oracle_gap, std::abs(sol.target[static_cast<std::size_t>(l)] - ref[static_cast<std::size_t>(l)]));
        }
    }
    return {worst <= 1e-10 && oracle_gap <= 1e-10,
            "max |M - E X0| = " + num(worst) + ", max |M - series| = " + num(oracle_gap)};
}

Outcome non_existence_boundary() {
    bool ok = true;
    std::string detail;
    for (const auto& [c, T] : std::vector<std::pair<double, double>>{{1.0, 1.0}, {2.0, 1.0}, {0.5, 3.0}}) {
        const double level = 1.0 + 1.0 / (c * T);
        try {
            solve_lq(lq_params(Kernel::constant(level), InitialLaw::point(1.0), c, T), 16);
            ok = false;
            detail += "accepted W = " + num(level) + "; ";
        } catch (const SolvabilityError& e) {
            const bool named = std::string(e.what()).find("1 + 1/(cT)") != std::string::npos;
            ok = ok && named && std::abs(e.bound() - level) < 1e-15;
        }
        const auto zero = solve_lq(lq_params(Kernel::constant(level), InitialLaw::point(0.0), c, T), 16);
        for (double m : zero.target) ok = ok && m == 0.0;
    }
    try {
        solve_lq(lq_params(Kernel::constant(2.0), InitialLaw::point(1.0), 1.0, 1.0), 16);
        ok = false;
    } catch (const SolvabilityError&) {
    }
    return {ok, detail.empty() ? "rejected at 1 + 1/(cT) for 3 (c, T); zero target when the initial mean vanishes" : detail};
}

Outcome norm_sandwich() {
    Rng rng(derive_seed(7, "sandwich"));
    int violations = 0, heuristic_above = 0, equal = 0, oracle_mismatch = 0, oracle_checked = 0;
    const int instances = 200;
    for (int t = 0; t < instances; ++t) {
        const int n = 1 + t % 12;
        const bool signed_entries = t % 3 != 0;
        Eigen::MatrixXd a(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) a(i, j) = signed_entries ? rng.uniform(-1.0, 1.0) : rng.uniform(0.0, 1.0);
        const double cut = cut_norm_step(a, NormMode::exact).value;
        const double op = opnorm_inf_to_1(a, NormMode::exact).value;
        violations += !(cut <= op + 1e-12 && op <= 4.0 * cut + 1e-12);
        if (n <= 8) {
            ++oracle_checked;
            oracle_mismatch += std::abs(cut - oracle::cut_norm_brute(a)) > 1e-12 || std::abs(op - oracle::opnorm_brute(a)) > 1e-12;
        }
        HeuristicOptions opt;
        opt.seed = derive_seed(7, static_cast<std::uint64_t>(t));
        const double h = cut_norm_step(a, NormMode::heuristic, opt).value;
        heuristic_above += h > cut + 1e-12;
        equal += std::abs(h - cut) <= 1e-12;
    }
    const bool pass = violations == 0 && heuristic_above == 0 && equal >= 0.95 * instances && oracle_mismatch == 0;
    return {pass, std::to_string(violations) + " violations, heuristic above exact " + std::to_string(heuristic_above) +
                      ", equal " + std::to_string(equal) + "/" + std::to_string(instances) + ", enumeration mismatches " +
                      std::to_string(oracle_mismatch) + "/" + std::to_string(oracle_checked)};
}

ParticleMeasure random_measure(Rng& rng, int atoms) {
    std::vector<Atom> out;
    for (int k = 0; k < atoms; ++k) out.push_back({std::round(rng.normal() * 2.0 * 16.0) / 16.0, rng.uniform(0.01, 1.0)});
    ParticleMeasure m(out);
    return m.scaled(rng.uniform(0.2, 2.0) / m.mass());
}

Outcome bl_exactness() {
    Rng rng(derive_seed(11, "bl"));
    double worst = 0.0;
    for (int t = 0; t < 500; ++t) {
        const auto a = random_measure(rng, 1 + static_cast<int>(rng.uniform() * 30));
        const auto b = random_measure(rng, 1 + static_cast<int>(rng.uniform() * 30));
        worst = std::max(worst, std::abs(bl_distance(a, b) - oracle::bl_distance_lp_adjacent(a, b)));
    }
    int axiom_failures = 0;
    for (int t = 0; t < 500; ++t) {
        const auto a = random_measure(rng, 1 + t % 30), b = random_measure(rng, 1 + (3 * t) % 30),
                   c = random_measure(rng, 1 + (7 * t) % 30);
        const double ab = bl_distance(a, b), ba = bl_distance(b, a), bc = bl_distance(b, c), ac = bl_distance(a, c);
        axiom_failures += !(bl_distance(a, a) == 0.0 && ab >= 0.0 && std::abs(ab - ba) <= 1e-12 && ac <= ab + bc + 1e-12 &&
                            (ab > 0.0 || a.atoms() == b.atoms()));
    }
    return {worst <= 1e-9 && axiom_failures == 0,
            "max |sorted - LP| = " + num(worst) + ", axiom failures " + std::to_string(axiom_failures) + "/500"};
}

Outcome mfg_vs_closed_form() {
    const auto& f = reference_field();
    const auto& g = f.grid;
    const auto sol = solve_lq(lq_params(two_block_a, InitialLaw::identity()), g.labels);
    double worst = 0.0;
    for (int k = 0; k < g.steps; ++k)
        for (int l = 0; l < g.labels; ++l)
            for (int j = 0; j < g.states; ++j) {
                const double x = g.x(j);
                if (x < -1.5 || x > 3.5) continue;
                const double closed = sol.phi(g.time(k)) * (sol.target[static_cast<std::size_t>(l)] - x);
                worst = std::max(worst, std::abs(f.control(k, l, j) - closed));
            }
    const double tol = 5.0 * (g.dx() + g.dt());
    return {f.converged && worst <= tol && f.boundary_mass < 1e-4,
            "converged " + std::string(f.converged ? "yes" : "no") + " in " + std::to_string(f.iterations) +
                " iterations, sup error " + num(worst) + " (limit " + num(tol) + "), boundary mass " + num(f.boundary_mass)};
}

Outcome constant_degree_reduction() {
    const FixedPointOptions opt{0.5, 200, 1e-6, 1};
    const auto g = full_grid();
    const auto a = solve_fixed_point(
        ModelSpec<LqRewards>{LqRewards{1.0}, 0.3, Kernel::two_block(1.5, 0.5, 0.5, 1.5), InitialLaw::uniform(0.0, 1.0), g}, opt);
    const auto b = solve_fixed_point(
        ModelSpec<LqRewards>{LqRewards{1.0}, 0.3, Kernel::constant(1.0), InitialLaw::uniform(0.0, 1.0), g}, opt);
    const auto centers = g.centers();
    double worst = 0.0;
    for (int k = 0; k <= g.steps; ++k) {
        const auto ma = second_marginal_masses(a.mass, k), mb = second_marginal_masses(b.mass, k);
        std::vector<double> diff(ma.size());
        for (std::size_t j = 0; j < diff.size(); ++j) diff[j] = ma[j] - mb[j];
        worst = std::max(worst, bl_norm_sorted(centers, diff));
    }
    const double spread = product_structure_check(a, 4).spread;
    return {a.converged && b.converged && worst <= 2.0 * opt.tol && spread <= 2.0 * opt.tol,
            "max grid-BL between marginals " + num(worst) + ", product spread " + num(spread) + " (limit " +
                num(2.0 * opt.tol) + ")"};
}

Outcome equilibrium_trends() {
    const std::vector<int> sizes{20, 50, 100, 200};
    GapOptions gap;
    gap.paths = 2000;
    gap.dt = 0.01;

    SweepSpec er;
    er.generator = Generator::erdos_renyi;
    er.p = 0.5;
    er.normalize = true;
    er.scheme = LabelScheme::midpoint;
    er.aggregate = Aggregate::mean;
    er.sizes = sizes;
    er.trials = 8;
    er.label_cells = 64;
    er.lq = lq_params(Kernel::constant(1.0), InitialLaw::normal(1.0, 0.5));
    er.gap = gap;
    er.gap.seed = derive_seed(2024, "er");
    const auto mean_sweep = gap_sweep(er);

    int inversions = 0;
    bool inversions_small = true;
    const auto& s = mean_sweep.summary;
    for (std::size_t k = 0; k + 1 < s.size(); ++k)
        if (s[k + 1].aggregate_mean >= s[k].aggregate_mean) {
            ++inversions;
            const double se = std::hypot(s[k].aggregate_std_error, s[k + 1].aggregate_std_error);
            inversions_small = inversions_small && s[k + 1].aggregate_mean - s[k].aggregate_mean <= 2.0 * se;
        }
    const bool er_ok = inversions <= 1 && inversions_small && s.back().aggregate_mean < 0.5 * s.front().aggregate_mean;

    SweepSpec tb = er;
    tb.generator = Generator::sampled_weighted;
    tb.generator_kernel = two_block_a;
    tb.aggregate = Aggregate::max;
    tb.sizes = {20, 200};
    tb.lq = lq_params(two_block_a, InitialLaw::normal(1.0, 0.5));
    tb.gap.seed = derive_seed(2024, "two_block");
    const auto max_sweep = gap_sweep(tb);
    const auto& t = max_sweep.summary;
    const bool tb_ok = t.back().aggregate_mean < t.front().aggregate_mean;

    std::string detail = "ER mean eps:";
    for (const auto& row : s) detail += " " + std::to_string(row.n) + ":" + num(row.aggregate_mean) + "+-" + num(row.aggregate_std_error);
    detail += "; two-block max eps: 20:" + num(t.front().aggregate_mean) + " 200:" + num(t.back().aggregate_mean);
    return {er_ok && tb_ok, detail};
}

Outcome empirical_convergence() {
    const auto flow = to_measure_flow(reference_field());
    const LabelStateMeasure& mu = flow.nodes().back();
    Eigen::MatrixXd nodes(2, 2);
    nodes << 1.6, 0.4, 0.2, 1.0;
    bool ok = true;
    std::string detail;
    for (const Kernel& w : {Kernel::constant(1.0), Kernel::tabulated(nodes)}) {
        const auto rows = empirical_measure_convergence(w, midpoint_weighted_generator(w), mu, {50, 100, 200, 400}, 16,
                                                        derive_seed(99, w.name()));
        detail += w.name() + ":";
        for (std::size_t k = 0; k < rows.size(); ++k) {
            detail += " " + num(rows[k].distance);
            if (k > 0) ok = ok && rows[k].distance < rows[k - 1].distance;
        }
        detail += "; ";
    }
    return {ok, detail};
}

Outcome cut_norm_convergence() {
    HeuristicOptions opt;
    opt.restarts = 64;
    bool ok = true;
    std::string detail;
    double prev = INFINITY;
    for (int n : {64, 128, 256, 512}) {
        opt.seed = derive_seed(5, static_cast<std::uint64_t>(n));
        const auto xi = erdos_renyi(n, 0.5, false, derive_seed(3, static_cast<std::uint64_t>(n)));
        const double d = cut_distance_to(xi, Kernel::constant(0.5), 1, opt).norm.value;
        ok = ok && d < prev;
        prev = d;
        detail += std::to_string(n) + ":" + num(d) + " ";
    }
    return {ok, detail};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"A1 lq self-consistency", lq_self_consistency},
        {"A2 lq constant-kernel identity", lq_constant_kernel},
        {"A3 non-existence boundary", non_existence_boundary},
        {"A4 norm sandwich", norm_sandwich},
        {"A5 bounded-Lipschitz exactness", bl_exactness},
        {"A6 pde vs closed form", mfg_vs_closed_form},
        {"A7 constant-degree reduction", constant_degree_reduction},
        {"A8 approximate-equilibrium trends", equilibrium_trends},
        {"A9 empirical-measure convergence", empirical_convergence},
        {"A10 cut-norm convergence", cut_norm_convergence},
    };
    int failed = 0;
    for (const auto& [name, run] : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = run();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("%s %s: %s [%.1fs]\n", out.pass ? "PASS" : "FAIL", name, out.detail.c_str(), secs);
        std::fflush(stdout);
        failed += !out.pass;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}

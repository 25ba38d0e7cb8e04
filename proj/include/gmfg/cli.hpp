#pragma once

// Config-driven command execution. Every command reads one JSON object,
// fills in defaults, writes its artifacts under "out", and finishes with a
// manifest.json echoing the resolved config. Re-running the "config" block of
// a manifest reproduces every artifact byte for byte.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "gmfg/arena.hpp"
#include "gmfg/common.hpp"
#include "gmfg/cut_norm.hpp"
#include "gmfg/io.hpp"
#include "gmfg/kernel.hpp"
#include "gmfg/lqflock.hpp"
#include "gmfg/mfgpde.hpp"
#include "gmfg/models.hpp"
#include "gmfg/nashgap.hpp"
#include "gmfg/netgen.hpp"

namespace gmfg::cli {

using json = io::json;
namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2, kUnsolvable = 3 };

class UsageError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

inline const std::vector<std::string>& commands() {
    static const std::vector<std::string> names{"kernel-norms",   "netgen",         "lq-solve",      "lq-verify",
                                                "mfg-solve",      "arena-simulate", "nashgap-sweep", "emp-convergence"};
    return names;
}

// =============================================================================
// Config access. Lookups with a default write the default back so the
// manifest records the fully resolved config.
// =============================================================================

class Section {
public:
    Section(json& node, std::string where) : node_(node), where_(std::move(where)) {
        if (!node_.is_object()) throw UsageError(where_ + ": expected an object");
    }

    bool has(const char* key) const { return node_.contains(key); }
    json& raw(const char* key) {
        if (!has(key)) throw UsageError(where_ + ": missing field '" + key + "'");
        return node_.at(key);
    }

    template <class T>
    T get(const char* key) {
        return io::field<T>(node_, key, where_);
    }

    template <class T>
    T get(const char* key, T fallback) {
        if (!has(key)) node_[key] = fallback;
        return get<T>(key);
    }

    Section child(const char* key) { return Section(raw(key), where_ + "." + key); }
    Section child_or_empty(const char* key) {
        if (!has(key)) node_[key] = json::object();
        return child(key);
    }

    std::uint64_t seed() {
        if (!has("seed")) throw UsageError(where_ + ": stochastic command requires an explicit 'seed'");
        const json& s = node_.at("seed");
        if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
            throw UsageError(where_ + ": 'seed' must be a nonnegative integer");
        return s.get<std::uint64_t>();
    }

    const std::string& where() const { return where_; }
    json& node() { return node_; }

private:
    json& node_;
    std::string where_;
};

struct Context {
    fs::path base;  // directory against which relative input paths resolve
    fs::path out;
    unsigned threads = 1;
    json outputs = json::array();
    json summary = json::object();

    fs::path input(const std::string& path) const {
        const fs::path p(path);
        return p.is_absolute() ? p : fs::absolute(base / p).lexically_normal();
    }

    fs::path output(const std::string& name) {
        outputs.push_back(name);
        const fs::path p = out / name;
        if (p.has_parent_path()) fs::create_directories(p.parent_path());
        return p;
    }
};

/// Path fields are rewritten to absolute form; kernel and law files are inlined.
inline std::string resolve_path(Section& s, const char* key, const Context& ctx) {
    const std::string abs = ctx.input(s.get<std::string>(key)).string();
    s.node()[key] = abs;
    if (!fs::exists(abs)) throw UsageError(s.where() + ": file not found: " + abs);
    return abs;
}

inline Kernel kernel_field(Section& s, const char* key, const Context& ctx) {
    json& node = s.raw(key);
    if (node.is_string()) {
        const fs::path path = ctx.input(node.get<std::string>());
        json loaded = io::read_json(path);
        if (loaded.contains("file") && loaded["file"].is_string())
            loaded["file"] = fs::absolute(path.parent_path() / loaded["file"].get<std::string>()).lexically_normal().string();
        node = loaded;
    } else if (node.is_object() && node.contains("file") && node["file"].is_string()) {
        node["file"] = ctx.input(node["file"].get<std::string>()).string();
    }
    return io::kernel_from_json(node);
}

inline InitialLaw initial_field(Section& s, const char* key, const Context& ctx) {
    if (!s.has(key)) s.node()[key] = json{{"type", "identity"}};
    json& node = s.raw(key);
    if (node.is_string()) node = io::read_json(ctx.input(node.get<std::string>()));
    return io::initial_from_json(node);
}

inline LabelScheme scheme_from(const std::string& name) {
    if (name == "random_per_cell") return LabelScheme::random_per_cell;
    if (name == "midpoint") return LabelScheme::midpoint;
    if (name == "sampled") return LabelScheme::sampled;
    throw UsageError("unknown label scheme '" + name + "'");
}

inline Generator generator_from(const std::string& name) {
    if (name == "erdos_renyi") return Generator::erdos_renyi;
    if (name == "sampled_weighted") return Generator::sampled_weighted;
    if (name == "sampled_simple") return Generator::sampled_simple;
    if (name == "midpoint_weighted") return Generator::midpoint_weighted;
    throw UsageError("unknown generator '" + name + "'");
}

inline NormMode mode_for(const std::string& mode, int size) {
    if (mode == "exact") return NormMode::exact;
    if (mode == "heuristic") return NormMode::heuristic;
    if (mode == "auto") return size <= kExactNormMaxSize ? NormMode::exact : NormMode::heuristic;
    throw UsageError("unknown norm mode '" + mode + "'");
}

inline AnyRewards rewards_from(Section s) {
    const auto name = s.get<std::string>("name");
    if (name == "lq_truncated") return LqRewards{s.get<double>("c", 1.0)};
    if (name == "crowd_aversion")
        return CrowdAversionRewards{s.get<double>("kappa", 1.0), s.get<double>("radius", 0.5), s.get<double>("c", 1.0),
                                    s.get<double>("anchor", 0.0)};
    if (name == "decoupled_test") return DecoupledRewards{s.get<double>("c", 1.0), s.get<double>("target", 0.0)};
    throw UsageError(s.where() + ": unknown model '" + name + "'");
}

/// Parses {model, sigma, kernel, initial, grid} and calls fn(ModelSpec<R>).
template <class Fn>
void with_model(Section& s, const Context& ctx, Fn&& fn) {
    const AnyRewards rewards = rewards_from(s.child("model"));
    const double sigma = s.get<double>("sigma", 0.3);
    const Kernel kernel = kernel_field(s, "kernel", ctx);
    const InitialLaw initial = initial_field(s, "initial", ctx);
    if (!s.has("grid")) s.node()["grid"] = io::grid_to_json(SolverGrid{});
    const SolverGrid grid = io::grid_from_json(s.raw("grid"));
    s.node()["grid"] = io::grid_to_json(grid);
    std::visit(
        [&](const auto& r) {
            using R = std::decay_t<decltype(r)>;
            ModelSpec<R> spec{r, sigma, kernel, initial, grid};
            spec.validate();
            fn(spec);
        },
        rewards);
}

// =============================================================================
// CSV helpers
// =============================================================================

inline void write_rows(const fs::path& path, const std::string& header, const std::vector<std::vector<double>>& rows) {
    auto out = io::open_out(path);
    out << header << '\n';
    for (const auto& row : rows) {
        for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << io::fmt(row[j]);
        out << '\n';
    }
}

// =============================================================================
// Commands
// =============================================================================

inline json norm_record(const std::string& name, const NormResult& r) {
    return {{"name", name},
            {"value", r.value},
            {"mode", to_string(r.mode)},
            {"certificate", {{"rows", r.rows}, {"cols", r.cols}, {"lower_bound", r.lower_bound}}}};
}

inline void run_kernel_norms(Section& s, Context& ctx) {
    json records = json::array();
    const auto mode = s.get<std::string>("mode", "auto");
    auto heuristic = [&](int size) {
        HeuristicOptions opt;
        opt.restarts = s.get<int>("restarts", opt.restarts);
        if (mode_for(mode, size) == NormMode::heuristic) opt.seed = s.seed();
        return opt;
    };

    std::optional<Kernel> kernel;
    std::optional<Eigen::MatrixXd> matrix;
    if (s.has("matrix_file")) matrix = io::read_matrix_file(resolve_path(s, "matrix_file", ctx));
    else if (s.has("matrix")) matrix = io::matrix_from_json(s.raw("matrix"), "matrix");
    if (s.has("kernel")) kernel = kernel_field(s, "kernel", ctx);
    if (!matrix && !kernel) throw UsageError("kernel-norms: needs 'kernel', 'matrix' or 'matrix_file'");

    if (matrix) {
        require(matrix->rows() == matrix->cols(), "kernel-norms: matrix must be square");
        const int n = static_cast<int>(matrix->rows());
        const auto opt = heuristic(n);
        records.push_back(norm_record("cut_norm", cut_norm_step(*matrix, mode_for(mode, n), opt)));
        records.push_back(norm_record("inf_to_1_norm", opnorm_inf_to_1(*matrix, mode_for(mode, n), opt)));
        if (!kernel) kernel = step_kernel(*matrix);
    }
    const int resolution = s.get<int>("resolution", 64);
    const int nodes = s.get<int>("quadrature_nodes", Quadrature{}.nodes);
    const Quadrature q{nodes};
    records.push_back({{"name", "l1_norm"}, {"value", l1_norm(*kernel, q)}, {"mode", "quadrature"},
                       {"certificate", {{"nodes", nodes}}}});
    records.push_back({{"name", "l2_norm"}, {"value", l2_norm(*kernel, q)}, {"mode", "quadrature"},
                       {"certificate", {{"nodes", nodes}}}});
    records.push_back({{"name", "sup"}, {"value", kernel->sup()}, {"mode", "exact"}, {"certificate", json::object()}});
    if (!matrix) {
        const Eigen::MatrixXd grid = discretize_kernel(*kernel, resolution);
        const auto opt = heuristic(resolution);
        auto rec = norm_record("cut_norm_grid", cut_norm_step(grid, mode_for(mode, resolution), opt));
        rec["certificate"]["resolution"] = resolution;
        records.push_back(rec);
    }
    const LabelGrid lg(resolution);
    double lo = INFINITY, hi = -INFINITY;
    for (int l = 0; l < resolution; ++l) {
        const double d = degree(*kernel, lg.midpoint(l), q);
        lo = std::min(lo, d);
        hi = std::max(hi, d);
    }
    const double tol = s.get<double>("degree_tol", 1e-9);
    records.push_back({{"name", "degree_spread"},
                       {"value", hi - lo},
                       {"mode", "grid"},
                       {"certificate", {{"min", lo}, {"max", hi}, {"constant", hi - lo <= tol}, {"resolution", resolution}}}});
    const PsdReport psd = psd_check(*kernel, lg);
    records.push_back({{"name", "min_eigenvalue"},
                       {"value", psd.min_eigenvalue},
                       {"mode", "grid"},
                       {"certificate", {{"psd", psd.psd}, {"resolution", resolution}}}});
    io::write_json(ctx.output(s.get<std::string>("primary", "norms.json")), records);
    ctx.summary["kernel"] = kernel->name();
}

inline void run_netgen(Section& s, Context& ctx) {
    const auto gen = s.get<std::string>("generator");
    const int n = s.get<int>("n");
    require(n >= 1, "netgen: n must be positive");
    const std::uint64_t seed = s.seed();
    SampledGraph graph;
    std::optional<Kernel> limit;
    if (gen == "laplacian") {
        const auto adjacency = io::read_matrix_file(resolve_path(s, "adjacency", ctx));
        graph.xi = laplacian_matrix(adjacency);
        graph.labels = assign_labels(graph.xi.size(), scheme_from(s.get<std::string>("scheme", "midpoint")),
                                     derive_seed(seed, "labels"));
    } else {
        SweepSpec spec;
        spec.generator = generator_from(gen);
        if (spec.generator == Generator::erdos_renyi) {
            spec.p = s.get<double>("p");
            spec.normalize = s.get<bool>("normalize", true);
            limit = Kernel::constant(spec.normalize ? 1.0 : spec.p);
        } else {
            spec.generator_kernel = kernel_field(s, "kernel", ctx);
            limit = spec.generator_kernel;
        }
        const std::string fallback = spec.generator == Generator::erdos_renyi ? "random_per_cell"
                                     : spec.generator == Generator::midpoint_weighted ? "midpoint"
                                                                                        : "sampled";
        spec.scheme = scheme_from(s.get<std::string>("scheme", fallback));
        graph = generate(spec, n, seed);
    }
    const auto format = s.get<std::string>("format", "dense");
    {
        auto out = io::open_out(ctx.output(s.get<std::string>("primary", "xi.txt")));
        if (format == "dense") io::write_dense(out, graph.xi.values());
        else if (format == "edge_list") io::write_edge_list(out, graph.xi.values());
        else throw UsageError("netgen: unknown format '" + format + "'");
    }
    {
        auto out = io::open_out(ctx.output("labels.csv"));
        io::write_labels_csv(out, graph.labels);
    }
    json diag = {{"n", graph.xi.size()},
                 {"provenance", graph.xi.provenance()},
                 {"label_scheme", to_string(graph.labels.scheme)},
                 {"condition_A", condition_A(graph.xi)}};
    if (limit) {
        const int resolution = s.get<int>("resolution", 64);
        HeuristicOptions opt;
        opt.restarts = s.get<int>("restarts", opt.restarts);
        opt.seed = derive_seed(seed, "cut_distance");
        const CutDistance cd = cut_distance_to(graph.xi, *limit, resolution, opt);
        diag["limit_kernel"] = io::kernel_to_json(*limit);
        diag["cut_distance"] = {{"value", cd.norm.value}, {"lower_bound", cd.norm.lower_bound},
                                {"grid_cells", cd.grid_cells}, {"rows", cd.norm.rows}, {"cols", cd.norm.cols}};
        diag["l1_distance"] = l1_distance_to(graph.xi, *limit, resolution);
        diag["operator_gaps"] = operator_gaps(graph.xi, *limit, resolution);
    }
    io::write_json(ctx.output("diagnostics.json"), diag);
    ctx.summary["condition_A"] = diag["condition_A"];
}

inline LQParams lq_params(Section& s, const Context& ctx) {
    LQParams p;
    p.c = s.get<double>("c", 1.0);
    p.T = s.get<double>("T", 1.0);
    p.sigma = s.get<double>("sigma", 0.3);
    p.kernel = kernel_field(s, "kernel", ctx);
    p.initial = initial_field(s, "initial", ctx);
    p.validate();
    return p;
}

inline void run_lq_solve(Section& s, Context& ctx) {
    const LQParams params = lq_params(s, ctx);
    const int L = s.get<int>("L", 64);
    const LQSolution sol = solve_lq(params, L);
    io::write_json(ctx.output(s.get<std::string>("primary", "solution.json")), io::solution_to_json(sol, params));
    const auto u = sol.grid.midpoints();
    std::vector<std::vector<double>> rows;
    for (int l = 0; l < L; ++l) rows.push_back({u[l], sol.target[l], sol.psi[l]});
    write_rows(ctx.output("target.csv"), "u,target,psi", rows);
    ctx.summary = {{"kernel_l2_grid", sol.kernel_l2}, {"bound", sol.bound}, {"margin", sol.margin()}};
    try {
        const auto katz = katz_centrality(params.kernel, sol.katz_parameter, L);
        rows.clear();
        for (int l = 0; l < L; ++l) rows.push_back({u[l], katz[l]});
        write_rows(ctx.output("centrality.csv"), "u,centrality", rows);
    } catch (const SpectralError& e) {
        ctx.summary["centrality"] = e.what();
    }
}

inline void run_lq_verify(Section& s, Context& ctx) {
    const auto stored = io::solution_from_json(io::read_json(resolve_path(s, "solution", ctx)));
    const long paths = s.get<long>("paths", 100000);
    const double dt = s.get<double>("dt", stored.solution.T / 200.0);
    const std::uint64_t seed = s.seed();
    const int L = stored.solution.grid.cells();
    int probes = s.get<int>("probes", 0);
    if (probes <= 0 || probes > L) probes = L;
    const auto report = verify_mckean_vlasov(stored.solution, stored.params, paths, dt, seed, ctx.threads);
    std::vector<std::vector<double>> rows;
    double worst = 0.0;
    for (int j = 0; j < probes; ++j) {
        const auto l = static_cast<std::size_t>(std::floor((j + 0.5) * L / probes));
        const double tol = 3.0 * report.std_error[l] + 2.0 / L;
        worst = std::max(worst, report.residual[l] / tol);
        rows.push_back({report.labels[l], report.estimate[l], report.std_error[l], report.target[l], report.residual[l],
                        tol, report.residual[l] <= tol ? 1.0 : 0.0});
    }
    write_rows(ctx.output(s.get<std::string>("primary", "report.csv")),
               "u,estimate,std_error,target,residual,tolerance,within", rows);
    ctx.summary = {{"probes", probes}, {"steps", report.steps}, {"max_residual_over_tolerance", worst}};
}

inline void run_mfg_solve(Section& s, Context& ctx) {
    FixedPointOptions opt;
    opt.damping = s.get<double>("damping", opt.damping);
    opt.max_iter = s.get<int>("max_iter", opt.max_iter);
    opt.tol = s.get<double>("tol", opt.tol);
    opt.threads = ctx.threads;
    const int bins = s.get<int>("product_bins", 0);
    with_model(s, ctx, [&](const auto& model) {
        const EquilibriumField field = solve_fixed_point(model, opt);
        for (const auto& name : io::write_field(ctx.out, field)) ctx.outputs.push_back(name);
        std::vector<std::vector<double>> rows;
        for (std::size_t k = 0; k < field.gaps.size(); ++k) rows.push_back({static_cast<double>(k + 1), field.gaps[k]});
        write_rows(ctx.output("convergence.csv"), "iteration,gap", rows);
        ctx.summary = {{"model", model.rewards.name()},
                       {"converged", field.converged},
                       {"iterations", field.iterations},
                       {"final_gap", field.gaps.empty() ? 0.0 : field.gaps.back()},
                       {"boundary_mass", field.boundary_mass},
                       {"psd_kernel", field.psd_kernel},
                       {"substeps", field.substeps}};
        if (bins > 0) {
            const auto ps = product_structure_check(field, bins);
            ctx.summary["product_structure"] = {{"bins", ps.bins}, {"spread", ps.spread},
                                                {"terminal_spread", ps.terminal_spread}};
        }
    });
}

inline void write_objectives(Context& ctx, const LabelAssignment& labels, const SimulationResult& r) {
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < r.n; ++i)
        rows.push_back({static_cast<double>(i), labels.labels[static_cast<std::size_t>(i)], r.objectives[i].mean,
                        r.objectives[i].std_error});
    write_rows(ctx.output("objectives.csv"), "i,label,objective,std_error", rows);
    for (std::size_t s = 0; s < r.snapshots.size(); ++s) {
        const auto& snap = r.snapshots[s];
        const std::string dir = "snapshots/step_" + std::to_string(snap.step) + "/";
        for (std::size_t i = 0; i < snap.neighborhoods.size(); ++i) {
            auto out = io::open_out(ctx.output(dir + "player_" + std::to_string(i) + ".csv"));
            io::write_measure_csv(out, snap.neighborhoods[i]);
        }
    }
}

inline void run_arena_simulate(Section& s, Context& ctx) {
    const InteractionMatrix xi(io::read_matrix_file(resolve_path(s, "xi", ctx)), "file");
    auto labels_in = io::open_in(resolve_path(s, "labels", ctx));
    const LabelAssignment labels = io::read_labels_csv(labels_in);
    if (static_cast<int>(labels.size()) != xi.size())
        throw SizeError("arena-simulate: " + std::to_string(labels.size()) + " labels for " +
                        std::to_string(xi.size()) + " players");
    SimulationOptions opt;
    opt.paths = s.get<long>("paths", 20000);
    opt.dt = s.get<double>("dt", 0.005);
    opt.seed = s.seed();
    opt.threads = ctx.threads;
    opt.snapshot_times = s.get<std::vector<double>>("snapshots", {});

    const auto profile = s.get<std::string>("profile");
    const auto colon = profile.find(':');
    const std::string kind = profile.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : profile.substr(colon + 1);
    if (kind == "lq") {
        const std::string abs = ctx.input(arg).string();
        s.node()["profile"] = "lq:" + abs;
        const auto stored = io::solution_from_json(io::read_json(abs));
        const GameModel<LqRewards> game{LqRewards{stored.params.c}, stored.params.sigma, stored.params.T,
                                        stored.params.initial};
        write_objectives(ctx, labels, simulate(xi, labels, lq_profile(stored.solution, labels), game, opt));
    } else if (kind == "constant") {
        double a = 0.0;
        try {
            a = std::stod(arg);
        } catch (const std::exception&) {
            throw UsageError("arena-simulate: profile 'constant:<action>' needs a number");
        }
        Section m = s.child("model");
        const AnyRewards rewards = rewards_from(m.child("rewards"));
        const double sigma = m.get<double>("sigma", 0.3);
        const double T = m.get<double>("T", 1.0);
        const InitialLaw initial = initial_field(m, "initial", ctx);
        std::visit(
            [&](const auto& r) {
                using R = std::decay_t<decltype(r)>;
                const GameModel<R> game{r, sigma, T, initial};
                const auto prof = uniform_profile(xi.size(), [a](double, double) { return a; }, "constant");
                write_objectives(ctx, labels, simulate(xi, labels, prof, game, opt));
            },
            rewards);
    } else {
        throw UsageError("arena-simulate: unknown profile kind '" + kind + "' (expected lq:<file> or constant:<a>)");
    }
}

inline SweepSpec sweep_spec(Section& s, const Context& ctx) {
    SweepSpec spec;
    spec.generator = generator_from(s.get<std::string>("generator", "erdos_renyi"));
    if (spec.generator == Generator::erdos_renyi) {
        spec.p = s.get<double>("p", 0.5);
        spec.normalize = s.get<bool>("normalize", true);
    } else {
        spec.generator_kernel = kernel_field(s, "generator_kernel", ctx);
    }
    spec.scheme = scheme_from(s.get<std::string>("scheme", "random_per_cell"));
    const auto agg = s.get<std::string>("aggregate", "mean");
    if (agg == "mean") spec.aggregate = Aggregate::mean;
    else if (agg == "max") spec.aggregate = Aggregate::max;
    else throw UsageError("nashgap-sweep: unknown aggregate '" + agg + "'");
    spec.sizes = s.get<std::vector<int>>("sizes");
    spec.trials = s.get<int>("trials", 1);
    spec.label_cells = s.get<int>("label_cells", spec.label_cells);
    Section lq = s.child("lq");
    spec.lq = lq_params(lq, ctx);
    spec.gap.paths = s.get<long>("paths", spec.gap.paths);
    spec.gap.dt = s.get<double>("dt", spec.gap.dt);
    spec.gap.seed = s.seed();
    spec.gap.threads = ctx.threads;
    return spec;
}

inline void run_nashgap_sweep(Section& s, Context& ctx) {
    const SweepSpec spec = sweep_spec(s, ctx);
    const auto thresholds = s.get<std::vector<double>>("thresholds", {0.05});
    const SweepResult result = gap_sweep(spec);
    auto out = io::open_out(ctx.output(s.get<std::string>("primary", "report.csv")));
    out << "kind,n,trial,i,label,eps_hat,stderr\n";
    for (const auto& t : result.trials) {
        for (const auto& g : t.report.players)
            out << "player," << t.n << ',' << t.trial << ',' << g.player << ',' << io::fmt(g.label) << ','
                << io::fmt(g.eps_hat) << ',' << io::fmt(g.std_error) << '\n';
        out << "trial," << t.n << ',' << t.trial << ",,," << io::fmt(t.aggregate) << ",\n";
    }
    for (const auto& row : result.summary)
        out << "aggregate," << row.n << ",,,," << io::fmt(row.aggregate_mean) << ',' << io::fmt(row.aggregate_std_error)
            << '\n';
    std::vector<std::vector<double>> rows;
    for (const auto& t : result.trials)
        for (double eps : thresholds)
            rows.push_back({static_cast<double>(t.n), static_cast<double>(t.trial), eps, t.report.fraction_above(eps)});
    write_rows(ctx.output("fractions.csv"), "n,trial,eps,fraction", rows);
    ctx.summary = {{"estimator", "lq_closed_form"}, {"caveat", kGapCaveat}};
}

inline void run_emp_convergence(Section& s, Context& ctx) {
    const Kernel w = kernel_field(s, "kernel", ctx);
    SweepSpec spec;
    spec.generator = generator_from(s.get<std::string>("generator", "midpoint_weighted"));
    spec.p = s.get<double>("p", 0.5);
    spec.normalize = s.get<bool>("normalize", true);
    spec.generator_kernel = w;
    spec.scheme = scheme_from(s.get<std::string>("scheme", "midpoint"));
    const auto sizes = s.get<std::vector<int>>("sizes");
    const int trials = s.get<int>("trials", 16);
    const std::uint64_t seed = s.seed();

    std::optional<LabelStateMeasure> mu;
    if (s.has("measure")) {
        auto in = io::open_in(resolve_path(s, "measure", ctx));
        mu = io::read_label_state_csv(in, true);
    } else if (s.has("mfg")) {
        Section m = s.child("mfg");
        FixedPointOptions opt;
        opt.damping = m.get<double>("damping", opt.damping);
        opt.max_iter = m.get<int>("max_iter", opt.max_iter);
        opt.tol = m.get<double>("tol", opt.tol);
        opt.threads = ctx.threads;
        with_model(m, ctx, [&](const auto& model) {
            const EquilibriumField field = solve_fixed_point(model, opt);
            mu = to_measure_flow(field).nodes().back();
        });
    } else {
        throw UsageError("emp-convergence: needs 'measure' (u,x,w csv) or an 'mfg' block");
    }
    const GraphGenerator generator = [spec](int n, std::uint64_t sd) { return generate(spec, n, sd); };
    const auto rows = empirical_measure_convergence(w, generator, *mu, sizes, trials, seed, ctx.threads);
    std::vector<std::vector<double>> table;
    for (const auto& r : rows) table.push_back({static_cast<double>(r.n), r.distance, r.std_error});
    write_rows(ctx.output(s.get<std::string>("primary", "convergence.csv")), "n,distance,std_error", table);
}

// =============================================================================
// Entry points
// =============================================================================

/// Runs one command; returns the manifest written to <out>/manifest.json.
inline json execute(json config, const fs::path& base, unsigned threads) {
    Section s(config, "config");
    const auto command = s.get<std::string>("command");
    Context ctx;
    ctx.base = base;
    ctx.threads = std::max(1u, threads);
    ctx.out = ctx.input(s.get<std::string>("out"));
    config["out"] = ctx.out.string();
    fs::create_directories(ctx.out);

    static const std::map<std::string, std::function<void(Section&, Context&)>> table{
        {"kernel-norms", run_kernel_norms},     {"netgen", run_netgen},
        {"lq-solve", run_lq_solve},             {"lq-verify", run_lq_verify},
        {"mfg-solve", run_mfg_solve},           {"arena-simulate", run_arena_simulate},
        {"nashgap-sweep", run_nashgap_sweep},   {"emp-convergence", run_emp_convergence}};
    const auto it = table.find(command);
    if (it == table.end()) throw UsageError("unknown command '" + command + "'");
    it->second(s, ctx);

    json manifest = {{"tool", "gmfg"},
                     {"version", kVersion},
                     {"command", command},
                     {"config", config},
                     {"outputs", ctx.outputs},
                     {"summary", ctx.summary}};
    io::write_json(ctx.out / "manifest.json", manifest);
    return manifest;
}

/// A manifest is accepted in place of a config through its "config" key.
inline json load_config(const fs::path& path) {
    json j = io::read_json(path);
    if (j.contains("config") && j["config"].is_object()) return j["config"];
    return j;
}

inline int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const SolvabilityError*>(&e)) return kUnsolvable;
    if (dynamic_cast<const InvalidArgument*>(&e) || dynamic_cast<const SizeError*>(&e)) return kUsage;
    return kFailure;
}

inline json error_record(const std::exception& e) {
    std::string type = "runtime";
    json extra = json::object();
    if (const auto* se = dynamic_cast<const SolvabilityError*>(&e)) {
        type = "solvability";
        extra = {{"kernel_l2_grid", se->kernel_l2()}, {"bound", se->bound()},
                 {"condition", "||W||_L2 < 1 + 1/(cT)"}};
    } else if (dynamic_cast<const UsageError*>(&e)) {
        type = "usage";
    } else if (dynamic_cast<const InvalidArgument*>(&e)) {
        type = "schema";
    } else if (dynamic_cast<const SizeError*>(&e)) {
        type = "size";
    } else if (const auto* sp = dynamic_cast<const SpectralError*>(&e)) {
        type = "spectral";
        extra = {{"spectral_radius", sp->spectral_radius()}};
    } else if (dynamic_cast<const MassConservationError*>(&e)) {
        type = "mass_conservation";
    }
    json rec = {{"error", {{"type", type}, {"message", e.what()}, {"exit_code", exit_code_for(e)}}}};
    for (auto& [k, v] : extra.items()) rec["error"][k] = v;
    return rec;
}

/// execute() with failures reported as a JSON record on `err` and in
/// <out>/error.json when the output directory is known.
inline int run_guarded(const json& config, const fs::path& base, unsigned threads, std::ostream& err) {
    try {
        execute(config, base, threads);
        return kOk;
    } catch (const std::exception& e) {
        const json rec = error_record(e);
        err << rec.dump() << '\n';
        try {
            if (config.is_object() && config.contains("out") && config["out"].is_string()) {
                const fs::path out = fs::path(config["out"].get<std::string>()).is_absolute()
                                         ? fs::path(config["out"].get<std::string>())
                                         : base / config["out"].get<std::string>();
                io::write_json(out / "error.json", rec);
            }
        } catch (const std::exception&) {
        }
        return exit_code_for(e);
    }
}

}  // namespace gmfg::cli

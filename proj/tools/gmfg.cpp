#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "gmfg/cli.hpp"

namespace fs = std::filesystem;
using gmfg::cli::json;

namespace {

struct Request {
    json config = json::object();
    fs::path base = fs::current_path();
};

std::string absolute(const std::string& path) { return fs::absolute(path).lexically_normal().string(); }

/// A path with an extension names the primary output file; otherwise a directory.
void set_out(json& cfg, const std::string& out) {
    const fs::path p(out);
    if (p.has_extension()) {
        cfg["out"] = absolute(p.has_parent_path() ? p.parent_path().string() : ".");
        cfg["primary"] = p.filename().string();
    } else {
        cfg["out"] = absolute(out);
    }
}

template <class T>
void set_if(json& cfg, const char* key, const std::optional<T>& v) {
    if (v) cfg[key] = *v;
}

void set_path_if(json& cfg, const char* key, const std::optional<std::string>& v) {
    if (v) cfg[key] = absolute(*v);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Graphon mean field game toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(gmfg::kVersion));
    unsigned threads = 1;
    app.add_option("--threads", threads, "Upper bound on worker threads")->check(CLI::PositiveNumber);

    Request req;
    std::optional<std::string> config_path, out, kernel, initial, matrix, sol, xi, labels, profile, mode, generator,
        scheme, format, adjacency;
    std::optional<double> c, T, sigma, dt, p;
    std::optional<long> paths;
    std::optional<int> L, n, restarts, resolution, probes;
    std::optional<std::uint64_t> seed;
    std::optional<bool> normalize;
    std::vector<double> snapshots;

    auto add_seed = [&](CLI::App* cmd) { cmd->add_option("--seed", seed, "Root seed"); };
    auto add_out = [&](CLI::App* cmd, bool required) {
        auto* o = cmd->add_option("--out", out, "Output directory, or primary output file");
        if (required) o->required();
    };
    auto add_config = [&](CLI::App* cmd, bool required) {
        auto* o = cmd->add_option("--config", config_path, "JSON config (a manifest is accepted)")->check(CLI::ExistingFile);
        if (required) o->required();
    };

    auto* run = app.add_subcommand("run", "Run a config or manifest");
    add_config(run, true);
    add_out(run, false);
    add_seed(run);

    auto* lq = app.add_subcommand("lq", "Closed-form linear-quadratic model")->require_subcommand(1);
    auto* lq_solve = lq->add_subcommand("solve", "Solve for the equilibrium target");
    lq_solve->add_option("--kernel", kernel, "Kernel JSON file")->required()->check(CLI::ExistingFile);
    lq_solve->add_option("--initial", initial, "Initial law JSON file")->check(CLI::ExistingFile);
    lq_solve->add_option("--c", c, "Terminal penalty");
    lq_solve->add_option("--T", T, "Horizon");
    lq_solve->add_option("--sigma", sigma, "Noise level");
    lq_solve->add_option("--L", L, "Label cells");
    add_out(lq_solve, true);
    auto* lq_verify = lq->add_subcommand("verify", "Monte Carlo check of the target");
    lq_verify->add_option("--sol", sol, "Solution JSON")->required()->check(CLI::ExistingFile);
    lq_verify->add_option("--paths", paths, "Monte Carlo paths");
    lq_verify->add_option("--dt", dt, "Euler step");
    lq_verify->add_option("--probes", probes, "Number of probe labels (0: all)");
    add_seed(lq_verify);
    add_out(lq_verify, true);

    auto* arena = app.add_subcommand("arena", "Finite-player simulation")->require_subcommand(1);
    auto* arena_sim = arena->add_subcommand("simulate", "Simulate a strategy profile");
    arena_sim->add_option("--xi", xi, "Interaction matrix")->required()->check(CLI::ExistingFile);
    arena_sim->add_option("--labels", labels, "Labels CSV")->required()->check(CLI::ExistingFile);
    arena_sim->add_option("--profile", profile, "lq:<solution.json> or constant:<a>")->required();
    arena_sim->add_option("--paths", paths, "Monte Carlo paths");
    arena_sim->add_option("--dt", dt, "Euler step");
    arena_sim->add_option("--snapshots", snapshots, "Times at which to record neighborhood measures");
    add_config(arena_sim, false);
    add_seed(arena_sim);
    add_out(arena_sim, true);

    auto* nashgap = app.add_subcommand("nashgap", "Equilibrium gap estimates")->require_subcommand(1);
    auto* sweep = nashgap->add_subcommand("sweep", "Gap sweep over network sizes");
    add_config(sweep, true);
    add_seed(sweep);
    add_out(sweep, true);

    auto* mfg = app.add_subcommand("mfg", "Forward-backward PDE solver")->require_subcommand(1);
    auto* mfg_solve = mfg->add_subcommand("solve", "Solve for an equilibrium field");
    add_config(mfg_solve, true);
    add_out(mfg_solve, true);

    auto* kern = app.add_subcommand("kernel", "Kernel diagnostics")->require_subcommand(1);
    auto* norms = kern->add_subcommand("norms", "Norms of a kernel or matrix");
    norms->add_option("--kernel", kernel, "Kernel JSON file")->check(CLI::ExistingFile);
    norms->add_option("--matrix", matrix, "Matrix text file")->check(CLI::ExistingFile);
    norms->add_option("--mode", mode, "auto, exact or heuristic");
    norms->add_option("--restarts", restarts, "Heuristic restarts");
    norms->add_option("--resolution", resolution, "Label cells for analytic kernels");
    add_seed(norms);
    add_out(norms, true);

    auto* netgen = app.add_subcommand("netgen", "Generate an interaction matrix and labels");
    netgen->add_option("--generator", generator,
                       "erdos_renyi, sampled_weighted, sampled_simple, midpoint_weighted or laplacian")->required();
    netgen->add_option("--n", n, "Players");
    netgen->add_option("--p", p, "Edge probability");
    netgen->add_option("--normalize", normalize, "Divide by p");
    netgen->add_option("--kernel", kernel, "Kernel JSON file")->check(CLI::ExistingFile);
    netgen->add_option("--adjacency", adjacency, "Adjacency matrix for laplacian")->check(CLI::ExistingFile);
    netgen->add_option("--scheme", scheme, "random_per_cell, midpoint or sampled");
    netgen->add_option("--format", format, "dense or edge_list");
    add_seed(netgen);
    add_out(netgen, true);

    auto* emp = app.add_subcommand("emp-convergence", "Empirical neighborhood measure convergence");
    add_config(emp, true);
    add_seed(emp);
    add_out(emp, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << json{{"error", {{"type", "usage"}, {"message", e.what()}, {"exit_code", 2}}}}.dump() << '\n';
        return gmfg::cli::kUsage;
    }

    json& cfg = req.config;
    try {
        if (config_path) {
            cfg = gmfg::cli::load_config(*config_path);
            req.base = fs::absolute(*config_path).parent_path();
        }
    } catch (const std::exception& e) {
        const json rec = gmfg::cli::error_record(e);
        std::cerr << rec.dump() << '\n';
        return gmfg::cli::exit_code_for(e);
    }

    auto command = [&](const char* name) {
        if (!cfg.contains("command")) cfg["command"] = name;
    };
    if (*lq_solve) {
        cfg["command"] = "lq-solve";
        cfg["kernel"] = absolute(*kernel);
        set_path_if(cfg, "initial", initial);
        set_if(cfg, "c", c);
        set_if(cfg, "T", T);
        set_if(cfg, "sigma", sigma);
        set_if(cfg, "L", L);
    } else if (*lq_verify) {
        cfg["command"] = "lq-verify";
        cfg["solution"] = absolute(*sol);
        set_if(cfg, "paths", paths);
        set_if(cfg, "dt", dt);
        set_if(cfg, "probes", probes);
    } else if (*arena_sim) {
        cfg["command"] = "arena-simulate";
        cfg["xi"] = absolute(*xi);
        cfg["labels"] = absolute(*labels);
        const auto colon = profile->find(':');
        cfg["profile"] = profile->substr(0, colon) == "lq" ? "lq:" + absolute(profile->substr(colon + 1)) : *profile;
        set_if(cfg, "paths", paths);
        set_if(cfg, "dt", dt);
        if (!snapshots.empty()) cfg["snapshots"] = snapshots;
    } else if (*sweep) {
        command("nashgap-sweep");
    } else if (*mfg_solve) {
        command("mfg-solve");
    } else if (*norms) {
        cfg["command"] = "kernel-norms";
        set_path_if(cfg, "kernel", kernel);
        set_path_if(cfg, "matrix_file", matrix);
        set_if(cfg, "mode", mode);
        set_if(cfg, "restarts", restarts);
        set_if(cfg, "resolution", resolution);
    } else if (*netgen) {
        cfg["command"] = "netgen";
        set_if(cfg, "generator", generator);
        set_if(cfg, "n", n);
        set_if(cfg, "p", p);
        set_if(cfg, "normalize", normalize);
        set_path_if(cfg, "kernel", kernel);
        set_path_if(cfg, "adjacency", adjacency);
        set_if(cfg, "scheme", scheme);
        set_if(cfg, "format", format);
    } else if (*emp) {
        command("emp-convergence");
    }
    set_if(cfg, "seed", seed);
    if (out) set_out(cfg, *out);

    return gmfg::cli::run_guarded(cfg, req.base, threads, std::cerr);
}

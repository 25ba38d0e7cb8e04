#pragma once

// Text, CSV, JSON and binary formats for matrices, labels, measures, kernels,
// initial laws, closed-form solutions and PDE fields.

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cstring>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <tuple>
#include <variant>
#include <string>
#include <vector>

#include "gmfg/common.hpp"
#include "gmfg/initial_law.hpp"
#include "gmfg/interaction.hpp"
#include "gmfg/kernel.hpp"
#include "gmfg/lqflock.hpp"
#include "gmfg/measure.hpp"
#include "gmfg/mfgpde.hpp"
#include "gmfg/netgen.hpp"

namespace gmfg::io {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

/// Shortest decimal text that round-trips to the same double.
inline std::string fmt(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, r.ptr};
}

inline std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    return out;
}

inline std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    return in;
}

inline json read_json(const fs::path& path) {
    auto in = open_in(path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw InvalidArgument(path.string() + ": " + e.what());
    }
}

inline void write_json(const fs::path& path, const json& j) {
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

// =============================================================================
// Matrices and labels
// =============================================================================

/// Whitespace-separated rows, one per line.
inline void write_dense(std::ostream& out, const Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? " " : "") << fmt(m(i, j));
        out << '\n';
    }
}

inline Eigen::MatrixXd read_dense(std::istream& in) {
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::vector<double> row;
        double v;
        while (ls >> v) row.push_back(v);
        if (!ls.eof()) throw InvalidArgument("matrix text: non-numeric entry in row " + std::to_string(rows.size()));
        if (!row.empty()) rows.push_back(std::move(row));
    }
    require(!rows.empty(), "matrix text is empty");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        require(rows[i].size() == rows[0].size(), "matrix rows must have equal length");
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    return m;
}

/// "i j value" lines (0-based) for nonzero entries, preceded by "# n <size>".
inline void write_edge_list(std::ostream& out, const Eigen::MatrixXd& m) {
    out << "# n " << m.rows() << '\n';
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            if (m(i, j) != 0.0) out << i << ' ' << j << ' ' << fmt(m(i, j)) << '\n';
}

inline Eigen::MatrixXd read_edge_list(std::istream& in) {
    long n = -1;
    std::vector<std::tuple<long, long, double>> entries;
    std::string line;
    long max_index = -1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ls(line.substr(1));
            std::string key;
            if (ls >> key && key == "n") ls >> n;
            continue;
        }
        std::istringstream ls(line);
        long i, j;
        double v;
        if (!(ls >> i >> j >> v)) throw InvalidArgument("edge list: malformed line '" + line + "'");
        require(i >= 0 && j >= 0, "edge list indices must be nonnegative");
        entries.emplace_back(i, j, v);
        max_index = std::max({max_index, i, j});
    }
    if (n < 0) n = max_index + 1;
    require(n > max_index && n > 0, "edge list index exceeds the declared size");
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (const auto& [i, j, v] : entries) m(i, j) = v;
    return m;
}

inline Eigen::MatrixXd read_matrix_file(const fs::path& path) {
    auto in = open_in(path);
    std::string first;
    std::getline(in, first);
    in.seekg(0);
    if (first.rfind("# n", 0) == 0) return read_edge_list(in);
    return read_dense(in);
}

inline void write_labels_csv(std::ostream& out, const LabelAssignment& labels) {
    out << "index,label\n";
    for (std::size_t i = 0; i < labels.labels.size(); ++i) out << i << ',' << fmt(labels.labels[i]) << '\n';
}

inline LabelAssignment read_labels_csv(std::istream& in) {
    LabelAssignment out;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        require(comma != std::string::npos, "labels csv: expected 'index,label'");
        out.labels.push_back(std::stod(line.substr(comma + 1)));
    }
    for (double u : out.labels) require(u >= 0.0 && u <= 1.0, "labels must lie in [0, 1]");
    out.scheme = std::is_sorted(out.labels.begin(), out.labels.end()) ? LabelScheme::midpoint : LabelScheme::sampled;
    return out;
}

// =============================================================================
// Measures
// =============================================================================

inline void write_measure_csv(std::ostream& out, const ParticleMeasure& m) {
    out << "x,w\n";
    for (const auto& a : m.atoms()) out << fmt(a.x) << ',' << fmt(a.w) << '\n';
}

inline void write_measure_csv(std::ostream& out, const LabelStateMeasure& m) {
    out << "u,x,w\n";
    for (const auto& a : m.atoms()) out << fmt(a.u) << ',' << fmt(a.x) << ',' << fmt(a.w) << '\n';
}

inline LabelStateMeasure read_label_state_csv(std::istream& in, bool normalized) {
    std::vector<LabelAtom> atoms;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        LabelAtom a;
        char c1, c2;
        std::istringstream ls(line);
        if (!(ls >> a.u >> c1 >> a.x >> c2 >> a.w) || c1 != ',' || c2 != ',')
            throw InvalidArgument("measure csv: malformed line '" + line + "'");
        atoms.push_back(a);
    }
    return LabelStateMeasure(std::move(atoms), normalized);
}

/// One CSV per time node plus index.csv (node, time, file).
inline void write_flow(const fs::path& dir, const MeasureFlow& flow) {
    fs::create_directories(dir);
    auto index = open_out(dir / "index.csv");
    index << "node,time,file\n";
    for (std::size_t k = 0; k < flow.times().size(); ++k) {
        const std::string name = "node_" + std::to_string(k) + ".csv";
        auto out = open_out(dir / name);
        write_measure_csv(out, flow.nodes()[k]);
        index << k << ',' << fmt(flow.times()[k]) << ',' << name << '\n';
    }
}

// =============================================================================
// Kernels and initial laws
// =============================================================================

inline Eigen::MatrixXd matrix_from_json(const json& j, const char* what) {
    require(j.is_array() && !j.empty(), std::string(what) + " must be a nonempty array of rows");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j[0].size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        require(j[i].is_array() && j[i].size() == j[0].size(), std::string(what) + " rows must have equal length");
        for (std::size_t k = 0; k < j[i].size(); ++k)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = j[i][k].get<double>();
    }
    return m;
}

inline json matrix_to_json(const Eigen::MatrixXd& m) {
    json out = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        out.push_back(row);
    }
    return out;
}

template <class T>
T field(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw InvalidArgument(where + ": missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw InvalidArgument(where + ": field '" + std::string(key) + "' has the wrong type");
    }
}

template <class T>
T field_or(const json& j, const char* key, T fallback, const std::string& where) {
    return j.contains(key) ? field<T>(j, key, where) : fallback;
}

/// {"type": "constant", "p"} | {"type": "two_block", "w": [w11, w12, w21, w22]} |
/// {"type": "min"} | {"type": "step", "matrix": [[...]] or "file"} |
/// {"type": "tabulated", "nodes": [[...]]}. Relative files resolve against `base`.
inline Kernel kernel_from_json(const json& j, const fs::path& base = {}) {
    const std::string where = "kernel";
    const auto type = field<std::string>(j, "type", where);
    if (type == "constant") return Kernel::constant(field<double>(j, "p", where));
    if (type == "two_block") {
        const auto w = field<std::vector<double>>(j, "w", where);
        require(w.size() == 4, "kernel: two_block needs four values");
        return Kernel::two_block(w[0], w[1], w[2], w[3]);
    }
    if (type == "min") return Kernel::min_kernel();
    if (type == "step") {
        if (j.contains("file")) return step_kernel(read_matrix_file(base / field<std::string>(j, "file", where)));
        return step_kernel(matrix_from_json(j.at("matrix"), "kernel matrix"));
    }
    if (type == "tabulated") return Kernel::tabulated(matrix_from_json(j.at("nodes"), "kernel nodes"));
    throw InvalidArgument("kernel: unknown type '" + type + "'");
}

inline json kernel_to_json(const Kernel& w) {
    struct Visitor {
        json operator()(const StepRule& r) const { return {{"type", "step"}, {"matrix", matrix_to_json(r.values)}}; }
        json operator()(const ConstantRule& r) const { return {{"type", "constant"}, {"p", r.p}}; }
        json operator()(const TwoBlockRule& r) const {
            return {{"type", "two_block"}, {"w", {r.w11, r.w12, r.w21, r.w22}}};
        }
        json operator()(const MinRule&) const { return {{"type", "min"}}; }
        json operator()(const TabulatedRule& r) const {
            return {{"type", "tabulated"}, {"nodes", matrix_to_json(r.nodes)}};
        }
    };
    return std::visit(Visitor{}, w.rule());
}

/// {"type": "affine", "offset", "slope"} | {"type": "identity"} |
/// {"type": "point", "x0"} | {"type": "table", "values"} |
/// {"type": "normal", "mean", "sd", "truncation"} | {"type": "uniform", "lo", "hi"} |
/// {"type": "binned", "bins": [[[x, w], ...], ...]}.
inline InitialLaw initial_from_json(const json& j) {
    const std::string where = "initial";
    const auto type = field<std::string>(j, "type", where);
    if (type == "identity") return InitialLaw::identity();
    if (type == "point") return InitialLaw::point(field<double>(j, "x0", where));
    if (type == "affine")
        return InitialLaw(DeterministicLaw{field<double>(j, "offset", where), field<double>(j, "slope", where), {}});
    if (type == "table") return InitialLaw(DeterministicLaw{0.0, 0.0, field<std::vector<double>>(j, "values", where)});
    if (type == "normal")
        return InitialLaw::normal(field<double>(j, "mean", where), field<double>(j, "sd", where),
                                  field_or<double>(j, "truncation", 0.0, where));
    if (type == "uniform") return InitialLaw::uniform(field<double>(j, "lo", where), field<double>(j, "hi", where));
    if (type == "binned") {
        BinnedParticleLaw law;
        for (const auto& bin : j.at("bins")) {
            std::vector<Atom> atoms;
            for (const auto& a : bin) atoms.push_back({a.at(0).get<double>(), a.at(1).get<double>()});
            law.bins.push_back(std::move(atoms));
        }
        return InitialLaw(std::move(law));
    }
    throw InvalidArgument("initial: unknown type '" + type + "'");
}

inline json initial_to_json(const InitialLaw& law) {
    struct Visitor {
        json operator()(const DeterministicLaw& d) const {
            if (!d.table.empty()) return {{"type", "table"}, {"values", d.table}};
            return {{"type", "affine"}, {"offset", d.offset}, {"slope", d.slope}};
        }
        json operator()(const NormalLaw& n) const {
            return {{"type", "normal"}, {"mean", n.mean}, {"sd", n.sd}, {"truncation", n.truncation}};
        }
        json operator()(const UniformLaw& u) const { return {{"type", "uniform"}, {"lo", u.lo}, {"hi", u.hi}}; }
        json operator()(const BinnedParticleLaw& b) const {
            json bins = json::array();
            for (const auto& bin : b.bins) {
                json atoms = json::array();
                for (const auto& a : bin) atoms.push_back({a.x, a.w});
                bins.push_back(atoms);
            }
            return {{"type", "binned"}, {"bins", bins}};
        }
    };
    return std::visit(Visitor{}, law.rep());
}

// =============================================================================
// Closed-form solutions
// =============================================================================

inline json solution_to_json(const LQSolution& sol, const LQParams& params) {
    return {{"c", sol.c},
            {"T", sol.T},
            {"sigma", sol.sigma},
            {"label_cells", sol.grid.cells()},
            {"katz_parameter", sol.katz_parameter},
            {"kernel_l2_grid", sol.kernel_l2},
            {"bound", sol.bound},
            {"margin", sol.margin()},
            {"labels", sol.grid.midpoints()},
            {"target", sol.target},
            {"psi", sol.psi},
            {"kernel", kernel_to_json(params.kernel)},
            {"initial", initial_to_json(params.initial)}};
}

struct StoredSolution {
    LQSolution solution;
    LQParams params;
};

inline StoredSolution solution_from_json(const json& j) {
    const std::string where = "solution";
    StoredSolution out;
    out.params.c = field<double>(j, "c", where);
    out.params.T = field<double>(j, "T", where);
    out.params.sigma = field<double>(j, "sigma", where);
    out.params.kernel = kernel_from_json(j.at("kernel"));
    out.params.initial = initial_from_json(j.at("initial"));
    auto& s = out.solution;
    s.grid = LabelGrid(field<int>(j, "label_cells", where));
    s.c = out.params.c;
    s.T = out.params.T;
    s.sigma = out.params.sigma;
    s.katz_parameter = field<double>(j, "katz_parameter", where);
    s.kernel_l2 = field<double>(j, "kernel_l2_grid", where);
    s.bound = field<double>(j, "bound", where);
    s.target = field<std::vector<double>>(j, "target", where);
    s.psi = field<std::vector<double>>(j, "psi", where);
    require(static_cast<int>(s.target.size()) == s.grid.cells(), "solution: target must have one value per cell");
    return out;
}

// =============================================================================
// PDE fields
// =============================================================================

inline void write_binary(const fs::path& path, const std::vector<double>& data) {
    auto out = open_out(path);
    for (double v : data) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        unsigned char bytes[8];
        for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>(bits >> (8 * b));
        out.write(reinterpret_cast<const char*>(bytes), 8);
    }
}

inline std::vector<double> read_binary(const fs::path& path) {
    auto in = open_in(path);
    std::vector<double> out;
    unsigned char bytes[8];
    while (in.read(reinterpret_cast<char*>(bytes), 8)) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
        double v;
        std::memcpy(&v, &bits, sizeof v);
        out.push_back(v);
    }
    return out;
}

inline json grid_to_json(const SolverGrid& g) {
    return {{"T", g.T},           {"steps", g.steps},     {"labels", g.labels},   {"x_min", g.x_min},
            {"x_max", g.x_max},   {"states", g.states},   {"a_min", g.a_min},     {"a_max", g.a_max},
            {"actions", g.actions}};
}

inline SolverGrid grid_from_json(const json& j) {
    const std::string where = "grid";
    SolverGrid g;
    g.T = field_or<double>(j, "T", g.T, where);
    g.steps = field_or<int>(j, "steps", g.steps, where);
    g.labels = field_or<int>(j, "labels", g.labels, where);
    g.x_min = field_or<double>(j, "x_min", g.x_min, where);
    g.x_max = field_or<double>(j, "x_max", g.x_max, where);
    g.states = field_or<int>(j, "states", g.states, where);
    g.a_min = field_or<double>(j, "a_min", g.a_min, where);
    g.a_max = field_or<double>(j, "a_max", g.a_max, where);
    g.actions = field_or<int>(j, "actions", g.actions, where);
    g.validate();
    return g;
}

/// value.bin, control.bin, density.bin (little-endian float64, layout
/// [time][label][state]), field.json sidecar, and slices.csv at t = 0, T/2, T.
inline std::vector<std::string> write_field(const fs::path& dir, const EquilibriumField& f) {
    fs::create_directories(dir);
    const auto& g = f.grid;
    std::vector<double> density(f.mass.data().size());
    for (std::size_t i = 0; i < density.size(); ++i) density[i] = f.mass.data()[i] / (g.dx() * g.labels);
    write_binary(dir / "value.bin", f.value.data());
    write_binary(dir / "control.bin", f.control.data());
    write_binary(dir / "density.bin", density);
    json side = {{"layout", "[time][label][state] float64 little-endian"},
                 {"shape", {g.steps + 1, g.labels, g.states}},
                 {"grid", grid_to_json(g)},
                 {"times", [&] { std::vector<double> t; for (int k = 0; k <= g.steps; ++k) t.push_back(g.time(k)); return t; }()},
                 {"labels", g.label_grid().midpoints()},
                 {"states", g.centers()},
                 {"density_normalization", "sum over states of density * dx = 1 / labels"},
                 {"iterations", f.iterations},
                 {"converged", f.converged},
                 {"tol", f.tol},
                 {"gaps", f.gaps},
                 {"substeps", f.substeps},
                 {"boundary_mass", f.boundary_mass},
                 {"psd_kernel", f.psd_kernel}};
    write_json(dir / "field.json", side);
    auto out = open_out(dir / "slices.csv");
    out << "t,u,x,value,control,density\n";
    const LabelGrid lg = g.label_grid();
    for (int k : {0, g.steps / 2, g.steps})
        for (int l = 0; l < g.labels; ++l)
            for (int j = 0; j < g.states; ++j)
                out << fmt(g.time(k)) << ',' << fmt(lg.midpoint(l)) << ',' << fmt(g.x(j)) << ',' << fmt(f.value(k, l, j))
                    << ',' << fmt(f.control(k, l, j)) << ',' << fmt(f.density(k, l, j)) << '\n';
    return {"value.bin", "control.bin", "density.bin", "field.json", "slices.csv"};
}

}  // namespace gmfg::io

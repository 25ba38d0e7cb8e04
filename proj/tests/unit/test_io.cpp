#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "gmfg/io.hpp"

using namespace gmfg;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("gmfg_io_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST(Format, ShortestRoundTrip) {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 12345.678, 0.0}) EXPECT_EQ(std::stod(io::fmt(v)), v);
    EXPECT_EQ(io::fmt(0.5), "0.5");
}

TEST(Matrices, DenseAndEdgeListRoundTrip) {
    Eigen::MatrixXd m(3, 3);
    m << 0, 0.1, 2.0 / 3.0, 1e-7, 0, 0, 4, 5, 0;
    std::stringstream dense, edges;
    io::write_dense(dense, m);
    io::write_edge_list(edges, m);
    EXPECT_EQ(io::read_dense(dense), m);
    EXPECT_EQ(io::read_edge_list(edges), m);

    const auto dir = scratch("matrices");
    {
        auto out = io::open_out(dir / "e.txt");
        io::write_edge_list(out, m);
    }
    EXPECT_EQ(io::read_matrix_file(dir / "e.txt"), m);
    {
        auto out = io::open_out(dir / "d.txt");
        io::write_dense(out, m);
    }
    EXPECT_EQ(io::read_matrix_file(dir / "d.txt"), m);
}

TEST(Labels, CsvRoundTrip) {
    const auto a = assign_labels(7, LabelScheme::random_per_cell, 3);
    std::stringstream s;
    io::write_labels_csv(s, a);
    const auto b = io::read_labels_csv(s);
    EXPECT_EQ(a.labels, b.labels);
    std::stringstream bad("index,label\n0,1.5\n");
    EXPECT_THROW(io::read_labels_csv(bad), InvalidArgument);
}

TEST(Measures, LabelStateCsvRoundTrip) {
    const LabelStateMeasure m({{0.1, -1.0, 0.25}, {0.7, 2.0, 0.75}}, true);
    std::stringstream s;
    io::write_measure_csv(s, m);
    const auto back = io::read_label_state_csv(s, true);
    ASSERT_EQ(back.atoms().size(), 2u);
    for (std::size_t k = 0; k < 2; ++k) {
        EXPECT_EQ(back.atoms()[k].u, m.atoms()[k].u);
        EXPECT_EQ(back.atoms()[k].x, m.atoms()[k].x);
        EXPECT_EQ(back.atoms()[k].w, m.atoms()[k].w);
    }
}

TEST(Kernels, JsonRoundTripPreservesValues) {
    Eigen::MatrixXd step(2, 2);
    step << 0.3, 1.0, 1.0, 0.0;
    for (const Kernel& w : {Kernel::constant(0.4), Kernel::two_block(1.6, 0.4, 0.2, 1.0), Kernel::min_kernel(),
                            step_kernel(step), Kernel::tabulated(step)}) {
        const Kernel back = io::kernel_from_json(io::kernel_to_json(w));
        for (double u : {0.05, 0.3, 0.5, 0.99})
            for (double v : {0.0, 0.45, 0.8}) EXPECT_EQ(back(u, v), w(u, v)) << w.name();
    }
    EXPECT_THROW(io::kernel_from_json(io::json{{"type", "bogus"}}), InvalidArgument);
    EXPECT_THROW(io::kernel_from_json(io::json{{"type", "constant"}}), InvalidArgument);
}

TEST(InitialLaws, JsonRoundTripPreservesMeans) {
    for (const InitialLaw& law : {InitialLaw::identity(), InitialLaw::point(1.5), InitialLaw::normal(0.3, 2.0, 3.0),
                                  InitialLaw::uniform(-1.0, 2.0), InitialLaw(DeterministicLaw{0, 0, {1.0, -1.0}})}) {
        const InitialLaw back = io::initial_from_json(io::initial_to_json(law));
        for (double u : {0.1, 0.6}) EXPECT_EQ(back.conditional_mean(u), law.conditional_mean(u));
    }
}

TEST(Solutions, JsonRoundTrip) {
    LQParams p;
    p.c = 1.3;
    p.T = 0.9;
    p.sigma = 0.2;
    p.kernel = Kernel::two_block(1.6, 0.4, 0.2, 1.0);
    p.initial = InitialLaw::identity();
    const auto sol = solve_lq(p, 12);
    const auto dir = scratch("solution");
    io::write_json(dir / "s.json", io::solution_to_json(sol, p));
    const auto back = io::solution_from_json(io::read_json(dir / "s.json"));
    EXPECT_EQ(back.solution.target, sol.target);
    EXPECT_EQ(back.solution.psi, sol.psi);
    EXPECT_EQ(back.solution.bound, sol.bound);
    EXPECT_EQ(back.params.c, 1.3);
    for (double u : {0.01, 0.5, 0.93}) EXPECT_EQ(back.solution.target_at(u), sol.target_at(u));
}

TEST(Fields, BinaryRoundTripAndSidecar) {
    const std::vector<double> data{0.0, -1.5, 1e-300, 3.0 / 7.0};
    const auto dir = scratch("field");
    io::write_binary(dir / "x.bin", data);
    EXPECT_EQ(fs::file_size(dir / "x.bin"), 32u);
    EXPECT_EQ(io::read_binary(dir / "x.bin"), data);

    SolverGrid g;
    g.steps = 4;
    g.labels = 2;
    g.states = 10;
    g.actions = 11;
    EXPECT_EQ(io::grid_to_json(io::grid_from_json(io::grid_to_json(g))), io::grid_to_json(g));
    const auto f = solve_fixed_point(ModelSpec<LqRewards>{LqRewards{}, 0.3, Kernel::constant(1.0), InitialLaw::identity(), g});
    const auto names = io::write_field(dir, f);
    for (const auto& n : names) EXPECT_TRUE(fs::exists(dir / n)) << n;
    EXPECT_EQ(io::read_binary(dir / "value.bin"), f.value.data());
    const auto side = io::read_json(dir / "field.json");
    EXPECT_EQ(side.at("iterations").get<int>(), f.iterations);
}

TEST(Json, ParseErrorsAreSchemaErrors) {
    const auto dir = scratch("json");
    {
        auto out = io::open_out(dir / "bad.json");
        out << "{ not json";
    }
    EXPECT_THROW(io::read_json(dir / "bad.json"), InvalidArgument);
    EXPECT_THROW(io::read_json(dir / "missing.json"), Error);
}

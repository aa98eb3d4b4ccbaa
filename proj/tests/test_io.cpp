#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "flowtopo/io.hpp"

using namespace flowtopo;
using Catch::Approx;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

int count_lines(const std::string& text) {
    int n = 0;
    for (char c : text)
        if (c == '\n') ++n;
    return n;
}

bool loop_has_point(const std::vector<std::array<double, 2>>& loop, double x, double y) {
    for (const auto& pt : loop)
        if (std::abs(pt[0] - x) < 1e-12 && std::abs(pt[1] - y) < 1e-12) return true;
    return false;
}

std::array<double, 4> loop_bbox(const std::vector<std::array<double, 2>>& loop) {
    std::array<double, 4> box = {1e300, 1e300, -1e300, -1e300};
    for (const auto& pt : loop) {
        box[0] = std::min(box[0], pt[0]);
        box[1] = std::min(box[1], pt[1]);
        box[2] = std::max(box[2], pt[0]);
        box[3] = std::max(box[3], pt[1]);
    }
    return box;
}

struct DxfPoly {
    bool closed = false;
    std::vector<std::array<double, 2>> pts;
};

// Independent reader for the subset of DXF R12 the exporter emits: walks the
// code/value record stream and collects POLYLINE vertex runs.
std::vector<DxfPoly> read_dxf(const std::string& path, bool* saw_entities = nullptr,
                              bool* saw_eof = nullptr) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::vector<std::pair<int, std::string>> recs;
    std::string code, value;
    while (std::getline(in, code) && std::getline(in, value))
        recs.emplace_back(std::stoi(code), value);

    std::vector<DxfPoly> polys;
    double x = 0.0;
    bool in_vertex = false;
    for (const auto& [c, v] : recs) {
        if (c == 0) {
            in_vertex = false;
            if (v == "POLYLINE") polys.emplace_back();
            if (v == "VERTEX") in_vertex = true;
            if (saw_eof && v == "EOF") *saw_eof = true;
        } else if (c == 2 && v == "ENTITIES") {
            if (saw_entities) *saw_entities = true;
        } else if (c == 70 && !polys.empty() && !in_vertex) {
            polys.back().closed = (std::stoi(v) & 1) != 0;
        } else if (c == 10 && in_vertex) {
            x = std::stod(v);
        } else if (c == 20 && in_vertex) {
            polys.back().pts.push_back({x, std::stod(v)});
        }
    }
    return polys;
}

} // namespace

TEST_CASE("config text with derived width fills documented defaults", "[io]") {
    const RunConfig c = parse_config("probtype = 1\nnely = 102\nvolfrac = 0.3333\n");
    CHECK(c.probtype == 1);
    CHECK(c.nely == 102);
    CHECK(c.nelx == 102); // square elements on the unit square
    CHECK(c.volfrac == Approx(0.3333));
    CHECK(c.Lx == 1.0);
    CHECK(c.Ly == 1.0);
    CHECK(c.rho == Approx(1e-3));
    CHECK(c.mu == 1.0);
    CHECK(c.alphamax == Approx(2.5 / 1e-4));
    CHECK(c.alphamin == Approx(2.5 / 1e4));
    CHECK(c.ainit == Approx(2.5 / 1e-2));
    CHECK(c.optimizer == OptimizerKind::oc);
    CHECK(c.qanum == 4);
    CHECK(c.maxiter == 150);
    CHECK(c.conit == 50);
    CHECK_FALSE(c.reusejac);
    CHECK(c.supgtest == SupgTest::gradu);
    CHECK(c.stabh == StabLength::geometric);
}

TEST_CASE("empty config text means the default double pipe", "[io]") {
    const RunConfig c = parse_config("");
    CHECK(c.probtype == 1);
    CHECK(c.nelx == 102);
    CHECK(c.nely == 102);
    CHECK(c.volfrac == Approx(1.0 / 3.0));
    CHECK(c.mode == DragLiftMode::min_drag);
    CHECK(c.seed == 0u);
}

TEST_CASE("problem type is honored regardless of key order", "[io]") {
    const RunConfig c = parse_config("nely = 60\n# a comment\n\nprobtype = 2 # bend\n");
    CHECK(c.probtype == 2);
    CHECK(c.nely == 60);    // user key overrides the type default 100
    CHECK(c.nelx == 60);
    CHECK(c.volfrac == Approx(0.25));
    const RunConfig dup = parse_config("nely = 10\nnely = 20\n");
    CHECK(dup.nely == 20); // last assignment wins
}

TEST_CASE("per-type defaults for the constrained problems", "[io]") {
    const RunConfig r = parse_config("probtype = 4\n");
    CHECK(r.Lx == 5.0);
    CHECK(r.nely == 50);
    CHECK(r.nelx == 250);
    CHECK(r.volfrac == Approx(0.6));
    CHECK(r.rho == 1.0);
    CHECK(r.reynolds == 1.0);
    CHECK(r.mu == Approx(1.0)); // Uin * Ly * rho / Re
    CHECK(r.alphamin == 0.0);
    CHECK(r.alphamax == Approx(1e5));
    CHECK(r.beta == Approx(15.0));
    CHECK(r.optimizer == OptimizerKind::mma);

    const RunConfig d = parse_config("probtype = 5\n");
    const double lc = std::sqrt(0.85 * 1.5 * 0.5);
    CHECK(d.Lx == 3.0);
    CHECK(d.nelx == 300);
    CHECK(d.volfrac == Approx(0.85));
    CHECK(d.reynolds == 10.0);
    CHECK(d.mu == Approx(lc / 10.0));
    CHECK(characteristic_length(d) == Approx(lc));
    CHECK(d.alphamax == Approx(1e4).epsilon(1e-12));
    CHECK(d.alphamin == 0.0);
    CHECK(d.qinit == Approx(10.0));
    CHECK(d.qanum == 1);
    CHECK(d.conit == 100);
    CHECK(d.maxiter == 100);
    CHECK(d.mode == DragLiftMode::min_drag);
}

TEST_CASE("Reynolds key derives the viscosity from the inlet scale", "[io]") {
    const RunConfig pipe = parse_config("probtype = 1\nRe = 40\n");
    CHECK(pipe.rho == 1.0); // Re given without rho resets the toy density
    CHECK(pipe.mu == Approx((1.0 / 6.0) / 40.0));
    CHECK(pipe.alphamax == Approx(2.5 * pipe.mu / 1e-4));

    const RunConfig bend = parse_config("probtype = 2\nRe = 40\n");
    CHECK(bend.mu == Approx(0.2 / 40.0));

    const RunConfig fixed = parse_config("probtype = 2\nRe = 40\nmu = 0.7\nrho = 2\n");
    CHECK(fixed.mu == 0.7); // explicit values win over the derivation
    CHECK(fixed.rho == 2.0);
}

TEST_CASE("config errors name the key and line", "[io]") {
    using Catch::Matchers::ContainsSubstring;
    CHECK_THROWS_WITH(parse_config("volfrac = 1.5\n"),
                      ContainsSubstring("V_f ∈ ]0;1[") && ContainsSubstring("line 1"));
    CHECK_THROWS_WITH(parse_config("nely = 102\nfoo = 3\n"),
                      ContainsSubstring("unknown key 'foo'") &&
                          ContainsSubstring("line 2"));
    CHECK_THROWS_WITH(parse_config("nely = abc\n"),
                      ContainsSubstring("'abc' is not an integer") &&
                          ContainsSubstring("nely"));
    CHECK_THROWS_WITH(parse_config("mu = fast\n"),
                      ContainsSubstring("'fast' is not a number"));
    CHECK_THROWS_WITH(parse_config("# fine\n\nmvlim = 0\n"),
                      ContainsSubstring("line 3") && ContainsSubstring("]0;1]"));
    CHECK_THROWS_WITH(parse_config("probtype = 7\n"),
                      ContainsSubstring("between 1 and 5"));
    CHECK_THROWS_WITH(parse_config("optimizer = sgd\n"),
                      ContainsSubstring("expected oc or mma"));
    CHECK_THROWS_WITH(parse_config("nely 102\n"),
                      ContainsSubstring("expected 'key = value'"));
    CHECK_THROWS_AS(parse_config("volfrac = 1.5\n"), ConfigError);
}

TEST_CASE("controls carry the continuation schedule and solver knobs", "[io]") {
    const RunConfig c = parse_config(
        "probtype = 1\nqinit = 12\nqanum = 3\nnltol = 1e-9\nnlmax = 40\n"
        "mvlim = 0.05\nchlim = 1e-4\nchnum = 7\nreusejac = 1\n"
        "supgtest = streamline\nstabh = diagonal\n");
    const ProblemDefinition prob = build_problem(c);
    const RunControls ctl = config_controls(c, prob);
    REQUIRE(ctl.schedule.q_values.size() == 3);
    CHECK(ctl.schedule.q_values[0] == Approx(12.0));
    CHECK(ctl.schedule.q_values[1] == Approx(6.0));
    CHECK(ctl.schedule.q_values[2] == Approx(1.2));
    CHECK(ctl.newton.tol == Approx(1e-9));
    CHECK(ctl.newton.max_iter == 40);
    CHECK(ctl.mvlim == Approx(0.05));
    CHECK(ctl.chlim == Approx(1e-4));
    CHECK(ctl.chnum == 7);
    CHECK(ctl.reuse_jacobian);
    CHECK(ctl.discretization.supg_test == SupgTest::streamline);
    CHECK(ctl.discretization.stab_length == StabLength::diagonal);

    // without qinit the start factor comes from the initial penalty
    const RunConfig def = parse_config("probtype = 1\n");
    const RunControls dctl = config_controls(def, build_problem(def));
    REQUIRE(dctl.schedule.q_values.size() == 4);
    CHECK(dctl.schedule.q_values[0] ==
          Approx(q_init(def.ainit, def.alphamax, def.alphamin, def.volfrac)));
    CHECK(dctl.schedule.q_values[1] == Approx(dctl.schedule.q_values[0] / 2.0));
    CHECK(dctl.schedule.q_values[3] == Approx(dctl.schedule.q_values[0] / 20.0));
}

TEST_CASE("seeded starts are reproducible, bounded, and seed-sensitive", "[io]") {
    const RunConfig c = parse_config("probtype = 1\nnely = 12\nseed = 7\nxinit = 0.5\n");
    const ProblemDefinition prob = build_problem(c);
    const Eigen::VectorXd a = seeded_initial_design(c, prob);
    const Eigen::VectorXd b = seeded_initial_design(c, prob);
    REQUIRE(a.size() == prob.mesh.num_elements());
    CHECK(a == b);
    CHECK(a.minCoeff() >= 0.45 - 1e-15);
    CHECK(a.maxCoeff() <= 0.55 + 1e-15);
    CHECK(std::abs(a.mean() - 0.5) < 0.01);

    RunConfig other = c;
    other.seed = 8;
    CHECK((seeded_initial_design(other, prob) - a).cwiseAbs().maxCoeff() > 1e-4);

    const RunControls ctl = config_controls(c, prob);
    REQUIRE(ctl.init_design.size() == a.size()); // seed > 0 installs the start
    CHECK(ctl.init_design == a);
}

TEST_CASE("building the flow reversal problem measures the open channel", "[io]") {
    const RunConfig withref = parse_config("probtype = 4\nnely = 10\npref = 2\n");
    const ProblemDefinition fixed = build_problem(withref);
    REQUIRE(fixed.constraints.size() == 2);
    CHECK(fixed.constraints[1].kind == FunctionalKind::inlet_pressure);
    CHECK(fixed.constraints[1].bound == Approx(15.0 * 2.0));

    const RunConfig c = parse_config("probtype = 4\nnely = 10\n");
    const ProblemDefinition prob = build_problem(c);
    REQUIRE(prob.constraints.size() == 2);
    // Poiseuille estimate for the straight channel: dp = 12 mu Umean L / H^2
    const double dp_ref = prob.constraints[1].bound / c.beta;
    CHECK(dp_ref == Approx(12.0 * c.mu * (2.0 / 3.0) * 5.0).epsilon(0.2));
    CHECK(prob.optimizer == OptimizerKind::mma);
}

TEST_CASE("problem dispatch matches the configured type", "[io]") {
    const RunConfig pipe = parse_config("probtype = 1\nnely = 12\n");
    CHECK(build_problem(pipe).name == "double_pipe");
    const RunConfig bend = parse_config("probtype = 2\nnely = 10\n");
    CHECK(build_problem(bend).name == "pipe_bend");
    const RunConfig ball = parse_config("probtype = 3\nnely = 10\n");
    CHECK(build_problem(ball).name == "rugby_ball");
    const RunConfig lift =
        parse_config("probtype = 5\nnely = 12\nmode = lift\nbeta = 2\ndragref = 1.5\n");
    const ProblemDefinition prob = build_problem(lift);
    CHECK(prob.name == "max_lift");
    CHECK(prob.objective == FunctionalKind::lift);
}

TEST_CASE("iteration log line has the pinned format", "[io]") {
    IterationRecord r;
    r.iter = 12;
    r.objective = 27.1828;
    r.volume = 1.0 / 3.0;
    r.change = 0.00123;
    r.q_alpha = 5.9;
    r.greyscale = 12.34;
    r.newton_iterations = 4;
    CHECK(iteration_log_line(r) ==
          "It: 12 Obj: 2.7183e+01 Vol: 0.333 ch: 1.230e-03 qa: 5.90 Md: 12.3 nl: 4");
}

TEST_CASE("field exports have one row per entity and consistent values", "[io]") {
    const Mesh mesh(4, 4, 1.0, 1.0);
    FlowParams params;
    params.mu = 1.0;
    params.alpha_min = 0.0;
    params.alpha_max = 100.0;
    params.q_alpha = 1.0;
    Eigen::VectorXd state = Eigen::VectorXd::Zero(mesh.num_dofs());
    Eigen::VectorXd design = Eigen::VectorXd::Ones(mesh.num_elements());

    write_nodes_csv("tmp_io_nodes.csv", mesh, state);
    const std::string nodes = slurp("tmp_io_nodes.csv");
    CHECK(count_lines(nodes) == mesh.num_nodes() + 1);
    CHECK(nodes.rfind("x,y,u1,u2,p,umag\n", 0) == 0);
    CHECK(nodes.find("0,0,0,0,0,0\n") != std::string::npos); // zero state, zero speed

    write_elements_csv("tmp_io_elements.csv", mesh, design, params);
    const std::string elems = slurp("tmp_io_elements.csv");
    CHECK(count_lines(elems) == mesh.num_elements() + 1);
    CHECK(elems.rfind("xc,yc,gamma,alpha\n", 0) == 0);
    CHECK(elems.find(",1,0\n") != std::string::npos); // gamma 1 has zero penalty

    // uniform speed 5 everywhere: |(3,4)| interpolates to itself on the midline
    for (int n = 0; n < mesh.num_nodes(); ++n) {
        state[mesh.u1_dof(n)] = 3.0;
        state[mesh.u2_dof(n)] = 4.0;
    }
    design[mesh.element_index(2, 1)] = 0.2; // straddles the midline rows 1 and 2
    design[mesh.element_index(2, 2)] = 0.4;
    write_cutline_csv("tmp_io_cutline.csv", mesh, state, design);
    std::ifstream cut("tmp_io_cutline.csv");
    std::string line;
    std::getline(cut, line);
    CHECK(line == "s,umag,gamma");
    int rows = 0;
    std::vector<double> s, umag, gamma;
    while (std::getline(cut, line)) {
        double a, b, c;
        REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf", &a, &b, &c) == 3);
        s.push_back(a);
        umag.push_back(b);
        gamma.push_back(c);
        ++rows;
    }
    REQUIRE(rows == mesh.nelx());
    for (int i = 0; i < rows; ++i) {
        CHECK(s[i] == Approx((i + 0.5) * mesh.dx()));
        CHECK(umag[i] == Approx(5.0));
    }
    CHECK(gamma[2] == Approx(0.3)); // average of the two midline rows
    CHECK(gamma[0] == Approx(1.0));
}

TEST_CASE("design files round-trip bitwise", "[io]") {
    const Mesh mesh(5, 3, 1.25, 0.75);
    std::mt19937 gen(123);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    Eigen::VectorXd design(mesh.num_elements());
    for (int e = 0; e < design.size(); ++e) design[e] = uniform(gen);

    write_design_csv("tmp_io_design_a.csv", mesh, design);
    const DesignFile d = read_design_csv("tmp_io_design_a.csv");
    CHECK(d.nelx == 5);
    CHECK(d.nely == 3);
    CHECK(d.Lx == 1.25);
    CHECK(d.Ly == 0.75);
    REQUIRE(d.values.size() == design.size());
    CHECK(d.values == design); // exact, not approximate

    write_design_csv("tmp_io_design_b.csv", Mesh(d.nelx, d.nely, d.Lx, d.Ly), d.values);
    CHECK(slurp("tmp_io_design_a.csv") == slurp("tmp_io_design_b.csv"));

    std::ofstream bad("tmp_io_design_bad.csv");
    bad << "# nelx 2\n# nely 2\n# Lx 1 Ly 1\n0.5\n0.5\n0.5\n";
    bad.close();
    CHECK_THROWS_AS(read_design_csv("tmp_io_design_bad.csv"), IoError);
    CHECK_THROWS_AS(read_design_csv("tmp_io_missing.csv"), IoError);
}

TEST_CASE("history records the seed and one row per iteration", "[io]") {
    IterationRecord a;
    a.iter = 1;
    a.objective = 10.0;
    a.constraint_values = {0.3, 0.01};
    IterationRecord b;
    b.iter = 2;
    b.objective = 9.5;
    b.constraint_values = {0.31, -0.02};
    write_history_csv("tmp_io_history.csv", {a, b}, 42);
    const std::string text = slurp("tmp_io_history.csv");
    CHECK(text.rfind("# seed 42\n", 0) == 0);
    CHECK(count_lines(text) == 4); // seed, header, two rows
    CHECK(text.find("0.3;0.01") != std::string::npos);
    CHECK(text.find("0.31;-0.02") != std::string::npos);
}

TEST_CASE("contours: empty field, lone element, boundary, and saddle", "[io]") {
    const Mesh mesh(4, 4, 1.0, 1.0);
    Eigen::VectorXd design = Eigen::VectorXd::Ones(mesh.num_elements());

    CHECK(extract_contour(mesh, design).loops.empty()); // all fluid

    SECTION("single interior solid element yields one diamond loop") {
        design[mesh.element_index(1, 1)] = 0.0;
        const DesignContour c = extract_contour(mesh, design);
        REQUIRE(c.loops.size() == 1);
        const auto& loop = c.loops.front();
        REQUIRE(loop.size() == 5); // four crossings plus closure
        CHECK(loop.front() == loop.back());
        // crossings halfway between the solid center and its four neighbors
        CHECK(loop_has_point(loop, 0.25, 0.375));
        CHECK(loop_has_point(loop, 0.50, 0.375));
        CHECK(loop_has_point(loop, 0.375, 0.25));
        CHECK(loop_has_point(loop, 0.375, 0.50));
    }

    SECTION("corner solid element closes against the domain edge") {
        design[mesh.element_index(0, 0)] = 0.0;
        const DesignContour c = extract_contour(mesh, design);
        REQUIRE(c.loops.size() == 1);
        const auto& loop = c.loops.front();
        CHECK(loop.front() == loop.back());
        CHECK(loop_has_point(loop, 0.0, 0.125));
        CHECK(loop_has_point(loop, 0.125, 0.0));
        CHECK(loop_has_point(loop, 0.25, 0.125));
        CHECK(loop_has_point(loop, 0.125, 0.25));
        const auto box = loop_bbox(loop);
        CHECK(box[0] >= 0.0);
        CHECK(box[1] >= 0.0);
    }

    SECTION("all solid hugs the whole boundary") {
        design.setZero();
        const DesignContour c = extract_contour(mesh, design);
        REQUIRE(c.loops.size() == 1);
        const auto box = loop_bbox(c.loops.front());
        CHECK(box[0] == Approx(0.0));
        CHECK(box[1] == Approx(0.0));
        CHECK(box[2] == Approx(1.0));
        CHECK(box[3] == Approx(1.0));
    }

    SECTION("threshold moves the crossing point") {
        design[mesh.element_index(1, 1)] = 0.3;
        const DesignContour c = extract_contour(mesh, design, 0.65);
        REQUIRE(c.loops.size() == 1);
        // from 0.3 to 1.0 the level 0.65 sits exactly halfway: x = 0.25
        CHECK(loop_has_point(c.loops.front(), 0.25, 0.375));
        CHECK(extract_contour(mesh, design, 0.2).loops.empty()); // below the dip
    }

    SECTION("checkerboard saddle follows the cell-center average") {
        const Mesh small(2, 2, 1.0, 1.0);
        Eigen::VectorXd checker = Eigen::VectorXd::Ones(4);
        checker[small.element_index(0, 0)] = 0.0;
        checker[small.element_index(1, 1)] = 0.0;
        // the central cell averages to 0.5: above a 0.45 level the center is
        // fluid and the diagonal blobs separate, above them it joins them
        const DesignContour apart = extract_contour(small, checker, 0.45);
        REQUIRE(apart.loops.size() == 2);
        for (const auto& loop : apart.loops) {
            CHECK(loop.front() == loop.back());
            CHECK(loop.size() >= 4);
        }
        // the two bounding boxes sit on opposite diagonal corners
        const auto b0 = loop_bbox(apart.loops[0]);
        const auto b1 = loop_bbox(apart.loops[1]);
        CHECK(std::abs((b0[0] + b0[2]) - (b1[0] + b1[2])) > 0.4);

        const DesignContour joined = extract_contour(small, checker, 0.55);
        REQUIRE(joined.loops.size() == 1);
        CHECK(joined.loops.front().front() == joined.loops.front().back());
    }

    CHECK_THROWS_AS(extract_contour(mesh, Eigen::VectorXd::Ones(3)), ConfigError);
    CHECK_THROWS_AS(extract_contour(mesh, design, 0.0), ConfigError);
    CHECK_THROWS_AS(extract_contour(mesh, design, 1.0), ConfigError);
}

TEST_CASE("DXF export round-trips through an independent reader", "[io]") {
    DesignContour contour;
    contour.Lx = 1.0;
    contour.Ly = 1.0;
    contour.loops = {{{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}, {0.0, 0.0}}};
    export_dxf(contour, "tmp_io_square.dxf");

    bool entities = false, eof = false;
    const auto polys = read_dxf("tmp_io_square.dxf", &entities, &eof);
    CHECK(entities);
    CHECK(eof);
    REQUIRE(polys.size() == 1);
    CHECK(polys[0].closed);
    REQUIRE(polys[0].pts.size() == 5); // unit square including the closing vertex
    // mesh y grows downward, so the file flips it: (0,0) lands at (0,1)
    CHECK(polys[0].pts.front()[0] == Approx(0.0));
    CHECK(polys[0].pts.front()[1] == Approx(1.0));
    CHECK(polys[0].pts[2][0] == Approx(1.0));
    CHECK(polys[0].pts[2][1] == Approx(0.0));

    const std::string text = slurp("tmp_io_square.dxf");
    CHECK(text.find("SECTION") != std::string::npos);
    CHECK(text.find("SEQEND") != std::string::npos);
    CHECK(text.find("ENDSEC") != std::string::npos);

    // full pipeline: contour a lone solid element and compare shapes
    const Mesh mesh(4, 4, 1.0, 1.0);
    Eigen::VectorXd design = Eigen::VectorXd::Ones(mesh.num_elements());
    design[mesh.element_index(1, 1)] = 0.0;
    const DesignContour c = extract_contour(mesh, design);
    export_dxf(c, "tmp_io_blob.dxf");
    const auto blob = read_dxf("tmp_io_blob.dxf");
    REQUIRE(blob.size() == 1);
    REQUIRE(blob[0].pts.size() == c.loops[0].size());
    for (size_t i = 0; i < blob[0].pts.size(); ++i) {
        CHECK(blob[0].pts[i][0] == Approx(c.loops[0][i][0]));
        CHECK(blob[0].pts[i][1] == Approx(1.0 - c.loops[0][i][1]));
    }
}

TEST_CASE("study tables and sweeps serialize with labels", "[io]") {
    ErrorMeasures em;
    em.reynolds = 20.0;
    em.darcy = 1e-4;
    em.eps_u_solid = 0.03;
    em.converged = true;
    write_accuracy_csv("tmp_io_accuracy.csv", {em}, "porous");
    const std::string acc = slurp("tmp_io_accuracy.csv");
    CHECK(count_lines(acc) == 2);
    CHECK(acc.find("porous") != std::string::npos);
    CHECK(acc.find("0.0001") != std::string::npos);

    SweepPoint pt;
    pt.alpha_max = 2.5e4;
    pt.objective = 30.0;
    pt.converged = true;
    write_sweep_csv("tmp_io_sweep.csv", {pt});
    CHECK(count_lines(slurp("tmp_io_sweep.csv")) == 2);

    CrossCheckTable table;
    table.values = Eigen::MatrixXd::Zero(2, 2);
    table.values << 1.0, 2.0, 3.0, 4.0;
    table.ok.setConstant(2, 2, true);
    table.ok(1, 1) = false;
    write_table_csv("tmp_io_table.csv", table, {"Re10", "Re100"}, {"d10", "d100"});
    const std::string tab = slurp("tmp_io_table.csv");
    CHECK(tab.find("condition,d10,d100") == 0);
    CHECK(tab.find("Re10,1,2") != std::string::npos);
    CHECK(tab.find("Re100,3,nan") != std::string::npos);
    CHECK_THROWS_AS(write_table_csv("tmp_io_table.csv", table, {"one"}, {"d10", "d100"}),
                    ConfigError);
}

TEST_CASE("export_fields writes the full artifact set", "[io]") {
    const Mesh mesh(4, 4, 1.0, 1.0);
    FlowParams params;
    params.alpha_max = 10.0;
    const Eigen::VectorXd state = Eigen::VectorXd::Zero(mesh.num_dofs());
    const Eigen::VectorXd design = Eigen::VectorXd::Constant(mesh.num_elements(), 0.5);
    export_fields(mesh, state, design, params, "tmp_io_run");
    for (const char* suffix : {"_nodes.csv", "_elements.csv", "_cutline.csv", "_design.csv"}) {
        std::ifstream in(std::string("tmp_io_run") + suffix);
        CHECK(in.good());
    }
    const DesignFile d = read_design_csv("tmp_io_run_design.csv");
    CHECK(d.values.size() == mesh.num_elements());
}

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "flowtopo/studies.hpp"

using namespace flowtopo;
using Catch::Approx;

TEST_CASE("obstacle channel partitions every element exactly once", "[studies]") {
    ObstacleChannelConfig cfg;
    cfg.nely = 16;
    const ObstacleChannel geo = make_obstacle_channel(cfg);

    REQUIRE(geo.mesh.nelx() == 48);
    REQUIRE(geo.mesh.nely() == 16);
    // 8x8 box with 2-element walls on the bottom wall of the channel
    REQUIRE(geo.cfg.wall_thickness == 2);
    REQUIRE(geo.solid.size() == 48);
    REQUIRE(geo.cavity.size() == 16);
    REQUIRE(geo.fluid.size() == 48 * 16 - 64);

    std::vector<int> all;
    all.insert(all.end(), geo.fluid.begin(), geo.fluid.end());
    all.insert(all.end(), geo.solid.begin(), geo.solid.end());
    all.insert(all.end(), geo.cavity.begin(), geo.cavity.end());
    std::sort(all.begin(), all.end());
    REQUIRE(static_cast<int>(all.size()) == geo.mesh.num_elements());
    REQUIRE(std::adjacent_find(all.begin(), all.end()) == all.end());

    // the binary design is solid exactly on the walls
    const Eigen::VectorXd g = geo.design();
    for (int e : geo.solid) REQUIRE(g[e] == 0.0);
    for (int e : geo.fluid) REQUIRE(g[e] == 1.0);
    for (int e : geo.cavity) REQUIRE(g[e] == 1.0);

    // the discrete model pins strictly more dofs than the continuous one
    REQUIRE(geo.bc_discrete.dofs.size() > geo.bc_continuous.dofs.size());

    // pressure probes average to one
    double win = 0.0, wout = 0.0;
    for (const auto& [dof, w] : geo.inlet_mean) win += w;
    for (const auto& [dof, w] : geo.outlet_mean) wout += w;
    REQUIRE(win == Approx(1.0));
    REQUIRE(wout == Approx(1.0));
}

TEST_CASE("walls default to a tenth of the channel height", "[studies]") {
    ObstacleChannelConfig cfg;
    cfg.nely = 100;
    const ObstacleChannel geo = make_obstacle_channel(cfg);
    REQUIRE(geo.cfg.wall_thickness == 10);
    // 50x50 box, 10-element walls: cavity is the inner 30x30 block
    REQUIRE(geo.cavity.size() == 900);
    REQUIRE(geo.solid.size() == 2500 - 900);
}

TEST_CASE("impossible obstacle geometries are rejected", "[studies]") {
    ObstacleChannelConfig cfg;
    cfg.nely = 6;
    REQUIRE_THROWS_AS(make_obstacle_channel(cfg), ConfigError);

    cfg = {};
    cfg.nely = 16;
    cfg.box_start = 46; // right face would land outside the mesh
    REQUIRE_THROWS_AS(make_obstacle_channel(cfg), ConfigError);

    cfg = {};
    cfg.nely = 16;
    cfg.box_height = 16; // box would swallow the full channel height
    REQUIRE_THROWS_AS(make_obstacle_channel(cfg), ConfigError);

    cfg = {};
    cfg.nely = 16;
    cfg.wall_thickness = 4; // 2 * 4 >= box width of 8: no cavity left
    REQUIRE_THROWS_AS(make_obstacle_channel(cfg), ConfigError);
}

TEST_CASE("continuous and discrete models agree when nothing is solid",
          "[studies]") {
    ObstacleChannelConfig cfg;
    cfg.nely = 12;
    ObstacleChannel geo = make_obstacle_channel(cfg);

    // strip the obstacle: everything is fluid and both models pin the same dofs
    geo.solid.clear();
    geo.cavity.clear();
    geo.fluid.resize(geo.mesh.num_elements());
    std::iota(geo.fluid.begin(), geo.fluid.end(), 0);
    geo.bc_discrete = geo.bc_continuous;

    const FlowParams p = study_params(10.0, 1e-4, PenaltyScaling::porous);
    Eigen::VectorXd s_disc = Eigen::VectorXd::Zero(geo.mesh.num_dofs());
    Eigen::VectorXd s_cont = Eigen::VectorXd::Zero(geo.mesh.num_dofs());
    REQUIRE(solve_obstacle_flow(geo, true, p, s_disc).converged);
    REQUIRE(solve_obstacle_flow(geo, false, p, s_cont).converged);

    const double rel = (s_cont - s_disc).norm() / (1.0 + s_disc.norm());
    REQUIRE(rel <= 1e-8);
}

TEST_CASE("penalty scalings produce the intended parameters", "[studies]") {
    const FlowParams porous = study_params(20.0, 1e-4, PenaltyScaling::porous);
    REQUIRE(porous.rho == 1.0);
    REQUIRE(porous.mu == Approx(0.05));
    REQUIRE(porous.alpha_min == 0.0);
    REQUIRE(porous.alpha_max == Approx(0.05 / 1e-4));

    const FlowParams kondoh = study_params(20.0, 1e-4, PenaltyScaling::kondoh);
    REQUIRE(kondoh.alpha_max == Approx((1.0 + 1.0 / 20.0) / 1e-4));
}

TEST_CASE("log-log slope fits recover exact power laws", "[studies]") {
    const std::vector<double> x = {0.1, 0.2, 0.4, 1.3};
    std::vector<double> y;
    for (double xi : x) y.push_back(3.7 * std::pow(xi, 1.7));
    REQUIRE(loglog_slope(x, y) == Approx(1.7).margin(1e-12));

    REQUIRE_THROWS_AS(loglog_slope({1.0, 2.0}, {1.0}), ConfigError);
    REQUIRE_THROWS_AS(loglog_slope({1.0}, {1.0}), ConfigError);
}

TEST_CASE("slope fit windows drop saturated and subgrid points", "[studies]") {
    auto synth = [](double da) {
        ErrorMeasures em;
        em.reynolds = 20.0;
        em.darcy = da;
        em.eps_u_solid = std::pow(da, 0.9);
        em.eps_u_cavity = 0.5 * std::pow(da, 1.1);
        em.eps_phi = 2.0 * std::pow(da, 0.5);
        em.eps_dp = std::pow(da, 0.45);
        em.converged = true;
        return em;
    };
    std::vector<ErrorMeasures> pts;
    ErrorMeasures leaky = synth(1e-2);
    leaky.eps_u_solid = 0.5; // saturated: obstacle still leaking
    pts.push_back(leaky);
    ErrorMeasures failed = synth(3e-3);
    failed.converged = false;
    pts.push_back(failed);
    for (double da : {1e-3, 1e-4, 1e-5, 1e-6}) pts.push_back(synth(da));

    // h = 0.01: the derived-quantity window is darcy >= h^2 / 4 = 2.5e-5
    const SlopeSummary s = fit_error_slopes(pts, 0.01);
    REQUIRE(s.velocity_points == 4);
    REQUIRE(s.pressure_points == 2);
    REQUIRE(s.velocity_solid == Approx(0.9).margin(1e-10));
    REQUIRE(s.velocity_cavity == Approx(1.1).margin(1e-10));
    REQUIRE(s.dissipation == Approx(0.5).margin(1e-10));
    REQUIRE(s.pressure_drop == Approx(0.45).margin(1e-10));

    // everything saturated: no window survives
    std::vector<ErrorMeasures> sat(3, leaky);
    REQUIRE_THROWS_AS(fit_error_slopes(sat, 0.01), ConfigError);

    // all interface layers subgrid: velocity window fine, derived window empty
    std::vector<ErrorMeasures> fine = {synth(1e-6), synth(1e-7), synth(1e-8)};
    REQUIRE_THROWS_AS(fit_error_slopes(fine, 0.01), ConfigError);
}

TEST_CASE("thresholded design differences count disagreeing elements",
          "[studies]") {
    Eigen::VectorXd a(4), b(4);
    a << 0.2, 0.8, 0.6, 0.4;
    b << 0.8, 0.8, 0.4, 0.3;
    REQUIRE(threshold_diff(a, b) == Approx(0.5));
    REQUIRE(threshold_diff(a, b, 0.7) == Approx(0.25));
    REQUIRE(threshold_diff(a, a) == 0.0);

    Eigen::VectorXd c(3);
    REQUIRE_THROWS_AS(threshold_diff(a, c), ConfigError);
}

TEST_CASE("a coarse accuracy sweep behaves like a penalty method", "[studies]") {
    ObstacleChannelConfig cfg;
    cfg.nely = 16;
    const std::vector<double> das = {1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
    const auto pts = brinkman_accuracy_study({20.0}, das, PenaltyScaling::porous, cfg);
    REQUIRE(pts.size() == das.size());

    for (size_t k = 0; k < pts.size(); ++k) {
        REQUIRE(pts[k].converged);
        REQUIRE(pts[k].reynolds == 20.0);
        REQUIRE(pts[k].darcy == das[k]);
        REQUIRE(std::isfinite(pts[k].eps_phi));
        if (k > 0) {
            // a stronger penalty always seals the obstacle better
            REQUIRE(pts[k].eps_u_solid < pts[k - 1].eps_u_solid);
            REQUIRE(pts[k].eps_u_cavity < pts[k - 1].eps_u_cavity);
        }
    }

    // at this resolution the saturated regime reaches down to the subgrid
    // bound h^2 / 4, so the default derived-quantity window collapses; the
    // physical half-order regime needs a finer mesh to open up
    REQUIRE_THROWS_AS(fit_error_slopes(pts, 1.0 / cfg.nely), ConfigError);

    // the velocity error decays at first order once the box stops leaking;
    // the coarse mesh only supports a loose band here
    const SlopeSummary s = fit_error_slopes(pts, 1.0 / cfg.nely, 0.6);
    REQUIRE(s.velocity_points >= 4);
    REQUIRE(s.pressure_points >= 2);
    REQUIRE(s.velocity_solid > 0.6);
    REQUIRE(s.velocity_solid < 1.3);
}

TEST_CASE("cross check reproduces a plain forward analysis", "[studies]") {
    FlowParams p;
    p.rho = 1e-3;
    p.mu = 1.0;
    p.alpha_min = 2.5e-4;
    p.alpha_max = 2.5e4;
    p.q_alpha = 0.1;
    const ProblemDefinition prob = double_pipe(Mesh(12, 12, 1.0, 1.0), 1.0, p);
    const Eigen::VectorXd g = prob.initial_design(-1.0);

    Assembler assem(prob.mesh, prob.bc, {});
    LinearSolver solver;
    Eigen::VectorXd state = Eigen::VectorXd::Zero(prob.mesh.num_dofs());
    REQUIRE(newton_solve(assem, solver, state, g, p, {}).converged);
    const double phi =
        detail::evaluate_functional(prob, assem, state, g, p, prob.objective).value;
    REQUIRE(phi > 0.0);

    FlowParams leakier = p;
    leakier.alpha_max = 2.5e2; // uniform grey design: power is penalty-dominated
    const CrossCheckTable table = cross_check(prob, {g}, {p, leakier});
    REQUIRE(table.values.rows() == 2);
    REQUIRE(table.values.cols() == 1);
    REQUIRE(table.ok.all());
    REQUIRE(table.values(0, 0) == Approx(phi).epsilon(1e-10));
    REQUIRE(table.values(1, 0) < 0.5 * phi);

    REQUIRE_THROWS_AS(cross_check(prob, {}, {p}), ConfigError);
    Eigen::VectorXd wrong(5);
    REQUIRE_THROWS_AS(cross_check(prob, {wrong}, {p}), ConfigError);
}

TEST_CASE("the penalty sweep reruns one problem per bound", "[studies]") {
    FlowParams p;
    p.rho = 1e-3;
    p.mu = 1.0;
    p.alpha_min = 2.5e-4;
    p.alpha_max = 2.5e4; // replaced per sweep point
    p.q_alpha = 0.1;
    const ProblemDefinition prob = double_pipe(Mesh(12, 12, 1.0, 1.0), 1.0, p);

    RunControls ctl;
    ctl.maxiter = 16;
    ctl.conit = 4;
    ctl.chnum = 2;
    ctl.log = [](const std::string&) {};

    const std::vector<double> bounds = {2.5e2, 2.5e4};
    const auto sweep = alpha_max_sweep(prob, bounds, ctl, 2.5, 4);
    REQUIRE(sweep.size() == 2);
    for (size_t k = 0; k < sweep.size(); ++k) {
        REQUIRE(sweep[k].alpha_max == bounds[k]);
        REQUIRE(sweep[k].design.size() == prob.mesh.num_elements());
        REQUIRE(std::isfinite(sweep[k].objective));
        REQUIRE(sweep[k].objective > 0.0);
    }
    // a weak penalty lets flow shortcut through material, lowering the power
    REQUIRE(sweep[0].objective < sweep[1].objective);

    REQUIRE_THROWS_AS(alpha_max_sweep(prob, {}, ctl, 2.5), ConfigError);
}

#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "flowtopo/checks.hpp"
#include "flowtopo/io.hpp"

using namespace flowtopo;

namespace {

const char* kUsage = R"(usage: flowtopo <command> [options]

commands:
  optimize         run the configured optimization and export its artifacts
  simulate         solve the flow on a fixed design and export fields
  study-brinkman   velocity/dissipation error study against a body-fitted
                   reference obstacle
  sweep-alpha      re-optimize across a range of maximum penalties
  cross-check      evaluate saved designs under other flow conditions
  check-gradients  compare adjoint sensitivities with finite differences
  check-jacobian   compare the assembled Jacobian with finite differences

common options:
  --config PATH    key = value configuration file
  --set key=value  override one configuration key (repeatable)
  --out PREFIX     artifact path prefix (default: the filename key)

command options:
  simulate         --design PATH
  study-brinkman   --re LIST  --da LIST  --scaling porous|kondoh  --nely N
  sweep-alpha      --alphas LIST  [--steps N]
  cross-check      --designs a.csv,b.csv  --re LIST
  check-gradients  [--samples N]  [--dgamma H]
  check-jacobian   [--columns N]  [--step H]
)";

struct Args {
    std::string command;
    std::string config_path;
    std::vector<std::string> sets;
    std::string out;
    std::map<std::string, std::string> extra;
};

Args parse_args(int argc, char** argv, const std::set<std::string>& allowed) {
    Args args;
    args.command = argv[1];
    for (int i = 2; i < argc; ++i) {
        const std::string name = argv[i];
        if (name.rfind("--", 0) != 0)
            throw ConfigError("expected an option, got '" + name + "'");
        if (i + 1 >= argc) throw ConfigError("option '" + name + "' needs a value");
        const std::string value = argv[++i];
        if (name == "--config")
            args.config_path = value;
        else if (name == "--set")
            args.sets.push_back(value);
        else if (name == "--out")
            args.out = value;
        else if (allowed.count(name))
            args.extra[name.substr(2)] = value;
        else
            throw ConfigError("unknown option '" + name + "' for " + args.command);
    }
    return args;
}

RunConfig load_run_config(const Args& args) {
    std::string text;
    if (!args.config_path.empty()) {
        std::ifstream in(args.config_path);
        if (!in) throw IoError("cannot read '" + args.config_path + "'");
        std::ostringstream buf;
        buf << in.rdbuf();
        text = buf.str();
    }
    for (const std::string& kv : args.sets) {
        if (kv.find('=') == std::string::npos)
            throw ConfigError("--set expects key=value, got '" + kv + "'");
        text += "\n" + kv;
    }
    return parse_config(text);
}

std::vector<double> parse_list(const std::string& text, const std::string& what) {
    std::vector<double> out;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        char* end = nullptr;
        const double v = std::strtod(item.c_str(), &end);
        if (end == item.c_str() || *end != '\0')
            throw ConfigError(what + ": '" + item + "' is not a number");
        out.push_back(v);
    }
    if (out.empty()) throw ConfigError(what + ": empty list");
    return out;
}

std::vector<std::string> parse_names(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::string basename_of(const std::string& path) {
    const auto slash = path.find_last_of('/');
    return slash == std::string::npos ? path : path.substr(slash + 1);
}

const char* kind_name(FunctionalKind kind) {
    switch (kind) {
    case FunctionalKind::dissipation: return "dissipation";
    case FunctionalKind::volume: return "volume";
    case FunctionalKind::point_velocity: return "point_velocity";
    case FunctionalKind::inlet_pressure: return "inlet_pressure";
    case FunctionalKind::drag: return "drag";
    case FunctionalKind::lift: return "lift";
    }
    return "unknown";
}

double option_number(const Args& args, const std::string& name, double fallback) {
    const auto it = args.extra.find(name);
    if (it == args.extra.end()) return fallback;
    char* end = nullptr;
    const double v = std::strtod(it->second.c_str(), &end);
    if (end == it->second.c_str() || *end != '\0')
        throw ConfigError("--" + name + ": '" + it->second + "' is not a number");
    return v;
}

int cmd_optimize(const Args& args) {
    const RunConfig cfg = load_run_config(args);
    const std::string prefix = args.out.empty() ? cfg.filename : args.out;
    const ProblemDefinition prob = build_problem(cfg, config_newton(cfg));
    RunControls ctl = config_controls(cfg, prob);
    ctl.on_checkpoint = [&](int step, const Eigen::VectorXd& design,
                            const Eigen::VectorXd&) {
        write_design_csv(prefix + "_step" + std::to_string(step) + "_design.csv",
                         prob.mesh, design);
    };
    const OptimizationResult res = run_optimization(prob, ctl);

    write_history_csv(prefix + "_history.csv", res.history, cfg.seed);
    FlowParams params = prob.params;
    params.q_alpha = ctl.schedule.q_values.back();
    export_fields(prob.mesh, res.state, res.design, params, prefix);
    if (cfg.exportdxf)
        export_dxf(extract_contour(prob.mesh, res.design), prefix + ".dxf");
    std::printf("%s: objective %.6g after %d iterations%s\n", prob.name.c_str(),
                res.objective, res.iterations,
                res.converged ? "" : " (stopped at the iteration limit)");
    return 0;
}

int cmd_simulate(const Args& args) {
    const RunConfig cfg = load_run_config(args);
    const std::string prefix = args.out.empty() ? cfg.filename : args.out;
    const ProblemDefinition prob = build_problem(cfg, config_newton(cfg));

    Eigen::VectorXd design;
    const auto it = args.extra.find("design");
    if (it != args.extra.end()) {
        const DesignFile file = read_design_csv(it->second);
        if (file.nelx != cfg.nelx || file.nely != cfg.nely)
            throw ConfigError("design file grid " + std::to_string(file.nelx) + "x" +
                              std::to_string(file.nely) + " does not match the config");
        design = file.values;
    } else {
        design = prob.initial_design(cfg.xinit);
    }

    // simulate at the fully penalized end of the continuation path
    FlowParams params = prob.params;
    params.q_alpha = config_controls(cfg, prob).schedule.q_values.back();
    Eigen::VectorXd state = Eigen::VectorXd::Zero(prob.mesh.num_dofs());
    const NewtonReport rep =
        solve_flow(prob, design, params, state, config_newton(cfg),
                   config_discretization(cfg));
    if (!rep.converged) {
        std::fprintf(stderr, "flowtopo: flow solve did not converge (residual %.3e)\n",
                     rep.final_residual);
        return 1;
    }

    Assembler assem(prob.mesh, prob.bc, config_discretization(cfg));
    auto value = [&](FunctionalKind kind) {
        return detail::evaluate_functional(prob, assem, state, design, params, kind)
            .value;
    };
    std::printf("newton iterations: %d  residual: %.3e\n", rep.iterations,
                rep.final_residual);
    std::printf("objective (%s): %.6g\n", kind_name(prob.objective),
                value(prob.objective));
    for (const ConstraintSpec& con : prob.constraints)
        std::printf("constraint %s: %.6g (bound %.6g)\n", kind_name(con.kind),
                    value(con.kind), con.bound);
    export_fields(prob.mesh, state, design, params, prefix);
    return 0;
}

int cmd_study_brinkman(const Args& args) {
    const RunConfig cfg = load_run_config(args);
    const std::string prefix = args.out.empty() ? cfg.filename : args.out;
    ObstacleChannelConfig channel;
    channel.nely = static_cast<int>(option_number(args, "nely", 100));
    const std::vector<double> re_list =
        args.extra.count("re") ? parse_list(args.extra.at("re"), "--re")
                               : std::vector<double>{20.0};
    const std::vector<double> da_list =
        args.extra.count("da")
            ? parse_list(args.extra.at("da"), "--da")
            : std::vector<double>{1e-2, 3.1623e-3, 1e-3, 3.1623e-4,
                                  1e-4, 3.1623e-5, 1e-5};
    PenaltyScaling scaling = PenaltyScaling::porous;
    std::string scaling_name = "porous";
    if (args.extra.count("scaling")) {
        scaling_name = args.extra.at("scaling");
        if (scaling_name == "porous")
            scaling = PenaltyScaling::porous;
        else if (scaling_name == "kondoh")
            scaling = PenaltyScaling::kondoh;
        else
            throw ConfigError("--scaling: expected porous or kondoh");
    }

    const std::vector<ErrorMeasures> points =
        brinkman_accuracy_study(re_list, da_list, scaling, channel, config_newton(cfg));
    write_accuracy_csv(prefix + "_accuracy.csv", points, scaling_name);

    std::vector<std::pair<double, SlopeSummary>> rows;
    const double h = 1.0 / channel.nely;
    for (double re : re_list) {
        std::vector<ErrorMeasures> mine;
        for (const ErrorMeasures& em : points)
            if (em.reynolds == re) mine.push_back(em);
        try {
            const SlopeSummary s = fit_error_slopes(mine, h);
            rows.emplace_back(re, s);
            std::printf("Re %-8g slopes: u_solid %.3f u_cavity %.3f phi %.3f dp %.3f "
                        "(%d/%d points)\n",
                        re, s.velocity_solid, s.velocity_cavity, s.dissipation,
                        s.pressure_drop, s.velocity_points, s.pressure_points);
        } catch (const ConfigError& ex) {
            std::printf("Re %-8g slopes: %s\n", re, ex.what());
        }
    }
    if (!rows.empty()) write_slopes_csv(prefix + "_slopes.csv", rows);
    return 0;
}

int cmd_sweep_alpha(const Args& args) {
    const RunConfig cfg = load_run_config(args);
    const std::string prefix = args.out.empty() ? cfg.filename : args.out;
    if (!args.extra.count("alphas"))
        throw ConfigError("sweep-alpha needs --alphas with at least two values");
    const std::vector<double> alphas = parse_list(args.extra.at("alphas"), "--alphas");
    const int steps = static_cast<int>(option_number(args, "steps", cfg.qanum));

    const ProblemDefinition prob = build_problem(cfg, config_newton(cfg));
    const RunControls ctl = config_controls(cfg, prob);
    const std::vector<SweepPoint> sweep =
        alpha_max_sweep(prob, alphas, ctl, cfg.ainit, steps);

    write_sweep_csv(prefix + "_sweep.csv", sweep);
    for (size_t k = 0; k < sweep.size(); ++k)
        write_design_csv(prefix + "_sweep" + std::to_string(k) + "_design.csv",
                         prob.mesh, sweep[k].design);
    for (size_t a = 0; a < sweep.size(); ++a)
        for (size_t b = a + 1; b < sweep.size(); ++b)
            std::printf("thresholded diff alpha %.3g vs %.3g: %.2f%% of elements\n",
                        sweep[a].alpha_max, sweep[b].alpha_max,
                        100.0 * threshold_diff(sweep[a].design, sweep[b].design));
    return 0;
}

int cmd_cross_check(const Args& args) {
    const RunConfig cfg = load_run_config(args);
    const std::string prefix = args.out.empty() ? cfg.filename : args.out;
    if (!args.extra.count("designs") || !args.extra.count("re"))
        throw ConfigError("cross-check needs --designs and --re");
    const std::vector<std::string> paths = parse_names(args.extra.at("designs"));
    const std::vector<double> re_list = parse_list(args.extra.at("re"), "--re");
    if (paths.empty()) throw ConfigError("cross-check: no design files given");

    std::vector<Eigen::VectorXd> designs;
    std::vector<std::string> col_labels;
    for (const std::string& path : paths) {
        const DesignFile file = read_design_csv(path);
        if (file.nelx != cfg.nelx || file.nely != cfg.nely)
            throw ConfigError("design file '" + path + "' does not match the config grid");
        designs.push_back(file.values);
        col_labels.push_back(basename_of(path));
    }

    // re-deriving through the parser keeps the viscosity rule in one place
    std::vector<FlowParams> conditions;
    std::vector<std::string> row_labels;
    for (double re : re_list) {
        Args sub = args;
        char line[64];
        std::snprintf(line, sizeof(line), "Re=%.17g", re);
        sub.sets.push_back(line);
        FlowParams p = config_params(load_run_config(sub));
        p.q_alpha = config_controls(cfg, build_problem(cfg)).schedule.q_values.back();
        conditions.push_back(p);
        std::snprintf(line, sizeof(line), "Re%g", re);
        row_labels.push_back(line);
    }

    const ProblemDefinition prob = build_problem(cfg, config_newton(cfg));
    const CrossCheckTable table =
        cross_check(prob, designs, conditions, config_newton(cfg));
    write_table_csv(prefix + "_table.csv", table, row_labels, col_labels);
    for (int i = 0; i < table.values.rows(); ++i) {
        std::printf("%-8s", row_labels[i].c_str());
        for (int j = 0; j < table.values.cols(); ++j)
            std::printf("  %12.6g%s", table.values(i, j), table.ok(i, j) ? "" : "*");
        std::printf("\n");
    }
    return 0;
}

int cmd_check_gradients(const Args& args) {
    const RunConfig cfg = load_run_config(args);
    const ProblemDefinition prob = build_problem(cfg, config_newton(cfg));
    const int samples = static_cast<int>(option_number(args, "samples", 48));
    const double dgamma = option_number(args, "dgamma", 1e-6);
    const double x0 = cfg.xinit < 0.0 ? cfg.volfrac : cfg.xinit;
    const Eigen::VectorXd gamma0 = prob.initial_design(x0);

    FlowParams params = prob.params;
    params.q_alpha = config_controls(cfg, prob).schedule.q_values.front();
    ProblemDefinition probe = prob;
    probe.params = params;

    std::vector<FunctionalKind> kinds = {prob.objective};
    for (const ConstraintSpec& con : prob.constraints)
        if (con.kind != prob.objective) kinds.push_back(con.kind);

    const std::vector<int> elements = sample_elements(prob.active, samples);
    bool pass = true;
    for (FunctionalKind kind : kinds) {
        const GradientCheckResult res =
            check_gradient(probe, gamma0, kind, config_newton(cfg), dgamma, 1e-3,
                           elements, config_discretization(cfg));
        const bool ok = res.worst_rel <= 1e-2 && res.frac_within >= 0.95;
        pass = pass && ok;
        std::printf("%-15s value %.4g  worst rel %.3e  within 1e-3: %.1f%%  "
                    "(%d elements)  %s\n",
                    kind_name(kind), res.value, res.worst_rel, 100.0 * res.frac_within,
                    res.elements_checked, ok ? "ok" : "FAIL");
    }
    return pass ? 0 : 1;
}

int cmd_check_jacobian(const Args& args) {
    const RunConfig cfg = load_run_config(args);
    const ProblemDefinition prob = build_problem(cfg, config_newton(cfg));
    const Mesh& mesh = prob.mesh;
    const int fallback = std::min(mesh.num_dofs(), 600);
    const int columns = static_cast<int>(option_number(args, "columns", fallback));
    const double step = option_number(args, "step", 1e-7);

    std::mt19937 gen(cfg.seed + 1);
    std::uniform_real_distribution<double> ustate(-0.5, 0.5);
    std::uniform_real_distribution<double> udesign(0.05, 0.95);
    Eigen::VectorXd state(mesh.num_dofs());
    for (int i = 0; i < state.size(); ++i) state[i] = ustate(gen);
    prob.bc.impose(state);
    Eigen::VectorXd gamma(mesh.num_elements());
    for (int e = 0; e < gamma.size(); ++e) gamma[e] = udesign(gen);

    FlowParams params = prob.params;
    params.q_alpha = config_controls(cfg, prob).schedule.q_values.back();
    const JacobianCheckResult res =
        check_jacobian(mesh, prob.bc, state, gamma, params, columns, step,
                       config_discretization(cfg));
    std::printf("max relative column error: %.3e (%d columns)\n", res.max_rel_error,
                res.columns_checked);
    return res.max_rel_error <= 1e-5 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fputs(kUsage, stderr);
        return 1;
    }
    const std::string command = argv[1];
    try {
        if (command == "optimize")
            return cmd_optimize(parse_args(argc, argv, {}));
        if (command == "simulate")
            return cmd_simulate(parse_args(argc, argv, {"--design"}));
        if (command == "study-brinkman")
            return cmd_study_brinkman(
                parse_args(argc, argv, {"--re", "--da", "--scaling", "--nely"}));
        if (command == "sweep-alpha")
            return cmd_sweep_alpha(parse_args(argc, argv, {"--alphas", "--steps"}));
        if (command == "cross-check")
            return cmd_cross_check(parse_args(argc, argv, {"--designs", "--re"}));
        if (command == "check-gradients")
            return cmd_check_gradients(parse_args(argc, argv, {"--samples", "--dgamma"}));
        if (command == "check-jacobian")
            return cmd_check_jacobian(parse_args(argc, argv, {"--columns", "--step"}));
        if (command == "help" || command == "--help" || command == "-h") {
            std::fputs(kUsage, stdout);
            return 0;
        }
        std::fprintf(stderr, "flowtopo: unknown command '%s'\n\n%s", command.c_str(),
                     kUsage);
        return 1;
    } catch (const std::exception& ex) {
        std::fprintf(stderr, "flowtopo: %s\n", ex.what());
        return 1;
    }
}

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "flowtopo/optimizers.hpp"
#include "flowtopo/studies.hpp"

namespace flowtopo {

/// A complete run description as read from a flat key = value file.  Values
/// not present in the file carry the documented defaults of the selected
/// problem type; quantities derived from others (nelx, mu, penalty bounds)
/// are filled in after all keys are applied.
struct RunConfig {
    int probtype = 1; ///< 1 double pipe, 2 pipe bend, 3 rugby ball,
                      ///< 4 flow reversal, 5 drag/lift
    double Lx = 1.0, Ly = 1.0;
    int nelx = 0; ///< 0 derives nelx from nely for square elements
    int nely = 102;
    double volfrac = 1.0 / 3.0;
    double xinit = -1.0; ///< < 0 starts from the volume fraction
    double Uin = 1.0;
    double rho = 1e-3;
    double mu = 1.0;
    double reynolds = 0.0; ///< key "Re"; > 0 derives mu from the inlet scale
    double alphamax = 0.0;
    double alphamin = 0.0;
    double ainit = 0.0;
    double qinit = 0.0; ///< > 0 overrides the value computed from ainit
    int qanum = 4;
    int conit = 50;
    int maxiter = 150;
    double mvlim = 0.2;
    double chlim = 1e-2;
    int chnum = 5;
    double nltol = 1e-6;
    int nlmax = 25;
    OptimizerKind optimizer = OptimizerKind::oc;
    bool reusejac = false; ///< adjoint reuses the Newton factorization
    SupgTest supgtest = SupgTest::gradu;
    StabLength stabh = StabLength::geometric;
    bool exportdxf = false;
    std::string filename = "design";
    unsigned seed = 0; ///< > 0 perturbs the initial design reproducibly
    double beta = 0.0; ///< pressure-drop bound factor (4) or drag bound factor (5)
    DragLiftMode mode = DragLiftMode::min_drag;
    double dragref = 0.0; ///< reference drag for the lift constraint
    double pref = 0.0;    ///< empty-channel pressure drop; 0 computes it
};

namespace detail {

inline std::string trim(std::string s) {
    const auto notspace = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), notspace));
    s.erase(std::find_if(s.rbegin(), s.rend(), notspace).base(), s.end());
    return s;
}

inline double parse_number(const std::string& value, const std::string& key, int line) {
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (end == value.c_str() || *end != '\0')
        throw ConfigError("line " + std::to_string(line) + ": key '" + key + "': '" +
                          value + "' is not a number");
    return v;
}

inline long parse_integer(const std::string& value, const std::string& key, int line) {
    char* end = nullptr;
    const long v = std::strtol(value.c_str(), &end, 10);
    if (end == value.c_str() || *end != '\0')
        throw ConfigError("line " + std::to_string(line) + ": key '" + key + "': '" +
                          value + "' is not an integer");
    return v;
}

inline bool parse_switch(const std::string& value, const std::string& key, int line) {
    if (value == "0") return false;
    if (value == "1") return true;
    throw ConfigError("line " + std::to_string(line) + ": key '" + key +
                      "': expected 0 or 1, got '" + value + "'");
}

[[noreturn]] inline void range_error(const std::string& key, int line,
                                     const std::string& what) {
    throw ConfigError("line " + std::to_string(line) + ": " + key + ": " + what);
}

} // namespace detail

/// Documented defaults for each problem type, before any user keys apply.
inline RunConfig default_config(int probtype) {
    RunConfig c;
    c.probtype = probtype;
    switch (probtype) {
    case 1: // double pipe: the struct defaults
        break;
    case 2: // pipe bend
        c.nely = 100;
        c.volfrac = 0.25;
        break;
    case 3: // rugby ball: single continuation step at a fixed factor
        c.nely = 100;
        c.volfrac = 0.94;
        c.qinit = 10.0;
        c.qanum = 1;
        break;
    case 4: // flow reversal
        c.Lx = 5.0;
        c.nely = 50;
        c.volfrac = 0.6;
        c.rho = 1.0;
        c.reynolds = 1.0;
        c.optimizer = OptimizerKind::mma;
        c.beta = 15.0;
        break;
    case 5: // drag / lift
        c.Lx = 3.0;
        c.nely = 100;
        c.volfrac = 0.85;
        c.rho = 1.0;
        c.reynolds = 10.0;
        c.optimizer = OptimizerKind::mma;
        c.qinit = 10.0;
        c.qanum = 1;
        c.conit = 100;
        c.maxiter = 100;
        break;
    default:
        throw ConfigError("probtype must be between 1 and 5");
    }
    return c;
}

/// Design-domain edge length used by the drag/lift non-dimensionalization.
inline double characteristic_length(const RunConfig& c) {
    return std::sqrt(c.volfrac * (c.Lx / 2.0) * (c.Ly / 2.0));
}

/// Fills quantities derived from other keys, honoring everything the user
/// set explicitly.  The velocity scale for "Re" is the inlet height of the
/// selected problem.
inline void derive_defaults(RunConfig& c, const std::set<std::string>& seen) {
    if (!seen.count("nelx") && c.nelx <= 0)
        c.nelx = static_cast<int>(std::lround(c.nely * c.Lx / c.Ly));
    if (seen.count("Re") && !seen.count("rho")) c.rho = 1.0;
    if (!seen.count("mu") && c.reynolds > 0.0) {
        double href = c.Ly;
        if (c.probtype == 1) href = c.Ly / 6.0;
        if (c.probtype == 2) href = c.Ly / 5.0;
        if (c.probtype == 5) href = characteristic_length(c);
        c.mu = c.Uin * href * c.rho / c.reynolds;
    }
    if (!seen.count("alphamin"))
        c.alphamin = c.probtype >= 4 ? 0.0 : 2.5 * c.mu / (100.0 * 100.0);
    if (!seen.count("alphamax")) {
        if (c.probtype == 4)
            c.alphamax = c.mu / 1e-5;
        else if (c.probtype == 5)
            c.alphamax = c.mu / (1e-5 * characteristic_length(c));
        else
            c.alphamax = 2.5 * c.mu / (0.01 * 0.01);
    }
    if (!seen.count("ainit")) c.ainit = 2.5 * c.mu / (0.1 * 0.1);
    if (!(c.alphamin < c.alphamax))
        throw ConfigError("alphamin must lie strictly below alphamax");
}

/// Parses flat "key = value" text with # comments.  The problem type is
/// located first so its defaults underlie the remaining keys regardless of
/// order; unknown keys and out-of-range values name the key and line.
inline RunConfig parse_config(const std::string& text) {
    std::vector<std::pair<int, std::string>> lines;
    {
        std::istringstream in(text);
        std::string raw;
        int number = 0;
        while (std::getline(in, raw)) {
            ++number;
            const auto hash = raw.find('#');
            if (hash != std::string::npos) raw.erase(hash);
            raw = detail::trim(raw);
            if (!raw.empty()) lines.emplace_back(number, raw);
        }
    }

    auto split = [](const std::string& s, int line) {
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line) +
                              ": expected 'key = value', got '" + s + "'");
        auto key = detail::trim(s.substr(0, eq));
        auto value = detail::trim(s.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("line " + std::to_string(line) +
                              ": expected 'key = value', got '" + s + "'");
        return std::make_pair(key, value);
    };

    int probtype = 1;
    for (const auto& [number, body] : lines) {
        const auto [key, value] = split(body, number);
        if (key != "probtype") continue;
        probtype = static_cast<int>(detail::parse_integer(value, key, number));
        if (probtype < 1 || probtype > 5)
            detail::range_error(key, number, "problem type must be between 1 and 5");
    }

    RunConfig c = default_config(probtype);
    std::set<std::string> seen;
    for (const auto& [number, body] : lines) {
        const auto [key, value] = split(body, number);
        seen.insert(key);
        const auto num = [&, k = key, v = value, n = number] {
            return detail::parse_number(v, k, n);
        };
        const auto integer = [&, k = key, v = value, n = number] {
            return detail::parse_integer(v, k, n);
        };
        const auto positive = [&, k = key, n = number](double x) {
            if (!(x > 0.0)) detail::range_error(k, n, "must be positive");
            return x;
        };

        if (key == "probtype") {
            continue; // consumed above
        } else if (key == "Lx") {
            c.Lx = positive(num());
        } else if (key == "Ly") {
            c.Ly = positive(num());
        } else if (key == "nelx") {
            c.nelx = static_cast<int>(integer());
            if (c.nelx < 1) detail::range_error(key, number, "must be at least 1");
        } else if (key == "nely") {
            c.nely = static_cast<int>(integer());
            if (c.nely < 1) detail::range_error(key, number, "must be at least 1");
        } else if (key == "volfrac") {
            c.volfrac = num();
            if (!(c.volfrac > 0.0) || !(c.volfrac < 1.0))
                detail::range_error(key, number, "V_f ∈ ]0;1[");
        } else if (key == "xinit") {
            c.xinit = num();
            if (c.xinit > 1.0)
                detail::range_error(key, number, "must be at most 1 (or < 0 for V_f)");
        } else if (key == "Uin") {
            c.Uin = positive(num());
        } else if (key == "rho") {
            c.rho = positive(num());
        } else if (key == "mu") {
            c.mu = positive(num());
        } else if (key == "Re") {
            c.reynolds = positive(num());
        } else if (key == "alphamax") {
            c.alphamax = positive(num());
        } else if (key == "alphamin") {
            c.alphamin = num();
            if (c.alphamin < 0.0) detail::range_error(key, number, "must be >= 0");
        } else if (key == "ainit") {
            c.ainit = positive(num());
        } else if (key == "qinit") {
            c.qinit = positive(num());
        } else if (key == "qanum") {
            c.qanum = static_cast<int>(integer());
            if (c.qanum < 1 || c.qanum > 4)
                detail::range_error(key, number, "continuation steps must be 1 to 4");
        } else if (key == "conit") {
            c.conit = static_cast<int>(integer());
            if (c.conit < 1) detail::range_error(key, number, "must be at least 1");
        } else if (key == "maxiter") {
            c.maxiter = static_cast<int>(integer());
            if (c.maxiter < 1) detail::range_error(key, number, "must be at least 1");
        } else if (key == "mvlim") {
            c.mvlim = num();
            if (!(c.mvlim > 0.0) || c.mvlim > 1.0)
                detail::range_error(key, number, "move limit must be in ]0;1]");
        } else if (key == "chlim") {
            c.chlim = positive(num());
        } else if (key == "chnum") {
            c.chnum = static_cast<int>(integer());
            if (c.chnum < 1) detail::range_error(key, number, "must be at least 1");
        } else if (key == "nltol") {
            c.nltol = positive(num());
        } else if (key == "nlmax") {
            c.nlmax = static_cast<int>(integer());
            if (c.nlmax < 1) detail::range_error(key, number, "must be at least 1");
        } else if (key == "optimizer") {
            if (value == "oc")
                c.optimizer = OptimizerKind::oc;
            else if (value == "mma")
                c.optimizer = OptimizerKind::mma;
            else
                detail::range_error(key, number, "expected oc or mma");
        } else if (key == "reusejac") {
            c.reusejac = detail::parse_switch(value, key, number);
        } else if (key == "supgtest") {
            if (value == "gradu")
                c.supgtest = SupgTest::gradu;
            else if (value == "streamline")
                c.supgtest = SupgTest::streamline;
            else
                detail::range_error(key, number, "expected gradu or streamline");
        } else if (key == "stabh") {
            if (value == "geometric")
                c.stabh = StabLength::geometric;
            else if (value == "diagonal")
                c.stabh = StabLength::diagonal;
            else
                detail::range_error(key, number, "expected geometric or diagonal");
        } else if (key == "exportdxf") {
            c.exportdxf = detail::parse_switch(value, key, number);
        } else if (key == "filename") {
            c.filename = value;
        } else if (key == "seed") {
            const long s = integer();
            if (s < 0) detail::range_error(key, number, "must be >= 0");
            c.seed = static_cast<unsigned>(s);
        } else if (key == "beta") {
            c.beta = positive(num());
        } else if (key == "mode") {
            if (value == "drag")
                c.mode = DragLiftMode::min_drag;
            else if (value == "lift")
                c.mode = DragLiftMode::max_lift;
            else
                detail::range_error(key, number, "expected drag or lift");
        } else if (key == "dragref") {
            c.dragref = positive(num());
        } else if (key == "pref") {
            c.pref = positive(num());
        } else {
            throw ConfigError("line " + std::to_string(number) + ": unknown key '" +
                              key + "'");
        }
    }

    derive_defaults(c, seen);
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

inline Mesh config_mesh(const RunConfig& c) {
    return Mesh(c.nelx, c.nely, c.Lx, c.Ly);
}

inline FlowParams config_params(const RunConfig& c) {
    FlowParams p;
    p.rho = c.rho;
    p.mu = c.mu;
    p.alpha_min = c.alphamin;
    p.alpha_max = c.alphamax;
    p.q_alpha = 1.0; // the continuation schedule overwrites this
    return p;
}

inline DiscretizationOptions config_discretization(const RunConfig& c) {
    DiscretizationOptions opts;
    opts.supg_test = c.supgtest;
    opts.stab_length = c.stabh;
    return opts;
}

inline NewtonConfig config_newton(const RunConfig& c) {
    NewtonConfig newton;
    newton.tol = c.nltol;
    newton.max_iter = c.nlmax;
    return newton;
}

/// Uniform start plus the reproducible perturbation x0 + 0.1 (r - 1/2) with
/// r uniform on [0, 1); passive prescriptions reapplied afterwards.
inline Eigen::VectorXd seeded_initial_design(const RunConfig& c,
                                             const ProblemDefinition& prob) {
    const double x0 = c.xinit < 0.0 ? c.volfrac : c.xinit;
    std::mt19937 gen(c.seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    Eigen::VectorXd g(prob.mesh.num_elements());
    for (int e = 0; e < g.size(); ++e)
        g[e] = std::clamp(x0 + 0.1 * (uniform(gen) - 0.5), 0.0, 1.0);
    prob.apply_passive(g);
    return g;
}

/// Instantiates the configured benchmark.  The flow reversal problem needs
/// the straight-channel pressure drop as its constraint reference; unless
/// supplied, it is measured once on the empty channel.
inline ProblemDefinition build_problem(const RunConfig& c,
                                       const NewtonConfig& newton = {}) {
    const Mesh mesh = config_mesh(c);
    const FlowParams params = config_params(c);
    auto finish = [&](ProblemDefinition prob) {
        prob.optimizer = c.optimizer;
        return prob;
    };
    switch (c.probtype) {
    case 1:
        return finish(double_pipe(mesh, c.Uin, params, c.volfrac));
    case 2:
        return finish(pipe_bend(mesh, c.Uin, params, c.volfrac));
    case 3:
        return finish(rugby_ball(mesh, c.Uin, params, c.volfrac));
    case 4: {
        double pref = c.pref;
        if (!(pref > 0.0)) {
            ProblemDefinition open = flow_reversal(mesh, c.Uin, params, c.beta, 1.0,
                                                   c.volfrac);
            Assembler assem(open.mesh, open.bc, config_discretization(c));
            LinearSolver solver;
            Eigen::VectorXd state = Eigen::VectorXd::Zero(open.mesh.num_dofs());
            const Eigen::VectorXd ones = Eigen::VectorXd::Ones(open.mesh.num_elements());
            if (!newton_solve(assem, solver, state, ones, params, newton).converged)
                throw SolverError("flow reversal: empty-channel reference solve "
                                  "did not converge");
            pref = detail::evaluate_functional(open, assem, state, ones, params,
                                               FunctionalKind::inlet_pressure)
                       .value;
            if (!(pref > 0.0))
                throw SolverError("flow reversal: empty-channel pressure drop "
                                  "came out non-positive");
        }
        return finish(flow_reversal(mesh, c.Uin, params, c.beta, pref, c.volfrac));
    }
    case 5:
        return finish(drag_lift(mesh, c.Uin, params, c.mode, c.volfrac, c.beta,
                                c.dragref));
    default:
        throw ConfigError("probtype must be between 1 and 5");
    }
}

/// Loop controls for the configured run, including the continuation start
/// factor (explicit qinit, or computed from the initial penalty ainit).
inline RunControls config_controls(const RunConfig& c, const ProblemDefinition& prob) {
    RunControls ctl;
    const double x0 = c.xinit < 0.0 ? c.volfrac : c.xinit;
    const double q0 =
        c.qinit > 0.0 ? c.qinit : q_init(c.ainit, c.alphamax, c.alphamin, x0);
    ctl.schedule = ContinuationSchedule::standard(q0, c.qanum);
    ctl.maxiter = c.maxiter;
    ctl.conit = c.conit;
    ctl.chlim = c.chlim;
    ctl.chnum = c.chnum;
    ctl.mvlim = c.mvlim;
    ctl.xinit = c.xinit;
    ctl.newton = config_newton(c);
    ctl.discretization = config_discretization(c);
    ctl.reuse_jacobian = c.reusejac;
    if (c.seed > 0) ctl.init_design = seeded_initial_design(c, prob);
    return ctl;
}

namespace detail {

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    return out;
}

inline std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string g10(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

} // namespace detail

/// One row per design iteration; the seed header makes perturbed starts
/// reproducible from the artifact alone.
inline void write_history_csv(const std::string& path,
                              const std::vector<IterationRecord>& history,
                              unsigned seed = 0) {
    auto out = detail::open_out(path);
    out << "# seed " << seed << "\n";
    out << "iter,objective,volume,change,q_alpha,greyscale,newton_iterations,"
           "seconds,kkt,constraints\n";
    for (const IterationRecord& r : history) {
        out << r.iter << ',' << detail::g10(r.objective) << ',' << detail::g10(r.volume)
            << ',' << detail::g10(r.change) << ',' << detail::g10(r.q_alpha) << ','
            << detail::g10(r.greyscale) << ',' << r.newton_iterations << ','
            << detail::g10(r.seconds) << ',' << detail::g10(r.mma_kkt) << ',';
        for (size_t i = 0; i < r.constraint_values.size(); ++i)
            out << (i ? ";" : "") << detail::g10(r.constraint_values[i]);
        out << '\n';
    }
}

inline void write_nodes_csv(const std::string& path, const Mesh& mesh,
                            const Eigen::VectorXd& state) {
    auto out = detail::open_out(path);
    out << "x,y,u1,u2,p,umag\n";
    for (int n = 0; n < mesh.num_nodes(); ++n) {
        const double u1 = state[mesh.u1_dof(n)];
        const double u2 = state[mesh.u2_dof(n)];
        out << detail::g10(mesh.node_x(n)) << ',' << detail::g10(mesh.node_y(n)) << ','
            << detail::g10(u1) << ',' << detail::g10(u2) << ','
            << detail::g10(state[mesh.p_dof(n)]) << ','
            << detail::g10(std::hypot(u1, u2)) << '\n';
    }
}

inline void write_elements_csv(const std::string& path, const Mesh& mesh,
                               const Eigen::VectorXd& design,
                               const FlowParams& params) {
    auto out = detail::open_out(path);
    out << "xc,yc,gamma,alpha\n";
    for (int e = 0; e < mesh.num_elements(); ++e)
        out << detail::g10(mesh.element_center_x(e)) << ','
            << detail::g10(mesh.element_center_y(e)) << ',' << detail::g10(design[e])
            << ',' << detail::g10(ramp_alpha(design[e], params)) << '\n';
}

/// Speed and design along the horizontal midline, one sample per element
/// column: the speed interpolated at the element-center abscissa and the
/// design averaged over the two element rows touching the midline.
inline void write_cutline_csv(const std::string& path, const Mesh& mesh,
                              const Eigen::VectorXd& state,
                              const Eigen::VectorXd& design) {
    auto out = detail::open_out(path);
    out << "s,umag,gamma\n";
    const int jlo = (mesh.nely() - 1) / 2, jhi = mesh.nely() / 2;
    const int jel = jhi; // element row containing the midline (eta = 0 if on a node row)
    const double eta = (mesh.Ly() / 2.0 - jel * mesh.dy()) / mesh.dy();
    auto speed = [&](int col, int row) {
        const int n = mesh.node_index(col, row);
        return std::hypot(state[mesh.u1_dof(n)], state[mesh.u2_dof(n)]);
    };
    for (int i = 0; i < mesh.nelx(); ++i) {
        const double s = (i + 0.5) * mesh.dx();
        const double lo = 0.5 * (speed(i, jel) + speed(i + 1, jel));
        const double hi = 0.5 * (speed(i, jel + 1) + speed(i + 1, jel + 1));
        const double umag = (1.0 - eta) * lo + eta * hi;
        const double gamma =
            0.5 * (design[mesh.element_index(i, jlo)] + design[mesh.element_index(i, jhi)]);
        out << detail::g10(s) << ',' << detail::g10(umag) << ',' << detail::g10(gamma)
            << '\n';
    }
}

/// Element design values, one per line, after a 3-line geometry header.
/// %.17g round-trips doubles exactly, so write -> read -> write is stable.
inline void write_design_csv(const std::string& path, const Mesh& mesh,
                             const Eigen::VectorXd& design) {
    if (design.size() != mesh.num_elements())
        throw ConfigError("design export: design size does not match the mesh");
    auto out = detail::open_out(path);
    out << "# nelx " << mesh.nelx() << "\n";
    out << "# nely " << mesh.nely() << "\n";
    out << "# Lx " << detail::g17(mesh.Lx()) << " Ly " << detail::g17(mesh.Ly()) << "\n";
    for (int e = 0; e < design.size(); ++e) out << detail::g17(design[e]) << "\n";
}

struct DesignFile {
    int nelx = 0, nely = 0;
    double Lx = 0.0, Ly = 0.0;
    Eigen::VectorXd values;
};

inline DesignFile read_design_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read '" + path + "'");
    DesignFile d;
    std::string line;
    if (!std::getline(in, line) || std::sscanf(line.c_str(), "# nelx %d", &d.nelx) != 1)
        throw IoError("design file '" + path + "': bad header line 1");
    if (!std::getline(in, line) || std::sscanf(line.c_str(), "# nely %d", &d.nely) != 1)
        throw IoError("design file '" + path + "': bad header line 2");
    if (!std::getline(in, line) ||
        std::sscanf(line.c_str(), "# Lx %lf Ly %lf", &d.Lx, &d.Ly) != 2)
        throw IoError("design file '" + path + "': bad header line 3");
    if (d.nelx < 1 || d.nely < 1 || !(d.Lx > 0.0) || !(d.Ly > 0.0))
        throw IoError("design file '" + path + "': invalid geometry header");
    const int total = d.nelx * d.nely;
    d.values.resize(total);
    int count = 0;
    while (std::getline(in, line)) {
        line = detail::trim(line);
        if (line.empty()) continue;
        if (count >= total)
            throw IoError("design file '" + path + "': more values than elements");
        char* end = nullptr;
        d.values[count] = std::strtod(line.c_str(), &end);
        if (end == line.c_str() || *end != '\0')
            throw IoError("design file '" + path + "': bad value '" + line + "'");
        ++count;
    }
    if (count != total)
        throw IoError("design file '" + path + "': expected " + std::to_string(total) +
                      " values, found " + std::to_string(count));
    return d;
}

inline void write_accuracy_csv(const std::string& path,
                               const std::vector<ErrorMeasures>& points,
                               const std::string& scaling) {
    auto out = detail::open_out(path);
    out << "reynolds,darcy,scaling,eps_u_solid,eps_u_cavity,eps_phi,eps_dp,converged\n";
    for (const ErrorMeasures& em : points)
        out << detail::g10(em.reynolds) << ',' << detail::g10(em.darcy) << ',' << scaling
            << ',' << detail::g10(em.eps_u_solid) << ',' << detail::g10(em.eps_u_cavity)
            << ',' << detail::g10(em.eps_phi) << ',' << detail::g10(em.eps_dp) << ','
            << (em.converged ? 1 : 0) << '\n';
}

inline void write_slopes_csv(const std::string& path,
                             const std::vector<std::pair<double, SlopeSummary>>& rows) {
    auto out = detail::open_out(path);
    out << "reynolds,velocity_solid,velocity_cavity,dissipation,pressure_drop,"
           "velocity_points,pressure_points\n";
    for (const auto& [re, s] : rows)
        out << detail::g10(re) << ',' << detail::g10(s.velocity_solid) << ','
            << detail::g10(s.velocity_cavity) << ',' << detail::g10(s.dissipation) << ','
            << detail::g10(s.pressure_drop) << ',' << s.velocity_points << ','
            << s.pressure_points << '\n';
}

inline void write_sweep_csv(const std::string& path,
                            const std::vector<SweepPoint>& sweep) {
    auto out = detail::open_out(path);
    out << "alpha_max,objective,converged\n";
    for (const SweepPoint& pt : sweep)
        out << detail::g10(pt.alpha_max) << ',' << detail::g10(pt.objective) << ','
            << (pt.converged ? 1 : 0) << '\n';
}

inline void write_table_csv(const std::string& path, const CrossCheckTable& table,
                            const std::vector<std::string>& row_labels,
                            const std::vector<std::string>& col_labels) {
    if (static_cast<int>(row_labels.size()) != table.values.rows() ||
        static_cast<int>(col_labels.size()) != table.values.cols())
        throw ConfigError("table export: label counts do not match the table");
    auto out = detail::open_out(path);
    out << "condition";
    for (const std::string& c : col_labels) out << ',' << c;
    out << '\n';
    for (int i = 0; i < table.values.rows(); ++i) {
        out << row_labels[i];
        for (int j = 0; j < table.values.cols(); ++j) {
            out << ',';
            if (table.ok(i, j))
                out << detail::g10(table.values(i, j));
            else
                out << "nan";
        }
        out << '\n';
    }
}

/// Closed iso-level polylines of the design field in mesh coordinates
/// (y growing downward, as assembled).
struct DesignContour {
    double Lx = 0.0, Ly = 0.0;
    std::vector<std::vector<std::array<double, 2>>> loops; ///< first == last
};

namespace detail {

/// Element-center sample grid padded with a one-cell fluid ghost ring, so
/// solid regions touching the boundary close along the domain edge.
struct ContourGrid {
    const Mesh& mesh;
    const Eigen::VectorXd& design;
    int gx, gy;

    ContourGrid(const Mesh& m, const Eigen::VectorXd& d)
        : mesh(m), design(d), gx(m.nelx() + 2), gy(m.nely() + 2) {}

    double value(int gi, int gj) const {
        if (gi == 0 || gj == 0 || gi == gx - 1 || gj == gy - 1) return 1.0;
        return design[mesh.element_index(gi - 1, gj - 1)];
    }
    double x(int gi) const { return (gi - 0.5) * mesh.dx(); }
    double y(int gj) const { return (gj - 0.5) * mesh.dy(); }

    // Edges of the sample grid carry the crossing points; identifying them
    // by index makes segment chaining exact (no coordinate comparisons).
    long long hedge(int gi, int gj) const {
        return (static_cast<long long>(gj) * gx + gi) * 2;
    }
    long long vedge(int gi, int gj) const {
        return (static_cast<long long>(gj) * gx + gi) * 2 + 1;
    }
};

} // namespace detail

/// Marching squares at the given level on element-center samples with a
/// fluid ghost ring.  Saddle cells pick diagonals by their center average.
/// Vertices are clamped to the domain box; every loop is closed.
inline DesignContour extract_contour(const Mesh& mesh, const Eigen::VectorXd& design,
                                     double threshold = 0.5) {
    if (design.size() != mesh.num_elements())
        throw ConfigError("contour: design size does not match the mesh");
    if (!(threshold > 0.0) || !(threshold < 1.0))
        throw ConfigError("contour: threshold must lie in ]0;1[");

    const detail::ContourGrid grid(mesh, design);
    std::map<long long, std::array<double, 2>> points;
    std::map<long long, std::vector<long long>> links;

    for (int cj = 0; cj + 1 < grid.gy; ++cj)
        for (int ci = 0; ci + 1 < grid.gx; ++ci) {
            const double v00 = grid.value(ci, cj), v10 = grid.value(ci + 1, cj);
            const double v11 = grid.value(ci + 1, cj + 1), v01 = grid.value(ci, cj + 1);
            const int id = (v00 > threshold ? 1 : 0) | (v10 > threshold ? 2 : 0) |
                           (v11 > threshold ? 4 : 0) | (v01 > threshold ? 8 : 0);
            if (id == 0 || id == 15) continue;

            const long long edge_ids[4] = {
                grid.hedge(ci, cj),      // top:    (ci,cj)   - (ci+1,cj)
                grid.vedge(ci + 1, cj),  // right:  (ci+1,cj) - (ci+1,cj+1)
                grid.hedge(ci, cj + 1),  // bottom: (ci,cj+1) - (ci+1,cj+1)
                grid.vedge(ci, cj),      // left:   (ci,cj)   - (ci,cj+1)
            };
            auto cross = [&](int edge) {
                double fa, fb, xa, ya, xb, yb;
                switch (edge) {
                case 0: fa = v00; fb = v10; xa = grid.x(ci); ya = grid.y(cj);
                        xb = grid.x(ci + 1); yb = grid.y(cj); break;
                case 1: fa = v10; fb = v11; xa = grid.x(ci + 1); ya = grid.y(cj);
                        xb = grid.x(ci + 1); yb = grid.y(cj + 1); break;
                case 2: fa = v01; fb = v11; xa = grid.x(ci); ya = grid.y(cj + 1);
                        xb = grid.x(ci + 1); yb = grid.y(cj + 1); break;
                default: fa = v00; fb = v01; xa = grid.x(ci); ya = grid.y(cj);
                         xb = grid.x(ci); yb = grid.y(cj + 1); break;
                }
                const double s = (threshold - fa) / (fb - fa);
                points[edge_ids[edge]] = {xa + s * (xb - xa), ya + s * (yb - ya)};
            };
            auto segment = [&](int ea, int eb) {
                cross(ea);
                cross(eb);
                links[edge_ids[ea]].push_back(edge_ids[eb]);
                links[edge_ids[eb]].push_back(edge_ids[ea]);
            };

            switch (id) {
            case 1: case 14: segment(0, 3); break;
            case 2: case 13: segment(0, 1); break;
            case 4: case 11: segment(1, 2); break;
            case 8: case 7:  segment(2, 3); break;
            case 3: case 12: segment(3, 1); break;
            case 6: case 9:  segment(0, 2); break;
            case 5: // opposite corners 00 and 11 above the level
                if (0.25 * (v00 + v10 + v11 + v01) > threshold) {
                    segment(0, 1);
                    segment(2, 3);
                } else {
                    segment(0, 3);
                    segment(1, 2);
                }
                break;
            case 10: // opposite corners 10 and 01 above the level
                if (0.25 * (v00 + v10 + v11 + v01) > threshold) {
                    segment(0, 3);
                    segment(1, 2);
                } else {
                    segment(0, 1);
                    segment(2, 3);
                }
                break;
            default: break;
            }
        }

    DesignContour contour;
    contour.Lx = mesh.Lx();
    contour.Ly = mesh.Ly();
    std::set<long long> used;
    for (const auto& [start, nbrs] : links) {
        if (used.count(start)) continue;
        std::vector<long long> chain = {start};
        long long prev = -1, cur = start;
        while (true) {
            const auto& adj = links.at(cur);
            const long long next = adj[0] == prev ? adj[1] : adj[0];
            if (next == start) break;
            chain.push_back(next);
            prev = cur;
            cur = next;
        }
        std::vector<std::array<double, 2>> loop;
        for (long long edge : chain) {
            used.insert(edge);
            auto [px, py] = points.at(edge);
            const std::array<double, 2> pt = {std::clamp(px, 0.0, mesh.Lx()),
                                              std::clamp(py, 0.0, mesh.Ly())};
            if (loop.empty() || loop.back() != pt) loop.push_back(pt);
        }
        while (loop.size() > 1 && loop.front() == loop.back()) loop.pop_back();
        if (loop.size() < 3) continue; // clamping collapsed it to a sliver
        loop.push_back(loop.front());
        contour.loops.push_back(std::move(loop));
    }
    return contour;
}

/// Minimal ASCII DXF R12: one closed POLYLINE per loop inside an ENTITIES
/// section.  The vertical axis is flipped so the geometry appears upright
/// in CAD viewers (mesh y grows downward).
inline void export_dxf(const DesignContour& contour, const std::string& path) {
    auto out = detail::open_out(path);
    auto record = [&](int code, const std::string& value) {
        out << code << "\n" << value << "\n";
    };
    record(0, "SECTION");
    record(2, "ENTITIES");
    for (const auto& loop : contour.loops) {
        record(0, "POLYLINE");
        record(8, "0");
        record(66, "1");
        record(70, "1"); // closed
        for (const auto& pt : loop) {
            record(0, "VERTEX");
            record(8, "0");
            record(10, detail::g10(pt[0]));
            record(20, detail::g10(contour.Ly - pt[1]));
        }
        record(0, "SEQEND");
    }
    record(0, "ENDSEC");
    record(0, "EOF");
}

/// Field, design, and contour artifacts for one finished run, rooted at
/// path_prefix (e.g. "out/run" makes "out/run_nodes.csv").
inline void export_fields(const Mesh& mesh, const Eigen::VectorXd& state,
                          const Eigen::VectorXd& design, const FlowParams& params,
                          const std::string& path_prefix) {
    write_nodes_csv(path_prefix + "_nodes.csv", mesh, state);
    write_elements_csv(path_prefix + "_elements.csv", mesh, design, params);
    write_cutline_csv(path_prefix + "_cutline.csv", mesh, state, design);
    write_design_csv(path_prefix + "_design.csv", mesh, design);
}

} // namespace flowtopo

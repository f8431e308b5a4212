// icat: command-line front end. Every subcommand reads an optional --config
// file, writes CSV into output_dir and prints a one-line summary.
//
// exit codes: 0 ok, 1 bad input / usage, 2 numerical failure

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "icat/analytic.hpp"
#include "icat/closure.hpp"
#include "icat/dynamics.hpp"
#include "icat/experiments.hpp"
#include "icat/magnetostatics.hpp"

namespace fs = std::filesystem;
using namespace icat;

namespace {

struct Common {
    std::string config_path;
    std::string output_dir;
};

RunConfig load(const Common& common) {
    std::string text;
    if (!common.config_path.empty()) {
        std::ifstream in(common.config_path);
        if (!in) throw ValidationError("config: cannot open '" + common.config_path + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        text = ss.str();
    }
    RunConfig cfg = parse_config(text);
    if (!common.output_dir.empty()) cfg.output_dir = common.output_dir;
    return cfg;
}

std::ofstream open_output(const RunConfig& cfg, const std::string& name, fs::path& path) {
    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    if (ec) throw ValidationError("output_dir: cannot create '" + cfg.output_dir + "': " + ec.message());
    path = fs::path(cfg.output_dir) / name;
    std::ofstream out(path);
    if (!out) throw ValidationError("output_dir: cannot write '" + path.string() + "'");
    return out;
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

StageSpec stage_of(const RunConfig& cfg, int stage) {
    if (stage < 1 || stage > static_cast<int>(cfg.plan.stages.size())) {
        throw ValidationError("stage: must be between 1 and " + std::to_string(cfg.plan.stages.size()));
    }
    return cfg.plan.stages[static_cast<std::size_t>(stage - 1)];
}

// --- subcommands -----------------------------------------------------------

struct FieldMapArgs {
    std::string plane = "yz";
    std::optional<double> offset_um;
    std::optional<double> extent_um;
    double center_u_um = 0.0;
    double center_v_um = 0.0;
    int resolution = 101;
    int stage = 1;
    bool levitation_only = false;
};

void cmd_field_map(const Common& common, const FieldMapArgs& a) {
    const RunConfig cfg = load(common);
    const PhysicalConstants c;
    FieldMapSpec spec;
    if (a.plane == "yz") spec.plane = Plane::YZ;
    else if (a.plane == "xy") spec.plane = Plane::XY;
    else throw ValidationError("plane: expected 'yz' or 'xy'");
    const FieldModel model = a.levitation_only
                                 ? make_levitation_model(cfg.chip, c, cfg.numeric.quadrature())
                                 : make_field_model(cfg.chip, stage_of(cfg, a.stage), c, cfg.numeric.quadrature());
    if (a.offset_um) {
        spec.offset = *a.offset_um * 1e-6;
    } else if (spec.plane == Plane::XY) {
        // Default XY slice through the levitation height.
        spec.offset = find_equilibrium(make_levitation_model(cfg.chip, c, cfg.numeric.quadrature()), 0.0, c);
    }
    spec.extent = a.extent_um ? *a.extent_um * 1e-6 : (spec.plane == Plane::YZ ? 20e-6 : 400e-6);
    spec.center = Vec2(a.center_u_um * 1e-6, a.center_v_um * 1e-6);
    spec.resolution = a.resolution;
    const auto grid = field_map(spec, model);

    fs::path path;
    auto out = open_output(cfg, "field_map_" + a.plane + ".csv", path);
    write_field_map_csv(out, grid);

    const FieldSample* best = nullptr;
    int masked = 0;
    for (const auto& s : grid) {
        if (s.masked) {
            ++masked;
            continue;
        }
        if (!best || s.norm() < best->norm()) best = &s;
    }
    std::cout << "field-map: " << grid.size() << " points (" << masked << " masked) -> " << path.string();
    if (best) {
        std::cout << "; min |B| = " << fmt("%.6g", best->norm()) << " T at (" << fmt("%.4g", best->position.x() * 1e6)
                  << ", " << fmt("%.4g", best->position.y() * 1e6) << ", " << fmt("%.4g", best->position.z() * 1e6)
                  << ") um";
    }
    std::cout << '\n';
}

void cmd_gradient_sweep(const Common& common) {
    const RunConfig cfg = load(common);
    const auto two_a = linspace(cfg.sweep.two_a_min, cfg.sweep.two_a_max, cfg.sweep.two_a_points);
    const auto rows = sweep_gradient_vs_spacing(cfg.chip.b, two_a, cfg.sweep.IL_list);
    fs::path path;
    auto out = open_output(cfg, "gradient_sweep.csv", path);
    write_gradient_csv(out, rows);
    std::cout << "gradient-sweep: " << rows.size() << " rows -> " << path.string() << "; eta_L(2a="
              << fmt("%.4g", 2e6 * cfg.chip.a) << " um, I_L=" << fmt("%.4g", cfg.chip.I_L)
              << " A) = " << fmt("%.6g", eta_L_thin(cfg.chip.a, cfg.chip.b, cfg.chip.I_L)) << " T/m\n";
}

void cmd_bz_sweep(const Common& common) {
    const RunConfig cfg = load(common);
    const auto two_a = linspace(cfg.sweep.two_a_min, cfg.sweep.two_a_max, cfg.sweep.two_a_points);
    const auto rows = sweep_Bz_vs_spacing(cfg.chip.b, two_a, cfg.sweep.IL_list);
    fs::path path;
    auto out = open_output(cfg, "bz_sweep.csv", path);
    write_bz_csv(out, rows);
    const PhysicalConstants c;
    std::cout << "bz-sweep: " << rows.size() << " rows -> " << path.string()
              << "; Bz*eta_L = " << fmt("%.6g", c.g * c.mu0 / c.chi_rho) << " T^2/m\n";
}

void cmd_levitate(const Common& common) {
    const RunConfig cfg = load(common);
    const PhysicalConstants c;
    const FieldModel lev = make_levitation_model(cfg.chip, c, cfg.numeric.quadrature());
    const double eta_thin = eta_L_thin(cfg.chip.a, cfg.chip.b, cfg.chip.I_L, c);
    const Mat3 J = field_jacobian(lev, Vec3::Zero(), {cfg.numeric.jac_step, true, 1e-3});
    const double eta_num = J(2, 2);
    const double eta_S = eta_S_thin(cfg.chip.L, cfg.plan.stages[0].separation_current, c);
    const TrapParams tp = trap_params(eta_num, eta_S, c);
    const double zL = find_equilibrium(lev, -cfg.x0, c);

    fs::path path;
    auto out = open_output(cfg, "levitation.csv", path);
    out << "etaL_thin_Tpm,etaL_num_Tpm,etaS_Tpm,omega_x_rps,omega_y_rps,omega_z_rps,zL_formula_m,zL_num_m,Bz_zL_T\n";
    out << format_double(eta_thin) << ',' << format_double(eta_num) << ',' << format_double(eta_S) << ','
        << format_double(tp.omega_x) << ',' << format_double(tp.omega_y) << ',' << format_double(tp.omega_z) << ','
        << format_double(tp.z_L) << ',' << format_double(zL) << ',' << format_double(tp.Bz_at_zL) << '\n';
    std::cout << "levitate: eta_L = " << fmt("%.6g", eta_num) << " T/m (thin " << fmt("%.6g", eta_thin)
              << "), omega_z = " << fmt("%.6g", tp.omega_z) << " rad/s, z_L = " << fmt("%.6g", zL * 1e6)
              << " um (formula " << fmt("%.6g", tp.z_L * 1e6) << " um), Bz(z_L) = " << fmt("%.6g", tp.Bz_at_zL)
              << " T -> " << path.string() << '\n';
}

void write_numeric_trajectory_csv(std::ostream& out, const InterferometerResult& r) {
    out << "t_s,x_up_m,v_up_mps,x_dn_m,v_dn_mps,dx_m,dv_mps,stage,"
           "y_up_m,z_up_m,vy_up_mps,vz_up_mps,y_dn_m,z_dn_m,vy_dn_mps,vz_dn_mps\n";
    const double sigma = orientation();
    for (const auto& s : r.run.samples) {
        const PhaseState& u = s.states[0];
        const PhaseState& d = s.states[1];
        out << format_double(s.t) << ',' << format_double(u.r.x()) << ',' << format_double(u.v.x()) << ','
            << format_double(d.r.x()) << ',' << format_double(d.v.x()) << ','
            << format_double(sigma * (u.r.x() - d.r.x())) << ',' << format_double(sigma * (u.v.x() - d.v.x()))
            << ',' << s.stage + 1 << ',' << format_double(u.r.y()) << ',' << format_double(u.r.z()) << ','
            << format_double(u.v.y()) << ',' << format_double(u.v.z()) << ',' << format_double(d.r.y()) << ','
            << format_double(d.r.z()) << ',' << format_double(d.v.y()) << ',' << format_double(d.v.z()) << '\n';
    }
}

void cmd_interferometer(const Common& common, const std::string& mode) {
    const RunConfig cfg = load(common);
    const PhysicalConstants c;
    fs::path path;
    if (mode == "analytic") {
        const AnalyticProtocol p = analytic_protocol(cfg.analytic_scenario(c), cfg.numeric.sample_dt, c);
        auto out = open_output(cfg, "trajectory_analytic.csv", path);
        write_trajectory_csv(out, p.rows);
        std::cout << "interferometer (analytic): max dx = " << fmt("%.6g", p.dx_max * 1e6)
                  << " um, tau1 = " << fmt("%.6g", p.end1.tau) << " s, tau2 = " << fmt("%.6g", p.end2.tau)
                  << " s, tau3 = " << fmt("%.6g", p.tau3) << " s -> " << path.string() << '\n';
    } else if (mode == "numeric") {
        const InterferometerResult r =
            run_interferometer_numeric(cfg.particle.mass, cfg.x0, cfg.chip, cfg.plan, c, cfg.numeric.dynamics(),
                                       cfg.numeric.quadrature());
        auto out = open_output(cfg, "trajectory_numeric.csv", path);
        write_numeric_trajectory_csv(out, r);
        std::cout << "interferometer (numeric): max dx = " << fmt("%.6g", r.max_dx * 1e6)
                  << " um, tau3 = " << fmt("%.6g", r.tau3) << " s, dx(tau3) = " << fmt("%.3e", r.residual_dx)
                  << " m, dv(tau3) = " << fmt("%.3e", r.residual_dv) << " m/s, max|y| = "
                  << fmt("%.3e", r.max_abs_y) << " m, max|z-zL| = " << fmt("%.3e", r.max_abs_dz) << " m -> "
                  << path.string() << '\n';
    } else {
        throw ValidationError("mode: expected 'analytic' or 'numeric'");
    }
}

void cmd_size_sweep(const Common& common) {
    const RunConfig cfg = load(common);
    const PhysicalConstants c;
    const double eta1 = eta_S_thin(cfg.chip.L, cfg.plan.stages[0].separation_current, c);
    const auto x0s = linspace(cfg.sweep.x0_min, cfg.sweep.x0_max, cfg.sweep.x0_points);
    const auto rows = sweep_size_vs_x0(cfg.sweep.mass_list, x0s, eta1, cfg.chip.B0, c);
    fs::path path;
    auto out = open_output(cfg, "size_sweep.csv", path);
    write_size_csv(out, rows);
    std::cout << "size-sweep: " << rows.size() << " rows -> " << path.string() << "; dx_max(m="
              << fmt("%.3g", cfg.particle.mass) << " kg, x0=" << fmt("%.4g", cfg.x0 * 1e6)
              << " um) = " << fmt("%.6g", delta_x_max(cfg.x0, eta1, cfg.chip.B0, cfg.particle.mass, c) * 1e6)
              << " um\n";
}

void cmd_close_loop(const Common& common) {
    const RunConfig cfg = load(common);
    const PhysicalConstants c;
    const ClosureResult r = solve_closure(cfg.chip, cfg.plan, cfg.particle.mass, cfg.x0, c, cfg.numeric.dynamics(),
                                          cfg.numeric.closure(), cfg.numeric.quadrature());
    fs::path path;
    auto out = open_output(cfg, "closure.csv", path);
    write_closure_csv(out, r);
    std::cout << "close-loop: I3 = " << fmt("%.8g", r.I3) << " A, eta2 = " << fmt("%.6g", r.eta2)
              << " T/m, tau3 = " << fmt("%.6g", r.tau3) << " s, dx = " << fmt("%.3e", r.residual_dx)
              << " m, dv = " << fmt("%.3e", r.residual_dv) << " m/s, " << r.iterations << " iterations -> "
              << path.string() << '\n';
}

void cmd_estimate(const Common& common, std::optional<double> current, double duration) {
    const RunConfig cfg = load(common);
    const PhysicalConstants c;
    const double I = current.value_or(cfg.chip.I_L);
    const HeatingEstimate h = heating_estimate(I, cfg.chip, duration, c);
    const double ell = diffusion_length(duration, c);
    fs::path path;
    auto out = open_output(cfg, "estimate.csv", path);
    out << "I_A,length_m,w_m,duration_s,R_ohm,Q_J,diffusion_length_m\n";
    out << format_double(I) << ',' << format_double(2.0 * cfg.chip.wire_half_length) << ','
        << format_double(cfg.chip.w) << ',' << format_double(duration) << ',' << format_double(h.R) << ','
        << format_double(h.Q) << ',' << format_double(ell) << '\n';
    std::cout << "estimate: R = " << fmt("%.4g", h.R) << " ohm, Q = " << fmt("%.4g", h.Q)
              << " J, diffusion length = " << fmt("%.4g", ell * 1e3) << " mm -> " << path.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Chip-based diamagnetic interferometer simulator"};
    app.require_subcommand(1);

    Common common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config_path, "key=value config file");
        sub->add_option("--output-dir", common.output_dir, "overrides output_dir from the config");
    };

    FieldMapArgs fm;
    auto* field_map_cmd = app.add_subcommand("field-map", "|B| on a YZ or XY grid");
    add_common(field_map_cmd);
    field_map_cmd->add_option("--plane", fm.plane, "yz or xy")->check(CLI::IsMember({"yz", "xy"}));
    field_map_cmd->add_option("--offset-um", fm.offset_um, "slice position (x for yz, z for xy)");
    field_map_cmd->add_option("--extent-um", fm.extent_um, "half-width of the window");
    field_map_cmd->add_option("--center-u-um", fm.center_u_um, "window center, first in-plane axis");
    field_map_cmd->add_option("--center-v-um", fm.center_v_um, "window center, second in-plane axis");
    field_map_cmd->add_option("--resolution", fm.resolution, "points per side");
    field_map_cmd->add_option("--stage", fm.stage, "separation stage (1-3)");
    field_map_cmd->add_flag("--levitation-only", fm.levitation_only, "omit the separation assembly");

    auto* gradient_cmd = app.add_subcommand("gradient-sweep", "eta_L vs 2a for several I_L");
    add_common(gradient_cmd);
    auto* bz_cmd = app.add_subcommand("bz-sweep", "Bz at the levitation height vs 2a");
    add_common(bz_cmd);
    auto* levitate_cmd = app.add_subcommand("levitate", "trap parameters and levitation height");
    add_common(levitate_cmd);

    std::string mode = "analytic";
    auto* interf_cmd = app.add_subcommand("interferometer", "three-stage protocol trajectories");
    add_common(interf_cmd);
    interf_cmd->add_option("--mode", mode, "analytic or numeric")->check(CLI::IsMember({"analytic", "numeric"}));

    auto* size_cmd = app.add_subcommand("size-sweep", "maximum separation vs x0 per mass");
    add_common(size_cmd);
    auto* close_cmd = app.add_subcommand("close-loop", "solve the stage-3 current");
    add_common(close_cmd);

    std::optional<double> current;
    double duration = 0.1;
    auto* estimate_cmd = app.add_subcommand("estimate", "Joule heating and thermal diffusion length");
    add_common(estimate_cmd);
    estimate_cmd->add_option("--current-A", current, "wire current (default IL_A)");
    estimate_cmd->add_option("--duration-s", duration, "duration");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }

    try {
        if (*field_map_cmd) cmd_field_map(common, fm);
        else if (*gradient_cmd) cmd_gradient_sweep(common);
        else if (*bz_cmd) cmd_bz_sweep(common);
        else if (*levitate_cmd) cmd_levitate(common);
        else if (*interf_cmd) cmd_interferometer(common, mode);
        else if (*size_cmd) cmd_size_sweep(common);
        else if (*close_cmd) cmd_close_loop(common);
        else if (*estimate_cmd) cmd_estimate(common, current, duration);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 2;
    }
    return 0;
}

// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "icat/analytic.hpp"
#include "icat/closure.hpp"
#include "icat/dynamics.hpp"
#include "icat/experiments.hpp"
#include "icat/magnetostatics.hpp"

using namespace icat;

namespace {

const PhysicalConstants C;
constexpr double kMass = 1e-19;
constexpr double kX0 = 40e-6;
constexpr double kB0 = 0.5;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string f(const char* fmt, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// The numeric chip run is shared by criteria 2 and 9.
const InterferometerResult& chip_run() {
    static const InterferometerResult r = run_interferometer_numeric(kMass, kX0, ChipConfig{}, default_plan());
    return r;
}

Outcome separation_gradient() {
    const auto t0 = std::chrono::steady_clock::now();
    const FieldModel m = make_field_model(ChipConfig{}, default_plan().stages[0]);
    const double g = field_jacobian(m, Vec3::Zero())(0, 0);
    const double dt = seconds_since(t0);
    const double err = std::abs(std::abs(g) - 100.0) / 100.0;
    return {err <= 0.02 && dt < 1.0, "dBx/dx = " + f("%.4f", g) + " T/m (|err| " + f("%.1f", 100 * err) +
                                         "% vs 100 T/m, tol 2%), " + f("%.3f", dt) + " s"};
}

Outcome superposition_size() {
    const double analytic = delta_x_max(kX0, 100.0, kB0, kMass);
    const InterferometerResult& r = chip_run();
    const double rel_formula = std::abs(analytic - 12e-6) / 12e-6;
    const double rel_numeric = std::abs(r.max_dx - analytic) / analytic;
    const bool ok = rel_formula <= 0.10 && rel_numeric <= 0.05 && r.tau3 <= 0.1;
    return {ok, "analytic dx_max = " + f("%.4f", analytic * 1e6) + " um, numeric max dx = " +
                    f("%.4f", r.max_dx * 1e6) + " um (" + f("%.2f", 100 * rel_numeric) + "%), loop ends at " +
                    f("%.4f", r.tau3) + " s"};
}

Outcome closure_current() {
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const ClosureResult r = solve_closure(ChipConfig{}, default_plan(), kMass, kX0);
        const double dt = seconds_since(t0);
        const bool ok = r.I3 >= 9.94 && r.I3 <= 10.00 && std::abs(r.residual_dv) < 1e-7 &&
                        std::abs(r.residual_dx) < 1e-8 && dt < 60.0;
        return {ok, "I3 = " + f("%.5f", r.I3) + " A (band [9.94, 10.00]), dx = " + f("%.2e", r.residual_dx) +
                        " m, dv = " + f("%.2e", r.residual_dv) + " m/s, eta2 = " + f("%.3f", r.eta2) + " T/m, " +
                        f("%.1f", dt) + " s"};
    } catch (const NumericalError& e) {
        return {false, std::string("solver failed: ") + e.what()};
    }
}

Outcome residual_field() {
    const double target = -1986.0;
    double worst = 0.0;
    for (int i = 0; i <= 20; ++i) {
        const double eta_L = std::pow(10.0, 4.0 + 2.0 * i / 20.0);
        const LinearField lev{eta_L, 0.0, kB0};
        EquilibriumOptions eq;
        eq.z_lo = -2e-6 * std::max(1.0, 1e10 / (eta_L * eta_L));
        const double zL = find_equilibrium(lev, 0.0, C, eq);
        const double product = lev.field(Vec3(0, 0, zL)).z() * eta_L;
        worst = std::max(worst, std::abs(product - target) / std::abs(target));
    }
    return {worst <= 0.01, "max |Bz(zL) eta_L / (-1986) - 1| = " + f("%.2e", worst) + " over eta_L in [1e4, 1e6] T/m"};
}

Outcome oracle_equivalence() {
    const AnalyticProtocol p = analytic_protocol({kMass, kX0, kB0, 100.0, 100.0});
    auto ideal = [](const StageSpec& s) { return LinearField{1.4e5, s.eta_sign * 10.0 * s.separation_current, kB0}; };
    StagePlan plan = default_plan(10.0, 10.0);
    plan.stages[0].end_rule = EndRule::scheduled(p.end1.tau);
    plan.stages[1].end_rule = EndRule::scheduled(p.end2.tau - p.end1.tau);
    plan.stages[2].end_rule = EndRule::scheduled(p.tau3 - p.end2.tau);
    const InterferometerResult r = run_interferometer(ideal, plan, kMass, kX0, kB0);
    double dx = 0.0;
    double dv = 0.0;
    for (const auto& s : r.run.samples) {
        for (std::size_t i = 0; i < 2; ++i) {
            const Motion m = p.at(s.t, r.run.spins[i]);
            dx = std::max(dx, std::abs(s.states[i].r.x() - m.x));
            dv = std::max(dv, std::abs(s.states[i].v.x() - m.v));
        }
    }
    return {dx < 1e-9 && dv < 1e-8, "max |dx| = " + f("%.2e", dx) + " m, max |dv| = " + f("%.2e", dv) + " m/s over " +
                                         f("%.4f", p.tau3) + " s at dt = 1e-5 s"};
}

Outcome mass_scaling() {
    const double masses[3] = {1e-19, 1e-17, 1e-15};
    const int expected_decade[3] = {-5, -7, -9};
    const double ref = delta_x_max(kX0, 100.0, kB0, masses[0]) * masses[0];
    double worst = 0.0;
    bool hierarchy = true;
    std::string sizes;
    for (int i = 0; i < 3; ++i) {
        const double dx = delta_x_max(kX0, 100.0, kB0, masses[i]);
        worst = std::max(worst, std::abs(dx * masses[i] - ref) / ref);
        hierarchy = hierarchy && static_cast<int>(std::floor(std::log10(dx))) == expected_decade[i];
        sizes += (i ? ", " : "") + f("%.3e", dx);
    }
    return {worst <= 1e-9 && hierarchy, "dx_max = " + sizes + " m; spread of dx*m " + f("%.1e", worst)};
}

Outcome levitation() {
    const FieldModel lev = make_levitation_model(ChipConfig{});
    const double eta_L = field_jacobian(lev, Vec3::Zero())(2, 2);
    const double zL = find_equilibrium(lev, -kX0);
    const double formula = -C.g * C.mu0 / (-C.chi_rho * eta_L * eta_L);
    const double err = std::abs(zL - formula) / std::abs(formula);
    const bool ok = err <= 0.05 && std::abs(zL) >= 0.005e-6 && std::abs(zL) <= 0.25e-6;
    return {ok, "z_L = " + f("%.5f", zL * 1e6) + " um, formula with eta_L = " + f("%.0f", eta_L) + " T/m gives " +
                    f("%.5f", formula * 1e6) + " um (" + f("%.3f", 100 * err) + "%); reference value -0.0176 um"};
}

Outcome field_invariants() {
    const ChipConfig cfg;
    const StageSpec s1 = default_plan().stages[0];
    const FieldModel full = make_field_model(cfg, s1);
    const FieldModel rect(build_levitation_assembly(cfg), {}, 0.0);
    const FieldModel thin(build_levitation_assembly_thin(cfg), {}, 0.0);
    const FieldModel sep({}, build_separation_assembly(cfg, s1), 0.0);
    std::mt19937 rng(2024);
    std::uniform_real_distribution<double> ux(-150e-6, 150e-6);
    std::uniform_real_distribution<double> uyz(-30e-6, 30e-6);
    double anti = 0.0;
    double lin = 0.0;
    double div = 0.0;
    int n = 0;
    while (n < 100) {
        const Vec3 p(ux(rng), uyz(rng), uyz(rng));
        bool near = false;
        for (const auto& w : rect.levitation()) {
            const double gap = std::max(std::abs(p.y() - w.center.x()), std::abs(p.z() - w.center.y())) - w.half_width;
            if (gap < 1e-6) near = true;
        }
        if (near) continue;
        ++n;
        for (const FieldModel* m : {&rect, &thin}) {
            const Vec3 b = m->field(p);
            anti = std::max(anti, std::abs(b.y() + m->field(Vec3(p.x(), -p.y(), p.z())).y()));
            anti = std::max(anti, std::abs(b.z() + m->field(Vec3(p.x(), p.y(), -p.z())).z()));
        }
        const Vec3 total = total_field(p, full);
        const Vec3 parts = total_field(p, rect) + total_field(p, sep) + Vec3(cfg.B0, 0, 0);
        lin = std::max(lin, (total - parts).norm() / total.norm());
        const Mat3 J = field_jacobian(full, p);
        div = std::max(div, std::abs(J.trace()) / J.norm());
    }
    double far = 0.0;
    const WireSegment rw{WireModel::RectX, Vec2::Zero(), 24.0, 0.0, 5e-6, Axis::X};
    const WireSegment tw{WireModel::ThinInfinite, Vec2::Zero(), 24.0, 0.0, 0.0, Axis::X};
    for (int k = 0; k < 8; ++k) {
        const double a = 0.7 * k;
        const Vec3 p(0, 1e-3 * std::cos(a), 1e-3 * std::sin(a));
        const Vec2 br = field_rect_wire(p, rw);
        const Vec2 bt = field_thin_infinite(p, tw);
        far = std::max(far, (br - bt).norm() / bt.norm());
    }
    const bool ok = anti <= 1e-12 && lin <= 1e-14 && div < 1e-4 && far <= 1e-3;
    return {ok, "antisymmetry " + f("%.1e", anti) + " T, linearity " + f("%.1e", lin) + ", div/|J| " + f("%.1e", div) +
                    ", far-field at 100w " + f("%.1e", far)};
}

Outcome transverse_confinement() {
    const InterferometerResult& r = chip_run();
    return {r.max_abs_y < 1e-9 && r.max_abs_dz < 1e-9,
            "max|y| = " + f("%.2e", r.max_abs_y) + " m, max|z - z_L| = " + f("%.2e", r.max_abs_dz) + " m"};
}

Outcome estimates() {
    const HeatingEstimate h = heating_estimate(24.0, ChipConfig{}, 0.1);
    const double ell = diffusion_length(0.1);
    const double eq = std::abs(h.Q - 5.5) / 5.5;
    const double el = std::abs(ell - 2.8e-3) / 2.8e-3;
    return {eq <= 0.05 && el <= 0.05, "Q = " + f("%.3f", h.Q) + " J (" + f("%.1f", 100 * eq) + "% from 5.5 J), L_diff = " +
                                          f("%.3f", ell * 1e3) + " mm"};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"separation gradient", separation_gradient},
        {"superposition size", superposition_size},
        {"closure current", closure_current},
        {"residual field", residual_field},
        {"oracle equivalence", oracle_equivalence},
        {"1/m scaling", mass_scaling},
        {"levitation height", levitation},
        {"field invariants", field_invariants},
        {"transverse confinement", transverse_confinement},
        {"engineering estimates", estimates},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::printf("criterion %2zu %s  %-24s %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                    o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}

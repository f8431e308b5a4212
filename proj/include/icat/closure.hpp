#pragma once

// Stage-3 recombination: tune the stage-3 current so the two branches meet
// with zero relative position and velocity.
//
// tau3 is the first upward zero of the oriented relative velocity after tau2,
// i.e. the closest approach of the branches. At that instant dv = 0 up to the
// event tolerance and the residual to drive to zero is dx(tau3), which changes
// sign as I3 passes through the closing current.

#include <cmath>
#include <limits>
#include <ostream>
#include <vector>

#include "icat/dynamics.hpp"

namespace icat {

struct ClosureResult {
    double I3 = 0.0;
    double eta2 = 0.0;
    double tau3 = 0.0;
    double residual_dx = 0.0;
    double residual_dv = 0.0;
    int iterations = 0;
};

struct ClosureOptions {
    double tol_dx = 1e-8;
    double tol_dv = 1e-7;
    int max_iter = 50;
    double horizon_factor = 3.0;
    double bracket_step = 0.01;  // relative step of the bracketing scan around I
    int max_bracket_steps = 40;
};

struct ClosureResidual {
    double dx = 0.0;
    double dv = 0.0;
    double tau3 = 0.0;
};

// Branch states at the end of stage 2, shared by every residual evaluation.
struct ClosurePrefix {
    std::vector<PhaseState> states;  // {up, down}
    double tau1 = 0.0;
    double tau2 = 0.0;
    double z_L = 0.0;
    double I = 0.0;  // stage-1 current
    StageSpec stage3;
    double mass = 0.0;
};

template <class Factory>
    requires StageFieldFactory<Factory>
[[nodiscard]] ClosurePrefix prepare_closure(const Factory& make_field, const StagePlan& plan, double mass, double x0,
                                            double B0, const PhysicalConstants& c = {},
                                            const NumericOptions& opts = {}, const EquilibriumOptions& eq = {}) {
    plan.validate();
    if (plan.stages.size() != 3) throw ValidationError("protocol: closure needs a three-stage plan");
    if (!(mass > 0.0)) throw ValidationError("mass_kg: must be positive");
    using F = std::decay_t<decltype(make_field(plan.stages.front()))>;
    std::vector<F> fields;
    std::vector<double> etas;
    for (const auto& s : plan.stages) {
        fields.push_back(make_field(s));
        etas.push_back(std::abs(gradient_x(fields.back(), Vec3::Zero(), opts.dynamics.jacobian_step)));
    }
    StagePlan effective = plan;
    if (opts.switching == SwitchMode::Scheduled) effective = scheduled_plan(plan, etas, x0, B0, mass, c);

    ClosurePrefix p;
    p.z_L = find_equilibrium(fields.front(), -x0, c, eq);
    EnsembleIntegrator<F> integrator({1.0, -1.0, 0.0}, mass, c, opts.dynamics);
    std::vector<PhaseState> states(3, PhaseState{Vec3(-x0, 0.0, p.z_L), Vec3::Zero()});
    auto ignore = [](double, int, const std::vector<PhaseState>&) {};
    p.tau1 = integrator.run_stage(states, 0.0, fields[0], effective.stages[0].end_rule, opts.max_stage_duration, 0,
                                  ignore);
    p.tau2 = integrator.run_stage(states, p.tau1, fields[1], effective.stages[1].end_rule, opts.max_stage_duration,
                                  1, ignore);
    p.states = {states[0], states[1]};
    p.I = plan.stages[0].separation_current;
    p.stage3 = plan.stages[2];
    p.mass = mass;
    return p;
}

template <class Factory>
    requires StageFieldFactory<Factory>
[[nodiscard]] ClosureResidual closure_residual(double I3, const ClosurePrefix& prefix, const Factory& make_field,
                                               const PhysicalConstants& c = {}, const NumericOptions& opts = {},
                                               const ClosureOptions& copts = {}) {
    if (!(I3 > 0.0 && I3 <= 2.0 * prefix.I)) throw ValidationError("I3_A: must lie in (0, 2 I]");
    StageSpec spec = prefix.stage3;
    spec.separation_current = I3;
    spec.end_rule = EndRule::closure();
    const auto field = make_field(spec);
    using F = std::decay_t<decltype(field)>;
    EnsembleIntegrator<F> integrator({1.0, -1.0}, prefix.mass, c, opts.dynamics);
    std::vector<PhaseState> states = prefix.states;
    const double horizon = copts.horizon_factor * (prefix.tau2 - prefix.tau1);
    const double t = integrator.run_stage(states, prefix.tau2, field, spec.end_rule, horizon, 2,
                                          [](double, int, const std::vector<PhaseState>&) {});
    const double sigma = orientation(c);
    return {sigma * (states[0].r.x() - states[1].r.x()), sigma * (states[0].v.x() - states[1].v.x()), t};
}

// Residual dx(tau3) on a grid of stage-3 currents.
template <class Factory>
    requires StageFieldFactory<Factory>
[[nodiscard]] std::vector<ClosureResidual> scan_closure(const std::vector<double>& currents,
                                                        const ClosurePrefix& prefix, const Factory& make_field,
                                                        const PhysicalConstants& c = {},
                                                        const NumericOptions& opts = {},
                                                        const ClosureOptions& copts = {}) {
    std::vector<ClosureResidual> out;
    out.reserve(currents.size());
    for (double I3 : currents) out.push_back(closure_residual(I3, prefix, make_field, c, opts, copts));
    return out;
}

// Expanding bracket scan around the stage-1 current, then Illinois on dx(tau3).
template <class Factory>
    requires StageFieldFactory<Factory>
[[nodiscard]] ClosureResult solve_closure(const ClosurePrefix& prefix, const Factory& make_field,
                                          const PhysicalConstants& c = {}, const NumericOptions& opts = {},
                                          const ClosureOptions& copts = {}) {
    if (!(copts.tol_dx > 0.0) || !(copts.tol_dv > 0.0)) throw ValidationError("tol_dx_m: tolerances must be positive");
    if (copts.max_iter < 1) throw ValidationError("max_iter: must be >= 1");
    auto residual = [&](double I3) { return closure_residual(I3, prefix, make_field, c, opts, copts); };
    auto finish = [&](double I3, const ClosureResidual& r, int iters) {
        StageSpec spec = prefix.stage3;
        spec.separation_current = I3;
        ClosureResult out{I3, std::abs(gradient_x(make_field(spec), Vec3::Zero(), opts.dynamics.jacobian_step)), r.tau3,
                          r.dx, r.dv, iters};
        if (std::abs(r.dx) >= copts.tol_dx || std::abs(r.dv) >= copts.tol_dv) {
            throw NoConvergence("solve_closure: residuals above tolerance after " + std::to_string(iters) +
                                " iterations");
        }
        return out;
    };

    const double I = prefix.I;
    double a = I;
    ClosureResidual ra = residual(a);
    if (ra.dx == 0.0) return finish(a, ra, 0);
    double b = a;
    ClosureResidual rb = ra;
    bool bracketed = false;
    for (int k = 1; k <= copts.max_bracket_steps && !bracketed; ++k) {
        for (double dir : {-1.0, 1.0}) {
            const double cand = I * (1.0 + dir * copts.bracket_step * k);
            if (!(cand > 0.0 && cand <= 2.0 * I)) continue;
            const ClosureResidual rc = residual(cand);
            if ((rc.dx > 0.0) != (ra.dx > 0.0) || rc.dx == 0.0) {
                b = cand;
                rb = rc;
                // Tighten the other end onto the neighbouring scan point.
                const double prev = I * (1.0 + dir * copts.bracket_step * (k - 1));
                if (k > 1) {
                    a = prev;
                    ra = residual(a);
                }
                bracketed = true;
                break;
            }
        }
    }
    if (!bracketed) throw NoBracket("solve_closure: dx(tau3) does not change sign around I");
    if (rb.dx == 0.0) return finish(b, rb, 0);

    // Illinois. Iterate well past tol_dx; the residual is smooth in I3.
    int side = 0;
    double best_I = std::abs(ra.dx) < std::abs(rb.dx) ? a : b;
    ClosureResidual best = std::abs(ra.dx) < std::abs(rb.dx) ? ra : rb;
    double fa = ra.dx;
    double fb = rb.dx;
    for (int it = 1; it <= copts.max_iter; ++it) {
        double x = (a * fb - b * fa) / (fb - fa);
        if (!(x > std::min(a, b) && x < std::max(a, b))) x = 0.5 * (a + b);
        const ClosureResidual r = residual(x);
        if (std::abs(r.dx) < std::abs(best.dx)) {
            best = r;
            best_I = x;
        }
        const bool done = std::abs(r.dx) < 1e-3 * copts.tol_dx || std::abs(b - a) < 1e-12 * I;
        if (done && std::abs(best.dx) < copts.tol_dx && std::abs(best.dv) < copts.tol_dv) {
            return finish(best_I, best, it);
        }
        if ((r.dx > 0.0) == (fa > 0.0)) {
            a = x;
            fa = r.dx;
            if (side == -1) fb *= 0.5;
            side = -1;
        } else {
            b = x;
            fb = r.dx;
            if (side == 1) fa *= 0.5;
            side = 1;
        }
    }
    if (std::abs(best.dx) < copts.tol_dx && std::abs(best.dv) < copts.tol_dv) {
        return finish(best_I, best, copts.max_iter);
    }
    throw NoConvergence("solve_closure: no convergence after " + std::to_string(copts.max_iter) + " iterations");
}

// Convenience: the chip scenario built from a config and plan.
[[nodiscard]] inline ClosureResult solve_closure(const ChipConfig& config, const StagePlan& plan, double mass,
                                                 double x0, const PhysicalConstants& c = {},
                                                 const NumericOptions& opts = {}, const ClosureOptions& copts = {},
                                                 const QuadratureOptions& quad = {}) {
    config.validate();
    auto factory = [&](const StageSpec& s) { return make_field_model(config, s, c, quad); };
    const ClosurePrefix prefix = prepare_closure(factory, plan, mass, x0, config.B0, c, opts);
    return solve_closure(prefix, factory, c, opts, copts);
}

inline void write_closure_csv(std::ostream& out, const ClosureResult& r) {
    out << "I3_A,eta2_Tpm,tau3_s,res_dx_m,res_dv_mps,iters\n";
    out << format_double(r.I3) << ',' << format_double(r.eta2) << ',' << format_double(r.tau3) << ','
        << format_double(r.residual_dx) << ',' << format_double(r.residual_dv) << ',' << r.iterations << '\n';
}

}  // namespace icat

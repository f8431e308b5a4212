#pragma once

// Classical centre-of-mass dynamics of the spin branches in a sampled field.
//
// Forces come from U = -chi m / (2 mu0) |B|^2 + hbar gamma_e S_x B_x + m g z;
// the zero-field splitting term is constant and drops out. Gradients are
// central differences of the field (see central_jacobian).

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <span>
#include <vector>

#include "icat/analytic.hpp"
#include "icat/chip.hpp"
#include "icat/constants.hpp"
#include "icat/errors.hpp"
#include "icat/magnetostatics.hpp"

namespace icat {

struct PhaseState {
    Vec3 r = Vec3::Zero();
    Vec3 v = Vec3::Zero();
};

struct TrajectoryState {
    double t = 0.0;
    Vec3 position = Vec3::Zero();
    Vec3 velocity = Vec3::Zero();
    SpinBranch branch = SpinBranch::Up;
    int stage_index = 0;
};

struct Trajectory {
    std::vector<TrajectoryState> samples;
    std::vector<double> stage_boundaries;
};

struct DynamicsOptions {
    double dt = 1e-5;
    double jacobian_step = 1e-8;
};

template <MagneticField F>
[[nodiscard]] Vec3 acceleration(const Vec3& r, const F& field, double spin, double mass,
                                const PhysicalConstants& c = {}, double jacobian_step = 1e-8) {
    if (field.inside_conductor(r)) throw ConductorIntrusion("particle entered a conductor");
    const Vec3 B = field.field(r);
    const Mat3 J = central_jacobian(field, r, jacobian_step);
    const Vec3 grad_B2 = 2.0 * J.transpose() * B;
    const Vec3 grad_Bx = J.row(0).transpose();
    Vec3 a = c.chi_rho / (2.0 * c.mu0) * grad_B2 - (c.hbar * c.gamma_e * spin / mass) * grad_Bx;
    a.z() -= c.g;
    return a;
}

template <MagneticField F>
[[nodiscard]] Vec3 acceleration(const TrajectoryState& state, const F& field, double mass,
                                const PhysicalConstants& c = {}, double jacobian_step = 1e-8) {
    return acceleration(state.position, field, spin_value(state.branch), mass, c, jacobian_step);
}

template <MagneticField F>
[[nodiscard]] PhaseState rk4_step(const PhaseState& s, double h, const F& field, double spin, double mass,
                                  const PhysicalConstants& c, double jacobian_step) {
    auto acc = [&](const Vec3& r) { return acceleration(r, field, spin, mass, c, jacobian_step); };
    const Vec3 a1 = acc(s.r);
    const Vec3 r2 = s.r + 0.5 * h * s.v;
    const Vec3 v2 = s.v + 0.5 * h * a1;
    const Vec3 a2 = acc(r2);
    const Vec3 r3 = s.r + 0.5 * h * v2;
    const Vec3 v3 = s.v + 0.5 * h * a2;
    const Vec3 a3 = acc(r3);
    const Vec3 r4 = s.r + h * v3;
    const Vec3 v4 = s.v + h * a3;
    const Vec3 a4 = acc(r4);
    PhaseState out;
    out.r = s.r + h / 6.0 * (s.v + 2.0 * v2 + 2.0 * v3 + v4);
    out.v = s.v + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
    if (!out.r.allFinite() || !out.v.allFinite()) throw NumericalError("integrator produced a non-finite state");
    return out;
}

// Fixed-step RK4 of one branch. stage_fields[i] is active between
// switch_times[i-1] and switch_times[i]; steps are clipped onto every switch.
template <MagneticField F>
[[nodiscard]] Trajectory integrate(const TrajectoryState& initial, std::span<const double> switch_times,
                                   std::span<const F> stage_fields, double t_end, double mass,
                                   const PhysicalConstants& c = {}, const DynamicsOptions& opts = {}) {
    if (!(opts.dt > 0.0)) throw ValidationError("dt_s: must be positive");
    if (stage_fields.size() != switch_times.size() + 1) {
        throw ValidationError("integrate: need one field per stage");
    }
    if (!std::is_sorted(switch_times.begin(), switch_times.end())) {
        throw ValidationError("integrate: switch times must be sorted");
    }
    const double spin = spin_value(initial.branch);
    Trajectory traj;
    PhaseState s{initial.position, initial.velocity};
    double t = initial.t;
    std::size_t stage = 0;
    while (stage < switch_times.size() && switch_times[stage] <= t) ++stage;
    traj.samples.push_back({t, s.r, s.v, initial.branch, static_cast<int>(stage)});
    while (t < t_end) {
        const double boundary = stage < switch_times.size() ? std::min(switch_times[stage], t_end) : t_end;
        double h = std::min(opts.dt, boundary - t);
        // Avoid a sliver step just before a boundary.
        if (boundary - (t + h) < 1e-9 * opts.dt) h = boundary - t;
        s = rk4_step(s, h, stage_fields[stage], spin, mass, c, opts.jacobian_step);
        t = (t + h == boundary || h == boundary - t) ? boundary : t + h;
        if (stage < switch_times.size() && t == switch_times[stage]) {
            traj.stage_boundaries.push_back(t);
            ++stage;
        }
        traj.samples.push_back({t, s.r, s.v, initial.branch, static_cast<int>(std::min(stage, switch_times.size()))});
    }
    return traj;
}

// ---------------------------------------------------------------------------
// Multi-branch protocol runner.
//
// Branches advance in lockstep so that stage ends defined by events (midpoint
// crossing, separation returning, closure) can be located exactly: when a step
// brackets an event, the step length is refined by the Illinois method on the
// RK4 map from the step's start.

enum class SwitchMode { Event, Scheduled };

struct EnsembleSample {
    double t = 0.0;
    int stage = 0;
    std::vector<PhaseState> states;  // indexed like the runner's spins
};

struct EnsembleRun {
    std::vector<double> spins;
    std::vector<EnsembleSample> samples;
    std::vector<double> stage_ends;
};

namespace detail {

struct EventProbe {
    EndRule::Kind kind;
    double reference = 0.0;  // separation at stage start
    bool armed = false;
    int up = 0;
    int dn = 1;
    int neutral = -1;
    double sigma = 1.0;

    [[nodiscard]] double value(const std::vector<PhaseState>& s) const {
        switch (kind) {
            case EndRule::Kind::MidpointCrossesZero:
                return neutral >= 0 ? s[neutral].r.x() : 0.5 * (s[up].r.x() + s[dn].r.x());
            case EndRule::Kind::SeparationReturnsToInitial:
                return sigma * (s[up].r.x() - s[dn].r.x()) - reference;
            case EndRule::Kind::Closure:
                return sigma * (s[up].v.x() - s[dn].v.x());
            case EndRule::Kind::Scheduled:
                return 0.0;
        }
        return 0.0;
    }

    // True when the step prev -> next completes the event.
    [[nodiscard]] bool fired(double prev, double next) {
        switch (kind) {
            case EndRule::Kind::MidpointCrossesZero:
            case EndRule::Kind::Closure:
                return prev < 0.0 && next >= 0.0;
            case EndRule::Kind::SeparationReturnsToInitial:
                if (next > 0.0) armed = true;
                return armed && prev > 0.0 && next <= 0.0;
            case EndRule::Kind::Scheduled:
                return false;
        }
        return false;
    }
};

}  // namespace detail

template <MagneticField F>
class EnsembleIntegrator {
public:
    EnsembleIntegrator(std::vector<double> spins, double mass, PhysicalConstants c, DynamicsOptions opts)
        : spins_(std::move(spins)), mass_(mass), c_(c), opts_(opts) {
        if (!(opts_.dt > 0.0)) throw ValidationError("dt_s: must be positive");
        for (std::size_t i = 0; i < spins_.size(); ++i) {
            if (spins_[i] > 0.0 && up_ < 0) up_ = static_cast<int>(i);
            else if (spins_[i] < 0.0 && dn_ < 0) dn_ = static_cast<int>(i);
            else if (spins_[i] == 0.0 && neutral_ < 0) neutral_ = static_cast<int>(i);
        }
    }

    [[nodiscard]] std::vector<PhaseState> step(const std::vector<PhaseState>& s, double h, const F& field) const {
        std::vector<PhaseState> out(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) {
            out[i] = rk4_step(s[i], h, field, spins_[i], mass_, c_, opts_.jacobian_step);
        }
        return out;
    }

    // Advances `states` from t through one stage; returns the stage end time.
    // `record` is called after every accepted step.
    double run_stage(std::vector<PhaseState>& states, double t, const F& field, const EndRule& rule,
                     double max_duration, int stage_index, const std::function<void(double, int, const std::vector<PhaseState>&)>& record) const {
        const double t_start = t;
        if (rule.kind == EndRule::Kind::Scheduled) {
            const double t_end = t_start + rule.duration;
            while (t < t_end) {
                double h = std::min(opts_.dt, t_end - t);
                if (t_end - (t + h) < 1e-9 * opts_.dt) h = t_end - t;
                states = step(states, h, field);
                t = (h == t_end - t) ? t_end : t + h;
                record(t, stage_index, states);
            }
            return t;
        }
        detail::EventProbe probe{rule.kind};
        probe.up = up_;
        probe.dn = dn_;
        probe.neutral = neutral_;
        probe.sigma = orientation(c_);
        if (rule.kind != EndRule::Kind::MidpointCrossesZero && (up_ < 0 || dn_ < 0)) {
            throw ValidationError("stage end rule needs both spin branches");
        }
        if (rule.kind == EndRule::Kind::MidpointCrossesZero && neutral_ < 0 && (up_ < 0 || dn_ < 0)) {
            throw ValidationError("midpoint rule needs a neutral branch or both spin branches");
        }
        if (rule.kind == EndRule::Kind::SeparationReturnsToInitial) {
            probe.reference = probe.sigma * (states[up_].r.x() - states[dn_].r.x());
        }
        double g_prev = probe.value(states);
        while (true) {
            if (t - t_start > max_duration) {
                throw NumericalError("stage " + std::to_string(stage_index + 1) +
                                     ": end event not reached within the horizon");
            }
            auto next = step(states, opts_.dt, field);
            const double g_next = probe.value(next);
            if (probe.fired(g_prev, g_next)) {
                const double h = locate(states, field, probe, g_prev, g_next);
                states = h == opts_.dt ? std::move(next) : step(states, h, field);
                t += h;
                record(t, stage_index, states);
                return t;
            }
            states = std::move(next);
            t += opts_.dt;
            g_prev = g_next;
            record(t, stage_index, states);
        }
    }

    [[nodiscard]] const std::vector<double>& spins() const { return spins_; }

private:
    // Step length in (0, dt] at which the probe crosses zero.
    double locate(const std::vector<PhaseState>& s, const F& field, const detail::EventProbe& probe, double g_lo,
                  double g_hi) const {
        double lo = 0.0;
        double hi = opts_.dt;
        int side = 0;
        for (int it = 0; it < 100 && hi - lo > 1e-16; ++it) {
            double h = (lo * g_hi - hi * g_lo) / (g_hi - g_lo);
            if (!(h > lo && h < hi)) h = 0.5 * (lo + hi);
            const double g = probe.value(step(s, h, field));
            if (g == 0.0) return h;
            if ((g < 0.0) == (g_lo < 0.0)) {
                lo = h;
                g_lo = g;
                if (side == -1) g_hi *= 0.5;
                side = -1;
            } else {
                hi = h;
                g_hi = g;
                if (side == 1) g_lo *= 0.5;
                side = 1;
            }
        }
        return hi;
    }

    std::vector<double> spins_;
    double mass_;
    PhysicalConstants c_;
    DynamicsOptions opts_;
    int up_ = -1;
    int dn_ = -1;
    int neutral_ = -1;
};

// Vertical equilibrium on the line (x, 0, z): bisection on a_z over [z_lo, z_hi].
struct EquilibriumOptions {
    double z_lo = -2e-6;
    double z_hi = 0.0;
    double tol = 1e-6;  // m/s^2
    double jacobian_step = 1e-8;
};

template <MagneticField F>
[[nodiscard]] double find_equilibrium(const F& field, double x, const PhysicalConstants& c = {},
                                      const EquilibriumOptions& opts = {}) {
    auto az = [&](double z) { return acceleration(Vec3(x, 0.0, z), field, 0.0, 1.0, c, opts.jacobian_step).z(); };
    double lo = opts.z_lo;
    double hi = opts.z_hi;
    double f_lo = az(lo);
    double f_hi = az(hi);
    if (std::abs(f_lo) < opts.tol) return lo;
    if (std::abs(f_hi) < opts.tol) return hi;
    if ((f_lo > 0.0) == (f_hi > 0.0)) {
        throw NoBracket("find_equilibrium: vertical force does not change sign in the bracket");
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        const double f = az(mid);
        if (std::abs(f) < opts.tol) return mid;
        if ((f > 0.0) == (f_lo > 0.0)) {
            lo = mid;
            f_lo = f;
        } else {
            hi = mid;
        }
    }
    throw NoConvergence("find_equilibrium: |a_z| did not reach the tolerance");
}

// d(B_x)/dx at `p`, e.g. the signed separation gradient eta_S at the origin.
template <MagneticField F>
[[nodiscard]] double gradient_x(const F& field, const Vec3& p = Vec3::Zero(), double step = 1e-8) {
    return field_jacobian(field, p, {step, true, 1e-3})(0, 0);
}

// ---------------------------------------------------------------------------
// Interferometer runs

struct NumericOptions {
    DynamicsOptions dynamics;
    SwitchMode switching = SwitchMode::Event;
    double horizon_factor = 3.0;   // event stages give up after this many (tau2 - tau1)
    double max_stage_duration = 1.0;
    bool include_neutral = true;
};

struct InterferometerResult {
    EnsembleRun run;      // spins {+1, -1, 0}
    double z_L = 0.0;
    std::vector<double> etas;  // |dB_x/dx| at the origin per stage
    double max_dx = 0.0;
    double t_at_max_dx = 0.0;
    double tau3 = 0.0;
    double residual_dx = 0.0;
    double residual_dv = 0.0;
    double max_abs_y = 0.0;
    double max_abs_dz = 0.0;

    [[nodiscard]] Trajectory branch(SpinBranch which) const {
        const double target = spin_value(which);
        std::size_t idx = 0;
        while (idx < run.spins.size() && run.spins[idx] != target) ++idx;
        if (idx == run.spins.size()) throw ValidationError("branch not integrated");
        Trajectory t;
        t.stage_boundaries = run.stage_ends;
        if (!t.stage_boundaries.empty()) t.stage_boundaries.pop_back();
        for (const auto& s : run.samples) {
            t.samples.push_back({s.t, s.states[idx].r, s.states[idx].v, which, s.stage});
        }
        return t;
    }
};

// Callable mapping a stage to its field, e.g. a FieldModel built from a ChipConfig.
template <class G>
concept StageFieldFactory = requires(const G& g, const StageSpec& s) {
    { g(s) } -> MagneticField;
};

// Replaces event end rules by the closed-form stage times evaluated with the
// given per-stage gradients.
[[nodiscard]] inline StagePlan scheduled_plan(const StagePlan& plan, std::span<const double> etas, double x0,
                                              double B0, double mass, const PhysicalConstants& c = {}) {
    if (plan.stages.size() != 3 || etas.size() != 3) {
        throw ValidationError("scheduled switching needs the three-stage plan");
    }
    StagePlan out = plan;
    const StageEndpoints end1 = stage1_endpoints(x0, etas[0], B0, mass, c);
    const StageTwoTiming timing = stage2_timing(end1, etas[1], B0, mass, c);
    const Motion up2 = stage2(timing.tau2, end1, etas[1], B0, mass, 1.0, c);
    const Motion dn2 = stage2(timing.tau2, end1, etas[1], B0, mass, -1.0, c);
    const StageEndpoints end2{up2.x, dn2.x, up2.v, dn2.v, timing.tau2};
    const double tau3 = stage3_turning_time(end2, etas[2], mass, c);
    const double ends[3] = {end1.tau, timing.tau2, tau3};
    double prev = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        if (out.stages[i].end_rule.kind != EndRule::Kind::Scheduled) {
            out.stages[i].end_rule = EndRule::scheduled(ends[i] - prev);
        }
        prev += out.stages[i].end_rule.duration;
    }
    return out;
}

template <class Factory>
    requires StageFieldFactory<Factory>
[[nodiscard]] InterferometerResult run_interferometer(const Factory& make_field, const StagePlan& plan, double mass,
                                                      double x0, double B0, const PhysicalConstants& c = {},
                                                      const NumericOptions& opts = {},
                                                      const EquilibriumOptions& eq = {}) {
    plan.validate();
    if (!(mass > 0.0)) throw ValidationError("mass_kg: must be positive");
    if (!(x0 >= 0.0)) throw ValidationError("x0_um: must be >= 0");
    using F = std::decay_t<decltype(make_field(plan.stages.front()))>;
    std::vector<F> fields;
    InterferometerResult out;
    for (const auto& s : plan.stages) {
        fields.push_back(make_field(s));
        out.etas.push_back(std::abs(gradient_x(fields.back(), Vec3::Zero(), opts.dynamics.jacobian_step)));
    }
    StagePlan effective = plan;
    if (opts.switching == SwitchMode::Scheduled) effective = scheduled_plan(plan, out.etas, x0, B0, mass, c);

    out.z_L = find_equilibrium(fields.front(), -x0, c, eq);
    std::vector<double> spins = {1.0, -1.0};
    if (opts.include_neutral) spins.push_back(0.0);
    out.run.spins = spins;
    EnsembleIntegrator<F> integrator(spins, mass, c, opts.dynamics);
    std::vector<PhaseState> states(spins.size(), PhaseState{Vec3(-x0, 0.0, out.z_L), Vec3::Zero()});
    const double sigma = orientation(c);
    auto record = [&](double t, int stage, const std::vector<PhaseState>& s) {
        out.run.samples.push_back({t, stage, s});
        const double dx = sigma * (s[0].r.x() - s[1].r.x());
        if (dx > out.max_dx) {
            out.max_dx = dx;
            out.t_at_max_dx = t;
        }
        for (const auto& p : s) {
            out.max_abs_y = std::max(out.max_abs_y, std::abs(p.r.y()));
            out.max_abs_dz = std::max(out.max_abs_dz, std::abs(p.r.z() - out.z_L));
        }
    };
    record(0.0, 0, states);
    double t = 0.0;
    for (std::size_t i = 0; i < effective.stages.size(); ++i) {
        double horizon = opts.max_stage_duration;
        if (i >= 2 && out.run.stage_ends.size() >= 2) {
            horizon = opts.horizon_factor * (out.run.stage_ends[1] - out.run.stage_ends[0]);
        }
        t = integrator.run_stage(states, t, fields[i], effective.stages[i].end_rule, horizon, static_cast<int>(i),
                                 record);
        out.run.stage_ends.push_back(t);
    }
    out.tau3 = t;
    out.residual_dx = sigma * (states[0].r.x() - states[1].r.x());
    out.residual_dv = sigma * (states[0].v.x() - states[1].v.x());
    return out;
}

// The chip scenario: levitation assembly fixed, separation currents per stage.
[[nodiscard]] inline InterferometerResult run_interferometer_numeric(double mass, double x0, const ChipConfig& config,
                                                                     const StagePlan& plan,
                                                                     const PhysicalConstants& c = {},
                                                                     const NumericOptions& opts = {},
                                                                     const QuadratureOptions& quad = {}) {
    config.validate();
    auto factory = [&](const StageSpec& s) { return make_field_model(config, s, c, quad); };
    return run_interferometer(factory, plan, mass, x0, config.B0, c, opts);
}

}  // namespace icat

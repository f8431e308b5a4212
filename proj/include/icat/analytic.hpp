#pragma once

// Closed-form trap properties and the three-stage superposition protocol in the
// ideal linear field B_S = (B0 + eta_S x) e_x - eta_S y e_y.
//
// Sign convention: gamma_e and chi_rho are negative, which makes
// k(+1) - k(-1) negative. Separations are therefore oriented by
// orientation() = sign(k(+1) - k(-1)) so that dk > 0 and dx >= 0, while
// SpinBranch::Up keeps meaning S_x = +1.

#include <cmath>
#include <ostream>
#include <vector>

#include "icat/chip.hpp"
#include "icat/constants.hpp"
#include "icat/errors.hpp"
#include "icat/magnetostatics.hpp"

namespace icat {

struct TrapParams {
    double eta_L = 0.0;
    double eta_S = 0.0;
    double omega_y = 0.0;
    double omega_z = 0.0;
    double omega_x = 0.0;
    double z_L = 0.0;
    double Bz_at_zL = 0.0;
};

[[nodiscard]] inline TrapParams trap_params(double eta_L, double eta_S, const PhysicalConstants& c = {}) {
    if (!(eta_L > 0.0)) throw ValidationError("trap_params: eta_L must be positive");
    if (!(eta_L + eta_S > 0.0)) throw ValidationError("trap_params: eta_L + eta_S must be positive");
    const double kappa = c.gradient_to_omega();
    TrapParams t;
    t.eta_L = eta_L;
    t.eta_S = eta_S;
    t.omega_y = (eta_L + eta_S) * kappa;
    t.omega_z = eta_L * kappa;
    t.omega_x = std::abs(eta_S) * kappa;
    t.z_L = -c.g / (t.omega_z * t.omega_z);
    t.Bz_at_zL = c.g * c.mu0 / (c.chi_rho * eta_L);
    return t;
}

// Harmonic ground-state width sqrt(hbar / (2 m omega)).
[[nodiscard]] inline double ground_state_width(double mass, double omega, const PhysicalConstants& c = {}) {
    return std::sqrt(c.hbar / (2.0 * mass * omega));
}

// k(S_x) = (B0 - mu0 gamma_e hbar S_x / (m chi_rho)) / eta, eta > 0.
[[nodiscard]] inline double k_branch(double spin, double eta, double B0, double mass,
                                     const PhysicalConstants& c = {}) {
    return (B0 - c.mu0 * c.gamma_e * c.hbar * spin / (mass * c.chi_rho)) / eta;
}

// +1 or -1: sign of k(+1) - k(-1).
[[nodiscard]] inline double orientation(const PhysicalConstants& c = {}) {
    return (c.gamma_e / c.chi_rho) > 0.0 ? -1.0 : 1.0;
}

// |k(+1) - k(-1)|, proportional to 1/(eta m).
[[nodiscard]] inline double delta_k(double eta, double mass, const PhysicalConstants& c = {}) {
    return std::abs(2.0 * c.mu0 * c.hbar * c.gamma_e / (eta * mass * c.chi_rho));
}

struct Motion {
    double x = 0.0;
    double v = 0.0;
};

// Exact motion along x in B_x = B0 + eta_S x starting from (x_start, v_start)
// at t_start; eta_S is signed.
[[nodiscard]] inline Motion harmonic_stage(double t, double t_start, Motion start, double eta_S, double B0,
                                           double mass, double spin, const PhysicalConstants& c = {}) {
    const double s = t - t_start;
    if (eta_S == 0.0) return {start.x + start.v * s, start.v};
    const double omega = std::abs(eta_S) * c.gradient_to_omega();
    const double x_eq = -(B0 - c.mu0 * c.hbar * c.gamma_e * spin / (c.chi_rho * mass)) / eta_S;
    const double cs = std::cos(omega * s);
    const double sn = std::sin(omega * s);
    return {x_eq + (start.x - x_eq) * cs + start.v / omega * sn, -(start.x - x_eq) * omega * sn + start.v * cs};
}

// Potential energy along x (per the stage's linear field), including the Zeeman term.
[[nodiscard]] inline double potential_x(double x, double eta_S, double B0, double mass, double spin,
                                        const PhysicalConstants& c = {}) {
    const double Bx = B0 + eta_S * x;
    return -c.chi_rho * mass / (2.0 * c.mu0) * Bx * Bx + c.hbar * c.gamma_e * spin * Bx;
}

// Stage 1: released at rest from -x0 with eta_S = -eta1.
[[nodiscard]] inline Motion stage1(double t, double x0, double eta1, double B0, double mass, double spin,
                                   const PhysicalConstants& c = {}) {
    const double omega = eta1 * c.gradient_to_omega();
    const double k = k_branch(spin, eta1, B0, mass, c);
    return {(-x0 - k) * std::cos(omega * t) + k, omega * (x0 + k) * std::sin(omega * t)};
}

// Time at which the spinless midpoint trajectory reaches x = 0.
[[nodiscard]] inline double tau1(double x0, double eta1, double B0, const PhysicalConstants& c = {}) {
    const double omega = eta1 * c.gradient_to_omega();
    return std::acos(B0 / (eta1 * x0 + B0)) / omega;
}

struct StageEndpoints {
    double X_plus = 0.0;
    double X_minus = 0.0;
    double V_plus = 0.0;
    double V_minus = 0.0;
    double tau = 0.0;

    [[nodiscard]] Motion of(double spin) const {
        return spin > 0 ? Motion{X_plus, V_plus} : Motion{X_minus, V_minus};
    }
};

[[nodiscard]] inline StageEndpoints stage1_endpoints(double x0, double eta1, double B0, double mass,
                                                     const PhysicalConstants& c = {}) {
    const double t = tau1(x0, eta1, B0, c);
    const Motion up = stage1(t, x0, eta1, B0, mass, 1.0, c);
    const Motion dn = stage1(t, x0, eta1, B0, mass, -1.0, c);
    return {up.x, dn.x, up.v, dn.v, t};
}

// Stage 2: eta_S = +eta1 from the stage-1 endpoints.
[[nodiscard]] inline Motion stage2(double t, const StageEndpoints& end1, double eta1, double B0, double mass,
                                   double spin, const PhysicalConstants& c = {}) {
    const double omega = eta1 * c.gradient_to_omega();
    const double k = k_branch(spin, eta1, B0, mass, c);
    const Motion s = end1.of(spin);
    const double ph = omega * (t - end1.tau);
    return {(s.x + k) * std::cos(ph) - k + s.v / omega * std::sin(ph),
            -(s.x + k) * omega * std::sin(ph) + s.v * std::cos(ph)};
}

struct SeparationSize {
    double dx = 0.0;
    double R = 0.0;
    double phi = 0.0;
};

// Oriented stage-2 separation dx = R sin(omega1 (t - tau1) + phi) - dk.
[[nodiscard]] inline SeparationSize separation_size_stage2(double t, const StageEndpoints& end1, double eta1,
                                                           double B0, double mass,
                                                           const PhysicalConstants& c = {}) {
    (void)B0;
    const double omega = eta1 * c.gradient_to_omega();
    const double sigma = orientation(c);
    const double dX = sigma * (end1.X_plus - end1.X_minus);
    const double dV = sigma * (end1.V_plus - end1.V_minus);
    const double dk = delta_k(eta1, mass, c);
    SeparationSize out;
    out.R = std::hypot(dV / omega, dX + dk);
    out.phi = std::atan2(omega * (dX + dk), dV);
    out.dx = out.R * std::sin(omega * (t - end1.tau) + out.phi) - dk;
    return out;
}

struct StageTwoTiming {
    double t_max = 0.0;  // separation peaks
    double tau2 = 0.0;   // separation back to its stage-start value
};

[[nodiscard]] inline StageTwoTiming stage2_timing(const StageEndpoints& end1, double eta1, double B0, double mass,
                                                  const PhysicalConstants& c = {}) {
    const double omega = eta1 * c.gradient_to_omega();
    const double phi = separation_size_stage2(end1.tau, end1, eta1, B0, mass, c).phi;
    return {(kPi - 2.0 * phi) / (2.0 * omega) + end1.tau, (kPi - 2.0 * phi) / omega + end1.tau};
}

[[nodiscard]] inline double t_max(const StageEndpoints& end1, double eta1, double B0, double mass,
                                  const PhysicalConstants& c = {}) {
    return stage2_timing(end1, eta1, B0, mass, c).t_max;
}

[[nodiscard]] inline double delta_x_max(double x0, double eta1, double B0, double mass,
                                        const PhysicalConstants& c = {}) {
    return delta_k(eta1, mass, c) * (std::sqrt((B0 + 5.0 * x0 * eta1) / (B0 + x0 * eta1)) - 1.0);
}

// Stage 3: eta_S = -eta2 from the stage-2 endpoints.
[[nodiscard]] inline Motion stage3(double t, const StageEndpoints& end2, double eta2, double B0, double mass,
                                   double spin, const PhysicalConstants& c = {}) {
    const double omega = eta2 * c.gradient_to_omega();
    const double k = k_branch(spin, eta2, B0, mass, c);
    const Motion s = end2.of(spin);
    const double ph = omega * (t - end2.tau);
    return {-(k - s.x) * std::cos(ph) + k + s.v / omega * std::sin(ph),
            (k - s.x) * omega * std::sin(ph) + s.v * std::cos(ph)};
}

// Oriented stage-3 separation dx = R2 sin(omega2 (t - tau2) + phi2) + dk2.
[[nodiscard]] inline SeparationSize separation_size_stage3(double t, const StageEndpoints& end2, double eta2,
                                                           double mass, const PhysicalConstants& c = {}) {
    const double omega = eta2 * c.gradient_to_omega();
    const double sigma = orientation(c);
    const double dX = sigma * (end2.X_plus - end2.X_minus);
    const double dV = sigma * (end2.V_plus - end2.V_minus);
    const double dk = delta_k(eta2, mass, c);
    SeparationSize out;
    out.R = std::hypot(dV / omega, dX - dk);
    out.phi = std::atan2(omega * (dX - dk), dV);
    out.dx = out.R * std::sin(omega * (t - end2.tau) + out.phi) + dk;
    return out;
}

// First minimum of the stage-3 separation (relative velocity zero). Closure
// requires dx there to vanish, i.e. R2 = dk2.
[[nodiscard]] inline double stage3_turning_time(const StageEndpoints& end2, double eta2, double mass,
                                                const PhysicalConstants& c = {}) {
    const double omega = eta2 * c.gradient_to_omega();
    const double phi = separation_size_stage3(end2.tau, end2, eta2, mass, c).phi;
    double s = std::fmod(1.5 * kPi - phi, 2.0 * kPi);
    if (s <= 0.0) s += 2.0 * kPi;
    return end2.tau + s / omega;
}

// ---------------------------------------------------------------------------
// Full piecewise protocol

struct AnalyticScenario {
    double mass = 1e-19;
    double x0 = 40e-6;
    double B0 = 0.5;
    double eta1 = 100.0;
    double eta2 = 100.0;
};

struct ProtocolRow {
    double t = 0.0;
    Motion up;
    Motion dn;
    double dx = 0.0;
    double dv = 0.0;
    int stage = 1;
};

struct AnalyticProtocol {
    AnalyticScenario scenario;
    StageEndpoints end1;
    StageEndpoints end2;
    double t_max = 0.0;
    double tau3 = 0.0;
    double dx_max = 0.0;
    std::vector<ProtocolRow> rows;

    // Closed-form state of one branch at absolute time t.
    [[nodiscard]] Motion at(double t, double spin, const PhysicalConstants& c = {}) const {
        const auto& s = scenario;
        if (t <= end1.tau) return stage1(t, s.x0, s.eta1, s.B0, s.mass, spin, c);
        if (t <= end2.tau) return stage2(t, end1, s.eta1, s.B0, s.mass, spin, c);
        return stage3(t, end2, s.eta2, s.B0, s.mass, spin, c);
    }

    [[nodiscard]] int stage_at(double t) const { return t <= end1.tau ? 1 : (t <= end2.tau ? 2 : 3); }
};

// Stitches stages 1-3. Stage 3 ends at its first separation minimum. Rows are
// sampled at most `sample_dt` apart and start exactly on each stage boundary.
[[nodiscard]] inline AnalyticProtocol analytic_protocol(const AnalyticScenario& scenario, double sample_dt = 1e-4,
                                                        const PhysicalConstants& c = {}) {
    if (!(scenario.mass > 0.0)) throw ValidationError("mass_kg: must be positive");
    if (!(scenario.x0 >= 0.0)) throw ValidationError("x0_um: must be >= 0");
    if (!(scenario.eta1 > 0.0) || !(scenario.eta2 > 0.0)) throw ValidationError("eta: must be positive");
    if (!(sample_dt > 0.0)) throw ValidationError("sample_dt: must be positive");
    AnalyticProtocol p;
    p.scenario = scenario;
    const auto& s = scenario;
    p.end1 = stage1_endpoints(s.x0, s.eta1, s.B0, s.mass, c);
    const StageTwoTiming timing = stage2_timing(p.end1, s.eta1, s.B0, s.mass, c);
    p.t_max = timing.t_max;
    const Motion up2 = stage2(timing.tau2, p.end1, s.eta1, s.B0, s.mass, 1.0, c);
    const Motion dn2 = stage2(timing.tau2, p.end1, s.eta1, s.B0, s.mass, -1.0, c);
    p.end2 = {up2.x, dn2.x, up2.v, dn2.v, timing.tau2};
    p.tau3 = stage3_turning_time(p.end2, s.eta2, s.mass, c);

    const double sigma = orientation(c);
    auto row_at = [&](double t, int stage) {
        ProtocolRow r;
        r.t = t;
        r.stage = stage;
        r.up = p.at(t, 1.0, c);
        r.dn = p.at(t, -1.0, c);
        r.dx = sigma * (r.up.x - r.dn.x);
        r.dv = sigma * (r.up.v - r.dn.v);
        return r;
    };
    const double bounds[4] = {0.0, p.end1.tau, p.end2.tau, p.tau3};
    for (int stage = 1; stage <= 3; ++stage) {
        const double t0 = bounds[stage - 1];
        const double t1 = bounds[stage];
        const auto steps = static_cast<long>(std::ceil((t1 - t0) / sample_dt));
        for (long i = 0; i < steps; ++i) {
            p.rows.push_back(row_at(t0 + static_cast<double>(i) * (t1 - t0) / static_cast<double>(steps), stage));
        }
    }
    p.rows.push_back(row_at(p.tau3, 3));
    p.dx_max = 0.0;
    for (const auto& r : p.rows) p.dx_max = std::max(p.dx_max, r.dx);
    // The sampled peak can sit just below the closed-form one.
    if (p.t_max >= p.end1.tau && p.t_max <= p.end2.tau) p.dx_max = std::max(p.dx_max, row_at(p.t_max, 2).dx);
    return p;
}

inline void write_trajectory_csv(std::ostream& out, const std::vector<ProtocolRow>& rows) {
    out << "t_s,x_up_m,v_up_mps,x_dn_m,v_dn_mps,dx_m,dv_mps,stage\n";
    for (const auto& r : rows) {
        out << format_double(r.t) << ',' << format_double(r.up.x) << ',' << format_double(r.up.v) << ','
            << format_double(r.dn.x) << ',' << format_double(r.dn.v) << ',' << format_double(r.dx) << ','
            << format_double(r.dv) << ',' << r.stage << '\n';
    }
}

}  // namespace icat

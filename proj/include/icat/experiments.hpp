#pragma once

// Run configuration, parameter sweeps and engineering estimates.
//
// Config files are flat key=value text:
//
//   output_dir = out
//   [chip]      a_um b_um w_um L_um l_um IL_A B0_T
//   [particle]  mass_kg
//   [protocol]  x0_um I_A I3_A
//   [numeric]   dt_s quad_order quad_check_order quad_tol jac_step_m tol_dx_m
//               tol_dv_mps max_iter horizon_factor switch_mode sample_dt_s
//   [sweep]     two_a_min_um two_a_max_um two_a_points IL_list_A
//               mass_list_kg x0_min_um x0_max_um x0_points
//
// '#' starts a comment. Omitted keys keep their defaults.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "icat/analytic.hpp"
#include "icat/chip.hpp"
#include "icat/closure.hpp"
#include "icat/constants.hpp"
#include "icat/dynamics.hpp"
#include "icat/errors.hpp"
#include "icat/magnetostatics.hpp"

namespace icat {

struct NumericConfig {
    double dt = 1e-5;
    int quad_order = 32;
    int quad_check_order = 64;
    double quad_tol = 1e-6;
    double jac_step = 1e-8;
    double tol_dx = 1e-8;
    double tol_dv = 1e-7;
    int max_iter = 50;
    double horizon_factor = 3.0;
    SwitchMode switching = SwitchMode::Event;
    double sample_dt = 1e-4;  // row spacing of analytic trajectory tables

    [[nodiscard]] QuadratureOptions quadrature() const { return {quad_order, quad_check_order, quad_tol}; }

    [[nodiscard]] NumericOptions dynamics() const {
        NumericOptions o;
        o.dynamics = {dt, jac_step};
        o.switching = switching;
        o.horizon_factor = horizon_factor;
        return o;
    }

    [[nodiscard]] ClosureOptions closure() const {
        ClosureOptions o;
        o.tol_dx = tol_dx;
        o.tol_dv = tol_dv;
        o.max_iter = max_iter;
        o.horizon_factor = horizon_factor;
        return o;
    }
};

struct SweepConfig {
    double two_a_min = 12e-6;
    double two_a_max = 40e-6;
    int two_a_points = 29;
    std::vector<double> IL_list = {24.0, 18.0, 12.0};
    std::vector<double> mass_list = {1e-19, 1e-17, 1e-15};
    double x0_min = 5e-6;
    double x0_max = 100e-6;
    int x0_points = 20;
};

struct RunConfig {
    ChipConfig chip;
    Particle particle;
    double x0 = 40e-6;
    StagePlan plan = default_plan();
    NumericConfig numeric;
    SweepConfig sweep;
    std::string output_dir = "out";

    void validate() const {
        chip.validate();
        particle.validate();
        plan.validate();
        auto positive = [](double v, const char* key) {
            if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(std::string(key) + ": must be positive");
        };
        if (!(x0 >= 0.0) || !std::isfinite(x0)) throw ValidationError("x0_um: must be >= 0");
        positive(plan.stages.at(0).separation_current, "I_A");
        positive(plan.stages.back().separation_current, "I3_A");
        positive(numeric.dt, "dt_s");
        positive(numeric.jac_step, "jac_step_m");
        positive(numeric.quad_tol, "quad_tol");
        positive(numeric.tol_dx, "tol_dx_m");
        positive(numeric.tol_dv, "tol_dv_mps");
        positive(numeric.horizon_factor, "horizon_factor");
        positive(numeric.sample_dt, "sample_dt_s");
        if (numeric.quad_order < 1) throw ValidationError("quad_order: must be >= 1");
        if (numeric.quad_check_order <= numeric.quad_order) {
            throw ValidationError("quad_check_order: must exceed quad_order");
        }
        if (numeric.max_iter < 1) throw ValidationError("max_iter: must be >= 1");
        positive(sweep.two_a_min, "two_a_min_um");
        if (!(sweep.two_a_max >= sweep.two_a_min)) throw ValidationError("two_a_max_um: must be >= two_a_min_um");
        if (!(sweep.two_a_min > chip.w)) throw ValidationError("two_a_min_um: wires overlap (2a <= w)");
        if (sweep.two_a_points < 1) throw ValidationError("two_a_points: must be >= 1");
        if (sweep.IL_list.empty()) throw ValidationError("IL_list_A: must not be empty");
        for (double I : sweep.IL_list) {
            if (!(I >= 0.0)) throw ValidationError("IL_list_A: currents must be >= 0");
        }
        if (sweep.mass_list.empty()) throw ValidationError("mass_list_kg: must not be empty");
        for (double m : sweep.mass_list) positive(m, "mass_list_kg");
        if (!(sweep.x0_min >= 0.0)) throw ValidationError("x0_min_um: must be >= 0");
        if (!(sweep.x0_max >= sweep.x0_min)) throw ValidationError("x0_max_um: must be >= x0_min_um");
        if (sweep.x0_points < 1) throw ValidationError("x0_points: must be >= 1");
        if (output_dir.empty()) throw ValidationError("output_dir: must not be empty");
    }

    [[nodiscard]] AnalyticScenario analytic_scenario(const PhysicalConstants& c = {}) const {
        // The closed form uses the thin-wire gradient of the configured separation currents.
        return {particle.mass, x0, chip.B0, eta_S_thin(chip.L, plan.stages[0].separation_current, c),
                eta_S_thin(chip.L, plan.stages.back().separation_current, c)};
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double parse_number(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(value, &used);
    } catch (const std::exception&) {
        throw ValidationError(key + ": cannot parse '" + value + "' as a number");
    }
    if (used != value.size() || !std::isfinite(v)) {
        throw ValidationError(key + ": cannot parse '" + value + "' as a number");
    }
    return v;
}

inline int parse_int(const std::string& key, const std::string& value) {
    const double v = parse_number(key, value);
    if (v != std::floor(v) || std::abs(v) > 1e9) throw ValidationError(key + ": expected an integer, got '" + value + "'");
    return static_cast<int>(v);
}

inline std::vector<double> parse_list(const std::string& key, const std::string& value) {
    std::vector<double> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_number(key, trim(item)));
    return out;
}

}  // namespace detail

[[nodiscard]] inline RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    double I = cfg.plan.stages[0].separation_current;
    double I3 = cfg.plan.stages[2].separation_current;

    using Setter = std::function<void(const std::string&, const std::string&)>;
    auto num = [](double& target, double scale) -> Setter {
        return [&target, scale](const std::string& k, const std::string& v) {
            target = detail::parse_number(k, v) * scale;
        };
    };
    auto integer = [](int& target) -> Setter {
        return [&target](const std::string& k, const std::string& v) { target = detail::parse_int(k, v); };
    };
    auto list = [](std::vector<double>& target) -> Setter {
        return [&target](const std::string& k, const std::string& v) { target = detail::parse_list(k, v); };
    };
    constexpr double um = 1e-6;
    const std::map<std::string, std::map<std::string, Setter>> table = {
        {"", {{"output_dir", [&](const std::string&, const std::string& v) { cfg.output_dir = v; }}}},
        {"chip",
         {{"a_um", num(cfg.chip.a, um)},
          {"b_um", num(cfg.chip.b, um)},
          {"w_um", num(cfg.chip.w, um)},
          {"L_um", num(cfg.chip.L, um)},
          {"l_um", num(cfg.chip.wire_half_length, um)},
          {"IL_A", num(cfg.chip.I_L, 1.0)},
          {"B0_T", num(cfg.chip.B0, 1.0)}}},
        {"particle", {{"mass_kg", num(cfg.particle.mass, 1.0)}}},
        {"protocol", {{"x0_um", num(cfg.x0, um)}, {"I_A", num(I, 1.0)}, {"I3_A", num(I3, 1.0)}}},
        {"numeric",
         {{"dt_s", num(cfg.numeric.dt, 1.0)},
          {"quad_order", integer(cfg.numeric.quad_order)},
          {"quad_check_order", integer(cfg.numeric.quad_check_order)},
          {"quad_tol", num(cfg.numeric.quad_tol, 1.0)},
          {"jac_step_m", num(cfg.numeric.jac_step, 1.0)},
          {"tol_dx_m", num(cfg.numeric.tol_dx, 1.0)},
          {"tol_dv_mps", num(cfg.numeric.tol_dv, 1.0)},
          {"max_iter", integer(cfg.numeric.max_iter)},
          {"horizon_factor", num(cfg.numeric.horizon_factor, 1.0)},
          {"sample_dt_s", num(cfg.numeric.sample_dt, 1.0)},
          {"switch_mode",
           [&](const std::string& k, const std::string& v) {
               if (v == "event") cfg.numeric.switching = SwitchMode::Event;
               else if (v == "scheduled") cfg.numeric.switching = SwitchMode::Scheduled;
               else throw ValidationError(k + ": expected 'event' or 'scheduled', got '" + v + "'");
           }}}},
        {"sweep",
         {{"two_a_min_um", num(cfg.sweep.two_a_min, um)},
          {"two_a_max_um", num(cfg.sweep.two_a_max, um)},
          {"two_a_points", integer(cfg.sweep.two_a_points)},
          {"IL_list_A", list(cfg.sweep.IL_list)},
          {"mass_list_kg", list(cfg.sweep.mass_list)},
          {"x0_min_um", num(cfg.sweep.x0_min, um)},
          {"x0_max_um", num(cfg.sweep.x0_max, um)},
          {"x0_points", integer(cfg.sweep.x0_points)}}},
    };

    std::string section;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ValidationError("line " + std::to_string(line_no) + ": malformed section header");
            section = detail::trim(line.substr(1, line.size() - 2));
            if (section.empty() || !table.contains(section)) {
                throw ValidationError("unknown section [" + section + "]");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ValidationError("line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        const auto& keys = table.at(section);
        const auto it = keys.find(key);
        if (it == keys.end()) {
            throw ValidationError(key + ": unknown key" + (section.empty() ? "" : " in [" + section + "]"));
        }
        if (value.empty()) throw ValidationError(key + ": missing value");
        it->second(key, value);
    }
    cfg.plan = default_plan(I, I3);
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// Sweeps. Rows are evaluated in parallel and returned in grid order.

template <class Row, class Fn>
[[nodiscard]] std::vector<Row> parallel_rows(std::size_t n, Fn&& fn) {
    std::vector<Row> rows(n);
    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(n, std::thread::hardware_concurrency()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) rows[i] = fn(i);
        return rows;
    }
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < n; i += workers) rows[i] = fn(i);
            });
        }
    }
    return rows;
}

[[nodiscard]] inline std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
    return v;
}

struct GradientRow {
    double two_a = 0.0;
    double I_L = 0.0;
    double eta_L = 0.0;
};

struct BzRow {
    double two_a = 0.0;
    double I_L = 0.0;
    double Bz = 0.0;
};

struct SizeRow {
    double mass = 0.0;
    double x0 = 0.0;
    double dx_max = 0.0;
};

// eta_L_thin over 2a for each levitation current, b fixed.
[[nodiscard]] inline std::vector<GradientRow> sweep_gradient_vs_spacing(double b, const std::vector<double>& two_a,
                                                                        const std::vector<double>& IL_list,
                                                                        const PhysicalConstants& c = {}) {
    return parallel_rows<GradientRow>(IL_list.size() * two_a.size(), [&](std::size_t k) {
        const double I = IL_list[k / two_a.size()];
        const double s = two_a[k % two_a.size()];
        return GradientRow{s, I, eta_L_thin(0.5 * s, b, I, c)};
    });
}

// Residual vertical field at the levitation height, gmu0/(chi eta_L).
[[nodiscard]] inline std::vector<BzRow> sweep_Bz_vs_spacing(double b, const std::vector<double>& two_a,
                                                            const std::vector<double>& IL_list,
                                                            const PhysicalConstants& c = {}) {
    return parallel_rows<BzRow>(IL_list.size() * two_a.size(), [&](std::size_t k) {
        const double I = IL_list[k / two_a.size()];
        const double s = two_a[k % two_a.size()];
        const double eta = eta_L_thin(0.5 * s, b, I, c);
        const double Bz = eta > 0.0 ? c.g * c.mu0 / (c.chi_rho * eta) : -std::numeric_limits<double>::infinity();
        return BzRow{s, I, Bz};
    });
}

[[nodiscard]] inline std::vector<SizeRow> sweep_size_vs_x0(const std::vector<double>& masses,
                                                           const std::vector<double>& x0s, double eta1, double B0,
                                                           const PhysicalConstants& c = {}) {
    return parallel_rows<SizeRow>(masses.size() * x0s.size(), [&](std::size_t k) {
        const double m = masses[k / x0s.size()];
        const double x0 = x0s[k % x0s.size()];
        return SizeRow{m, x0, delta_x_max(x0, eta1, B0, m, c)};
    });
}

inline void write_gradient_csv(std::ostream& out, const std::vector<GradientRow>& rows) {
    out << "two_a_um,IL_A,etaL_Tpm\n";
    for (const auto& r : rows) {
        out << format_double(r.two_a * 1e6) << ',' << format_double(r.I_L) << ',' << format_double(r.eta_L) << '\n';
    }
}

inline void write_bz_csv(std::ostream& out, const std::vector<BzRow>& rows) {
    out << "two_a_um,IL_A,Bz_T\n";
    for (const auto& r : rows) {
        out << format_double(r.two_a * 1e6) << ',' << format_double(r.I_L) << ',' << format_double(r.Bz) << '\n';
    }
}

inline void write_size_csv(std::ostream& out, const std::vector<SizeRow>& rows) {
    out << "mass_kg,x0_um,dxmax_m\n";
    for (const auto& r : rows) {
        out << format_double(r.mass) << ',' << format_double(r.x0 * 1e6) << ',' << format_double(r.dx_max) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Engineering estimates

struct HeatingEstimate {
    double R = 0.0;  // Ohm
    double Q = 0.0;  // J
};

// Joule heat I^2 R dt of one wire of the given length and square cross-section w^2.
[[nodiscard]] inline HeatingEstimate heating_estimate(double I, double length, double w, double duration,
                                                      const PhysicalConstants& c = {}) {
    if (!(duration > 0.0)) throw ValidationError("duration: must be positive");
    if (!(length > 0.0) || !(w > 0.0)) throw ValidationError("heating_estimate: length and width must be positive");
    const double R = c.rho_gold * length / (w * w);
    return {R, I * I * R * duration};
}

// Uses the configured wire length 2l and width w.
[[nodiscard]] inline HeatingEstimate heating_estimate(double I, const ChipConfig& config, double duration,
                                                      const PhysicalConstants& c = {}) {
    return heating_estimate(I, 2.0 * config.wire_half_length, config.w, duration, c);
}

[[nodiscard]] inline double diffusion_length(double duration, const PhysicalConstants& c = {}) {
    if (!(duration > 0.0)) throw ValidationError("duration: must be positive");
    return std::sqrt(c.alpha_si * duration);
}

}  // namespace icat

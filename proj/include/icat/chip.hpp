#pragma once

// Device description shared by every other module: particle, chip geometry,
// wire assemblies and the stage plan of the interferometer protocol.

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "icat/errors.hpp"

namespace icat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

enum class SpinBranch { Up, Down, Neutral };

// S_x = +1, -1, 0. Neutral is the virtual midpoint trajectory.
[[nodiscard]] constexpr double spin_value(SpinBranch branch) {
    switch (branch) {
        case SpinBranch::Up: return 1.0;
        case SpinBranch::Down: return -1.0;
        case SpinBranch::Neutral: return 0.0;
    }
    return 0.0;
}

[[nodiscard]] inline const char* to_string(SpinBranch branch) {
    switch (branch) {
        case SpinBranch::Up: return "up";
        case SpinBranch::Down: return "down";
        case SpinBranch::Neutral: return "neutral";
    }
    return "?";
}

struct Particle {
    double mass = 1e-19;  // kg
    SpinBranch branch = SpinBranch::Up;

    void validate() const {
        if (!(mass > 0.0) || !std::isfinite(mass)) {
            throw ValidationError("mass_kg: particle mass must be positive");
        }
    }
};

struct ChipConfig {
    double a = 9e-6;                  // half-spacing of levitation wires in y
    double b = 7e-6;                  // half-spacing of levitation wires in z
    double w = 10e-6;                 // wire width = thickness
    double L = 200e-6;                // half-spacing of separation wires
    double wire_half_length = 200e-6; // l, separation wires span z in [-l, l]
    double I_L = 24.0;                // levitation current magnitude
    double B0 = 0.5;                  // bias field along +x

    void validate() const {
        auto positive = [](double v, const char* key) {
            if (!(v > 0.0) || !std::isfinite(v)) {
                throw ValidationError(std::string(key) + ": must be positive");
            }
        };
        positive(a, "a_um");
        positive(b, "b_um");
        positive(w, "w_um");
        positive(L, "L_um");
        positive(wire_half_length, "l_um");
        if (!(2.0 * a > w)) throw ValidationError("a_um: levitation wires overlap (2a <= w)");
        if (!(2.0 * b > w)) throw ValidationError("b_um: levitation wires overlap (2b <= w)");
        if (!(I_L >= 0.0) || !std::isfinite(I_L)) {
            throw ValidationError("IL_A: levitation current magnitude must be >= 0");
        }
        if (!(B0 >= 0.0) || !std::isfinite(B0)) throw ValidationError("B0_T: bias field must be >= 0");
    }
};

enum class WireModel {
    RectX,        // square cross-section, infinitely long along x
    ThinFiniteZ,  // filament along z spanning [-half_length, half_length]
    ThinInfinite  // filament, infinitely long along `axis`
};

enum class Axis { X, Z };

// One conductor. `center` lives in the plane transverse to the wire axis:
// (y, z) for x-directed wires, (x, y) for z-directed wires.
// current > 0 flows toward +x (RectX, ThinInfinite along x) or +z.
struct WireSegment {
    WireModel model = WireModel::RectX;
    Vec2 center = Vec2::Zero();
    double current = 0.0;
    double half_length = 0.0;  // ThinFiniteZ only
    double half_width = 0.0;   // RectX only
    Axis axis = Axis::X;       // ThinInfinite only
};

using Assembly = std::vector<WireSegment>;

// Levitation quadrupole: four x-parallel square wires at (+-a, +-b).
[[nodiscard]] inline Assembly build_levitation_assembly(const ChipConfig& config) {
    config.validate();
    const double I = config.I_L;
    const double hw = 0.5 * config.w;
    const std::array<Vec2, 4> centers = {Vec2(config.a, config.b), Vec2(-config.a, config.b),
                                         Vec2(-config.a, -config.b), Vec2(config.a, -config.b)};
    const std::array<double, 4> sign = {-1.0, 1.0, -1.0, 1.0};
    Assembly wires;
    wires.reserve(4);
    for (std::size_t k = 0; k < 4; ++k) {
        wires.push_back({WireModel::RectX, centers[k], sign[k] * I, 0.0, hw, Axis::X});
    }
    return wires;
}

// Same geometry with filamentary (infinitely thin) wires.
[[nodiscard]] inline Assembly build_levitation_assembly_thin(const ChipConfig& config) {
    Assembly wires = build_levitation_assembly(config);
    for (auto& wire : wires) {
        wire.model = WireModel::ThinInfinite;
        wire.half_width = 0.0;
        wire.axis = Axis::X;
    }
    return wires;
}

struct EndRule {
    enum class Kind { Scheduled, MidpointCrossesZero, SeparationReturnsToInitial, Closure };
    Kind kind = Kind::Scheduled;
    double duration = 0.0;  // Scheduled only

    static EndRule scheduled(double seconds) { return {Kind::Scheduled, seconds}; }
    static EndRule midpoint_crosses_zero() { return {Kind::MidpointCrossesZero, 0.0}; }
    static EndRule separation_returns() { return {Kind::SeparationReturnsToInitial, 0.0}; }
    static EndRule closure() { return {Kind::Closure, 0.0}; }
};

struct StageSpec {
    int eta_sign = -1;                // sign of eta_S during the stage
    double separation_current = 10.0; // magnitude, A
    EndRule end_rule;
};

struct StagePlan {
    std::vector<StageSpec> stages;

    void validate() const {
        if (stages.empty()) throw ValidationError("protocol: plan has no stages");
        for (const auto& s : stages) {
            if (s.eta_sign != 1 && s.eta_sign != -1) {
                throw ValidationError("protocol: eta_sign must be +1 or -1");
            }
            if (!(s.separation_current >= 0.0) || !std::isfinite(s.separation_current)) {
                throw ValidationError("protocol: separation current magnitude must be >= 0");
            }
            if (s.end_rule.kind == EndRule::Kind::Scheduled && !(s.end_rule.duration > 0.0)) {
                throw ValidationError("protocol: scheduled stage needs a positive duration");
            }
        }
    }
};

// Split / reverse / recombine with the stage-3 current slightly detuned.
[[nodiscard]] inline StagePlan default_plan(double I = 10.0, double I3 = 9.99) {
    return StagePlan{{{-1, I, EndRule::midpoint_crosses_zero()},
                      {+1, I, EndRule::separation_returns()},
                      {-1, I3, EndRule::closure()}}};
}

// Separation quadrupole: four z-parallel finite filaments at (+-L, +-L).
// eta_sign = -1 reproduces the tabulated current pattern (-I, +I, -I, +I);
// eta_sign = +1 reverses every wire.
[[nodiscard]] inline Assembly build_separation_assembly(const ChipConfig& config, const StageSpec& stage) {
    config.validate();
    const double I = stage.separation_current * (stage.eta_sign < 0 ? 1.0 : -1.0);
    const double L = config.L;
    const std::array<Vec2, 4> centers = {Vec2(L, L), Vec2(-L, L), Vec2(-L, -L), Vec2(L, -L)};
    const std::array<double, 4> sign = {-1.0, 1.0, -1.0, 1.0};
    Assembly wires;
    wires.reserve(4);
    for (std::size_t k = 0; k < 4; ++k) {
        wires.push_back({WireModel::ThinFiniteZ, centers[k], sign[k] * I, config.wire_half_length, 0.0, Axis::Z});
    }
    return wires;
}

[[nodiscard]] inline double net_current(const Assembly& wires) {
    double sum = 0.0;
    for (const auto& w : wires) sum += w.current;
    return sum;
}

}  // namespace icat

#pragma once

// Magnetic fields of the chip's wire assemblies.
//
// Three conductor models are supported:
//   RectX        square cross-section, infinitely long along x; the field is the
//                thin-wire kernel integrated over the cross-section with a
//                tensor-product Gauss-Legendre rule.
//   ThinFiniteZ  filament along z of length 2l (closed form with end correction).
//   ThinInfinite filament along x or z (textbook mu0 I / (2 pi R)).
//
// All quantities are SI.

#include <cmath>
#include <concepts>
#include <cstdio>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "icat/chip.hpp"
#include "icat/constants.hpp"
#include "icat/errors.hpp"
#include "icat/quadrature.hpp"

namespace icat {

struct QuadratureOptions {
    int order = 32;
    int check_order = 64;
    double rel_tol = 1e-6;
};

namespace detail {

inline bool inside_square(const Vec2& p, const WireSegment& wire) {
    return std::abs(p.x() - wire.center.x()) <= wire.half_width &&
           std::abs(p.y() - wire.center.y()) <= wire.half_width;
}

// Thin-wire kernel integrated over a square cross-section, returns (B_y, B_z).
inline Vec2 rect_quadrature(double y, double z, const WireSegment& wire, const GaussLegendreRule& rule,
                            double mu0) {
    const double hw = wire.half_width;
    const double area = 4.0 * hw * hw;
    const double J = wire.current / area;
    const double scale = mu0 * J / (2.0 * kPi) * hw * hw;
    double by = 0.0;
    double bz = 0.0;
    const std::size_t n = rule.size();
    for (std::size_t j = 0; j < n; ++j) {
        const double zs = wire.center.y() + rule.nodes[j] * hw;
        const double dz = z - zs;
        double row_y = 0.0;
        double row_z = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double ys = wire.center.x() + rule.nodes[i] * hw;
            const double dy = y - ys;
            const double inv = rule.weights[i] / (dy * dy + dz * dz);
            row_y -= dz * inv;
            row_z += dy * inv;
        }
        by += rule.weights[j] * row_y;
        bz += rule.weights[j] * row_z;
    }
    return {scale * by, scale * bz};
}

inline double end_correction(double z, double half_length, double r2) {
    const double up = z + half_length;
    const double dn = z - half_length;
    return up / std::sqrt(up * up + r2) - dn / std::sqrt(dn * dn + r2);
}

}  // namespace detail

// Field (B_y, B_z) of a RectX wire at `point`. The 32x32 result is accepted only
// if a 64x64 evaluation agrees to rel_tol.
[[nodiscard]] inline Vec2 field_rect_wire(const Vec3& point, const WireSegment& wire,
                                          const PhysicalConstants& c = {},
                                          const QuadratureOptions& opts = {}) {
    if (wire.model != WireModel::RectX) throw ValidationError("field_rect_wire: wire is not RectX");
    const Vec2 p(point.y(), point.z());
    if (detail::inside_square(p, wire)) {
        throw ConductorIntrusion("field_rect_wire: point inside conductor cross-section");
    }
    const Vec2 coarse = detail::rect_quadrature(p.x(), p.y(), wire, gauss_legendre(opts.order), c.mu0);
    const Vec2 fine = detail::rect_quadrature(p.x(), p.y(), wire, gauss_legendre(opts.check_order), c.mu0);
    if ((coarse - fine).norm() > opts.rel_tol * fine.norm()) {
        throw QuadratureNotConverged("field_rect_wire: quadrature did not converge at (" +
                                     std::to_string(point.y()) + ", " + std::to_string(point.z()) + ")");
    }
    return coarse;
}

// Field (B_x, B_y) of a z-directed filament spanning z in [-l, l].
[[nodiscard]] inline Vec2 field_thin_finite_wire(const Vec3& point, const WireSegment& wire,
                                                 const PhysicalConstants& c = {}) {
    if (wire.model != WireModel::ThinFiniteZ) {
        throw ValidationError("field_thin_finite_wire: wire is not ThinFiniteZ");
    }
    const double dx = point.x() - wire.center.x();
    const double dy = point.y() - wire.center.y();
    const double r2 = dx * dx + dy * dy;
    if (r2 == 0.0) throw ConductorIntrusion("field_thin_finite_wire: point on wire axis");
    const double pref = c.mu0 * wire.current / (4.0 * kPi) * detail::end_correction(point.z(), wire.half_length, r2) / r2;
    return {-pref * dy, pref * dx};
}

// Infinite filament. Returns (B_y, B_z) for an x-directed wire, (B_x, B_y) for a z-directed one.
[[nodiscard]] inline Vec2 field_thin_infinite(const Vec3& point, const WireSegment& wire,
                                              const PhysicalConstants& c = {}) {
    if (wire.model != WireModel::ThinInfinite) {
        throw ValidationError("field_thin_infinite: wire is not ThinInfinite");
    }
    const Vec2 p = wire.axis == Axis::X ? Vec2(point.y(), point.z()) : Vec2(point.x(), point.y());
    const Vec2 d = p - wire.center;
    const double r2 = d.squaredNorm();
    if (r2 == 0.0) throw ConductorIntrusion("field_thin_infinite: point on wire axis");
    const double pref = c.mu0 * wire.current / (2.0 * kPi * r2);
    return {-pref * d.y(), pref * d.x()};
}

// Full 3-vector contribution of one wire.
[[nodiscard]] inline Vec3 wire_field(const Vec3& point, const WireSegment& wire, const PhysicalConstants& c = {},
                                     const QuadratureOptions& opts = {}) {
    switch (wire.model) {
        case WireModel::RectX: {
            const Vec2 b = field_rect_wire(point, wire, c, opts);
            return {0.0, b.x(), b.y()};
        }
        case WireModel::ThinFiniteZ: {
            const Vec2 b = field_thin_finite_wire(point, wire, c);
            return {b.x(), b.y(), 0.0};
        }
        case WireModel::ThinInfinite: {
            const Vec2 b = field_thin_infinite(point, wire, c);
            return wire.axis == Axis::X ? Vec3(0.0, b.x(), b.y()) : Vec3(b.x(), b.y(), 0.0);
        }
    }
    return Vec3::Zero();
}

// Anything that can be sampled like a static magnetic field.
template <class F>
concept MagneticField = requires(const F& f, const Vec3& p) {
    { f.field(p) } -> std::convertible_to<Vec3>;
    { f.inside_conductor(p) } -> std::convertible_to<bool>;
};

// Levitation + separation assemblies + uniform bias B0 e_x.
//
// Rect-wire source nodes are laid out once at construction so field() is a
// flat loop. field() uses the base order only; checked_field() adds the
// refined-rule convergence test.
class FieldModel {
public:
    FieldModel() = default;

    FieldModel(Assembly levitation, Assembly separation, double B0, PhysicalConstants constants = {},
               QuadratureOptions opts = {})
        : levitation_(std::move(levitation)),
          separation_(std::move(separation)),
          B0_(B0),
          constants_(constants),
          opts_(opts) {
        layout_nodes();
    }

    [[nodiscard]] const Assembly& levitation() const { return levitation_; }
    [[nodiscard]] const Assembly& separation() const { return separation_; }
    [[nodiscard]] double B0() const { return B0_; }
    [[nodiscard]] const PhysicalConstants& constants() const { return constants_; }
    [[nodiscard]] const QuadratureOptions& quadrature() const { return opts_; }

    [[nodiscard]] bool inside_conductor(const Vec3& p) const {
        for (const auto* assembly : {&levitation_, &separation_}) {
            for (const auto& wire : *assembly) {
                switch (wire.model) {
                    case WireModel::RectX:
                        if (detail::inside_square(Vec2(p.y(), p.z()), wire)) return true;
                        break;
                    case WireModel::ThinFiniteZ:
                        if (p.x() == wire.center.x() && p.y() == wire.center.y()) return true;
                        break;
                    case WireModel::ThinInfinite: {
                        const Vec2 q = wire.axis == Axis::X ? Vec2(p.y(), p.z()) : Vec2(p.x(), p.y());
                        if (q == wire.center) return true;
                        break;
                    }
                }
            }
        }
        return false;
    }

    [[nodiscard]] Vec3 field(const Vec3& p) const {
        if (inside_conductor(p)) throw ConductorIntrusion("field evaluated inside a conductor");
        Vec3 B(B0_, 0.0, 0.0);
        B += rect_field(p.y(), p.z());
        for (const auto* assembly : {&levitation_, &separation_}) {
            for (const auto& wire : *assembly) {
                if (wire.model != WireModel::RectX) B += wire_field(p, wire, constants_, opts_);
            }
        }
        return B;
    }

    [[nodiscard]] Vec3 checked_field(const Vec3& p) const {
        if (inside_conductor(p)) throw ConductorIntrusion("field evaluated inside a conductor");
        Vec3 B(B0_, 0.0, 0.0);
        for (const auto* assembly : {&levitation_, &separation_}) {
            for (const auto& wire : *assembly) B += wire_field(p, wire, constants_, opts_);
        }
        return B;
    }

    // The same model with every wire current scaled by `factor`.
    [[nodiscard]] FieldModel scaled_currents(double factor) const {
        Assembly lev = levitation_;
        Assembly sep = separation_;
        for (auto& w : lev) w.current *= factor;
        for (auto& w : sep) w.current *= factor;
        return {std::move(lev), std::move(sep), B0_, constants_, opts_};
    }

private:
    void layout_nodes() {
        nodes_y_.clear();
        nodes_z_.clear();
        weights_.clear();
        const GaussLegendreRule& rule = gauss_legendre(opts_.order);
        for (const auto* assembly : {&levitation_, &separation_}) {
            for (const auto& wire : *assembly) {
                if (wire.model != WireModel::RectX) continue;
                const double hw = wire.half_width;
                const double J = wire.current / (4.0 * hw * hw);
                const double scale = constants_.mu0 * J / (2.0 * kPi) * hw * hw;
                for (std::size_t j = 0; j < rule.size(); ++j) {
                    for (std::size_t i = 0; i < rule.size(); ++i) {
                        nodes_y_.push_back(wire.center.x() + rule.nodes[i] * hw);
                        nodes_z_.push_back(wire.center.y() + rule.nodes[j] * hw);
                        weights_.push_back(scale * rule.weights[i] * rule.weights[j]);
                    }
                }
            }
        }
    }

    [[nodiscard]] Vec3 rect_field(double y, double z) const {
        double by = 0.0;
        double bz = 0.0;
        const std::size_t n = weights_.size();
        const double* ys = nodes_y_.data();
        const double* zs = nodes_z_.data();
        const double* wt = weights_.data();
        for (std::size_t k = 0; k < n; ++k) {
            const double dy = y - ys[k];
            const double dz = z - zs[k];
            const double inv = wt[k] / (dy * dy + dz * dz);
            by -= dz * inv;
            bz += dy * inv;
        }
        return {0.0, by, bz};
    }

    Assembly levitation_;
    Assembly separation_;
    double B0_ = 0.0;
    PhysicalConstants constants_;
    QuadratureOptions opts_;
    std::vector<double> nodes_y_;
    std::vector<double> nodes_z_;
    std::vector<double> weights_;
};

// Ideal linear field B = (B0 + eta_S x) e_x - (eta_L + eta_S) y e_y + eta_L z e_z.
struct LinearField {
    double eta_L = 0.0;
    double eta_S = 0.0;
    double B0 = 0.0;

    [[nodiscard]] Vec3 field(const Vec3& p) const {
        return {B0 + eta_S * p.x(), -(eta_L + eta_S) * p.y(), eta_L * p.z()};
    }
    [[nodiscard]] bool inside_conductor(const Vec3&) const { return false; }
};

[[nodiscard]] inline FieldModel make_field_model(const ChipConfig& config, const StageSpec& stage,
                                                 const PhysicalConstants& c = {},
                                                 const QuadratureOptions& opts = {}) {
    return {build_levitation_assembly(config), build_separation_assembly(config, stage), config.B0, c, opts};
}

[[nodiscard]] inline FieldModel make_levitation_model(const ChipConfig& config, const PhysicalConstants& c = {},
                                                      const QuadratureOptions& opts = {}) {
    return {build_levitation_assembly(config), {}, config.B0, c, opts};
}

// Sum of every wire plus the bias, with the quadrature convergence check.
[[nodiscard]] inline Vec3 total_field(const Vec3& point, const FieldModel& model) {
    return model.checked_field(point);
}

// Central-difference Jacobian J(i, j) = dB_i / dx_j without further checks.
template <MagneticField F>
[[nodiscard]] Mat3 central_jacobian(const F& f, const Vec3& p, double step) {
    Mat3 J;
    for (int j = 0; j < 3; ++j) {
        Vec3 lo = p;
        Vec3 hi = p;
        lo[j] -= step;
        hi[j] += step;
        J.col(j) = (f.field(hi) - f.field(lo)) / (2.0 * step);
    }
    return J;
}

struct JacobianOptions {
    double step = 1e-8;
    bool richardson_check = true;
    double rel_tol = 1e-3;
};

// Central-difference Jacobian; with richardson_check the half-step estimate must
// agree to rel_tol (relative to the largest entry).
template <MagneticField F>
[[nodiscard]] Mat3 field_jacobian(const F& f, const Vec3& p, const JacobianOptions& opts = {}) {
    for (int j = 0; j < 3; ++j) {
        for (double s : {-opts.step, opts.step}) {
            Vec3 q = p;
            q[j] += s;
            if (f.inside_conductor(q)) throw ConductorIntrusion("field_jacobian: stencil point inside conductor");
        }
    }
    const Mat3 J = central_jacobian(f, p, opts.step);
    if (opts.richardson_check) {
        const Mat3 half = central_jacobian(f, p, 0.5 * opts.step);
        const double scale = std::max(J.cwiseAbs().maxCoeff(), half.cwiseAbs().maxCoeff());
        if ((J - half).cwiseAbs().maxCoeff() > opts.rel_tol * scale + 1e-300) {
            throw NumericalError("field_jacobian: step refinement changed the Jacobian beyond tolerance");
        }
    }
    return J;
}

// Thin-wire gradient dB_z/dz of the levitation quadrupole at its center.
[[nodiscard]] inline double eta_L_thin(double a, double b, double I_L, const PhysicalConstants& c = {}) {
    const double s = a * a + b * b;
    return 4.0 * c.mu0 * I_L / kPi * a * b / (s * s);
}

// Magnitude of dB_x/dx at the center of the infinite-thin separation quadrupole.
[[nodiscard]] inline double eta_S_thin(double L, double I, const PhysicalConstants& c = {}) {
    return c.mu0 * I / (kPi * L * L);
}

// ---------------------------------------------------------------------------
// Field maps

enum class Plane { YZ, XY };

struct FieldSample {
    Vec3 position = Vec3::Zero();
    Vec3 B = Vec3::Constant(std::numeric_limits<double>::quiet_NaN());
    bool masked = false;

    [[nodiscard]] double norm() const { return masked ? std::numeric_limits<double>::quiet_NaN() : B.norm(); }
};

struct FieldMapSpec {
    Plane plane = Plane::YZ;
    double offset = 0.0;  // x0 for YZ, z0 for XY
    double extent = 20e-6; // half-width of the square window
    Vec2 center = Vec2::Zero();  // in-plane window center
    int resolution = 101;
};

// n x n samples; the first in-plane axis (y for YZ, x for XY) varies fastest.
[[nodiscard]] inline std::vector<FieldSample> field_map(const FieldMapSpec& spec, const FieldModel& model) {
    if (spec.resolution < 2) throw ValidationError("field_map: resolution must be >= 2");
    if (!(spec.extent > 0.0)) throw ValidationError("field_map: extent must be positive");
    const int n = spec.resolution;
    std::vector<FieldSample> grid(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
    const double step = 2.0 * spec.extent / (n - 1);
    for (int r = 0; r < n; ++r) {
        for (int col = 0; col < n; ++col) {
            const double u = spec.center.x() - spec.extent + col * step;
            const double v = spec.center.y() - spec.extent + r * step;
            FieldSample& s = grid[static_cast<std::size_t>(r) * n + col];
            s.position = spec.plane == Plane::YZ ? Vec3(spec.offset, u, v) : Vec3(u, v, spec.offset);
            if (model.inside_conductor(s.position)) {
                s.masked = true;
                continue;
            }
            try {
                s.B = total_field(s.position, model);
            } catch (const ConductorIntrusion&) {
                s.masked = true;
            } catch (const QuadratureNotConverged&) {
                // Points hugging a conductor surface; no physics needed there.
                s.masked = true;
            }
        }
    }
    return grid;
}

// Fixed scientific formatting with 9 significant digits.
[[nodiscard]] inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) v = 0.0;  // no "-0"
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.8e", v);
    return buf;
}

inline void write_field_map_csv(std::ostream& out, std::span<const FieldSample> grid) {
    out << "x_m,y_m,z_m,Bx_T,By_T,Bz_T,Bnorm_T\n";
    for (const auto& s : grid) {
        out << format_double(s.position.x()) << ',' << format_double(s.position.y()) << ','
            << format_double(s.position.z());
        if (s.masked) {
            out << ",nan,nan,nan,nan\n";
        } else {
            out << ',' << format_double(s.B.x()) << ',' << format_double(s.B.y()) << ','
                << format_double(s.B.z()) << ',' << format_double(s.B.norm()) << '\n';
        }
    }
}

}  // namespace icat

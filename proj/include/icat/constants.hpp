#pragma once

#include <cmath>

namespace icat {

// Physical constants, SI units. gamma_e and chi_rho are signed (negative).
struct PhysicalConstants {
    double mu0 = 1.2566e-6;     // T m / A
    double hbar = 1.05e-34;     // J s
    double gamma_e = -1.8e11;   // rad / (s T)
    double chi_rho = -6.2e-9;   // m^3 / kg
    double g = 9.8;             // m / s^2
    double D = 2.8e9;           // Hz, zero-field splitting (no force contribution)
    double rho_gold = 2.44e-8;  // Ohm m
    double alpha_si = 7.84e-5;  // m^2 / s

    // sqrt(-chi_rho / mu0); multiplies a gradient (T/m) to give an angular frequency.
    [[nodiscard]] double gradient_to_omega() const { return std::sqrt(-chi_rho / mu0); }
};

inline constexpr double kPi = 3.14159265358979323846;

}  // namespace icat

#include <gtest/gtest.h>

#include <sstream>

#include "icat/experiments.hpp"

using namespace icat;

namespace {

std::string error_of(const std::string& text) {
    try {
        (void)parse_config(text);
    } catch (const ValidationError& e) {
        return e.what();
    }
    return {};
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST(ParseConfig, EmptyGivesDefaults) {
    const RunConfig c = parse_config("");
    EXPECT_DOUBLE_EQ(c.chip.a, 9e-6);
    EXPECT_DOUBLE_EQ(c.chip.b, 7e-6);
    EXPECT_DOUBLE_EQ(c.chip.w, 10e-6);
    EXPECT_DOUBLE_EQ(c.chip.L, 200e-6);
    EXPECT_DOUBLE_EQ(c.chip.wire_half_length, 200e-6);
    EXPECT_DOUBLE_EQ(c.chip.I_L, 24.0);
    EXPECT_DOUBLE_EQ(c.chip.B0, 0.5);
    EXPECT_DOUBLE_EQ(c.particle.mass, 1e-19);
    EXPECT_DOUBLE_EQ(c.x0, 40e-6);
    EXPECT_DOUBLE_EQ(c.plan.stages[0].separation_current, 10.0);
    EXPECT_DOUBLE_EQ(c.plan.stages[2].separation_current, 9.99);
    EXPECT_DOUBLE_EQ(c.numeric.dt, 1e-5);
    EXPECT_EQ(c.numeric.switching, SwitchMode::Event);
    EXPECT_EQ(c.output_dir, "out");
}

TEST(ParseConfig, PartialOverride) {
    const RunConfig c = parse_config("[chip]\nIL_A=12\n");
    EXPECT_DOUBLE_EQ(c.chip.I_L, 12.0);
    EXPECT_DOUBLE_EQ(c.chip.a, 9e-6);
    EXPECT_DOUBLE_EQ(c.chip.B0, 0.5);
}

TEST(ParseConfig, FullFile) {
    const RunConfig c = parse_config(R"(
# comment line
output_dir = results   # trailing comment
[chip]
a_um = 10
b_um=8
L_um = 150
l_um = 300
B0_T = 0.3
[particle]
mass_kg = 1e-17
[protocol]
x0_um = 60
I_A = 8
I3_A = 7.9
[numeric]
dt_s = 2e-5
quad_order = 24
quad_check_order = 48
switch_mode = scheduled
max_iter = 10
[sweep]
IL_list_A = 20, 10
mass_list_kg = 1e-18
x0_points = 5
)");
    EXPECT_EQ(c.output_dir, "results");
    EXPECT_DOUBLE_EQ(c.chip.a, 10e-6);
    EXPECT_DOUBLE_EQ(c.chip.b, 8e-6);
    EXPECT_DOUBLE_EQ(c.chip.L, 150e-6);
    EXPECT_DOUBLE_EQ(c.chip.wire_half_length, 300e-6);
    EXPECT_DOUBLE_EQ(c.chip.B0, 0.3);
    EXPECT_DOUBLE_EQ(c.particle.mass, 1e-17);
    EXPECT_DOUBLE_EQ(c.x0, 60e-6);
    EXPECT_DOUBLE_EQ(c.plan.stages[0].separation_current, 8.0);
    EXPECT_DOUBLE_EQ(c.plan.stages[1].separation_current, 8.0);
    EXPECT_DOUBLE_EQ(c.plan.stages[2].separation_current, 7.9);
    EXPECT_DOUBLE_EQ(c.numeric.dt, 2e-5);
    EXPECT_EQ(c.numeric.quad_order, 24);
    EXPECT_EQ(c.numeric.switching, SwitchMode::Scheduled);
    EXPECT_EQ(c.numeric.max_iter, 10);
    EXPECT_EQ(c.sweep.IL_list, (std::vector<double>{20.0, 10.0}));
    EXPECT_EQ(c.sweep.mass_list, (std::vector<double>{1e-18}));
    EXPECT_EQ(c.sweep.x0_points, 5);
}

TEST(ParseConfig, ErrorsNameTheKey) {
    EXPECT_NE(error_of("[particle]\nmass_kg=-1\n").find("mass_kg"), std::string::npos);
    EXPECT_NE(error_of("[chip]\nfoo_um=3\n").find("foo_um"), std::string::npos);
    EXPECT_NE(error_of("[chip]\na_um=nine\n").find("a_um"), std::string::npos);
    EXPECT_NE(error_of("[chip]\na_um=9x\n").find("a_um"), std::string::npos);
    EXPECT_NE(error_of("[chip]\nw_um=20\n").find("a_um"), std::string::npos);  // overlap
    EXPECT_NE(error_of("[numeric]\nquad_order=2.5\n").find("quad_order"), std::string::npos);
    EXPECT_NE(error_of("[numeric]\nswitch_mode=sometimes\n").find("switch_mode"), std::string::npos);
    EXPECT_NE(error_of("[numeric]\ndt_s=0\n").find("dt_s"), std::string::npos);
    EXPECT_NE(error_of("[protocol]\nI3_A=\n").find("I3_A"), std::string::npos);
    EXPECT_NE(error_of("mass_kg=1e-19\n").find("mass_kg"), std::string::npos);  // wrong section
    EXPECT_NE(error_of("[gadgets]\n").find("gadgets"), std::string::npos);
    EXPECT_FALSE(error_of("[chip\n").empty());
    EXPECT_FALSE(error_of("[chip]\njust words\n").empty());
}

TEST(GradientSweep, Values) {
    const auto rows = sweep_gradient_vs_spacing(7e-6, {18e-6, 30e-6, 1.0}, {24.0, 18.0, 12.0});
    ASSERT_EQ(rows.size(), 9u);
    EXPECT_NEAR(rows[0].eta_L, 1.43e5, 0.005e5);
    EXPECT_DOUBLE_EQ(rows[0].two_a, 18e-6);
    EXPECT_DOUBLE_EQ(rows[0].I_L, 24.0);
    // Linear in current at fixed geometry.
    EXPECT_LT(rel(rows[3].eta_L, 0.75 * rows[0].eta_L), 1e-14);
    EXPECT_LT(rel(rows[6].eta_L, 0.5 * rows[0].eta_L), 1e-14);
    // Vanishes for wide spacing.
    EXPECT_LT(rows[2].eta_L, 1e-6 * rows[0].eta_L);
    std::ostringstream out;
    write_gradient_csv(out, rows);
    EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "two_a_um,IL_A,etaL_Tpm");
    EXPECT_NE(out.str().find("1.80000000e+01,2.40000000e+01,"), std::string::npos);
}

TEST(BzSweep, Values) {
    const auto rows = sweep_Bz_vs_spacing(7e-6, {18e-6, 24e-6}, {24.0, 18.0, 12.0});
    const PhysicalConstants c;
    for (const auto& r : rows) {
        const double eta = eta_L_thin(0.5 * r.two_a, 7e-6, r.I_L);
        EXPECT_LT(rel(std::abs(r.Bz) * eta, 1986.0), 1e-3);
        EXPECT_LT(rel(r.Bz * eta, c.g * c.mu0 / c.chi_rho), 1e-14);
    }
    // |Bz| decreases as I_L increases.
    EXPECT_LT(std::abs(rows[0].Bz), std::abs(rows[2].Bz));
    EXPECT_LT(std::abs(rows[2].Bz), std::abs(rows[4].Bz));
    const auto far = sweep_Bz_vs_spacing(7e-6, {18e-6}, {1e9});
    EXPECT_LT(std::abs(far[0].Bz), 1e-9);
    std::ostringstream out;
    write_bz_csv(out, rows);
    EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "two_a_um,IL_A,Bz_T");
}

TEST(SizeSweep, Values) {
    const auto x0s = linspace(5e-6, 100e-6, 20);
    const auto rows = sweep_size_vs_x0({1e-19, 1e-17, 1e-15}, x0s, 100.0, 0.5);
    ASSERT_EQ(rows.size(), 60u);
    EXPECT_DOUBLE_EQ(x0s[7], 40e-6);
    EXPECT_NEAR(rows[7].dx_max, 12e-6, 0.2e-6);
    EXPECT_NEAR(rows[40 + 7].dx_max, 1.2e-9, 0.02e-9);
    for (int m = 0; m < 3; ++m) {
        for (int i = 1; i < 20; ++i) EXPECT_GT(rows[m * 20 + i].dx_max, rows[m * 20 + i - 1].dx_max);
    }
    std::ostringstream out;
    write_size_csv(out, rows);
    EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "mass_kg,x0_um,dxmax_m");
}

TEST(Sweeps, DeterministicOutput) {
    const auto x0s = linspace(5e-6, 100e-6, 20);
    std::ostringstream a;
    std::ostringstream b;
    write_size_csv(a, sweep_size_vs_x0({1e-19, 1e-17}, x0s, 100.0, 0.5));
    write_size_csv(b, sweep_size_vs_x0({1e-19, 1e-17}, x0s, 100.0, 0.5));
    EXPECT_EQ(a.str(), b.str());
}

TEST(Estimates, Heating) {
    const HeatingEstimate h = heating_estimate(24.0, 400e-6, 10e-6, 0.1);
    EXPECT_NEAR(h.R, 2.44e-8 * 400e-6 / 1e-10, 1e-12);
    EXPECT_NEAR(h.Q, 5.6, 0.05);
    EXPECT_EQ(heating_estimate(0.0, ChipConfig{}, 0.1).Q, 0.0);
    EXPECT_DOUBLE_EQ(heating_estimate(24.0, ChipConfig{}, 0.1).Q, h.Q);
    EXPECT_THROW((void)heating_estimate(1.0, ChipConfig{}, 0.0), ValidationError);
}

TEST(Estimates, DiffusionLength) {
    EXPECT_NEAR(diffusion_length(0.1), 2.8e-3, 0.01e-3);
    EXPECT_THROW((void)diffusion_length(-1.0), ValidationError);
}

TEST(RunConfig, AnalyticScenarioUsesThinGradient) {
    const RunConfig c = parse_config("");
    const AnalyticScenario s = c.analytic_scenario();
    EXPECT_NEAR(s.eta1, 100.0, 5e-3);
    EXPECT_NEAR(s.eta2, 99.9, 5e-3);
    EXPECT_NEAR(s.eta2 / s.eta1, 0.999, 1e-12);
    EXPECT_DOUBLE_EQ(s.x0, 40e-6);
}

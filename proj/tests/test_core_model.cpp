#include <gtest/gtest.h>

#include "icat/chip.hpp"
#include "icat/constants.hpp"

using namespace icat;

TEST(Constants, SignedDefaults) {
    const PhysicalConstants c;
    EXPECT_LT(c.chi_rho, 0.0);
    EXPECT_LT(c.gamma_e, 0.0);
    EXPECT_DOUBLE_EQ(c.mu0, 1.2566e-6);
    EXPECT_DOUBLE_EQ(c.hbar, 1.05e-34);
    EXPECT_DOUBLE_EQ(c.gamma_e, -1.8e11);
    EXPECT_DOUBLE_EQ(c.chi_rho, -6.2e-9);
    EXPECT_DOUBLE_EQ(c.g, 9.8);
    EXPECT_DOUBLE_EQ(c.D, 2.8e9);
}

TEST(Particle, SpinValues) {
    EXPECT_EQ(spin_value(SpinBranch::Up), 1.0);
    EXPECT_EQ(spin_value(SpinBranch::Down), -1.0);
    EXPECT_EQ(spin_value(SpinBranch::Neutral), 0.0);
    EXPECT_STREQ(to_string(SpinBranch::Neutral), "neutral");
}

TEST(Particle, RejectsNonPositiveMass) {
    Particle p;
    p.mass = -1.0;
    try {
        p.validate();
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("mass_kg"), std::string::npos);
    }
    p.mass = 1e-19;
    EXPECT_NO_THROW(p.validate());
}

TEST(ChipConfig, DefaultsMatchDevice) {
    const ChipConfig c;
    EXPECT_DOUBLE_EQ(2 * c.a, 18e-6);
    EXPECT_DOUBLE_EQ(2 * c.b, 14e-6);
    EXPECT_DOUBLE_EQ(c.w, 10e-6);
    EXPECT_DOUBLE_EQ(2 * c.L, 400e-6);
    EXPECT_DOUBLE_EQ(2 * c.wire_half_length, 400e-6);
    EXPECT_DOUBLE_EQ(c.I_L, 24.0);
    EXPECT_DOUBLE_EQ(c.B0, 0.5);
    EXPECT_NO_THROW(c.validate());
}

TEST(LevitationAssembly, TablePositionsAndCurrents) {
    const Assembly wires = build_levitation_assembly(ChipConfig{});
    ASSERT_EQ(wires.size(), 4u);
    const double expected[4][3] = {{9e-6, 7e-6, -24}, {-9e-6, 7e-6, 24}, {-9e-6, -7e-6, -24}, {9e-6, -7e-6, 24}};
    for (int k = 0; k < 4; ++k) {
        EXPECT_EQ(wires[k].model, WireModel::RectX);
        EXPECT_DOUBLE_EQ(wires[k].center.x(), expected[k][0]);
        EXPECT_DOUBLE_EQ(wires[k].center.y(), expected[k][1]);
        EXPECT_DOUBLE_EQ(wires[k].current, expected[k][2]);
        EXPECT_DOUBLE_EQ(wires[k].half_width, 5e-6);
    }
    EXPECT_EQ(net_current(wires), 0.0);
}

TEST(LevitationAssembly, ZeroCurrent) {
    ChipConfig c;
    c.I_L = 0.0;
    for (const auto& w : build_levitation_assembly(c)) EXPECT_EQ(w.current, 0.0);
}

TEST(LevitationAssembly, OverlapIsRejected) {
    ChipConfig c;
    c.a = 0.5 * c.w;  // 2a = w
    EXPECT_THROW((void)build_levitation_assembly(c), ValidationError);
    c = ChipConfig{};
    c.b = 0.5 * c.w;
    EXPECT_THROW((void)build_levitation_assembly(c), ValidationError);
}

TEST(LevitationAssembly, ThinVariantKeepsGeometry) {
    const Assembly rect = build_levitation_assembly(ChipConfig{});
    const Assembly thin = build_levitation_assembly_thin(ChipConfig{});
    ASSERT_EQ(thin.size(), 4u);
    for (std::size_t k = 0; k < 4; ++k) {
        EXPECT_EQ(thin[k].model, WireModel::ThinInfinite);
        EXPECT_EQ(thin[k].center, rect[k].center);
        EXPECT_EQ(thin[k].current, rect[k].current);
    }
}

TEST(SeparationAssembly, StageCurrents) {
    const ChipConfig c;
    const StagePlan plan = default_plan();
    const Assembly s1 = build_separation_assembly(c, plan.stages[0]);
    const Assembly s2 = build_separation_assembly(c, plan.stages[1]);
    const Assembly s3 = build_separation_assembly(c, plan.stages[2]);
    const double pos[4][2] = {{200e-6, 200e-6}, {-200e-6, 200e-6}, {-200e-6, -200e-6}, {200e-6, -200e-6}};
    const double sign[4] = {-1, 1, -1, 1};
    for (int k = 0; k < 4; ++k) {
        EXPECT_EQ(s1[k].model, WireModel::ThinFiniteZ);
        EXPECT_DOUBLE_EQ(s1[k].center.x(), pos[k][0]);
        EXPECT_DOUBLE_EQ(s1[k].center.y(), pos[k][1]);
        EXPECT_DOUBLE_EQ(s1[k].half_length, 200e-6);
        EXPECT_DOUBLE_EQ(s1[k].current, 10.0 * sign[k]);
        EXPECT_DOUBLE_EQ(s2[k].current, -10.0 * sign[k]);
        EXPECT_DOUBLE_EQ(s3[k].current, 9.99 * sign[k]);
    }
    EXPECT_EQ(net_current(s1), 0.0);
    EXPECT_EQ(net_current(s2), 0.0);
    EXPECT_EQ(net_current(s3), 0.0);
}

TEST(SeparationAssembly, Deterministic) {
    const ChipConfig c;
    const StageSpec s = default_plan().stages[0];
    const Assembly a = build_separation_assembly(c, s);
    const Assembly b = build_separation_assembly(c, s);
    for (std::size_t k = 0; k < a.size(); ++k) {
        EXPECT_EQ(a[k].center, b[k].center);
        EXPECT_EQ(a[k].current, b[k].current);
    }
}

TEST(StagePlan, DefaultPlanShape) {
    const StagePlan p = default_plan();
    ASSERT_EQ(p.stages.size(), 3u);
    EXPECT_EQ(p.stages[0].eta_sign, -1);
    EXPECT_EQ(p.stages[1].eta_sign, 1);
    EXPECT_EQ(p.stages[2].eta_sign, -1);
    EXPECT_EQ(p.stages[0].end_rule.kind, EndRule::Kind::MidpointCrossesZero);
    EXPECT_EQ(p.stages[1].end_rule.kind, EndRule::Kind::SeparationReturnsToInitial);
    EXPECT_EQ(p.stages[2].end_rule.kind, EndRule::Kind::Closure);
    EXPECT_NO_THROW(p.validate());
}

TEST(StagePlan, Validation) {
    StagePlan p = default_plan();
    p.stages[0].eta_sign = 0;
    EXPECT_THROW(p.validate(), ValidationError);
    p = default_plan();
    p.stages[1].separation_current = -1.0;
    EXPECT_THROW(p.validate(), ValidationError);
    p = default_plan();
    p.stages[2].end_rule = EndRule::scheduled(0.0);
    EXPECT_THROW(p.validate(), ValidationError);
    EXPECT_THROW(StagePlan{}.validate(), ValidationError);
}

TEST(ChipConfig, ErrorsNameTheKey) {
    auto message = [](ChipConfig c) {
        try {
            c.validate();
        } catch (const ValidationError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    ChipConfig c;
    c.w = -1;
    EXPECT_NE(message(c).find("w_um"), std::string::npos);
    c = ChipConfig{};
    c.I_L = -2;
    EXPECT_NE(message(c).find("IL_A"), std::string::npos);
    c = ChipConfig{};
    c.B0 = std::nan("");
    EXPECT_NE(message(c).find("B0_T"), std::string::npos);
    c = ChipConfig{};
    c.wire_half_length = 0;
    EXPECT_NE(message(c).find("l_um"), std::string::npos);
}

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <string>

#include "deint/boundary.hpp"
#include "deint/design.hpp"
#include "deint/error.hpp"
#include "deint/random.hpp"
#include "fixtures.hpp"

using namespace deint;
using fixtures::boundary;

namespace {

bool has_issue(const DesignConfig& c, const std::string& field, const std::string& fragment = "") {
    for (const auto& issue : check(c))
        if (issue.field == field && issue.message.find(fragment) != std::string::npos) return true;
    return false;
}

}  // namespace

TEST(Boundary, EndpointsAndMidpoint) {
    EXPECT_DOUBLE_EQ(boundary_value(boundary(0.3, 2.0, 10, 60), 60), 0.7);
    EXPECT_DOUBLE_EQ(boundary_value(boundary(0.3, 2.0, 10, 60), 10), 1.0);
    EXPECT_DOUBLE_EQ(boundary_value(boundary(0.4, 1.0, 50, 100), 75), 0.8);
}

TEST(Boundary, InactiveBelowActivationAndFlatForZeroShape) {
    const BoundarySpec b = boundary(0.25, 0.0, 20, 80);
    for (int l = 1; l < 20; ++l) EXPECT_EQ(boundary_value(b, l), 1.0);
    for (int l = 20; l <= 80; ++l) EXPECT_EQ(boundary_value(b, l), 0.75);
}

TEST(Boundary, OutOfRangeEnrollmentThrows) {
    const BoundarySpec b = boundary(0.25, 1.0, 20, 80);
    EXPECT_THROW(boundary_value(b, 0), InvalidArgument);
    EXPECT_THROW(boundary_value(b, 81), InvalidArgument);
}

TEST(Boundary, NonIncreasingWithRangeWithinOneMinusScaleAndOne) {
    RngStream rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const int m_max = 1 + static_cast<int>(rng.uniform() * 300);
        const int m = static_cast<int>(rng.uniform() * (m_max + 1));
        const BoundarySpec b = boundary(rng.uniform(), 8.0 * rng.uniform(), std::min(m, m_max), m_max);
        double previous = 1.0;
        for (int l = 1; l <= m_max; ++l) {
            const double v = boundary_value(b, l);
            EXPECT_LE(v, previous);
            EXPECT_GE(v, 1.0 - b.scale);
            EXPECT_LE(v, 1.0);
            previous = v;
        }
    }
}

TEST(Boundary, CriticalScaleInvertsTheRule) {
    const BoundarySpec b = boundary(0.0, 1.0, 50, 150);
    EXPECT_DOUBLE_EQ(critical_scale(b, 100, 0.9), 0.2);
    EXPECT_TRUE(std::isinf(critical_scale(b, 50, 0.9)));
    EXPECT_EQ(critical_scale(b, 120, 1.0), 0.0);
}

TEST(Boundary, ValidationRejectsOutOfRangeParameters) {
    EXPECT_THROW(boundary(1.2, 1.0, 0, 10).validate("b"), InvalidArgument);
    EXPECT_THROW(boundary(0.2, -1.0, 0, 10).validate("b"), InvalidArgument);
    EXPECT_THROW(boundary(0.2, 1.0, 11, 10).validate("b"), InvalidArgument);
    EXPECT_NO_THROW(boundary(0.2, 1.0, 10, 10).validate("b"));
}

TEST(Config, FixtureDesignsAreValid) {
    EXPECT_TRUE(check(fixtures::efficacy_config()).empty());
    EXPECT_TRUE(check(fixtures::coprimary_config(2)).empty());
}

TEST(Config, AdaptiveMarginConstraint) {
    DesignConfig c = fixtures::coprimary_config();
    c.delta_low = 2.5;
    EXPECT_TRUE(has_issue(c, "delta_low", "adaptive-margin"));
    c.delta_low = -0.1;
    EXPECT_TRUE(has_issue(c, "delta_low", "adaptive-margin"));
    c.delta_low = 2.0;
    EXPECT_TRUE(check(c).empty());
    EXPECT_THROW(validate(fixtures::coprimary_config().with_max_per_arm(0)), InvalidArgument);
}

TEST(Config, MarginSwitchBoundaryMustStayBelowToxicityBoundary) {
    DesignConfig c = fixtures::coprimary_config();
    c.margin_boundary = boundary(0.1, 1.0, 0, c.max_per_arm);
    EXPECT_TRUE(has_issue(c, "B_t", "strictly below"));
    c.margin_boundary = boundary(0.5, 1.0, 0, c.max_per_arm);
    EXPECT_TRUE(check(c).empty());
    c.margin_boundary = boundary(0.2, 1.0, 0, c.max_per_arm);
    EXPECT_TRUE(has_issue(c, "B_t"));
}

TEST(Config, DefaultMarginBoundaryIsHalfwayToOne) {
    const DesignConfig c = fixtures::coprimary_config();
    const BoundarySpec m = c.toxicity_margin_boundary();
    EXPECT_DOUBLE_EQ(m.scale, 0.6);
    EXPECT_EQ(m.shape, c.b_t.shape);
    EXPECT_EQ(m.activation, c.b_t.activation);
    for (int l = 1; l <= c.max_per_arm; ++l)
        if (c.b_t.can_fire(l)) EXPECT_LT(boundary_value(m, l), boundary_value(c.b_t, l));
}

TEST(Config, OtherInvariants) {
    DesignConfig c = fixtures::efficacy_config(2);
    c.max_total = c.max_per_arm - 1;
    EXPECT_TRUE(has_issue(c, "max_total"));
    c = fixtures::efficacy_config(2);
    c.arm_margins = {2.0, 2.5};
    EXPECT_TRUE(has_issue(c, "arm_margins"));
    c.arm_margins = {2.0};
    EXPECT_TRUE(has_issue(c, "arm_margins"));
    c = fixtures::efficacy_config();
    c.b_ni.activation = c.max_per_arm + 1;
    EXPECT_TRUE(has_issue(c, "b_ni"));
    c = fixtures::efficacy_config();
    c.alpha = 1.0;
    EXPECT_TRUE(has_issue(c, "alpha"));
    c = fixtures::efficacy_config();
    c.grid_horizon = 20.0;
    EXPECT_TRUE(has_issue(c, "grid_horizon"));
}

TEST(Config, CapChangesCarryBoundaries) {
    const DesignConfig c = fixtures::efficacy_config(2, 40).with_max_per_arm(90);
    EXPECT_EQ(c.max_per_arm, 90);
    EXPECT_EQ(c.b_ni.max_enrollment, 90);
    EXPECT_EQ(c.b_i.max_enrollment, 90);
    EXPECT_TRUE(check(c).empty());
    const DesignConfig one = c.single_arm();
    EXPECT_EQ(one.arms, 1);
    EXPECT_EQ(one.max_total, 90);
}

TEST(EfficacyDecision, CertainInferiorityStops) {
    const DesignConfig c = fixtures::efficacy_config();
    EXPECT_EQ(efficacy_interim_decision(c, 0, {5, 0.1}, {0.0, 1.0}), Decision::kStopInferior);
}

TEST(EfficacyDecision, NoEvidenceContinuesBelowCap) {
    const DesignConfig c = fixtures::efficacy_config();
    EXPECT_EQ(efficacy_interim_decision(c, 0, {30, 0.1}, {0.0, 0.0}), Decision::kContinue);
}

TEST(EfficacyDecision, PauseThenCloseAtCap) {
    const DesignConfig c = fixtures::efficacy_config();
    EXPECT_EQ(efficacy_interim_decision(c, 0, {40, 2.0}, {0.0, 0.0}), Decision::kPause);
    EXPECT_EQ(efficacy_interim_decision(c, 0, {40, 6.0}, {0.0, 0.0}), Decision::kCloseNotRejected);
}

TEST(EfficacyDecision, NonInferiorityIsCheckedFirstAndStrict) {
    const DesignConfig c = fixtures::efficacy_config();
    const double b = boundary_value(c.b_ni, 40);
    EXPECT_EQ(efficacy_interim_decision(c, 0, {40, 0.0}, {1.0, 1.0}), Decision::kDeclareNonInferior);
    EXPECT_EQ(efficacy_interim_decision(c, 0, {40, 0.0}, {b, 0.0}), Decision::kPause);
    EXPECT_EQ(efficacy_interim_decision(c, 0, {40, 0.0}, {std::nextafter(b, 2.0), 0.0}),
              Decision::kDeclareNonInferior);
}

TEST(EfficacyDecision, InconsistentStateThrows) {
    const DesignConfig c = fixtures::efficacy_config();
    EXPECT_THROW(efficacy_interim_decision(c, 0, {0, 0.0}, {0, 0}), InvalidArgument);
    EXPECT_THROW(efficacy_interim_decision(c, 0, {41, 0.0}, {0, 0}), InvalidArgument);
    EXPECT_THROW(efficacy_interim_decision(c, 1, {10, 0.0}, {0, 0}), InvalidArgument);
}

TEST(EfficacyDecision, NoRuleFiresBelowItsActivation) {
    DesignConfig c = fixtures::efficacy_config();
    c.b_i = boundary(0.5, 1.0, 15, c.max_per_arm);
    c.b_ni = boundary(0.5, 1.0, 25, c.max_per_arm);
    for (int n = 1; n <= c.max_per_arm; ++n) {
        const Decision d = efficacy_interim_decision(c, 0, {n, 0.0}, {1.0, 1.0});
        if (n <= 25) EXPECT_NE(d, Decision::kDeclareNonInferior) << n;
        if (n <= 15) EXPECT_NE(d, Decision::kStopInferior) << n;
    }
}

TEST(CoprimaryDecision, LenientMarginWhenToxicityUnlikely) {
    const DesignConfig c = fixtures::coprimary_config();
    const auto d = coprimary_interim_decision(c, {20, 0.1}, {0.1, 0.0, 0.2, 0.6});
    EXPECT_FALSE(d.low_margin);
    EXPECT_EQ(d.margin, c.delta);
    EXPECT_EQ(d.decision, Decision::kContinue);
}

TEST(CoprimaryDecision, CertainToxicityStopsOnTheLowMarginBranch) {
    const DesignConfig c = fixtures::coprimary_config();
    const auto d = coprimary_interim_decision(c, {20, 0.1}, {0.0, 1.0, 0.0, 0.0});
    EXPECT_EQ(d.decision, Decision::kStopToxicity);
    EXPECT_TRUE(d.low_margin);
    EXPECT_EQ(d.margin, c.delta_low);
}

TEST(CoprimaryDecision, LowMarginUsesItsOwnInferiorityProbability) {
    const DesignConfig c = fixtures::coprimary_config();
    const double b_t = boundary_value(c.b_t, 40);
    const double switch_at = boundary_value(c.toxicity_margin_boundary(), 40);
    const double toxic = 0.5 * (b_t + switch_at);
    const auto high = coprimary_interim_decision(c, {40, 0.0}, {0.0, toxic, 0.0, 1.0});
    EXPECT_TRUE(high.low_margin);
    EXPECT_EQ(high.decision, Decision::kStopInferior);
    const auto low = coprimary_interim_decision(c, {40, 0.0}, {0.0, 0.0, 0.0, 1.0});
    EXPECT_FALSE(low.low_margin);
    EXPECT_EQ(low.decision, Decision::kPause);
}

TEST(CoprimaryDecision, NonInferiorityUsesNonStrictInequality) {
    const DesignConfig c = fixtures::coprimary_config();
    const double b = boundary_value(c.b_ni, 40);
    EXPECT_EQ(coprimary_interim_decision(c, {40, 0.0}, {b, 0.0, 0.0, 0.0}).decision, Decision::kDeclareNonInferior);
    EXPECT_EQ(coprimary_interim_decision(c, {40, 0.0}, {std::nextafter(b, 0.0), 0.0, 0.0, 0.0}).decision,
              Decision::kPause);
    EXPECT_EQ(coprimary_interim_decision(c, {10, 0.0}, {1.0, 0.0, 0.0, 0.0}).decision, Decision::kContinue);
}

TEST(CoprimaryDecision, MarginIsOneOfTwoAndSwitchesOnlyAboveTheSwitchBoundary) {
    const DesignConfig c = fixtures::coprimary_config();
    RngStream rng(41);
    for (int i = 0; i < 2000; ++i) {
        const int n = 1 + static_cast<int>(rng.uniform() * c.max_per_arm);
        const CoprimaryProbabilities p{rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
        const auto d = coprimary_interim_decision(c, {n, rng.uniform() * 10.0}, p);
        EXPECT_TRUE(d.margin == c.delta || d.margin == c.delta_low);
        EXPECT_EQ(d.low_margin, p.toxic > boundary_value(c.toxicity_margin_boundary(), n));
    }
}

TEST(CoprimaryDecision, RejectsEfficacyOnlyDesign) {
    EXPECT_THROW(coprimary_interim_decision(fixtures::efficacy_config(), {5, 0.0}, {}), InvalidArgument);
}

TEST(Decision, Names) {
    EXPECT_EQ(to_string(Decision::kDeclareNonInferior), "declare-NI");
    EXPECT_EQ(to_string(Decision::kCloseNotRejected), "close-not-rejected");
    EXPECT_EQ(to_string(Decision::kStopToxicity), "stop-toxicity");
}

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "deint/calibration.hpp"
#include "deint/error.hpp"
#include "deint/survival.hpp"
#include "fixtures.hpp"

using namespace deint;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

TracePoint point(int index, int enrolled, double p_ni, double p_inf) {
    TracePoint p;
    p.index = index;
    p.clock = index;
    p.enrolled = enrolled;
    p.computed = true;
    p.p_non_inferior = p_ni;
    p.p_inferior = p_inf;
    return p;
}

bool declares_ni(DesignConfig c, const ArmTrace& trace, double scale) {
    c.b_ni.scale = scale;
    return evaluate_trace(c, trace, {1, true, c.mode == EndpointMode::kCoPrimary}).decision ==
           Decision::kDeclareNonInferior;
}

}  // namespace

TEST(LowerQuantile, OrderStatisticConvention) {
    const std::vector<double> v = {5, 1, 3, 2, 4};
    EXPECT_EQ(lower_quantile(v, 0.1), 1);
    EXPECT_EQ(lower_quantile(v, 0.2), 1);
    EXPECT_EQ(lower_quantile(v, 0.21), 2);
    EXPECT_EQ(lower_quantile(v, 0.4), 2);
    EXPECT_EQ(lower_quantile(v, 0.0), 1);
    EXPECT_EQ(lower_quantile(v, 1.0), 5);
    EXPECT_EQ(lower_quantile({kInf, 1.0, kInf}, 0.5), kInf);
    EXPECT_THROW(lower_quantile({}, 0.5), InvalidArgument);
    EXPECT_THROW(lower_quantile(v, 1.5), InvalidArgument);
}

TEST(LowerQuantile, TenPercentOfTwoThousand) {
    std::vector<double> v;
    for (int i = 2000; i >= 1; --i) v.push_back(i);
    EXPECT_EQ(lower_quantile(v, 0.1), 200);
}

TEST(CriticalScale, HandTraces) {
    const DesignConfig c = fixtures::efficacy_config();  // b_NI active above 20 of 40, b_I linear
    ArmTrace inactive{{point(1, 5, 0.999, 0.0), point(2, 10, 0.999, 0.0), point(3, 20, 0.999, 0.0)}};
    EXPECT_EQ(critical_scale_ni(inactive, c), kInf);

    ArmTrace rising{{point(1, 10, 0.99, 0.0), point(2, 30, 0.9, 0.0), point(3, 40, 0.95, 0.0)}};
    EXPECT_NEAR(critical_scale_ni(rising, c), 0.05, 1e-12);

    ArmTrace certain{{point(1, 30, 0.5, 0.0), point(2, 40, 1.0, 0.0)}};
    EXPECT_EQ(critical_scale_ni(certain, c), 0.0);
}

TEST(CriticalScale, InterimsAfterAFutilityStopDoNotCount) {
    const DesignConfig c = fixtures::efficacy_config();
    // b_I(40) = 0.8: the third look stops the trial, so the fourth is never reached
    ArmTrace stopped{{point(1, 30, 0.9, 0.0), point(2, 40, 0.95, 0.95), point(3, 40, 0.99, 0.0)}};
    EXPECT_NEAR(critical_scale_ni(stopped, c), 0.05, 1e-12);
    // NI is checked first, so the stopping look itself counts
    ArmTrace same_look{{point(1, 30, 0.9, 0.95), point(2, 40, 0.99, 0.0)}};
    EXPECT_NEAR(critical_scale_ni(same_look, c), 0.2, 1e-12);
}

TEST(CriticalScale, RejectsTracesMissingLiveInterims) {
    const DesignConfig c = fixtures::efficacy_config();
    ArmTrace trace{{point(1, 30, 0.9, 0.0)}};
    trace.points[0].computed = false;
    EXPECT_THROW(critical_scale_ni(trace, c), InvalidArgument);
    EXPECT_THROW(critical_scale_ni(ArmTrace{}, c), InvalidArgument);
}

TEST(CriticalScale, MatchesReplayOnSimulatedTraces) {
    const DesignConfig c = fixtures::efficacy_config();
    const BayesianDesign design(c);
    const ArmScenario arm = fixtures::exponential_arm(20.5);
    int checked = 0;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const ArmTrace trace = trace_single_arm(design, arm, RngStream(seed, 3), {1, true, false});
        const double crit = critical_scale_ni(trace, c);
        if (!(crit > 1e-6 && crit < 0.99)) continue;
        ++checked;
        EXPECT_TRUE(declares_ni(c, trace, crit * (1 + 1e-9))) << seed;
        EXPECT_FALSE(declares_ni(c, trace, crit)) << seed;
        EXPECT_FALSE(declares_ni(c, trace, crit * (1 - 1e-9))) << seed;
    }
    EXPECT_GT(checked, 5);
}

TEST(CriticalScale, CoprimaryRuleFiresAtTheCriticalScale) {
    const DesignConfig c = fixtures::coprimary_config();
    const BayesianDesign design(c);
    const ArmScenario arm = fixtures::exponential_arm(21.0, 14.0);
    int checked = 0;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const ArmTrace trace = trace_single_arm(design, arm, RngStream(seed, 5), {1, true, true});
        const double crit = critical_scale_ni(trace, c);
        if (!(crit > 1e-6 && crit < 0.99)) continue;
        ++checked;
        EXPECT_TRUE(declares_ni(c, trace, crit * (1 + 1e-9))) << seed;
        EXPECT_FALSE(declares_ni(c, trace, crit * (1 - 1e-9))) << seed;
    }
    EXPECT_GT(checked, 3);
}

TEST(CriticalScale, FutilityMatchesStopFraction) {
    const DesignConfig c = fixtures::efficacy_config();
    const BayesianDesign design(c);
    const ArmScenario arm = fixtures::exponential_arm(19.0);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const ArmTrace trace = trace_single_arm(design, arm, RngStream(seed), {1, true, false});
        const double crit = critical_scale_futility(trace, c, FutilityTarget::kInferiority);
        bool stops_below = false;
        bool stops_above = false;
        for (const TracePoint& p : trace.points) {
            BoundarySpec b = c.b_i;
            b.scale = std::min(crit * (1 - 1e-9), 1.0);
            stops_below = stops_below || p.p_inferior > boundary_value(b, p.enrolled);
            b.scale = std::min(std::max(crit * (1 + 1e-9), 1e-12), 1.0);
            stops_above = stops_above || p.p_inferior > boundary_value(b, p.enrolled);
        }
        EXPECT_FALSE(stops_below);
        if (crit < 1.0) EXPECT_TRUE(stops_above) << seed << " " << crit;
    }
}

TEST(FirstActive, FollowsShape) {
    EXPECT_EQ(first_active_enrollment({0.1, 1.0, 20, 40}), 21);
    EXPECT_EQ(first_active_enrollment({0.1, 0.0, 20, 40}), 20);
    EXPECT_EQ(first_active_enrollment({0.1, 0.0, 0, 40}), 1);
    EXPECT_EQ(first_active_enrollment({0.1, 2.0, 0, 40}), 1);
    for (const BoundarySpec& b : {BoundarySpec{0.1, 3.0, 40, 40}, BoundarySpec{0.1, 1.0, 20, 40},
                                  BoundarySpec{0.1, 0.0, 7, 40}}) {
        const int first = first_active_enrollment(b);
        EXPECT_TRUE(b.can_fire(first));
        if (first > 1) EXPECT_FALSE(b.can_fire(first - 1));
    }
}

TEST(Proportion, BinomialStandardError) {
    const Proportion p = proportion(25, 100);
    EXPECT_DOUBLE_EQ(p.estimate, 0.25);
    EXPECT_DOUBLE_EQ(p.mc_se, std::sqrt(0.25 * 0.75 / 100));
    EXPECT_THROW(proportion(0, 0), InvalidArgument);
}

TEST(NullFamily, MembersSitOnTheNullBoundary) {
    const DesignConfig c = fixtures::efficacy_config();
    const auto family = build_null_family(c, c.reference_efficacy(), EndpointMode::kEfficacyOnly);
    ASSERT_EQ(family.members.size(), 3u);
    for (const auto& m : family.members) {
        EXPECT_NEAR(rmst(m.arm.efficacy, c.horizon), c.theta0 - c.delta, 1e-6) << m.label;
        EXPECT_FALSE(m.arm.toxicity.has_value());
    }
}

TEST(NullFamily, CoprimaryAddsToxicityAtBeta0) {
    const DesignConfig c = fixtures::coprimary_config();
    const auto family = build_null_family(c, c.reference_efficacy(), EndpointMode::kCoPrimary);
    ASSERT_EQ(family.members.size(), 4u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_NEAR(rmst(family.members[i].arm.efficacy, c.horizon), c.theta0 - c.delta, 1e-6);
        EXPECT_EQ(rmst(*family.members[i].arm.toxicity, c.horizon), c.horizon);
    }
    EXPECT_NEAR(rmst(family.members[3].arm.efficacy, c.horizon), rmst(c.reference_efficacy(), c.horizon), 1e-12);
    EXPECT_NEAR(rmst(*family.members[3].arm.toxicity, c.horizon), c.beta0, 1e-6);
}

TEST(NullFamily, ReferenceMustExceedTheNull) {
    const DesignConfig c = fixtures::efficacy_config();
    EXPECT_THROW(build_null_family(c, ScenarioDistribution::exponential_with_rmst(19.0, 24.0),
                                   EndpointMode::kEfficacyOnly),
                 TargetUnreachable);
}

TEST(Calibrate, ScaleIsMinimumOverMemberQuantiles) {
    const DesignConfig c = fixtures::efficacy_config();
    const auto family = build_null_family(c, c.reference_efficacy(), EndpointMode::kEfficacyOnly);
    const NiCalibration cal = calibrate_s_ni(c, family, 100, RngStream(12), 1);
    double lowest = kInf;
    for (const auto& m : cal.members) {
        ASSERT_EQ(m.critical_scales.size(), 100u);
        const double q = std::clamp(lower_quantile(m.critical_scales, c.alpha), 0.0, 1.0);
        EXPECT_EQ(m.scale, q);
        lowest = std::min(lowest, q);
    }
    EXPECT_EQ(cal.scale, lowest);
    EXPECT_THROW(calibrate_s_ni(c, family, 50, RngStream(12), 1), InvalidArgument);
}

TEST(Calibrate, ZeroTargetMeansNoEarlyStopping) {
    const DesignConfig c = fixtures::efficacy_config();
    const RuleCalibration r =
        calibrate_futility_scale(c, fixtures::exponential_arm(20), 0.0, FutilityTarget::kInferiority, 200, RngStream(1), 1);
    EXPECT_EQ(r.scale, 0.0);
    EXPECT_TRUE(r.critical_scales.empty());
}

TEST(Calibrate, FutilityScaleGrowsWithTarget) {
    const DesignConfig c = fixtures::efficacy_config();
    const ArmScenario arm = fixtures::exponential_arm(20);
    double previous = 0.0;
    for (double target : {0.1, 0.3, 0.5, 0.7}) {
        const RuleCalibration r =
            calibrate_futility_scale(c, arm, target, FutilityTarget::kInferiority, 200, RngStream(21), 1);
        EXPECT_GE(r.scale, previous) << target;
        previous = r.scale;
    }
}

TEST(Calibrate, FutilityTargetIsMetOnFreshStreams) {
    DesignConfig c = fixtures::efficacy_config();
    const ArmScenario arm = fixtures::exponential_arm(20);
    const RuleCalibration r =
        calibrate_futility_scale(c, arm, 0.5, FutilityTarget::kInferiority, 400, RngStream(31), 1);
    c.b_i.scale = r.scale;
    const Proportion fresh = futility_stop_fraction(c, arm, FutilityTarget::kInferiority, 400, RngStream(32), 1);
    EXPECT_NEAR(fresh.estimate, 0.5, 4 * std::sqrt(0.25 / 400));
}

TEST(Calibrate, DeterministicAndWorkerInvariant) {
    DesignConfig c = fixtures::efficacy_config();
    c.p_inferiority = 0.3;
    const auto one = calibrate_design(c, {100, 5, 1, true});
    const auto three = calibrate_design(c, {100, 5, 3, true});
    EXPECT_EQ(calibration_to_json(one).dump(), calibration_to_json(three).dump());
    const auto other = calibrate_design(c, {100, 6, 1, true});
    EXPECT_NE(calibration_to_json(one).dump(), calibration_to_json(other).dump());
    EXPECT_EQ(one.s_i, one.inferiority->scale);
    EXPECT_FALSE(one.resimulations.empty());
}

TEST(Calibrate, JsonRoundTrip) {
    const DesignConfig c = fixtures::coprimary_config();
    const auto r = calibrate_design(c, {100, 7, 1, false});
    const auto j = calibration_to_json(r);
    EXPECT_EQ(calibration_to_json(calibration_from_json(j)).dump(), j.dump());
    const DesignConfig applied = apply_calibration(c, r);
    EXPECT_EQ(applied.b_ni.scale, r.s_ni);
    EXPECT_EQ(applied.b_i.scale, r.s_i);
    EXPECT_EQ(applied.b_t.scale, r.s_t);
}

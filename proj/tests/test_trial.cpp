#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "deint/error.hpp"
#include "deint/trial.hpp"
#include "fixtures.hpp"

using namespace deint;

namespace {

/// Delegates to the Bayesian design and checks the state handed to every
/// interim analysis.
class CheckingRule final : public InterimRule {
   public:
    CheckingRule(const BayesianDesign& design, std::vector<InterimContext>& seen) : design_(design), seen_(seen) {}

    InterimOutcome evaluate(const InterimContext& context) override {
        const DesignConfig& c = design_.config();
        int active = 0;
        int total = 0;
        double last = 0.0;
        for (const Patient& p : context.patients) {
            EXPECT_LE(p.enroll_time, context.clock);
            EXPECT_LE(p.arm, context.arm);
            ++total;
            if (p.arm == context.arm) {
                ++active;
                last = std::max(last, p.enroll_time);
            }
        }
        EXPECT_EQ(active, context.state.enrolled);
        EXPECT_GE(active, 1);
        EXPECT_LE(active, c.max_per_arm);
        EXPECT_LE(total, c.max_total);
        EXPECT_DOUBLE_EQ(context.state.since_last_enrollment, context.clock - last);
        EXPECT_DOUBLE_EQ(context.clock, context.index * c.interim_period);
        seen_.push_back(context);
        return design_.interim(context);
    }

   private:
    const BayesianDesign& design_;
    std::vector<InterimContext>& seen_;
};

bool same_record(const TrialRecord& a, const TrialRecord& b) {
    if (a.arms.size() != b.arms.size() || a.interims.size() != b.interims.size() ||
        a.patients.size() != b.patients.size() || a.duration != b.duration)
        return false;
    for (std::size_t i = 0; i < a.arms.size(); ++i)
        if (a.arms[i].verdict != b.arms[i].verdict || a.arms[i].enrolled != b.arms[i].enrolled) return false;
    for (std::size_t i = 0; i < a.patients.size(); ++i)
        if (a.patients[i].enroll_time != b.patients[i].enroll_time ||
            a.patients[i].efficacy_time != b.patients[i].efficacy_time)
            return false;
    for (std::size_t i = 0; i < a.interims.size(); ++i)
        if (a.interims[i].outcome.decision != b.interims[i].outcome.decision ||
            a.interims[i].outcome.p_non_inferior != b.interims[i].outcome.p_non_inferior)
            return false;
    return true;
}

}  // namespace

TEST(Censoring, EventVisibleOnlyOnceItHasHappened) {
    EXPECT_TRUE(censor_at(3.0, true, 2.0, 5.0).event);
    EXPECT_EQ(censor_at(3.0, true, 2.0, 5.0).time, 3.0);
    const auto c = censor_at(3.5, true, 2.0, 5.0);
    EXPECT_FALSE(c.event);
    EXPECT_EQ(c.time, 3.0);
    const auto never = censor_at(std::numeric_limits<double>::infinity(), true, 1.0, 4.0);
    EXPECT_FALSE(never.event);
    EXPECT_EQ(never.time, 3.0);
    EXPECT_FALSE(censor_at(1.0, false, 0.0, 9.0).event);
}

TEST(Engine, ImmediateEventsStopTheFirstArmForInferiority) {
    const DesignConfig c = fixtures::efficacy_config(2);
    const auto early = ScenarioDistribution::piecewise({{0, 1}, {0.01, 0}});
    const Scenario s{"early", {ArmScenario{early, std::nullopt}, fixtures::exponential_arm(22)}};
    const TrialRecord r = run_trial(c, s, RngStream(1));
    EXPECT_EQ(r.arms[0].verdict, Verdict::kInferiorStop);
    EXPECT_EQ(r.arms[1].verdict, Verdict::kNeverTested);
    EXPECT_EQ(r.arms[1].enrolled, 0);
}

TEST(Engine, NoBudgetForASecondArm) {
    DesignConfig c = fixtures::efficacy_config(2);
    c.max_total = c.max_per_arm;
    const Scenario s{"cure", {ArmScenario{ScenarioDistribution::no_event(), std::nullopt}, fixtures::exponential_arm(22)}};
    const TrialRecord r = run_trial(c, s, RngStream(2));
    EXPECT_EQ(r.arms[0].verdict, Verdict::kNonInferior);
    EXPECT_EQ(r.arms[1].verdict, Verdict::kNeverTested);
    EXPECT_EQ(r.duration, r.arms[0].decision_time);
}

TEST(Engine, NonInferiorArmHandsOverToTheNextArm) {
    const DesignConfig c = fixtures::efficacy_config(2);
    const Scenario s{"cure", {ArmScenario{ScenarioDistribution::no_event(), std::nullopt},
                              ArmScenario{ScenarioDistribution::no_event(), std::nullopt}}};
    const TrialRecord r = run_trial(c, s, RngStream(3));
    EXPECT_EQ(r.arms[0].verdict, Verdict::kNonInferior);
    EXPECT_EQ(r.arms[1].verdict, Verdict::kNonInferior);
    EXPECT_EQ(r.arms[1].start_time, r.arms[0].decision_time);
    for (const Patient& p : r.patients)
        if (p.arm == 1) EXPECT_GT(p.enroll_time, r.arms[0].decision_time);
}

TEST(Engine, SameStreamSameRecord) {
    const DesignConfig c = fixtures::efficacy_config(2);
    const Scenario s{"s", {fixtures::exponential_arm(21.5), fixtures::exponential_arm(21)}};
    const BayesianDesign design(c);
    EXPECT_TRUE(same_record(design.run(s, RngStream(9, 4)), design.run(s, RngStream(9, 4))));
    EXPECT_FALSE(same_record(design.run(s, RngStream(9, 4)), design.run(s, RngStream(9, 5))));
}

TEST(Engine, StateHandedToRulesIsConsistent) {
    const BayesianDesign design(fixtures::efficacy_config(2));
    const Scenario s{"s", {fixtures::exponential_arm(22), fixtures::exponential_arm(21)}};
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::vector<InterimContext> seen;
        CheckingRule rule(design, seen);
        const TrialRecord r = simulate_trial(design.config(), s, RngStream(seed), rule);
        EXPECT_EQ(seen.size(), r.interims.size());
    }
}

TEST(Engine, GatekeepingAndStatusTransitions) {
    DesignConfig c = fixtures::efficacy_config(3, 30);
    c.b_ni.scale = 0.3;
    const BayesianDesign design(c);
    const std::vector<Scenario> scenarios = {
        {"a", {fixtures::exponential_arm(22), fixtures::exponential_arm(21), fixtures::exponential_arm(20)}},
        {"b", {fixtures::exponential_arm(23), fixtures::exponential_arm(23.5), fixtures::exponential_arm(19)}}};
    int handovers = 0;
    for (const Scenario& s : scenarios) {
        for (std::uint64_t seed = 0; seed < 25; ++seed) {
            const TrialRecord r = design.run(s, RngStream(seed));
            for (std::size_t k = 1; k < r.arms.size(); ++k) {
                if (r.arms[k].verdict != Verdict::kNeverTested) {
                    EXPECT_EQ(r.arms[k - 1].verdict, Verdict::kNonInferior);
                    ++handovers;
                } else {
                    EXPECT_EQ(r.arms[k].enrolled, 0);
                }
            }
            int arm = 0;
            bool paused = false;
            int enrolled_at_pause = 0;
            for (const InterimRecord& ia : r.interims) {
                EXPECT_GE(ia.arm, arm);
                if (ia.arm != arm) paused = false;
                arm = ia.arm;
                if (paused) {
                    EXPECT_NE(ia.outcome.decision, Decision::kContinue);
                    EXPECT_EQ(ia.enrolled, enrolled_at_pause);
                }
                if (ia.outcome.decision == Decision::kPause) {
                    paused = true;
                    enrolled_at_pause = ia.enrolled;
                    EXPECT_EQ(ia.enrolled, c.max_per_arm);
                }
            }
            const Decision last = r.interims.back().outcome.decision;
            EXPECT_TRUE(last != Decision::kContinue && last != Decision::kPause);
            EXPECT_EQ(r.duration, r.interims.back().clock);
        }
    }
    EXPECT_GT(handovers, 0);
}

TEST(Engine, ClosesOnlyAfterFullFollowUp) {
    DesignConfig c = fixtures::efficacy_config();
    c.b_ni.scale = 0.0;
    c.b_i.scale = 0.0;
    const TrialRecord r = run_trial(c, {"s", {fixtures::exponential_arm(21)}}, RngStream(5));
    EXPECT_EQ(r.arms[0].verdict, Verdict::kNotRejected);
    double last = 0.0;
    for (const Patient& p : r.patients) last = std::max(last, p.enroll_time);
    EXPECT_GE(r.duration - last + 1e-9, c.followup);
    EXPECT_LT(r.duration - last, c.followup + c.interim_period);
    for (const InterimRecord& ia : r.interims) EXPECT_FALSE(ia.outcome.posterior_computed);
}

TEST(Engine, DeterministicAccrualSpacing) {
    DesignConfig c = fixtures::efficacy_config();
    c.accrual = AccrualMode::kDeterministic;
    c.accrual_rate = 4.0;
    c.b_ni.scale = 0.0;
    c.b_i.scale = 0.0;
    const TrialRecord r = run_trial(c, {"s", {fixtures::exponential_arm(21)}}, RngStream(6));
    ASSERT_EQ(r.patients.size(), 40u);
    for (std::size_t i = 0; i < r.patients.size(); ++i) EXPECT_DOUBLE_EQ(r.patients[i].enroll_time, i / 4.0);
    EXPECT_EQ(r.interims.front().enrolled, 5);
}

TEST(Engine, ScenarioMustMatchDesign) {
    EXPECT_THROW(run_trial(fixtures::efficacy_config(2), {"s", {fixtures::exponential_arm(21)}}, RngStream(1)),
                 InvalidArgument);
    EXPECT_THROW(run_trial(fixtures::coprimary_config(), {"s", {fixtures::exponential_arm(21)}}, RngStream(1)),
                 InvalidArgument);
}

TEST(Engine, CoprimaryTrialRecordsMarginBranch) {
    const DesignConfig c = fixtures::coprimary_config(2);
    const Scenario toxic{"toxic", {fixtures::exponential_arm(21.97, 3.0), fixtures::exponential_arm(21.97, 14.5)}};
    const TrialRecord r = run_trial(c, toxic, RngStream(8));
    EXPECT_EQ(r.arms[0].verdict, Verdict::kToxicityStop);
    EXPECT_TRUE(r.interims.back().outcome.low_margin);
    EXPECT_EQ(r.arms[1].verdict, Verdict::kNeverTested);
}

TEST(Trace, ReproducesEngineProbabilities) {
    const DesignConfig c = fixtures::efficacy_config();
    const BayesianDesign design(c);
    const ArmScenario arm = fixtures::exponential_arm(20.5);
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        const TrialRecord r = design.run({"s", {arm}}, RngStream(seed));
        const ArmTrace trace = trace_single_arm(design, arm, RngStream(seed), {});
        for (const InterimRecord& ia : r.interims) {
            ASSERT_LT(static_cast<std::size_t>(ia.index - 1), trace.points.size() + 1);
            const auto it = std::find_if(trace.points.begin(), trace.points.end(),
                                         [&](const TracePoint& p) { return p.index == ia.index; });
            ASSERT_NE(it, trace.points.end());
            EXPECT_EQ(it->enrolled, ia.enrolled);
            if (ia.outcome.posterior_computed) {
                EXPECT_EQ(it->p_non_inferior, ia.outcome.p_non_inferior);
                EXPECT_EQ(it->p_inferior, ia.outcome.p_inferior);
            }
        }
        const TraceOutcome replay = evaluate_trace(c, trace, {});
        EXPECT_EQ(replay.decision, r.interims.back().outcome.decision);
        EXPECT_EQ(replay.clock, r.duration);
    }
}

TEST(Trace, CoprimaryReplayMatchesEngine) {
    const DesignConfig c = fixtures::coprimary_config();
    const BayesianDesign design(c);
    const ArmScenario arm = fixtures::exponential_arm(20.5, 13.0);
    const TraceOptions options{1, true, true};
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const TrialRecord r = design.run({"s", {arm}}, RngStream(seed));
        const TraceOutcome replay = evaluate_trace(c, trace_single_arm(design, arm, RngStream(seed), options), options);
        EXPECT_EQ(replay.decision, r.interims.back().outcome.decision);
        EXPECT_EQ(replay.clock, r.duration);
    }
}

TEST(Trace, RequiresSingleArmDesign) {
    const BayesianDesign design(fixtures::efficacy_config(2));
    EXPECT_THROW(trace_single_arm(design, fixtures::exponential_arm(21), RngStream(1), {}), InvalidArgument);
}

TEST(Export, TrialAndPatientCsv) {
    const DesignConfig c = fixtures::coprimary_config();
    const TrialRecord r = run_trial(c, {"s", {fixtures::exponential_arm(21, 13)}}, RngStream(4));
    std::ostringstream trial;
    write_trial_csv(trial, r);
    EXPECT_EQ(trial.str().substr(0, trial.str().find('\n')), "arm,verdict,start_month,decision_month,enrolled");
    std::ostringstream patients;
    write_patients_csv(patients, r.patients, r.duration, true);
    std::istringstream in(patients.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "arm,enroll_month,pfs_months,pfs_event,ae_months,ae_event");
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, r.patients.size());
}

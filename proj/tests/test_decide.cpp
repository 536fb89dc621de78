#include <gtest/gtest.h>

#include <sstream>

#include "deint/decide.hpp"
#include "deint/error.hpp"
#include "fixtures.hpp"

using namespace deint;

namespace {

PatientData parse(const std::string& text) {
    std::istringstream in(text);
    return parse_patient_data(in);
}

std::size_t error_line(const std::string& text) {
    try {
        parse(text);
    } catch (const ParseError& e) {
        return e.line();
    }
    return 0;
}

/// 40 patients on arm 1, one a week from month 0, all with an early event.
std::string early_failures(bool with_toxicity) {
    std::ostringstream out;
    out << "arm,enroll_month,pfs_months,pfs_event" << (with_toxicity ? ",ae_months,ae_event" : "") << "\n";
    for (int i = 0; i < 40; ++i) {
        const double enroll = i * 0.25;
        out << "1," << enroll << "," << (with_toxicity ? 20.0 - enroll : 0.5) << "," << (with_toxicity ? 0 : 1);
        if (with_toxicity) out << ",0.5,1";
        out << "\n";
    }
    return out.str();
}

}  // namespace

TEST(PatientCsv, ParsesBothLayouts) {
    const PatientData d = parse("arm,enroll_month,pfs_months,pfs_event\n1,0,3.5,1\n\n2,1.5,2,0\n");
    ASSERT_EQ(d.patients.size(), 2u);
    EXPECT_FALSE(d.has_toxicity);
    EXPECT_EQ(d.patients[1].arm, 1);
    EXPECT_EQ(d.patients[1].enroll_time, 1.5);
    EXPECT_FALSE(d.patients[1].efficacy_event);
    const PatientData t = parse("arm,enroll_month,pfs_months,pfs_event,ae_months,ae_event\n1,0,3,1,2,0\n");
    EXPECT_TRUE(t.has_toxicity);
    EXPECT_EQ(t.patients[0].toxicity_time, 2.0);
}

TEST(PatientCsv, ErrorsCarryLineNumbers) {
    EXPECT_EQ(error_line("arm,enroll,pfs,event\n"), 1u);
    EXPECT_EQ(error_line("arm,enroll_month,pfs_months,pfs_event\n1,0,3,1\n1,zero,3,1\n"), 3u);
    EXPECT_EQ(error_line("arm,enroll_month,pfs_months,pfs_event\n1,0,3,2\n"), 2u);
    EXPECT_EQ(error_line("arm,enroll_month,pfs_months,pfs_event\n0,0,3,1\n"), 2u);
    EXPECT_EQ(error_line("arm,enroll_month,pfs_months,pfs_event\n1,0,-3,1\n"), 2u);
    EXPECT_EQ(error_line("arm,enroll_month,pfs_months,pfs_event\n1,0,3\n"), 2u);
}

TEST(Decide, NoPatientsMeansContinue) {
    const BayesianDesign design(fixtures::efficacy_config(2));
    const PatientData d = parse("arm,enroll_month,pfs_months,pfs_event\n1,0,3,1\n");
    const DecisionReport r = decide(design, d, {2.0, 2, 0, 0});
    EXPECT_EQ(r.arm, 1);
    EXPECT_EQ(r.enrolled, 0);
    EXPECT_EQ(r.outcome.decision, Decision::kContinue);
    EXPECT_FALSE(r.outcome.posterior_computed);
}

TEST(Decide, EarlyFailuresStopForInferiority) {
    const BayesianDesign design(fixtures::efficacy_config());
    const DecisionReport r = decide(design, parse(early_failures(false)), {12.0, std::nullopt, 1, 0});
    EXPECT_EQ(r.enrolled, 40);
    EXPECT_EQ(r.interim_index, 12);
    EXPECT_EQ(r.outcome.decision, Decision::kStopInferior);
    EXPECT_GT(r.outcome.p_inferior, 0.99);
    EXPECT_EQ(exit_status(r.outcome.decision), 4);
}

TEST(Decide, OverwhelmingToxicityTakesTheLowMarginBranch) {
    const BayesianDesign design(fixtures::coprimary_config());
    const DecisionReport r = decide(design, parse(early_failures(true)), {12.0, std::nullopt, 1, 0});
    EXPECT_EQ(r.outcome.decision, Decision::kStopToxicity);
    EXPECT_TRUE(r.outcome.low_margin);
    ASSERT_TRUE(r.margin.has_value());
    EXPECT_EQ(*r.margin, design.config().delta_low);
    EXPECT_EQ(exit_status(r.outcome.decision), 5);
    std::ostringstream text;
    write_report(text, r);
    EXPECT_NE(text.str().find("Delta_L"), std::string::npos);
    EXPECT_EQ(report_to_json(r).at("decision"), "stop-toxicity");
}

TEST(Decide, DataIsCensoredAtTheRequestedTime) {
    const BayesianDesign design(fixtures::efficacy_config());
    const PatientData d = parse(early_failures(false));
    const DecisionReport early = decide(design, d, {2.0, std::nullopt, 1, 0});
    EXPECT_EQ(early.enrolled, 9);
    EXPECT_DOUBLE_EQ(early.since_last_enrollment, 0.0);
}

TEST(Decide, RejectsInconsistentRequests) {
    const BayesianDesign efficacy(fixtures::efficacy_config());
    const BayesianDesign coprimary(fixtures::coprimary_config());
    const PatientData d = parse(early_failures(false));
    EXPECT_THROW(decide(efficacy, d, {-1.0, std::nullopt, 0, 0}), InvalidArgument);
    EXPECT_THROW(decide(efficacy, d, {5.0, 2, 0, 0}), InvalidArgument);
    EXPECT_THROW(decide(coprimary, d, {5.0, std::nullopt, 0, 0}), InvalidArgument);
    EXPECT_THROW(decide(efficacy, parse("arm,enroll_month,pfs_months,pfs_event\n3,0,3,1\n"), {5.0, std::nullopt, 0, 0}),
                 InvalidArgument);
    EXPECT_THROW(decide(efficacy, parse("arm,enroll_month,pfs_months,pfs_event\n1,4,3,1\n"), {2.0, std::nullopt, 0, 0}),
                 InvalidArgument);
}

TEST(Decide, ReplaysSimulatedTrials) {
    const DesignConfig c = fixtures::coprimary_config(2);
    const BayesianDesign design(c);
    const Scenario s{"s", {fixtures::exponential_arm(22.5, 14.0), fixtures::exponential_arm(21.0, 13.0)}};
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const TrialRecord r = design.run(s, RngStream(seed, 9));
        std::stringstream csv;
        write_patients_csv(csv, r.patients, r.duration, true);
        const PatientData data = parse_patient_data(csv);
        for (const InterimRecord& ia : r.interims) {
            const DecisionReport rep = decide(design, data, {ia.clock, ia.arm + 1, seed, 9});
            EXPECT_EQ(rep.enrolled, ia.enrolled);
            EXPECT_EQ(rep.outcome.decision, ia.outcome.decision) << "seed " << seed << " month " << ia.clock;
            if (ia.outcome.posterior_computed) EXPECT_EQ(rep.outcome.p_non_inferior, ia.outcome.p_non_inferior);
        }
    }
}

TEST(ExitStatus, Mapping) {
    EXPECT_EQ(exit_status(Decision::kContinue), 0);
    EXPECT_EQ(exit_status(Decision::kPause), 0);
    EXPECT_EQ(exit_status(Decision::kDeclareNonInferior), 3);
    EXPECT_EQ(exit_status(Decision::kStopInferior), 4);
    EXPECT_EQ(exit_status(Decision::kStopToxicity), 5);
    EXPECT_EQ(exit_status(Decision::kCloseNotRejected), 6);
}

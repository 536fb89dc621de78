#pragma once

#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "deint/beta_stacy.hpp"
#include "deint/design.hpp"
#include "deint/random.hpp"

namespace deint {

/// True outcome laws of one arm in a simulation scenario.
struct ArmScenario {
    ScenarioDistribution efficacy;
    std::optional<ScenarioDistribution> toxicity;
};

struct Scenario {
    std::string label;
    std::vector<ArmScenario> arms;
};

/// One enrolled patient. Outcome times are measured from enrollment; an
/// event flag of false means the time is a censoring time. Simulated
/// patients carry their latent times (event = true, or +infinity when the
/// law never produces the event).
struct Patient {
    int arm = 0;  ///< 0-based
    double enroll_time = 0.0;
    double efficacy_time = std::numeric_limits<double>::infinity();
    bool efficacy_event = true;
    double toxicity_time = std::numeric_limits<double>::infinity();
    bool toxicity_event = true;
};

/// The view of an outcome at analysis time `clock`.
CensoredObservation censor_at(double time, bool event, double enroll_time, double clock);

enum class Verdict { kNeverTested, kNonInferior, kInferiorStop, kToxicityStop, kNotRejected };

std::string_view to_string(Verdict v);

struct ArmOutcome {
    Verdict verdict = Verdict::kNeverTested;
    double start_time = std::numeric_limits<double>::quiet_NaN();
    double decision_time = std::numeric_limits<double>::quiet_NaN();
    int enrolled = 0;
};

/// What an interim rule reports back to the state machine.
struct InterimOutcome {
    Decision decision = Decision::kContinue;
    bool low_margin = false;
    bool posterior_computed = false;
    double p_non_inferior = std::numeric_limits<double>::quiet_NaN();
    double p_inferior = std::numeric_limits<double>::quiet_NaN();
    double p_toxic = std::numeric_limits<double>::quiet_NaN();
};

struct InterimRecord {
    int index = 0;  ///< interim number t; the clock is t * interim_period
    double clock = 0.0;
    int arm = 0;
    int enrolled = 0;
    InterimOutcome outcome;
};

struct TrialRecord {
    std::vector<ArmOutcome> arms;
    double duration = 0.0;
    int total_enrolled = 0;
    std::vector<InterimRecord> interims;
    std::vector<Patient> patients;
    std::uint64_t stream_seed = 0;
    std::uint64_t stream_id = 0;
};

/// Everything an interim rule may look at.
struct InterimContext {
    int index = 0;
    double clock = 0.0;
    int arm = 0;
    ArmInterimState state;
    std::span<const Patient> patients;
    const RngStream* trial_stream = nullptr;
};

/// Decision logic plugged into the shared trial state machine.
class InterimRule {
   public:
    virtual ~InterimRule() = default;
    virtual InterimOutcome evaluate(const InterimContext& context) = 0;
};

/// Shared plumbing: accrual, outcome sampling, monthly interims, pause,
/// follow-up close-out and arm advancement. Decisions come from `rule`.
TrialRecord simulate_trial(const DesignConfig& config, const Scenario& scenario, const RngStream& stream,
                           InterimRule& rule);

/// Posterior machinery of the Bayesian design: grid and priors built once
/// and shared read-only by every trial.
class BayesianDesign {
   public:
    explicit BayesianDesign(DesignConfig config);

    const DesignConfig& config() const { return config_; }
    const BetaStacyModel& efficacy_prior() const { return efficacy_prior_; }
    const BetaStacyModel& toxicity_prior() const { return toxicity_prior_; }

    /// True when some rule can fire at `enrolled` patients.
    bool any_rule_live(int enrolled) const;

    /// Posterior probabilities and decision for the active arm. With
    /// `force_posterior` the probabilities are computed even when no rule
    /// can fire; the draws are identical either way.
    InterimOutcome interim(const InterimContext& context, bool force_posterior = false) const;

    /// Posterior RMST draws of the efficacy (or toxicity) summary of `arm`
    /// at `clock`, using the interim's stream.
    std::vector<double> posterior_draws(std::span<const Patient> patients, int arm, double clock, int index,
                                        bool toxicity, const RngStream& trial_stream) const;

    TrialRecord run(const Scenario& scenario, const RngStream& stream) const;

   private:
    DesignConfig config_;
    std::shared_ptr<const TimeGrid> grid_;
    BetaStacyModel efficacy_prior_;
    BetaStacyModel toxicity_prior_;
};

/// run_trial: one simulated trial of the Bayesian design.
TrialRecord run_trial(const DesignConfig& config, const Scenario& scenario, const RngStream& stream);

/// Per-interim posterior summaries of a single-arm trial followed to
/// closure with no early stopping. Any single-arm design whose rules are
/// inactive below `first_enrollment` can be replayed on the trace.
struct TracePoint {
    int index = 0;
    double clock = 0.0;
    int enrolled = 0;
    double since_last_enrollment = 0.0;
    bool computed = false;
    double p_non_inferior = 0.0;        ///< P(theta > theta0 - Delta)
    double p_inferior = 0.0;            ///< P(theta <= theta0 - Delta_1)
    double p_joint = 0.0;               ///< P(theta > theta0 - Delta, beta > beta0)
    double p_toxic = 0.0;               ///< P(beta <= beta0 + Delta_beta)
    double p_inferior_delta = 0.0;      ///< P(theta <= theta0 - Delta)
    double p_inferior_delta_low = 0.0;  ///< P(theta <= theta0 - Delta_L)
};

struct ArmTrace {
    std::vector<TracePoint> points;
};

struct TraceOptions {
    int first_enrollment = 1;
    bool efficacy = true;
    bool toxicity = false;
};

ArmTrace trace_single_arm(const BayesianDesign& design, const ArmScenario& arm, const RngStream& stream,
                          const TraceOptions& options);

struct TraceOutcome {
    Decision decision = Decision::kContinue;
    double clock = 0.0;
    std::size_t point = 0;
};

/// Replays the single-arm decision rules of `config` on a trace.
TraceOutcome evaluate_trace(const DesignConfig& config, const ArmTrace& trace, const TraceOptions& options);

/// `arm,verdict,start_month,decision_month,enrolled`, one row per arm.
void write_trial_csv(std::ostream& out, const TrialRecord& record);

/// Patient data censored at `clock`, in the patient-data CSV layout.
void write_patients_csv(std::ostream& out, std::span<const Patient> patients, double clock, bool with_toxicity);

}  // namespace deint

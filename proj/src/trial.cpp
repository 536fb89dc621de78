#include "deint/trial.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "deint/error.hpp"
#include "deint/text.hpp"

namespace deint {

namespace {

constexpr int kMaxInterims = 100000;

bool rule_live(const BoundarySpec& b, int enrolled) { return b.scale > 0.0 && b.can_fire(enrolled); }

double fraction_above(std::span<const double> draws, double threshold) {
    return draw_fraction(draws, {RmstEvent::Side::kAbove, threshold});
}

double fraction_at_most(std::span<const double> draws, double threshold) {
    return draw_fraction(draws, {RmstEvent::Side::kAtMost, threshold});
}

double fraction_joint(std::span<const double> theta, double theta_cut, std::span<const double> beta,
                      double beta_cut) {
    std::size_t hits = 0;
    for (std::size_t r = 0; r < theta.size(); ++r) hits += (theta[r] > theta_cut && beta[r] > beta_cut) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(theta.size());
}

void check_scenario(const DesignConfig& config, const Scenario& scenario) {
    if (static_cast<int>(scenario.arms.size()) != config.arms)
        throw InvalidArgument("scenario '" + scenario.label + "' has " + std::to_string(scenario.arms.size()) +
                              " arms but the design has " + std::to_string(config.arms));
    if (config.mode == EndpointMode::kCoPrimary)
        for (const auto& arm : scenario.arms)
            if (!arm.toxicity) throw InvalidArgument("co-primary designs need a toxicity law for every arm");
}

}  // namespace

CensoredObservation censor_at(double time, bool event, double enroll_time, double clock) {
    const double follow = clock - enroll_time;
    if (event && time <= follow) return {time, true};
    return {std::min(time, follow), false};
}

std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::kNeverTested: return "never-tested";
        case Verdict::kNonInferior: return "non-inferior";
        case Verdict::kInferiorStop: return "inferior-stop";
        case Verdict::kToxicityStop: return "toxicity-stop";
        case Verdict::kNotRejected: return "not-rejected-at-followup";
    }
    return "unknown";
}

TrialRecord simulate_trial(const DesignConfig& config, const Scenario& scenario, const RngStream& stream,
                           InterimRule& rule) {
    check_scenario(config, scenario);
    const int arms = config.arms;

    TrialRecord record;
    record.arms.resize(static_cast<std::size_t>(arms));
    record.stream_seed = stream.seed();
    record.stream_id = stream.id();

    RngStream accrual = stream.child(stream_tag::kAccrual);
    std::vector<RngStream> efficacy_streams;
    std::vector<RngStream> toxicity_streams;
    for (int a = 0; a < arms; ++a) {
        efficacy_streams.push_back(stream.child(stream_tag::kEfficacyOutcome, static_cast<std::uint64_t>(a)));
        toxicity_streams.push_back(stream.child(stream_tag::kToxicityOutcome, static_cast<std::uint64_t>(a)));
    }

    std::uint64_t arrivals = 0;
    double next_arrival = 0.0;
    auto advance_arrival = [&] {
        ++arrivals;
        if (config.accrual == AccrualMode::kPoisson)
            next_arrival += exponential(accrual, config.accrual_rate);
        else
            next_arrival = static_cast<double>(arrivals) / config.accrual_rate;
    };

    std::vector<int> enrolled(static_cast<std::size_t>(arms), 0);
    std::vector<double> last_enrollment(static_cast<std::size_t>(arms), 0.0);
    int total = 0;
    int active = 0;
    record.arms[0].start_time = 0.0;

    auto finish = [&](double clock) {
        record.duration = clock;
        record.total_enrolled = total;
        for (int a = 0; a < arms; ++a) record.arms[static_cast<std::size_t>(a)].enrolled = enrolled[a];
    };

    for (int t = 1; t <= kMaxInterims; ++t) {
        const double clock = t * config.interim_period;
        while (next_arrival <= clock) {
            if (enrolled[active] < config.max_per_arm && total < config.max_total) {
                const ArmScenario& law = scenario.arms[static_cast<std::size_t>(active)];
                Patient p;
                p.arm = active;
                p.enroll_time = next_arrival;
                p.efficacy_time = sample_event_time(law.efficacy, efficacy_streams[active]);
                if (law.toxicity) p.toxicity_time = sample_event_time(*law.toxicity, toxicity_streams[active]);
                record.patients.push_back(p);
                ++enrolled[active];
                ++total;
                last_enrollment[active] = next_arrival;
            }
            advance_arrival();
        }
        if (enrolled[active] == 0) continue;

        InterimContext context;
        context.index = t;
        context.clock = clock;
        context.arm = active;
        context.state = {enrolled[active], clock - last_enrollment[active]};
        context.patients = record.patients;
        context.trial_stream = &stream;
        const InterimOutcome outcome = rule.evaluate(context);
        record.interims.push_back({t, clock, active, enrolled[active], outcome});

        ArmOutcome& arm = record.arms[static_cast<std::size_t>(active)];
        switch (outcome.decision) {
            case Decision::kContinue:
            case Decision::kPause:
                break;
            case Decision::kDeclareNonInferior:
                arm.verdict = Verdict::kNonInferior;
                arm.decision_time = clock;
                if (active + 1 < arms && total <= config.max_total - config.max_per_arm) {
                    ++active;
                    record.arms[static_cast<std::size_t>(active)].start_time = clock;
                    break;
                }
                finish(clock);
                return record;
            case Decision::kStopInferior:
            case Decision::kStopToxicity:
            case Decision::kCloseNotRejected:
                arm.verdict = outcome.decision == Decision::kStopInferior   ? Verdict::kInferiorStop
                              : outcome.decision == Decision::kStopToxicity ? Verdict::kToxicityStop
                                                                            : Verdict::kNotRejected;
                arm.decision_time = clock;
                finish(clock);
                return record;
        }
    }
    throw Error("trial did not terminate within " + std::to_string(kMaxInterims) + " interim analyses");
}

BayesianDesign::BayesianDesign(DesignConfig config)
    : config_((validate(config), std::move(config))),
      grid_(std::make_shared<const TimeGrid>(TimeGrid::uniform(config_.grid_step, config_.grid_horizon))),
      efficacy_prior_(make_prior(grid_, config_.efficacy_prior.center, config_.efficacy_prior.weight)),
      toxicity_prior_(make_prior(grid_, config_.toxicity_prior.center, config_.toxicity_prior.weight)) {}

bool BayesianDesign::any_rule_live(int enrolled) const {
    if (rule_live(config_.b_ni, enrolled) || rule_live(config_.b_i, enrolled)) return true;
    return config_.mode == EndpointMode::kCoPrimary && rule_live(config_.b_t, enrolled);
}

std::vector<double> BayesianDesign::posterior_draws(std::span<const Patient> patients, int arm, double clock,
                                                    int index, bool toxicity, const RngStream& trial_stream) const {
    const BetaStacyModel& prior = toxicity ? toxicity_prior_ : efficacy_prior_;
    auto model_for = [&](int a) {
        BetaStacyModel model = prior;
        for (const Patient& p : patients) {
            if (p.arm != a || p.enroll_time > clock) continue;
            model.add(toxicity ? censor_at(p.toxicity_time, p.toxicity_event, p.enroll_time, clock)
                               : censor_at(p.efficacy_time, p.efficacy_event, p.enroll_time, clock));
        }
        return model;
    };

    RngStream endpoint = trial_stream.child(stream_tag::kPosterior, static_cast<std::uint64_t>(index))
                             .child(toxicity ? stream_tag::kToxicityOutcome : stream_tag::kEfficacyOutcome);
    const auto draws = static_cast<std::size_t>(config_.posterior_draws);
    const bool monotone = (toxicity ? config_.monotone_toxicity : config_.monotone_efficacy) && config_.arms >= 2;
    if (!monotone) {
        RngStream s = endpoint.child(static_cast<std::uint64_t>(arm));
        return sample_rmst(model_for(arm), config_.horizon, draws, s);
    }

    std::vector<BetaStacyModel> models;
    models.reserve(static_cast<std::size_t>(config_.arms));
    for (int a = 0; a < config_.arms; ++a) models.push_back(model_for(a));
    std::vector<const BetaStacyModel*> pointers;
    for (const auto& m : models) pointers.push_back(&m);
    auto joint = joint_monotone_sample(pointers,
                                       toxicity ? OrderConstraint::kNonDecreasing : OrderConstraint::kNonIncreasing,
                                       config_.horizon, draws, endpoint);
    return std::move(joint.rmst[static_cast<std::size_t>(arm)]);
}

InterimOutcome BayesianDesign::interim(const InterimContext& context, bool force_posterior) const {
    const DesignConfig& c = config_;
    InterimOutcome out;
    const bool compute = force_posterior || any_rule_live(context.state.enrolled);
    const double ni_cut = c.theta0 - c.delta;

    if (c.mode == EndpointMode::kEfficacyOnly) {
        EfficacyProbabilities p;
        if (compute) {
            const auto theta = posterior_draws(context.patients, context.arm, context.clock, context.index, false,
                                               *context.trial_stream);
            p.non_inferior = fraction_above(theta, ni_cut);
            p.inferior = fraction_at_most(theta, c.theta0 - c.arm_margin(context.arm));
            out.posterior_computed = true;
            out.p_non_inferior = p.non_inferior;
            out.p_inferior = p.inferior;
        }
        out.decision = efficacy_interim_decision(c, context.arm, context.state, p);
        return out;
    }

    CoprimaryProbabilities p;
    if (compute) {
        const auto theta =
            posterior_draws(context.patients, context.arm, context.clock, context.index, false, *context.trial_stream);
        const auto beta =
            posterior_draws(context.patients, context.arm, context.clock, context.index, true, *context.trial_stream);
        p.joint_non_inferior = fraction_joint(theta, ni_cut, beta, c.beta0);
        p.toxic = fraction_at_most(beta, c.beta0 + c.delta_beta);
        p.inferior_at_delta = fraction_at_most(theta, ni_cut);
        p.inferior_at_delta_low = fraction_at_most(theta, c.theta0 - c.delta_low);
        out.posterior_computed = true;
    }
    const CoprimaryDecision d = coprimary_interim_decision(c, context.state, p);
    out.decision = d.decision;
    out.low_margin = d.low_margin;
    if (compute) {
        out.p_non_inferior = p.joint_non_inferior;
        out.p_toxic = p.toxic;
        out.p_inferior = d.low_margin ? p.inferior_at_delta_low : p.inferior_at_delta;
    }
    return out;
}

namespace {

class BayesianRule final : public InterimRule {
   public:
    explicit BayesianRule(const BayesianDesign& design) : design_(design) {}
    InterimOutcome evaluate(const InterimContext& context) override { return design_.interim(context); }

   private:
    const BayesianDesign& design_;
};

}  // namespace

TrialRecord BayesianDesign::run(const Scenario& scenario, const RngStream& stream) const {
    BayesianRule rule(*this);
    return simulate_trial(config_, scenario, stream, rule);
}

TrialRecord run_trial(const DesignConfig& config, const Scenario& scenario, const RngStream& stream) {
    return BayesianDesign(config).run(scenario, stream);
}

namespace {

class TraceRule final : public InterimRule {
   public:
    TraceRule(const BayesianDesign& design, const TraceOptions& options, ArmTrace& trace)
        : design_(design), options_(options), trace_(trace) {}

    InterimOutcome evaluate(const InterimContext& context) override {
        const DesignConfig& c = design_.config();
        TracePoint point;
        point.index = context.index;
        point.clock = context.clock;
        point.enrolled = context.state.enrolled;
        point.since_last_enrollment = context.state.since_last_enrollment;
        if (context.state.enrolled >= options_.first_enrollment) {
            point.computed = true;
            const double ni_cut = c.theta0 - c.delta;
            std::vector<double> theta;
            std::vector<double> beta;
            if (options_.efficacy) {
                theta = design_.posterior_draws(context.patients, 0, context.clock, context.index, false,
                                                *context.trial_stream);
                point.p_non_inferior = fraction_above(theta, ni_cut);
                point.p_inferior = fraction_at_most(theta, c.theta0 - c.arm_margin(0));
                point.p_inferior_delta = fraction_at_most(theta, ni_cut);
                point.p_inferior_delta_low = fraction_at_most(theta, c.theta0 - c.delta_low);
            }
            if (options_.toxicity) {
                beta = design_.posterior_draws(context.patients, 0, context.clock, context.index, true,
                                               *context.trial_stream);
                point.p_toxic = fraction_at_most(beta, c.beta0 + c.delta_beta);
            }
            if (options_.efficacy && options_.toxicity) point.p_joint = fraction_joint(theta, ni_cut, beta, c.beta0);
        }
        trace_.points.push_back(point);
        InterimOutcome out;
        out.decision = enrollment_decision(c, context.state);
        return out;
    }

   private:
    const BayesianDesign& design_;
    const TraceOptions& options_;
    ArmTrace& trace_;
};

}  // namespace

ArmTrace trace_single_arm(const BayesianDesign& design, const ArmScenario& arm, const RngStream& stream,
                          const TraceOptions& options) {
    if (design.config().arms != 1) throw InvalidArgument("traces are recorded for single-arm designs");
    if (options.toxicity && design.config().mode != EndpointMode::kCoPrimary)
        throw InvalidArgument("toxicity traces need a co-primary design");
    ArmTrace trace;
    TraceRule rule(design, options, trace);
    simulate_trial(design.config(), Scenario{"trace", {arm}}, stream, rule);
    return trace;
}

TraceOutcome evaluate_trace(const DesignConfig& config, const ArmTrace& trace, const TraceOptions& options) {
    const bool coprimary = config.mode == EndpointMode::kCoPrimary;
    auto live = [&](int n) {
        return rule_live(config.b_ni, n) || rule_live(config.b_i, n) || (coprimary && rule_live(config.b_t, n));
    };
    if (coprimary && !(options.efficacy && options.toxicity))
        throw InvalidArgument("co-primary rules need efficacy and toxicity traces");
    for (std::size_t i = 0; i < trace.points.size(); ++i) {
        const TracePoint& pt = trace.points[i];
        if (!pt.computed && live(pt.enrolled))
            throw InvalidArgument("trace has no posterior summaries at an interim where the design can stop");
        const ArmInterimState state{pt.enrolled, pt.since_last_enrollment};
        Decision d;
        if (coprimary) {
            d = coprimary_interim_decision(
                    config, state, {pt.p_joint, pt.p_toxic, pt.p_inferior_delta, pt.p_inferior_delta_low})
                    .decision;
        } else {
            if (!options.efficacy) throw InvalidArgument("efficacy rules need efficacy traces");
            d = efficacy_interim_decision(config, 0, state, {pt.p_non_inferior, pt.p_inferior});
        }
        if (d != Decision::kContinue && d != Decision::kPause) return {d, pt.clock, i};
    }
    throw InvalidArgument("trace ends before the trial closes");
}

void write_trial_csv(std::ostream& out, const TrialRecord& record) {
    out << "arm,verdict,start_month,decision_month,enrolled\n";
    for (std::size_t a = 0; a < record.arms.size(); ++a) {
        const ArmOutcome& arm = record.arms[a];
        out << a + 1 << ',' << to_string(arm.verdict) << ',' << format_number(arm.start_time) << ','
            << format_number(arm.decision_time) << ',' << arm.enrolled << '\n';
    }
}

void write_patients_csv(std::ostream& out, std::span<const Patient> patients, double clock, bool with_toxicity) {
    out << "arm,enroll_month,pfs_months,pfs_event";
    if (with_toxicity) out << ",ae_months,ae_event";
    out << '\n';
    for (const Patient& p : patients) {
        if (p.enroll_time > clock) continue;
        const auto pfs = censor_at(p.efficacy_time, p.efficacy_event, p.enroll_time, clock);
        out << p.arm + 1 << ',' << format_number(p.enroll_time) << ',' << format_number(pfs.time) << ','
            << (pfs.event ? 1 : 0);
        if (with_toxicity) {
            const auto ae = censor_at(p.toxicity_time, p.toxicity_event, p.enroll_time, clock);
            out << ',' << format_number(ae.time) << ',' << (ae.event ? 1 : 0);
        }
        out << '\n';
    }
}

}  // namespace deint

#include "deint/comparators.hpp"

#include <cmath>
#include <limits>

#include <boost/math/distributions/normal.hpp>

#include "deint/error.hpp"

namespace deint {

namespace {

const boost::math::normal kStandardNormal;

double upper_quantile(double tail) { return boost::math::quantile(boost::math::complement(kStandardNormal, tail)); }

}  // namespace

double cumulative_spend(const SpendingFunction& sf, double s) {
    if (!(s > 0.0 && s <= 1.0)) throw InvalidArgument("information fraction must lie in (0, 1]");
    switch (sf.kind) {
        case SpendingKind::kOBrienFleming:
            return 2.0 * boost::math::cdf(boost::math::complement(kStandardNormal, upper_quantile(sf.alpha / 2.0) /
                                                                                        std::sqrt(s)));
        case SpendingKind::kPocock:
            return sf.alpha * std::log1p((std::exp(1.0) - 1.0) * s);
        case SpendingKind::kLinear:
            return sf.alpha * s;
    }
    return 0.0;
}

RciResult rci_interim(std::span<const CensoredObservation> sample, const RciDesignConfig& cfg, double alpha_t,
                      double futility_alpha_t, RngStream& rng) {
    RciResult out;
    out.lower = -std::numeric_limits<double>::infinity();
    out.upper = std::numeric_limits<double>::infinity();
    bool any_event = false;
    for (const auto& obs : sample) any_event = any_event || obs.event;
    if (sample.size() < 2 || !any_event) {
        out.degenerate = true;
        return out;
    }
    out.theta_hat = km_rmst(kaplan_meier(sample), cfg.horizon);
    out.se = bootstrap_rmst_se(sample, cfg.horizon, cfg.bootstrap_resamples, rng);
    if (!(out.se > 0.0)) {
        out.degenerate = true;
        return out;
    }
    out.p_value = boost::math::cdf(kStandardNormal, (out.theta_hat - cfg.theta0) / out.se);

    bool futile = false;
    switch (cfg.futility) {
        case FutilityRule::kNone:
            break;
        case FutilityRule::kPValue0025:
            futile = out.p_value <= 0.0025;
            break;
        case FutilityRule::kPValue05:
            futile = out.p_value <= 0.05;
            break;
        case FutilityRule::kRci:
            if (futility_alpha_t > kNegligibleSpend) {
                out.upper = out.theta_hat + upper_quantile(futility_alpha_t) * out.se;
                futile = out.upper < cfg.theta0;
            }
            break;
    }
    if (alpha_t > kNegligibleSpend) out.lower = out.theta_hat - upper_quantile(alpha_t) * out.se;
    if (futile)
        out.decision = Decision::kStopInferior;
    else if (out.lower > cfg.theta0 - cfg.delta)
        out.decision = Decision::kDeclareNonInferior;
    return out;
}

namespace {

class RciRule final : public InterimRule {
   public:
    RciRule(const DesignConfig& config, const RciDesignConfig& rci)
        : config_(config), rci_(rci), last_fraction_(static_cast<std::size_t>(config.arms), 0.0) {}

    InterimOutcome evaluate(const InterimContext& context) override {
        InterimOutcome out;
        out.decision = enrollment_decision(config_, context.state);
        if (context.state.enrolled < rci_.min_enrollment) return out;

        std::vector<CensoredObservation> sample;
        for (const Patient& p : context.patients)
            if (p.arm == context.arm && p.enroll_time <= context.clock)
                sample.push_back(censor_at(p.efficacy_time, p.efficacy_event, p.enroll_time, context.clock));

        const double fraction = static_cast<double>(context.state.enrolled) / config_.max_per_arm;
        double& previous = last_fraction_[static_cast<std::size_t>(context.arm)];
        auto increment = [&](const SpendingFunction& sf) {
            return cumulative_spend(sf, fraction) - (previous > 0.0 ? cumulative_spend(sf, previous) : 0.0);
        };
        const double alpha_t = increment(rci_.ni_spending);
        const double futility_alpha_t = increment(rci_.futility_spending);
        previous = fraction;

        RngStream rng = context.trial_stream->child(stream_tag::kBootstrap, static_cast<std::uint64_t>(context.index))
                            .child(static_cast<std::uint64_t>(context.arm));
        const RciResult r = rci_interim(sample, rci_, alpha_t, futility_alpha_t, rng);
        out.posterior_computed = !r.degenerate;
        out.p_inferior = r.p_value;
        if (r.decision != Decision::kContinue) out.decision = r.decision;
        return out;
    }

   private:
    const DesignConfig& config_;
    const RciDesignConfig& rci_;
    std::vector<double> last_fraction_;
};

}  // namespace

TrialRecord run_comparator_trial(const DesignConfig& config, const RciDesignConfig& rci, const Scenario& scenario,
                                 const RngStream& stream) {
    rci.validate();
    RciRule rule(config, rci);
    return simulate_trial(config, scenario, stream, rule);
}

}  // namespace deint

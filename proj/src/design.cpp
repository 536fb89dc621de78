#include "deint/design.hpp"

#include <cmath>

#include "deint/error.hpp"

namespace deint {

namespace {

constexpr double kClockTolerance = 1e-9;

void check_boundary(std::vector<ConfigIssue>& out, const std::string& field, const BoundarySpec& b, int m_max) {
    try {
        b.validate(field);
    } catch (const InvalidArgument& e) {
        out.push_back({field, e.what()});
    }
    if (b.max_enrollment != m_max) out.push_back({field, field + ": per-arm cap differs from max_per_arm"});
}

void check_state(const DesignConfig& config, const ArmInterimState& state) {
    if (state.enrolled < 1 || state.enrolled > config.max_per_arm)
        throw InvalidArgument("inconsistent interim state: " + std::to_string(state.enrolled) +
                              " enrollments with a per-arm cap of " + std::to_string(config.max_per_arm));
    if (!(state.since_last_enrollment >= 0.0))
        throw InvalidArgument("inconsistent interim state: negative time since last enrollment");
}

}  // namespace

void RciDesignConfig::validate() const {
    if (min_enrollment < 2) throw InvalidArgument("comparator.min_enrollment must be >= 2");
    if (!(ni_spending.alpha > 0.0 && ni_spending.alpha < 1.0))
        throw InvalidArgument("comparator.ni_spending: alpha must lie in (0, 1)");
    if (!(futility_spending.alpha > 0.0 && futility_spending.alpha < 1.0))
        throw InvalidArgument("comparator.futility_spending: alpha must lie in (0, 1)");
    if (!(horizon > 0.0)) throw InvalidArgument("comparator.horizon must be > 0");
    if (!(delta > 0.0)) throw InvalidArgument("comparator.delta must be > 0");
    if (bootstrap_resamples < 2) throw InvalidArgument("comparator.bootstrap_resamples must be >= 2");
}

double DesignConfig::arm_margin(int arm) const {
    if (arm_margins.empty()) return delta;
    return arm_margins.at(static_cast<std::size_t>(arm));
}

BoundarySpec DesignConfig::toxicity_margin_boundary() const {
    if (margin_boundary) return *margin_boundary;
    BoundarySpec b = b_t;
    b.scale = 0.5 * (1.0 + b_t.scale);
    return b;
}

ScenarioDistribution DesignConfig::reference_efficacy() const {
    return soc_efficacy ? *soc_efficacy : ScenarioDistribution::exponential_with_rmst(theta0, horizon);
}

ScenarioDistribution DesignConfig::reference_toxicity() const {
    return soc_toxicity ? *soc_toxicity : ScenarioDistribution::exponential_with_rmst(beta0, horizon);
}

DesignConfig DesignConfig::with_max_per_arm(int m_max) const {
    DesignConfig out = *this;
    out.max_per_arm = m_max;
    out.max_total = std::max(max_total - max_per_arm + m_max, m_max);
    for (BoundarySpec* b : {&out.b_ni, &out.b_i, &out.b_t}) {
        b->max_enrollment = m_max;
        b->activation = std::min(b->activation, m_max);
    }
    if (out.margin_boundary) {
        out.margin_boundary->max_enrollment = m_max;
        out.margin_boundary->activation = std::min(out.margin_boundary->activation, m_max);
    }
    return out;
}

DesignConfig DesignConfig::single_arm() const {
    DesignConfig out = *this;
    out.arms = 1;
    out.max_total = max_per_arm;
    if (!arm_margins.empty()) out.arm_margins = {arm_margins.front()};
    return out;
}

std::vector<ConfigIssue> check(const DesignConfig& c) {
    std::vector<ConfigIssue> out;
    auto fail = [&](const std::string& field, const std::string& message) { out.push_back({field, message}); };
    const bool coprimary = c.mode == EndpointMode::kCoPrimary;

    if (c.arms < 1) fail("arms", "arms must be >= 1");
    if (!(c.horizon > 0.0)) fail("horizon", "horizon must be > 0");
    if (!(c.delta > 0.0)) fail("delta", "delta must be > 0");
    if (!(c.theta0 > c.delta && c.theta0 <= c.horizon))
        fail("theta0", "theta0 must exceed delta and not exceed the RMST horizon");
    if (!c.arm_margins.empty()) {
        if (static_cast<int>(c.arm_margins.size()) != c.arms)
            fail("arm_margins", "arm_margins must list one margin per arm");
        for (double d : c.arm_margins)
            if (!(d > 0.0 && d <= c.delta)) fail("arm_margins", "per-arm margins must satisfy delta >= delta_k > 0");
    }
    if (coprimary) {
        if (!(c.delta_low >= 0.0 && c.delta_low <= c.delta))
            fail("delta_low", "adaptive-margin constraint violated: need delta >= delta_low >= 0");
        if (!(c.delta_beta >= 0.0)) fail("delta_beta", "delta_beta must be >= 0");
        if (!(c.beta0 > 0.0 && c.beta0 + c.delta_beta < c.horizon))
            fail("beta0", "beta0 must be > 0 and beta0 + delta_beta below the RMST horizon");
    }

    if (c.max_per_arm < 1) fail("max_per_arm", "max_per_arm must be >= 1");
    if (c.max_total < c.max_per_arm) fail("max_total", "max_total must be >= max_per_arm");
    check_boundary(out, "b_ni", c.b_ni, c.max_per_arm);
    check_boundary(out, "b_i", c.b_i, c.max_per_arm);
    if (coprimary) {
        check_boundary(out, "b_t", c.b_t, c.max_per_arm);
        const BoundarySpec margin = c.toxicity_margin_boundary();
        check_boundary(out, "B_t", margin, c.max_per_arm);
        if (out.empty()) {
            for (int l = 1; l <= c.max_per_arm; ++l) {
                if (!c.b_t.can_fire(l)) continue;
                const double bt = boundary_value(c.b_t, l);
                const double mt = boundary_value(margin, l);
                if (!(mt < bt)) {
                    fail("B_t", "B_t must lie strictly below b_t wherever b_t is active; violated at " +
                                    std::to_string(l) + " enrollments (B_t = " + std::to_string(mt) +
                                    ", b_t = " + std::to_string(bt) + ")");
                    break;
                }
            }
        }
    }

    if (!(c.followup > 0.0)) fail("followup", "followup must be > 0");
    if (!(c.accrual_rate > 0.0)) fail("accrual_rate", "accrual_rate must be > 0");
    if (!(c.interim_period > 0.0)) fail("interim_period", "interim_period must be > 0");
    if (!(c.alpha > 0.0 && c.alpha < 1.0)) fail("alpha", "alpha must lie in (0, 1)");
    if (!(c.efficacy_prior.weight > 0.0)) fail("efficacy_prior", "prior weight must be > 0");
    if (coprimary && !(c.toxicity_prior.weight > 0.0)) fail("toxicity_prior", "prior weight must be > 0");
    if (!(c.grid_step > 0.0)) fail("grid_step", "grid_step must be > 0");
    if (!(c.grid_horizon >= c.horizon)) fail("grid_horizon", "grid_horizon must cover the RMST horizon");
    if (c.posterior_draws < 100) fail("posterior_draws", "posterior_draws must be >= 100");
    if (c.p_inferiority && !(*c.p_inferiority >= 0.0 && *c.p_inferiority < 1.0))
        fail("p_inferiority", "p_inferiority must lie in [0, 1)");
    if (c.p_toxicity && !(*c.p_toxicity >= 0.0 && *c.p_toxicity < 1.0))
        fail("p_toxicity", "p_toxicity must lie in [0, 1)");
    if (c.comparator) {
        try {
            c.comparator->validate();
        } catch (const InvalidArgument& e) {
            fail("comparator", e.what());
        }
    }
    return out;
}

void validate(const DesignConfig& config) {
    const auto issues = check(config);
    if (issues.empty()) return;
    std::string message = "invalid design:";
    for (const auto& issue : issues) message += "\n  " + issue.field + ": " + issue.message;
    throw InvalidArgument(message);
}

Decision enrollment_decision(const DesignConfig& config, const ArmInterimState& state) {
    if (state.enrolled < config.max_per_arm) return Decision::kContinue;
    return state.since_last_enrollment + kClockTolerance >= config.followup ? Decision::kCloseNotRejected
                                                                            : Decision::kPause;
}

std::string_view to_string(Decision d) {
    switch (d) {
        case Decision::kContinue: return "continue";
        case Decision::kPause: return "pause";
        case Decision::kDeclareNonInferior: return "declare-NI";
        case Decision::kStopInferior: return "stop-inferior";
        case Decision::kStopToxicity: return "stop-toxicity";
        case Decision::kCloseNotRejected: return "close-not-rejected";
    }
    return "unknown";
}

Decision efficacy_interim_decision(const DesignConfig& config, int arm, const ArmInterimState& state,
                                   const EfficacyProbabilities& p) {
    check_state(config, state);
    if (arm < 0 || arm >= config.arms) throw InvalidArgument("inconsistent interim state: arm out of range");
    if (p.non_inferior > boundary_value(config.b_ni, state.enrolled)) return Decision::kDeclareNonInferior;
    if (p.inferior > boundary_value(config.b_i, state.enrolled)) return Decision::kStopInferior;
    return enrollment_decision(config, state);
}

CoprimaryDecision coprimary_interim_decision(const DesignConfig& config, const ArmInterimState& state,
                                             const CoprimaryProbabilities& p) {
    check_state(config, state);
    if (config.mode != EndpointMode::kCoPrimary) throw InvalidArgument("design is not in co-primary mode");
    CoprimaryDecision out;
    out.low_margin = p.toxic > boundary_value(config.toxicity_margin_boundary(), state.enrolled);
    out.margin = out.low_margin ? config.delta_low : config.delta;

    const double b_ni = boundary_value(config.b_ni, state.enrolled);
    if (b_ni < 1.0 && p.joint_non_inferior >= b_ni) {
        out.decision = Decision::kDeclareNonInferior;
    } else if (p.toxic > boundary_value(config.b_t, state.enrolled)) {
        out.decision = Decision::kStopToxicity;
    } else if ((out.low_margin ? p.inferior_at_delta_low : p.inferior_at_delta) >
               boundary_value(config.b_i, state.enrolled)) {
        out.decision = Decision::kStopInferior;
    } else {
        out.decision = enrollment_decision(config, state);
    }
    return out;
}

}  // namespace deint

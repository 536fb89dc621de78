#pragma once

#include "deint/design.hpp"
#include "deint/trial.hpp"

namespace fixtures {

inline deint::BoundarySpec boundary(double scale, double shape, int activation, int m_max) {
    return {scale, shape, activation, m_max};
}

/// Single-arm efficacy-only design in the spirit of a 100-patient phase II
/// de-escalation study; small posterior sample sizes keep tests fast.
inline deint::DesignConfig efficacy_config(int arms = 1, int m_max = 40) {
    deint::DesignConfig c;
    c.mode = deint::EndpointMode::kEfficacyOnly;
    c.arms = arms;
    c.theta0 = 22.0;
    c.delta = 2.0;
    c.delta_low = 2.0;
    c.horizon = 24.0;
    c.max_per_arm = m_max;
    c.max_total = arms * m_max;
    c.b_ni = boundary(0.1, 1.0, m_max / 2, m_max);
    c.b_i = boundary(0.2, 1.0, 0, m_max);
    c.b_t = boundary(0.0, 0.0, 0, m_max);
    c.followup = 6.0;
    c.accrual_rate = 5.0;
    c.efficacy_prior = {deint::ScenarioDistribution::exponential_with_rmst(20.0, 24.0), 10.0};
    c.posterior_draws = 200;
    c.grid_step = 0.5;
    c.grid_horizon = 30.0;
    return c;
}

inline deint::DesignConfig coprimary_config(int arms = 1, int m_max = 40) {
    deint::DesignConfig c = efficacy_config(arms, m_max);
    c.mode = deint::EndpointMode::kCoPrimary;
    c.theta0 = 21.97;
    c.delta = 2.0;
    c.delta_low = 1.0;
    c.beta0 = 12.49;
    c.delta_beta = 0.0;
    c.b_t = boundary(0.2, 1.0, 0, m_max);
    c.toxicity_prior = {deint::ScenarioDistribution::exponential_with_rmst(12.49, 24.0), 10.0};
    return c;
}

inline deint::ArmScenario exponential_arm(double theta) {
    return {deint::ScenarioDistribution::exponential_with_rmst(theta, 24.0), std::nullopt};
}

inline deint::ArmScenario exponential_arm(double theta, double beta) {
    return {deint::ScenarioDistribution::exponential_with_rmst(theta, 24.0),
            deint::ScenarioDistribution::exponential_with_rmst(beta, 24.0)};
}

}  // namespace fixtures

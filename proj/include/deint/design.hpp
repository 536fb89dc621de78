#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "deint/boundary.hpp"
#include "deint/survival.hpp"

namespace deint {

enum class EndpointMode { kEfficacyOnly, kCoPrimary };
enum class AccrualMode { kPoisson, kDeterministic };

/// Beta-Stacy prior for one endpoint: centered at `center` with constant weight.
struct PriorSpec {
    ScenarioDistribution center = ScenarioDistribution::no_event();
    double weight = 10.0;
};

enum class SpendingKind { kOBrienFleming, kPocock, kLinear };

struct SpendingFunction {
    SpendingKind kind = SpendingKind::kOBrienFleming;
    double alpha = 0.1;
};

enum class FutilityRule {
    kNone,
    kPValue0025,  ///< F1: stop when p <= 0.0025
    kPValue05,    ///< F2: stop when p <= 0.05
    kRci,         ///< F3: stop when the upper RCI bound excludes theta0
};

/// Repeated-confidence-interval comparator design.
struct RciDesignConfig {
    SpendingFunction ni_spending{SpendingKind::kOBrienFleming, 0.1};
    FutilityRule futility = FutilityRule::kNone;
    SpendingFunction futility_spending{SpendingKind::kOBrienFleming, 0.025};
    int min_enrollment = 50;
    double theta0 = 0.0;
    double delta = 0.0;
    double horizon = 24.0;
    int bootstrap_resamples = kDefaultBootstrapResamples;

    void validate() const;
};

/// Complete description of a sequential de-intensification design.
///
/// Boundary scales that are to be calibrated may be left at 0 in the
/// document; `p_inferiority` / `p_toxicity` name the early-stopping targets
/// the calibrator tunes s_I and s_T to.
struct DesignConfig {
    EndpointMode mode = EndpointMode::kEfficacyOnly;
    int arms = 1;

    double theta0 = 0.0;
    double beta0 = 0.0;
    double delta = 0.0;
    double delta_low = 0.0;
    double delta_beta = 0.0;
    /// Per-arm inferiority margins Delta_k for the efficacy-only rules; empty
    /// means Delta for every arm.
    std::vector<double> arm_margins;
    double horizon = 24.0;

    BoundarySpec b_ni;
    BoundarySpec b_i;
    BoundarySpec b_t;
    /// Margin-switch boundary B_T. Unset: scale (1 + s_T) / 2 with b_T's shape
    /// and activation.
    std::optional<BoundarySpec> margin_boundary;

    int max_total = 0;
    int max_per_arm = 0;
    double followup = 12.0;
    double accrual_rate = 5.0;
    AccrualMode accrual = AccrualMode::kPoisson;
    double interim_period = 1.0;
    double alpha = 0.1;

    PriorSpec efficacy_prior;
    PriorSpec toxicity_prior;
    double grid_step = 0.25;
    double grid_horizon = 36.0;
    int posterior_draws = 1000;
    bool monotone_efficacy = false;
    bool monotone_toxicity = false;

    std::optional<ScenarioDistribution> soc_efficacy;
    std::optional<ScenarioDistribution> soc_toxicity;
    std::optional<double> p_inferiority;
    std::optional<double> p_toxicity;

    std::optional<RciDesignConfig> comparator;

    double arm_margin(int arm) const;
    BoundarySpec toxicity_margin_boundary() const;
    /// F0, defaulting to the exponential law with RMST theta0.
    ScenarioDistribution reference_efficacy() const;
    /// G0, defaulting to the exponential law with RMST beta0.
    ScenarioDistribution reference_toxicity() const;

    /// Copy with a different per-arm cap; every boundary follows.
    DesignConfig with_max_per_arm(int m_max) const;
    /// The first arm alone, as used by calibration.
    DesignConfig single_arm() const;
};

/// One violated invariant, keyed by the document field it concerns.
struct ConfigIssue {
    std::string field;
    std::string message;
};

std::vector<ConfigIssue> check(const DesignConfig& config);

/// Throws InvalidArgument listing every violated invariant.
void validate(const DesignConfig& config);

enum class Decision {
    kContinue,
    kPause,
    kDeclareNonInferior,
    kStopInferior,
    kStopToxicity,
    kCloseNotRejected,
};

std::string_view to_string(Decision d);

/// Enrollment status of the active arm at an interim.
struct ArmInterimState {
    int enrolled = 0;
    /// Months since the arm's last enrollment.
    double since_last_enrollment = 0.0;
};

struct EfficacyProbabilities {
    double non_inferior = 0.0;  ///< P(theta > theta0 - Delta)
    double inferior = 0.0;      ///< P(theta <= theta0 - Delta_k)
};

struct CoprimaryProbabilities {
    double joint_non_inferior = 0.0;  ///< P(theta > theta0 - Delta and beta > beta0)
    double toxic = 0.0;               ///< P(beta <= beta0 + Delta_beta)
    double inferior_at_delta = 0.0;   ///< P(theta <= theta0 - Delta)
    double inferior_at_delta_low = 0.0;
};

/// Decision when no stopping rule fires: continue below the cap, pause at
/// the cap, close once the follow-up window since the last enrollment ends.
Decision enrollment_decision(const DesignConfig& config, const ArmInterimState& state);

/// Decision of the efficacy-only rules for arm `arm` (0-based).
Decision efficacy_interim_decision(const DesignConfig& config, int arm, const ArmInterimState& state,
                                   const EfficacyProbabilities& p);

struct CoprimaryDecision {
    Decision decision = Decision::kContinue;
    bool low_margin = false;  ///< Delta_L branch of the adaptive margin
    double margin = 0.0;
};

CoprimaryDecision coprimary_interim_decision(const DesignConfig& config, const ArmInterimState& state,
                                             const CoprimaryProbabilities& p);

}  // namespace deint

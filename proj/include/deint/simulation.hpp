#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "deint/calibration.hpp"
#include "deint/design.hpp"
#include "deint/trial.hpp"

namespace deint {

struct Estimate {
    double estimate = 0.0;
    double mc_se = 0.0;
};

struct ArmCharacteristics {
    double theta = 0.0;
    std::optional<double> beta;
    bool null_hypothesis = false;  ///< the arm lies in its null region
    Estimate power;                ///< declared non-inferior
    Estimate futility;             ///< stopped for inferiority
    Estimate toxicity;             ///< stopped for toxicity
    Estimate not_tested;
    Estimate not_rejected;         ///< closed at the end of follow-up
    Estimate enrolled;
};

struct ScenarioCharacteristics {
    std::string label;
    std::vector<ArmCharacteristics> arms;
    /// P(some arm in its null region is declared non-inferior); absent when
    /// no arm is null.
    std::optional<Estimate> type_one_error;
    Estimate duration;
    Estimate total_enrolled;
};

struct OperatingCharacteristics {
    std::string design;
    int sims = 0;
    std::uint64_t seed = 0;
    std::vector<ScenarioCharacteristics> scenarios;
};

using TrialRunner = std::function<TrialRecord(const Scenario&, const RngStream&)>;

/// Stream of replicate `replicate` of scenario `scenario` under `seed`.
RngStream replicate_stream(std::uint64_t seed, std::size_t scenario, std::size_t replicate);

/// Runs `sims` trials per scenario and aggregates per-arm verdict
/// probabilities with binomial MC standard errors and duration / enrollment
/// means with SD / sqrt(C). The result does not depend on `workers`.
OperatingCharacteristics simulate_oc(const TrialRunner& runner, const DesignConfig& config,
                                     const std::vector<Scenario>& scenarios, int sims, std::uint64_t seed,
                                     int workers);

/// Bayesian design after calibration.
OperatingCharacteristics simulate_bayesian_oc(const DesignConfig& calibrated, const std::vector<Scenario>& scenarios,
                                              int sims, std::uint64_t seed, int workers);

/// Comparator design from the config's `comparator` section.
OperatingCharacteristics simulate_comparator_oc(const DesignConfig& config, const std::vector<Scenario>& scenarios,
                                                int sims, std::uint64_t seed, int workers);

nlohmann::json oc_to_json(const OperatingCharacteristics& oc);

/// `scenario,arm,metric,estimate,mc_se`; study-level rows use arm "all".
void write_oc_csv(std::ostream& out, const OperatingCharacteristics& oc);

struct SampleSizePoint {
    int max_per_arm = 0;
    double s_ni = 0.0;
    double s_i = 0.0;
    double s_t = 0.0;
    Estimate power;
};

struct SampleSizeResult {
    double target_power = 0.0;
    std::vector<SampleSizePoint> curve;
    std::optional<int> recommended;
};

/// Recalibrates and simulates the first arm of `scenario` at every grid
/// point; recommends the smallest m_max whose estimated power reaches the
/// target.
SampleSizeResult sample_size_search(const DesignConfig& design, const Scenario& scenario, double target_power,
                                    const std::vector<int>& grid, int sims, std::uint64_t seed, int workers);

void write_sample_size_csv(std::ostream& out, const SampleSizeResult& result);

}  // namespace deint

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "deint/design.hpp"
#include "deint/trial.hpp"

namespace deint {

struct NullScenarioMember {
    std::string label;
    ArmScenario arm;
};

/// Least favourable single-arm scenarios for the NI type I error.
struct NullScenarioFamily {
    std::vector<NullScenarioMember> members;
};

/// Efficacy-only: the PH, AFT and PO transforms of F0 with RMST theta0 - Delta.
/// Co-primary: those three paired with a toxicity law that never fires
/// (set i), plus F0 paired with a toxicity law of RMST beta0 (set ii).
NullScenarioFamily build_null_family(const DesignConfig& config, const ScenarioDistribution& f0, EndpointMode mode);

/// Order statistic ceil(q * n) (1-based, clamped to [1, n]) of `values`.
double lower_quantile(std::vector<double> values, double q);

/// Smallest NI scale at which the single-arm trial behind `trace` declares
/// non-inferiority, scanning interims up to and including the first futility
/// (or toxicity) stop; +infinity if no admissible interim has an active NI
/// boundary. The trial rejects iff s_NI > critical scale (efficacy-only) or
/// s_NI >= critical scale (co-primary).
double critical_scale_ni(const ArmTrace& trace, const DesignConfig& config);

enum class FutilityTarget { kInferiority, kToxicity };

/// Smallest scale at which the rule alone stops the trial early.
double critical_scale_futility(const ArmTrace& trace, const DesignConfig& config, FutilityTarget rule);

/// Enrollment count from which a boundary can be below 1.
int first_active_enrollment(const BoundarySpec& b);

struct Proportion {
    double estimate = 0.0;
    double mc_se = 0.0;
    int sims = 0;
};

Proportion proportion(int hits, int sims);

struct MemberCalibration {
    std::string label;
    double scale = 0.0;
    std::vector<double> critical_scales;
};

struct RuleCalibration {
    double target = 0.0;
    double scale = 0.0;
    std::vector<double> critical_scales;
    std::optional<Proportion> resimulated;  ///< early-stop fraction on fresh streams
};

struct Resimulation {
    std::string label;
    Proportion rejection;
};

struct CalibrationResult {
    std::string tool_version;
    std::string config_digest;
    std::uint64_t seed = 0;
    int sims = 0;
    double alpha = 0.0;
    double s_ni = 0.0;
    double s_i = 0.0;
    double s_t = 0.0;
    std::vector<MemberCalibration> members;
    std::optional<RuleCalibration> inferiority;
    std::optional<RuleCalibration> toxicity;
    std::vector<Resimulation> resimulations;
};

/// Calibrates s_NI over a null family with the other scales of `config`
/// fixed. One trace per (member, simulation); members are scaled to the
/// alpha lower quantile of their critical scales, clamped to [0, 1], and
/// s_NI is the minimum over members.
struct NiCalibration {
    double scale = 0.0;
    std::vector<MemberCalibration> members;
};

NiCalibration calibrate_s_ni(const DesignConfig& config, const NullScenarioFamily& family, int sims,
                             const RngStream& stream, int workers);

/// Tunes the inferiority or toxicity scale so that a fraction `target` of
/// trials under `scenario` stop early through that rule (NI ignored).
/// Target 0 returns scale 0.
RuleCalibration calibrate_futility_scale(const DesignConfig& config, const ArmScenario& scenario, double target,
                                         FutilityTarget rule, int sims, const RngStream& stream, int workers);

/// Fraction of fresh trials stopped early by the rule alone at `config`'s
/// scale for it.
Proportion futility_stop_fraction(const DesignConfig& config, const ArmScenario& scenario, FutilityTarget rule,
                                  int sims, const RngStream& stream, int workers);

/// Fraction of single-arm trials declaring NI, simulated with the engine.
Proportion rejection_rate(const DesignConfig& config, const ArmScenario& scenario, int sims, const RngStream& stream,
                          int workers);

struct CalibrationOptions {
    int sims = 2000;
    std::uint64_t seed = 1;
    int workers = 1;
    bool resimulate = true;
};

/// Full calibration: s_T and s_I when targets are configured (otherwise the
/// configured scales are kept), then s_NI over the null family, then
/// fresh-stream re-simulation of the worst member (and, in co-primary mode,
/// an interior null).
CalibrationResult calibrate_design(const DesignConfig& config, const CalibrationOptions& options);

/// Co-primary calibration; equivalent to calibrate_design on a co-primary
/// config.
CalibrationResult calibrate_coprimary(const DesignConfig& config, const CalibrationOptions& options);

/// Design with the calibrated scales in place.
DesignConfig apply_calibration(const DesignConfig& config, const CalibrationResult& result);

nlohmann::json calibration_to_json(const CalibrationResult& result);
CalibrationResult calibration_from_json(const nlohmann::json& j);

}  // namespace deint

#pragma once

#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "deint/random.hpp"

namespace deint {

/// One point of a survival curve: S(time) = survival, time in months.
struct Knot {
    double time;
    double survival;
};

enum class TransformKind { kProportionalHazards, kAcceleratedFailureTime, kProportionalOdds };

/// A member of a one-parameter family of survival transformations.
///   PH:  S'(t) = S(t)^hr
///   AFT: S'(t) = S(t / scale)
///   PO:  odds(S'(t)) = or * odds(S(t))
/// Parameter 1 is the identity in every family.
struct Transform {
    TransformKind kind;
    double parameter;
};

/// How a piecewise curve continues past its last knot.
enum class TailRule {
    kExponential,  ///< constant hazard equal to the average hazard of the last segment
    kFlat,         ///< survival stays at the last knot's value
};

/// A samplable survival law with an RMST functional. Plays the role of an
/// arm's efficacy (PFS) or toxicity (time to first AE) distribution.
///
/// Piecewise curves are right-continuous step functions: S(t) = S(t_m) on
/// [t_m, t_{m+1}). Event times may be +infinity when the curve never reaches
/// zero (for instance a flat tail, or the degenerate "no events" law).
class ScenarioDistribution {
   public:
    enum class Kind { kExponential, kPiecewise, kTransformed };

    static ScenarioDistribution exponential(double rate);
    static ScenarioDistribution exponential_with_mean(double mean);
    /// Exponential law whose RMST at `horizon` equals `target`.
    static ScenarioDistribution exponential_with_rmst(double target, double horizon);
    static ScenarioDistribution piecewise(std::vector<Knot> knots, TailRule tail = TailRule::kExponential);
    /// Survival identically 1: the event is never observed.
    static ScenarioDistribution no_event();
    static ScenarioDistribution transformed(const ScenarioDistribution& base, Transform transform);

    Kind kind() const { return kind_; }
    double rate() const { return rate_; }
    const std::vector<Knot>& knots() const { return knots_; }
    TailRule tail() const { return tail_; }
    double tail_rate() const { return tail_rate_; }
    const ScenarioDistribution& base() const { return *base_; }
    const Transform& transform() const { return transform_; }

    double survival(double t) const;

    /// inf{t : S(t) <= u} for u in (0, 1); +infinity if S stays above u.
    double quantile(double u) const;

    /// Points in (0, horizon) where S may jump.
    std::vector<double> breakpoints(double horizon) const;

   private:
    ScenarioDistribution() = default;

    Kind kind_ = Kind::kExponential;
    double rate_ = 0.0;
    std::vector<Knot> knots_;
    TailRule tail_ = TailRule::kExponential;
    double tail_rate_ = 0.0;
    std::shared_ptr<const ScenarioDistribution> base_;
    Transform transform_{TransformKind::kProportionalHazards, 1.0};
};

/// Inverse-CDF draw from `dist`. One uniform is consumed per call.
double sample_event_time(const ScenarioDistribution& dist, RngStream& rng);

/// Restricted mean survival time: integral of S over [0, horizon].
double rmst(const ScenarioDistribution& dist, double horizon);

/// Closed families collapse: PH and AFT of an exponential are exponential,
/// and parameter 1 returns the base unchanged.
ScenarioDistribution apply_transform(const ScenarioDistribution& base, Transform transform);

/// Parameter of `family` that moves the RMST of `base` at `horizon` to
/// `target`, within 1e-6 months. Throws TargetUnreachable when the family
/// cannot reach the target.
Transform solve_transform_to_rmst(const ScenarioDistribution& base, TransformKind family, double target,
                                  double horizon);

/// Rate of the exponential law with the given RMST at `horizon`.
double exponential_rate_for_rmst(double target, double horizon);

struct CensoredObservation {
    double time;  ///< months, >= 0
    bool event;   ///< false: right-censored at `time`
};

/// Product-limit estimate. Events are processed before censorings that share
/// the same time.
struct KaplanMeierFit {
    std::vector<double> times;     ///< distinct event times, ascending
    std::vector<double> survival;  ///< S just after each event time
    std::vector<int> at_risk;
    std::vector<int> events;

    double survival_at(double t) const;
};

KaplanMeierFit kaplan_meier(std::span<const CensoredObservation> sample);

/// Area under the KM step function on [0, horizon]; flat past the last
/// observation.
double km_rmst(const KaplanMeierFit& fit, double horizon);

inline constexpr int kDefaultBootstrapResamples = 500;

/// Standard deviation of the KM RMST over `resamples` nonparametric
/// bootstrap resamples of `sample`.
double bootstrap_rmst_se(std::span<const CensoredObservation> sample, double horizon, int resamples,
                         RngStream& rng);

/// Reads a digitized survival curve (`time_months,survival`). Errors carry
/// the 1-based line number of the offending row.
std::vector<Knot> read_curve_csv(std::istream& in);

}  // namespace deint

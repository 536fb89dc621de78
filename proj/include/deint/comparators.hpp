#pragma once

#include <span>

#include "deint/design.hpp"
#include "deint/trial.hpp"

namespace deint {

/// Cumulative one-sided alpha spent at information fraction s in (0, 1].
///   O'Brien-Fleming: 2 (1 - Phi(z_{alpha/2} / sqrt(s)))
///   Pocock:          alpha ln(1 + (e - 1) s)
///   linear:          alpha s
double cumulative_spend(const SpendingFunction& sf, double s);

/// Spend increments below this are treated as zero and skip the test.
inline constexpr double kNegligibleSpend = 1e-15;

/// Outcome of one repeated-confidence-interval interim analysis.
struct RciResult {
    Decision decision = Decision::kContinue;
    double theta_hat = 0.0;
    double se = 0.0;
    double lower = 0.0;    ///< one-sided (1 - alpha_t) lower bound; -inf when not tested
    double upper = 0.0;    ///< F3 upper bound; +inf when not tested
    double p_value = 0.0;  ///< Phi((theta_hat - theta0) / se)
    bool degenerate = false;  ///< no events or zero standard error
};

/// RCI tests on one arm's sample. `alpha_t` and `futility_alpha_t` are this
/// interim's spend increments for the NI test and the F3 futility bound.
/// Futility is checked before NI. The decision is continue, declare-NI or
/// stop-inferior; pausing is left to the caller.
RciResult rci_interim(std::span<const CensoredObservation> sample, const RciDesignConfig& cfg, double alpha_t,
                      double futility_alpha_t, RngStream& rng);

/// Comparator trial on the shared accrual and censoring plumbing. The
/// information fraction is n_k / m_max; the NI spend increment is taken
/// relative to the arm's previous comparator interim.
TrialRecord run_comparator_trial(const DesignConfig& config, const RciDesignConfig& rci, const Scenario& scenario,
                                 const RngStream& stream);

}  // namespace deint

#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "deint/random.hpp"
#include "deint/survival.hpp"

namespace deint {

/// Time grid 0 = t_0 < t_1 < ... < t_M in months. Bin m (1-based) is the
/// interval (t_{m-1}, t_m].
class TimeGrid {
   public:
    explicit TimeGrid(std::vector<double> points);
    static TimeGrid uniform(double step, double horizon);

    const std::vector<double>& points() const { return points_; }
    std::size_t bins() const { return points_.size() - 1; }
    double horizon() const { return points_.back(); }

    /// Bin holding time x; x = 0 maps to bin 1. Returns bins() + 1 past the grid.
    std::size_t bin_of(double x) const;

   private:
    std::vector<double> points_;
};

/// Time-discretized Beta-Stacy model for one survival distribution.
///
/// The prior is given by its mean distribution function V0 and weight c at
/// the grid points. Data enter through per-bin event and censoring counts,
/// which are additive, so updating is accumulation of sufficient statistics.
/// Bin m has an independent hazard
///   h_m ~ Beta(c(t_m) (V0(t_m) - V0(t_{m-1})) + d_m,  c(t_m) (1 - V0(t_m)) + r_m)
/// where r_m counts observations with time > t_m.
class BetaStacyModel {
   public:
    BetaStacyModel(std::shared_ptr<const TimeGrid> grid, std::vector<double> prior_cdf,
                   std::vector<double> weight);

    const TimeGrid& grid() const { return *grid_; }
    std::shared_ptr<const TimeGrid> grid_ptr() const { return grid_; }
    const std::vector<double>& prior_cdf() const { return prior_cdf_; }
    const std::vector<double>& weight() const { return weight_; }

    /// Events in bin m (1-based).
    int events(std::size_t m) const { return events_[m - 1]; }
    int censored(std::size_t m) const { return censored_[m - 1]; }
    int sample_size() const { return n_; }
    /// Observations with time > t_m; m = 0 gives the sample size.
    int at_risk_after(std::size_t m) const;

    double alpha(std::size_t m) const;
    double beta(std::size_t m) const;

    /// Adds one observation. Times past the grid count as censored at t_M.
    void add(const CensoredObservation& obs);

   private:
    std::shared_ptr<const TimeGrid> grid_;
    std::vector<double> prior_cdf_;
    std::vector<double> weight_;
    std::vector<int> events_;
    std::vector<int> censored_;
    int n_ = 0;
};

/// Prior centered at `center`: V0(t_m) = 1 - S_center(t_m).
BetaStacyModel make_prior(std::shared_ptr<const TimeGrid> grid, const ScenarioDistribution& center,
                          double weight);
BetaStacyModel make_prior(std::shared_ptr<const TimeGrid> grid, const ScenarioDistribution& center,
                          const std::function<double(double)>& weight);

/// Conjugate update with a right-censored sample.
BetaStacyModel update(const BetaStacyModel& model, std::span<const CensoredObservation> sample);

/// Posterior survival paths on the grid and their RMST at `horizon`.
struct PosteriorDrawSet {
    std::shared_ptr<const TimeGrid> grid;
    double horizon = 0.0;
    std::size_t draws = 0;
    std::vector<double> paths;  ///< draws x (bins + 1), row-major; S(t_0) = 1
    std::vector<double> rmst;

    std::span<const double> path(std::size_t r) const {
        const std::size_t width = grid->points().size();
        return {paths.data() + r * width, width};
    }
};

/// R posterior survival paths. Hazards are drawn bin by bin (all draws of
/// bin 1, then bin 2, ...), so the RMST values coincide with those of
/// sample_rmst() on the same stream.
PosteriorDrawSet sample_paths(const BetaStacyModel& model, double horizon, std::size_t draws, RngStream& rng);

/// RMST at `horizon` of R posterior paths, drawing only the hazards the
/// left-Riemann sum needs.
std::vector<double> sample_rmst(const BetaStacyModel& model, double horizon, std::size_t draws, RngStream& rng);

/// Event on the RMST summary of a posterior draw.
struct RmstEvent {
    enum class Side { kAtMost, kAbove };
    Side side;
    double threshold;

    bool holds(double value) const { return side == Side::kAtMost ? value <= threshold : value > threshold; }
};

/// Fraction of draws satisfying `event`.
double draw_fraction(std::span<const double> rmst_draws, RmstEvent event);

/// Monte-Carlo posterior probability of an RMST event. Requires
/// threshold in (0, horizon) and at least 100 draws.
double posterior_prob(const BetaStacyModel& model, double horizon, RmstEvent event, std::size_t draws,
                      RngStream& rng);

enum class OrderConstraint {
    kNonIncreasing,  ///< summary_1 >= summary_2 >= ...
    kNonDecreasing,  ///< summary_1 <= summary_2 <= ...
};

struct JointDrawSet {
    std::vector<std::vector<double>> rmst;  ///< [arm][draw]
    std::size_t proposals = 0;
    double acceptance_rate = 0.0;
};

inline constexpr std::size_t kDefaultProposalBudgetFactor = 100;

/// Rejection sampler for the product of independent posteriors truncated to
/// an order constraint on the RMST summaries.
JointDrawSet joint_monotone_sample(std::span<const BetaStacyModel* const> models, OrderConstraint order,
                                   double horizon, std::size_t draws, RngStream& rng,
                                   std::size_t budget_factor = kDefaultProposalBudgetFactor);

/// `draw_id,arm,rmst` rows for diagnostics.
void write_draws_csv(std::ostream& out, const JointDrawSet& draws);

}  // namespace deint

#include "deint/beta_stacy.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "deint/error.hpp"

namespace deint {

TimeGrid::TimeGrid(std::vector<double> points) : points_(std::move(points)) {
    if (points_.size() < 2) throw InvalidArgument("time grid needs at least two points");
    if (points_.front() != 0.0) throw InvalidArgument("time grid must start at 0");
    for (std::size_t i = 1; i < points_.size(); ++i)
        if (!(points_[i] > points_[i - 1])) throw InvalidArgument("time grid must be strictly increasing");
}

TimeGrid TimeGrid::uniform(double step, double horizon) {
    if (!(step > 0.0) || !(horizon > 0.0)) throw InvalidArgument("grid step and horizon must be > 0");
    const auto bins = static_cast<std::size_t>(std::ceil(horizon / step - 1e-9));
    std::vector<double> points(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i) points[i] = std::min(static_cast<double>(i) * step, horizon);
    points.back() = horizon;
    return TimeGrid(std::move(points));
}

std::size_t TimeGrid::bin_of(double x) const {
    if (x <= points_[1]) return 1;
    auto it = std::lower_bound(points_.begin() + 1, points_.end(), x);
    return static_cast<std::size_t>(std::distance(points_.begin(), it));
}

BetaStacyModel::BetaStacyModel(std::shared_ptr<const TimeGrid> grid, std::vector<double> prior_cdf,
                               std::vector<double> weight)
    : grid_(std::move(grid)), prior_cdf_(std::move(prior_cdf)), weight_(std::move(weight)) {
    if (!grid_) throw InvalidArgument("model needs a grid");
    const std::size_t n_points = grid_->points().size();
    if (prior_cdf_.size() != n_points || weight_.size() != n_points)
        throw InvalidArgument("prior mean and weight must be given at every grid point");
    if (prior_cdf_.front() != 0.0) throw InvalidArgument("prior mean must vanish at t_0");
    for (std::size_t i = 1; i < n_points; ++i)
        if (prior_cdf_[i] < prior_cdf_[i - 1]) throw InvalidArgument("prior mean must be non-decreasing");
    if (prior_cdf_.back() > 1.0) throw InvalidArgument("prior mean must not exceed 1");
    for (double c : weight_)
        if (!(c > 0.0) || !std::isfinite(c)) throw InvalidArgument("prior weight must be positive and finite");
    events_.assign(grid_->bins(), 0);
    censored_.assign(grid_->bins(), 0);
}

int BetaStacyModel::at_risk_after(std::size_t m) const {
    int r = n_;
    for (std::size_t j = 1; j <= m; ++j) r -= events_[j - 1] + censored_[j - 1];
    return r;
}

double BetaStacyModel::alpha(std::size_t m) const {
    return weight_[m] * (prior_cdf_[m] - prior_cdf_[m - 1]) + events_[m - 1];
}

double BetaStacyModel::beta(std::size_t m) const {
    return weight_[m] * (1.0 - prior_cdf_[m]) + at_risk_after(m);
}

void BetaStacyModel::add(const CensoredObservation& obs) {
    if (!(obs.time >= 0.0)) throw InvalidArgument("observation times must be >= 0");
    const std::size_t m = grid_->bin_of(obs.time);
    if (m > grid_->bins()) {
        ++censored_.back();
    } else if (obs.event) {
        ++events_[m - 1];
    } else {
        ++censored_[m - 1];
    }
    ++n_;
}

BetaStacyModel make_prior(std::shared_ptr<const TimeGrid> grid, const ScenarioDistribution& center,
                          double weight) {
    return make_prior(std::move(grid), center, [weight](double) { return weight; });
}

BetaStacyModel make_prior(std::shared_ptr<const TimeGrid> grid, const ScenarioDistribution& center,
                          const std::function<double(double)>& weight) {
    if (!grid) throw InvalidArgument("prior needs a grid");
    const auto& pts = grid->points();
    std::vector<double> cdf(pts.size());
    std::vector<double> c(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        cdf[i] = i == 0 ? 0.0 : 1.0 - center.survival(pts[i]);
        c[i] = weight(pts[i]);
    }
    // Guard against rounding making the cdf decrease by an ulp.
    for (std::size_t i = 1; i < cdf.size(); ++i) cdf[i] = std::max(cdf[i], cdf[i - 1]);
    return BetaStacyModel(std::move(grid), std::move(cdf), std::move(c));
}

BetaStacyModel update(const BetaStacyModel& model, std::span<const CensoredObservation> sample) {
    BetaStacyModel out = model;
    for (const auto& obs : sample) out.add(obs);
    return out;
}

namespace {

struct HorizonBins {
    std::size_t last_interval;  // bins whose interval intersects [0, horizon)
};

HorizonBins horizon_bins(const TimeGrid& grid, double horizon) {
    if (!(horizon > 0.0) || horizon > grid.horizon() + 1e-12)
        throw InvalidArgument("RMST horizon must lie within the model grid");
    return {std::min(grid.bin_of(horizon), grid.bins())};
}

// Draws hazards of bins 1..last for all draws, bin by bin, and hands each
// bin's hazard vector to `visit(m, hazards)`; `before(m)` runs before bin m
// is drawn.
template <class Before, class Visit>
void draw_hazards(const BetaStacyModel& model, std::size_t last, std::size_t draws, RngStream& rng,
                  Before&& before, Visit&& visit) {
    std::vector<double> hazard(draws);
    int at_risk = model.sample_size();
    const auto& cdf = model.prior_cdf();
    const auto& c = model.weight();
    for (std::size_t m = 1; m <= last; ++m) {
        before(m);
        const int d = model.events(m);
        at_risk -= d + model.censored(m);
        const double a = c[m] * (cdf[m] - cdf[m - 1]) + d;
        const double b = c[m] * (1.0 - cdf[m]) + at_risk;
        const BetaSampler sampler(a, b);
        for (std::size_t r = 0; r < draws; ++r) hazard[r] = sampler(rng);
        visit(m, hazard);
    }
}

}  // namespace

std::vector<double> sample_rmst(const BetaStacyModel& model, double horizon, std::size_t draws, RngStream& rng) {
    const auto& pts = model.grid().points();
    const std::size_t m_end = horizon_bins(model.grid(), horizon).last_interval;
    std::vector<double> surv(draws, 1.0);
    std::vector<double> area(draws, 0.0);
    auto accumulate_interval = [&](std::size_t m) {
        const double len = std::min(pts[m], horizon) - pts[m - 1];
        for (std::size_t r = 0; r < draws; ++r) area[r] += len * surv[r];
    };
    draw_hazards(model, m_end - 1, draws, rng, accumulate_interval, [&](std::size_t, const std::vector<double>& h) {
        for (std::size_t r = 0; r < draws; ++r) surv[r] *= 1.0 - h[r];
    });
    accumulate_interval(m_end);
    return area;
}

PosteriorDrawSet sample_paths(const BetaStacyModel& model, double horizon, std::size_t draws, RngStream& rng) {
    if (draws < 1) throw InvalidArgument("need at least one posterior draw");
    const auto& pts = model.grid().points();
    const std::size_t m_end = horizon_bins(model.grid(), horizon).last_interval;
    const std::size_t width = pts.size();

    PosteriorDrawSet out;
    out.grid = model.grid_ptr();
    out.horizon = horizon;
    out.draws = draws;
    out.paths.assign(draws * width, 1.0);
    out.rmst.assign(draws, 0.0);

    auto accumulate_interval = [&](std::size_t m) {
        if (m > m_end) return;
        const double len = std::min(pts[m], horizon) - pts[m - 1];
        for (std::size_t r = 0; r < draws; ++r) out.rmst[r] += len * out.paths[r * width + m - 1];
    };
    draw_hazards(model, model.grid().bins(), draws, rng, accumulate_interval,
                 [&](std::size_t m, const std::vector<double>& h) {
                     for (std::size_t r = 0; r < draws; ++r)
                         out.paths[r * width + m] = out.paths[r * width + m - 1] * (1.0 - h[r]);
                 });
    return out;
}

double draw_fraction(std::span<const double> rmst_draws, RmstEvent event) {
    if (rmst_draws.empty()) throw InvalidArgument("no posterior draws");
    std::size_t hits = 0;
    for (double v : rmst_draws) hits += event.holds(v) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(rmst_draws.size());
}

double posterior_prob(const BetaStacyModel& model, double horizon, RmstEvent event, std::size_t draws,
                      RngStream& rng) {
    if (!(event.threshold > 0.0 && event.threshold < horizon))
        throw InvalidArgument("RMST threshold must lie in (0, horizon)");
    if (draws < 100) throw InvalidArgument("posterior probabilities need at least 100 draws");
    const auto values = sample_rmst(model, horizon, draws, rng);
    return draw_fraction(values, event);
}

JointDrawSet joint_monotone_sample(std::span<const BetaStacyModel* const> models, OrderConstraint order,
                                   double horizon, std::size_t draws, RngStream& rng, std::size_t budget_factor) {
    const std::size_t k = models.size();
    if (k < 2) throw InvalidArgument("joint sampling needs at least two models");
    if (draws < 1) throw InvalidArgument("need at least one posterior draw");

    JointDrawSet out;
    out.rmst.assign(k, {});
    for (auto& v : out.rmst) v.reserve(draws);
    const std::size_t budget = budget_factor * draws;
    std::size_t accepted_total = 0;

    auto satisfied = [&](const std::vector<std::vector<double>>& batch, std::size_t j) {
        for (std::size_t a = 0; a + 1 < k; ++a) {
            const double lhs = batch[a][j];
            const double rhs = batch[a + 1][j];
            if (order == OrderConstraint::kNonIncreasing ? lhs < rhs : lhs > rhs) return false;
        }
        return true;
    };

    std::vector<std::vector<double>> batch(k);
    for (std::uint64_t round = 0; out.rmst[0].size() < draws; ++round) {
        if (out.proposals >= budget)
            throw AcceptanceRateTooLow("order-constrained sampling accepted " + std::to_string(out.rmst[0].size()) +
                                       " of " + std::to_string(draws) + " draws within the proposal budget");
        for (std::size_t a = 0; a < k; ++a) {
            RngStream stream = rng.child(round, a);
            batch[a] = sample_rmst(*models[a], horizon, draws, stream);
        }
        for (std::size_t j = 0; j < draws; ++j) {
            if (!satisfied(batch, j)) continue;
            ++accepted_total;
            if (out.rmst[0].size() < draws)
                for (std::size_t a = 0; a < k; ++a) out.rmst[a].push_back(batch[a][j]);
        }
        out.proposals += draws;
    }
    out.acceptance_rate = static_cast<double>(accepted_total) / static_cast<double>(out.proposals);
    return out;
}

void write_draws_csv(std::ostream& out, const JointDrawSet& draws) {
    out << "draw_id,arm,rmst\n";
    const std::size_t n = draws.rmst.empty() ? 0 : draws.rmst.front().size();
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t a = 0; a < draws.rmst.size(); ++a)
            out << j + 1 << ',' << a + 1 << ',' << draws.rmst[a][j] << '\n';
}

}  // namespace deint

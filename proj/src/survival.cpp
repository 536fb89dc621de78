#include "deint/survival.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include "deint/error.hpp"

namespace deint {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void validate_knots(const std::vector<Knot>& knots) {
    if (knots.empty()) throw InvalidArgument("piecewise curve needs at least one knot");
    if (knots.front().time != 0.0 || knots.front().survival != 1.0)
        throw InvalidArgument("piecewise curve must start at (0, 1)");
    for (std::size_t i = 1; i < knots.size(); ++i) {
        if (!(knots[i].time > knots[i - 1].time))
            throw InvalidArgument("knot times must be strictly increasing (knot " + std::to_string(i) + ")");
        if (!(knots[i].survival <= knots[i - 1].survival))
            throw InvalidArgument("survival must be non-increasing (knot " + std::to_string(i) + ")");
        if (!(knots[i].survival >= 0.0 && knots[i].survival <= 1.0))
            throw InvalidArgument("survival must lie in [0, 1] (knot " + std::to_string(i) + ")");
    }
}

// Maps a survival level u of the transformed law to the level of the base law.
double base_level(const Transform& t, double u) {
    switch (t.kind) {
        case TransformKind::kProportionalHazards:
            return std::pow(u, 1.0 / t.parameter);
        case TransformKind::kProportionalOdds:
            return u / (t.parameter * (1.0 - u) + u);
        case TransformKind::kAcceleratedFailureTime:
            return u;
    }
    return u;
}

double exponential_rmst(double rate, double horizon) {
    if (rate <= 0.0) return horizon;
    return -std::expm1(-rate * horizon) / rate;
}

}  // namespace

ScenarioDistribution ScenarioDistribution::exponential(double rate) {
    if (!(rate > 0.0) || !std::isfinite(rate)) throw InvalidArgument("exponential rate must be > 0");
    ScenarioDistribution d;
    d.kind_ = Kind::kExponential;
    d.rate_ = rate;
    return d;
}

ScenarioDistribution ScenarioDistribution::exponential_with_mean(double mean) {
    if (!(mean > 0.0)) throw InvalidArgument("exponential mean must be > 0");
    return exponential(1.0 / mean);
}

ScenarioDistribution ScenarioDistribution::exponential_with_rmst(double target, double horizon) {
    return exponential(exponential_rate_for_rmst(target, horizon));
}

ScenarioDistribution ScenarioDistribution::piecewise(std::vector<Knot> knots, TailRule tail) {
    validate_knots(knots);
    ScenarioDistribution d;
    d.kind_ = Kind::kPiecewise;
    d.tail_ = tail;
    if (tail == TailRule::kExponential && knots.size() >= 2) {
        const Knot& last = knots.back();
        const Knot& prev = knots[knots.size() - 2];
        if (last.survival > 0.0)
            d.tail_rate_ = std::log(prev.survival / last.survival) / (last.time - prev.time);
    }
    d.knots_ = std::move(knots);
    return d;
}

ScenarioDistribution ScenarioDistribution::no_event() { return piecewise({{0.0, 1.0}}, TailRule::kFlat); }

ScenarioDistribution ScenarioDistribution::transformed(const ScenarioDistribution& base, Transform transform) {
    if (!(transform.parameter > 0.0) || !std::isfinite(transform.parameter))
        throw InvalidArgument("transform parameter must be > 0");
    ScenarioDistribution d;
    d.kind_ = Kind::kTransformed;
    d.base_ = std::make_shared<const ScenarioDistribution>(base);
    d.transform_ = transform;
    return d;
}

double ScenarioDistribution::survival(double t) const {
    if (t < 0.0) return 1.0;
    switch (kind_) {
        case Kind::kExponential:
            return std::exp(-rate_ * t);
        case Kind::kPiecewise: {
            const Knot& last = knots_.back();
            if (t >= last.time) {
                if (tail_rate_ <= 0.0) return last.survival;
                return last.survival * std::exp(-tail_rate_ * (t - last.time));
            }
            auto it = std::upper_bound(knots_.begin(), knots_.end(), t,
                                       [](double v, const Knot& k) { return v < k.time; });
            return std::prev(it)->survival;
        }
        case Kind::kTransformed: {
            const double p = transform_.parameter;
            switch (transform_.kind) {
                case TransformKind::kProportionalHazards:
                    return std::pow(base_->survival(t), p);
                case TransformKind::kAcceleratedFailureTime:
                    return base_->survival(t / p);
                case TransformKind::kProportionalOdds: {
                    const double s = base_->survival(t);
                    return p * s / (1.0 - s + p * s);
                }
            }
        }
    }
    return 1.0;
}

double ScenarioDistribution::quantile(double u) const {
    switch (kind_) {
        case Kind::kExponential:
            return -std::log(u) / rate_;
        case Kind::kPiecewise: {
            for (const Knot& k : knots_)
                if (k.survival <= u) return k.time;
            const Knot& last = knots_.back();
            if (tail_rate_ <= 0.0) return kInf;
            return last.time + std::log(last.survival / u) / tail_rate_;
        }
        case Kind::kTransformed: {
            const double t = base_->quantile(base_level(transform_, u));
            return transform_.kind == TransformKind::kAcceleratedFailureTime ? t * transform_.parameter : t;
        }
    }
    return kInf;
}

std::vector<double> ScenarioDistribution::breakpoints(double horizon) const {
    std::vector<double> out;
    switch (kind_) {
        case Kind::kExponential:
            break;
        case Kind::kPiecewise:
            for (const Knot& k : knots_)
                if (k.time > 0.0 && k.time < horizon) out.push_back(k.time);
            break;
        case Kind::kTransformed:
            if (transform_.kind == TransformKind::kAcceleratedFailureTime) {
                for (double b : base_->breakpoints(horizon / transform_.parameter))
                    out.push_back(b * transform_.parameter);
            } else {
                out = base_->breakpoints(horizon);
            }
            break;
    }
    return out;
}

double sample_event_time(const ScenarioDistribution& dist, RngStream& rng) {
    return dist.quantile(rng.uniform());
}

double rmst(const ScenarioDistribution& dist, double horizon) {
    if (!(horizon > 0.0)) throw InvalidArgument("RMST horizon must be > 0");
    if (dist.kind() == ScenarioDistribution::Kind::kExponential) return exponential_rmst(dist.rate(), horizon);

    std::vector<double> cuts = dist.breakpoints(horizon);
    cuts.insert(cuts.begin(), 0.0);
    cuts.push_back(horizon);

    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double a = cuts[i];
        const double b = cuts[i + 1];
        if (b <= a) continue;
        if (dist.kind() == ScenarioDistribution::Kind::kPiecewise) {
            // Constant on [a, b) unless inside the tail.
            const Knot& last = dist.knots().back();
            if (a < last.time || dist.tail_rate() <= 0.0) {
                total += (b - a) * dist.survival(a);
            } else {
                total += dist.survival(a) * exponential_rmst(dist.tail_rate(), b - a);
            }
            continue;
        }
        total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
            [&dist](double t) { return dist.survival(t); }, a, b, 15, 1e-14);
    }
    return total;
}

ScenarioDistribution apply_transform(const ScenarioDistribution& base, Transform transform) {
    if (!(transform.parameter > 0.0) || !std::isfinite(transform.parameter))
        throw InvalidArgument("transform parameter must be > 0");
    if (transform.parameter == 1.0) return base;
    if (base.kind() == ScenarioDistribution::Kind::kExponential) {
        if (transform.kind == TransformKind::kProportionalHazards)
            return ScenarioDistribution::exponential(base.rate() * transform.parameter);
        if (transform.kind == TransformKind::kAcceleratedFailureTime)
            return ScenarioDistribution::exponential(base.rate() / transform.parameter);
    }
    return ScenarioDistribution::transformed(base, transform);
}

Transform solve_transform_to_rmst(const ScenarioDistribution& base, TransformKind family, double target,
                                  double horizon) {
    if (!(target > 0.0 && target < horizon))
        throw TargetUnreachable("target RMST must lie strictly between 0 and the horizon");
    const double base_value = rmst(base, horizon);
    if (std::abs(base_value - target) <= 1e-12) return {family, 1.0};

    auto gap = [&](double log_param) {
        return rmst(apply_transform(base, {family, std::exp(log_param)}), horizon) - target;
    };

    // RMST falls with the PH hazard ratio and rises with the AFT scale and
    // the PO odds ratio.
    const bool decreasing = family == TransformKind::kProportionalHazards;
    const bool move_up = (base_value > target) == decreasing;
    const double step = move_up ? 1.0 : -1.0;

    double lo = 0.0;
    double f_lo = base_value - target;
    double hi = step;
    double f_hi = gap(hi);
    double width = 1.0;
    while ((f_lo > 0) == (f_hi > 0) && f_hi != 0.0) {
        if (std::abs(hi) > 60.0) throw TargetUnreachable("transform family cannot reach the target RMST");
        lo = hi;
        f_lo = f_hi;
        width *= 2.0;
        hi = lo + step * width;
        f_hi = gap(hi);
    }
    double root = hi;
    if (f_hi != 0.0) {
        if (lo > hi) {
            std::swap(lo, hi);
            std::swap(f_lo, f_hi);
        }
        std::uintmax_t iterations = 300;
        const auto bracket = boost::math::tools::toms748_solve(
            gap, lo, hi, f_lo, f_hi, boost::math::tools::eps_tolerance<double>(52), iterations);
        const double a = bracket.first;
        const double b = bracket.second;
        root = std::abs(gap(a)) <= std::abs(gap(b)) ? a : b;
    }
    const Transform result{family, std::exp(root)};
    if (std::abs(rmst(apply_transform(base, result), horizon) - target) > 1e-6)
        throw TargetUnreachable("transform root-finding did not converge to the target RMST");
    return result;
}

double exponential_rate_for_rmst(double target, double horizon) {
    if (!(target > 0.0 && target < horizon))
        throw TargetUnreachable("exponential RMST must lie strictly between 0 and the horizon");
    // RMST is decreasing in the rate; solve on the log scale.
    auto gap = [&](double log_rate) { return exponential_rmst(std::exp(log_rate), horizon) - target; };
    double lo = std::log(1e-12 / horizon);
    double hi = std::log(1e6 / horizon);
    std::uintmax_t iterations = 300;
    const auto bracket =
        boost::math::tools::toms748_solve(gap, lo, hi, boost::math::tools::eps_tolerance<double>(52), iterations);
    const double a = bracket.first;
    const double b = bracket.second;
    return std::exp(std::abs(gap(a)) <= std::abs(gap(b)) ? a : b);
}

double KaplanMeierFit::survival_at(double t) const {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 1.0;
    return survival[static_cast<std::size_t>(std::distance(times.begin(), it)) - 1];
}

namespace {

// Orders by time, events before censorings at equal times.
bool observation_less(const CensoredObservation& a, const CensoredObservation& b) {
    if (a.time != b.time) return a.time < b.time;
    return a.event && !b.event;
}

}  // namespace

KaplanMeierFit kaplan_meier(std::span<const CensoredObservation> sample) {
    if (sample.empty()) throw InvalidArgument("Kaplan-Meier needs a nonempty sample");
    std::vector<CensoredObservation> sorted(sample.begin(), sample.end());
    for (const auto& o : sorted)
        if (!(o.time >= 0.0)) throw InvalidArgument("observation times must be >= 0");
    std::sort(sorted.begin(), sorted.end(), observation_less);

    KaplanMeierFit fit;
    int at_risk = static_cast<int>(sorted.size());
    double s = 1.0;
    std::size_t i = 0;
    while (i < sorted.size()) {
        const double t = sorted[i].time;
        int events = 0;
        int total = 0;
        while (i < sorted.size() && sorted[i].time == t) {
            events += sorted[i].event ? 1 : 0;
            ++total;
            ++i;
        }
        if (events > 0) {
            s *= 1.0 - static_cast<double>(events) / at_risk;
            fit.times.push_back(t);
            fit.survival.push_back(s);
            fit.at_risk.push_back(at_risk);
            fit.events.push_back(events);
        }
        at_risk -= total;
    }
    return fit;
}

double km_rmst(const KaplanMeierFit& fit, double horizon) {
    if (!(horizon > 0.0)) throw InvalidArgument("RMST horizon must be > 0");
    double area = 0.0;
    double prev = 0.0;
    double s = 1.0;
    for (std::size_t j = 0; j < fit.times.size() && fit.times[j] < horizon; ++j) {
        area += (fit.times[j] - prev) * s;
        s = fit.survival[j];
        prev = fit.times[j];
    }
    return area + (horizon - prev) * s;
}

double bootstrap_rmst_se(std::span<const CensoredObservation> sample, double horizon, int resamples,
                         RngStream& rng) {
    if (sample.size() < 2) throw InvalidArgument("bootstrap needs at least 2 observations");
    if (resamples < 2) throw InvalidArgument("bootstrap needs at least 2 resamples");
    if (!(horizon > 0.0)) throw InvalidArgument("RMST horizon must be > 0");
    if (std::none_of(sample.begin(), sample.end(), [](const auto& o) { return o.event; }))
        throw DegenerateSample("bootstrap sample has no events");

    // Resampling with replacement is done through per-observation
    // multiplicities over a pre-sorted copy, so each replicate is one pass.
    std::vector<CensoredObservation> sorted(sample.begin(), sample.end());
    std::sort(sorted.begin(), sorted.end(), observation_less);
    const std::size_t n = sorted.size();
    std::vector<int> weight(n);

    std::vector<double> values(static_cast<std::size_t>(resamples));
    for (int b = 0; b < resamples; ++b) {
        std::fill(weight.begin(), weight.end(), 0);
        for (std::size_t k = 0; k < n; ++k) {
            const auto idx = static_cast<std::size_t>((static_cast<unsigned __int128>(rng()) * n) >> 64);
            ++weight[idx];
        }
        double area = 0.0;
        double prev = 0.0;
        double s = 1.0;
        int at_risk = static_cast<int>(n);
        std::size_t i = 0;
        while (i < n && sorted[i].time < horizon && at_risk > 0) {
            const double t = sorted[i].time;
            int events = 0;
            int total = 0;
            while (i < n && sorted[i].time == t) {
                if (sorted[i].event) events += weight[i];
                total += weight[i];
                ++i;
            }
            if (events > 0) {
                area += (t - prev) * s;
                s *= 1.0 - static_cast<double>(events) / at_risk;
                prev = t;
            }
            at_risk -= total;
        }
        values[static_cast<std::size_t>(b)] = area + (horizon - prev) * s;
    }
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / resamples;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / (resamples - 1));
}

std::vector<Knot> read_curve_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    auto trim = [](std::string s) {
        while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
        std::size_t p = 0;
        while (p < s.size() && (s[p] == ' ' || s[p] == '\t')) ++p;
        return s.substr(p);
    };
    if (!std::getline(in, line)) throw ParseError("empty curve file", 1);
    ++line_no;
    if (trim(line) != "time_months,survival") throw ParseError("expected header 'time_months,survival'", line_no);

    std::vector<Knot> knots;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos)
            throw ParseError("expected two comma-separated fields", line_no);
        Knot k{};
        try {
            std::size_t used = 0;
            const std::string a = trim(line.substr(0, comma));
            const std::string b = trim(line.substr(comma + 1));
            k.time = std::stod(a, &used);
            if (used != a.size()) throw std::invalid_argument(a);
            k.survival = std::stod(b, &used);
            if (used != b.size()) throw std::invalid_argument(b);
        } catch (const std::exception&) {
            throw ParseError("non-numeric field", line_no);
        }
        if (knots.empty() && (k.time != 0.0 || k.survival != 1.0))
            throw ParseError("first row must be 0,1.0", line_no);
        if (!(k.survival >= 0.0 && k.survival <= 1.0)) throw ParseError("survival outside [0, 1]", line_no);
        if (!knots.empty()) {
            if (!(k.time > knots.back().time)) throw ParseError("times must be strictly increasing", line_no);
            if (k.survival > knots.back().survival) throw ParseError("survival must be non-increasing", line_no);
        }
        knots.push_back(k);
    }
    if (knots.empty()) throw ParseError("curve has no data rows", line_no);
    return knots;
}

}  // namespace deint

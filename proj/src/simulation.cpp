#include "deint/simulation.hpp"

#include <cmath>
#include <ostream>

#include "deint/comparators.hpp"
#include "deint/error.hpp"
#include "deint/parallel.hpp"
#include "deint/text.hpp"

namespace deint {

using nlohmann::json;

namespace {

constexpr double kAnnotationTolerance = 1e-6;

struct TrialSummary {
    std::vector<Verdict> verdicts;
    std::vector<int> enrolled;
    double duration = 0.0;
    int total = 0;
};

Estimate binomial(int hits, int sims) {
    const Proportion p = proportion(hits, sims);
    return {p.estimate, p.mc_se};
}

Estimate mean_estimate(const std::vector<double>& values) {
    const double n = static_cast<double>(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    return {mean, sd / std::sqrt(n)};
}

json estimate_to_json(const Estimate& e) { return {{"estimate", e.estimate}, {"mc_se", e.mc_se}}; }

ScenarioCharacteristics aggregate(const DesignConfig& config, const Scenario& scenario,
                                  const std::vector<TrialSummary>& trials) {
    const int sims = static_cast<int>(trials.size());
    const bool coprimary = config.mode == EndpointMode::kCoPrimary;
    ScenarioCharacteristics out;
    out.label = scenario.label;
    bool any_null = false;
    for (std::size_t a = 0; a < scenario.arms.size(); ++a) {
        ArmCharacteristics arm;
        arm.theta = rmst(scenario.arms[a].efficacy, config.horizon);
        if (scenario.arms[a].toxicity) arm.beta = rmst(*scenario.arms[a].toxicity, config.horizon);
        arm.null_hypothesis = arm.theta <= config.theta0 - config.delta + kAnnotationTolerance;
        if (coprimary && arm.beta) arm.null_hypothesis = arm.null_hypothesis || *arm.beta <= config.beta0 + kAnnotationTolerance;
        any_null = any_null || arm.null_hypothesis;

        int counts[5] = {0, 0, 0, 0, 0};
        std::vector<double> enrolled;
        enrolled.reserve(trials.size());
        for (const TrialSummary& t : trials) {
            ++counts[static_cast<int>(t.verdicts[a])];
            enrolled.push_back(t.enrolled[a]);
        }
        arm.not_tested = binomial(counts[static_cast<int>(Verdict::kNeverTested)], sims);
        arm.power = binomial(counts[static_cast<int>(Verdict::kNonInferior)], sims);
        arm.futility = binomial(counts[static_cast<int>(Verdict::kInferiorStop)], sims);
        arm.toxicity = binomial(counts[static_cast<int>(Verdict::kToxicityStop)], sims);
        arm.not_rejected = binomial(counts[static_cast<int>(Verdict::kNotRejected)], sims);
        arm.enrolled = mean_estimate(enrolled);
        out.arms.push_back(arm);
    }
    if (any_null) {
        int hits = 0;
        for (const TrialSummary& t : trials) {
            bool rejected_null = false;
            for (std::size_t a = 0; a < out.arms.size(); ++a)
                rejected_null = rejected_null || (out.arms[a].null_hypothesis && t.verdicts[a] == Verdict::kNonInferior);
            hits += rejected_null ? 1 : 0;
        }
        out.type_one_error = binomial(hits, sims);
    }
    std::vector<double> durations;
    std::vector<double> totals;
    for (const TrialSummary& t : trials) {
        durations.push_back(t.duration);
        totals.push_back(t.total);
    }
    out.duration = mean_estimate(durations);
    out.total_enrolled = mean_estimate(totals);
    return out;
}

}  // namespace

RngStream replicate_stream(std::uint64_t seed, std::size_t scenario, std::size_t replicate) {
    return RngStream(seed).child(stream_tag::kScenario, scenario).child(stream_tag::kReplicate, replicate);
}

OperatingCharacteristics simulate_oc(const TrialRunner& runner, const DesignConfig& config,
                                     const std::vector<Scenario>& scenarios, int sims, std::uint64_t seed,
                                     int workers) {
    if (sims < 1) throw InvalidArgument("need at least one simulation per scenario");
    OperatingCharacteristics oc;
    oc.sims = sims;
    oc.seed = seed;
    for (std::size_t s = 0; s < scenarios.size(); ++s) {
        const Scenario& scenario = scenarios[s];
        const auto trials = parallel_map<TrialSummary>(static_cast<std::size_t>(sims), workers, [&](std::size_t r) {
            const TrialRecord record = runner(scenario, replicate_stream(seed, s, r));
            TrialSummary summary;
            for (const ArmOutcome& arm : record.arms) {
                summary.verdicts.push_back(arm.verdict);
                summary.enrolled.push_back(arm.enrolled);
            }
            summary.duration = record.duration;
            summary.total = record.total_enrolled;
            return summary;
        });
        oc.scenarios.push_back(aggregate(config, scenario, trials));
    }
    return oc;
}

OperatingCharacteristics simulate_bayesian_oc(const DesignConfig& calibrated, const std::vector<Scenario>& scenarios,
                                              int sims, std::uint64_t seed, int workers) {
    const BayesianDesign design(calibrated);
    auto oc = simulate_oc([&](const Scenario& s, const RngStream& r) { return design.run(s, r); }, calibrated,
                          scenarios, sims, seed, workers);
    oc.design = "bayesian";
    return oc;
}

OperatingCharacteristics simulate_comparator_oc(const DesignConfig& config, const std::vector<Scenario>& scenarios,
                                                int sims, std::uint64_t seed, int workers) {
    if (!config.comparator) throw InvalidArgument("design has no comparator section");
    validate(config);
    const RciDesignConfig& rci = *config.comparator;
    auto oc = simulate_oc(
        [&](const Scenario& s, const RngStream& r) { return run_comparator_trial(config, rci, s, r); }, config,
        scenarios, sims, seed, workers);
    oc.design = "rci";
    return oc;
}

json oc_to_json(const OperatingCharacteristics& oc) {
    json scenarios = json::array();
    for (const auto& s : oc.scenarios) {
        json arms = json::array();
        for (std::size_t a = 0; a < s.arms.size(); ++a) {
            const ArmCharacteristics& arm = s.arms[a];
            json j = {{"arm", a + 1},
                      {"theta", arm.theta},
                      {"null_hypothesis", arm.null_hypothesis},
                      {"power", estimate_to_json(arm.power)},
                      {"futility", estimate_to_json(arm.futility)},
                      {"toxicity", estimate_to_json(arm.toxicity)},
                      {"not_tested", estimate_to_json(arm.not_tested)},
                      {"not_rejected", estimate_to_json(arm.not_rejected)},
                      {"enrolled", estimate_to_json(arm.enrolled)}};
            if (arm.beta) j["beta"] = *arm.beta;
            arms.push_back(std::move(j));
        }
        json js = {{"label", s.label},
                   {"arms", arms},
                   {"duration", estimate_to_json(s.duration)},
                   {"total_enrolled", estimate_to_json(s.total_enrolled)}};
        if (s.type_one_error) js["type_one_error"] = estimate_to_json(*s.type_one_error);
        scenarios.push_back(std::move(js));
    }
    return {{"design", oc.design}, {"sims", oc.sims}, {"seed", oc.seed}, {"scenarios", scenarios}};
}

void write_oc_csv(std::ostream& out, const OperatingCharacteristics& oc) {
    out << "scenario,arm,metric,estimate,mc_se\n";
    auto row = [&](const std::string& scenario, const std::string& arm, const char* metric, const Estimate& e) {
        out << scenario << ',' << arm << ',' << metric << ',' << format_number(e.estimate) << ','
            << format_number(e.mc_se) << '\n';
    };
    for (const auto& s : oc.scenarios) {
        for (std::size_t a = 0; a < s.arms.size(); ++a) {
            const std::string arm = std::to_string(a + 1);
            row(s.label, arm, "power", s.arms[a].power);
            row(s.label, arm, "futility", s.arms[a].futility);
            row(s.label, arm, "toxicity", s.arms[a].toxicity);
            row(s.label, arm, "not_tested", s.arms[a].not_tested);
            row(s.label, arm, "not_rejected", s.arms[a].not_rejected);
            row(s.label, arm, "enrolled", s.arms[a].enrolled);
        }
        if (s.type_one_error) row(s.label, "all", "type_one_error", *s.type_one_error);
        row(s.label, "all", "duration", s.duration);
        row(s.label, "all", "total_enrolled", s.total_enrolled);
    }
}

SampleSizeResult sample_size_search(const DesignConfig& design, const Scenario& scenario, double target_power,
                                    const std::vector<int>& grid, int sims, std::uint64_t seed, int workers) {
    if (grid.empty()) throw InvalidArgument("sample-size grid is empty");
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (grid[i] < 1 || (i > 0 && grid[i] <= grid[i - 1]))
            throw InvalidArgument("sample-size grid must be positive and strictly ascending");
    if (!(target_power >= 0.0 && target_power <= 1.0)) throw InvalidArgument("target power must lie in [0, 1]");
    if (scenario.arms.empty()) throw InvalidArgument("scenario has no arms");

    SampleSizeResult result;
    result.target_power = target_power;
    const Scenario first_arm{scenario.label, {scenario.arms.front()}};
    for (int m : grid) {
        const DesignConfig cfg = design.with_max_per_arm(m).single_arm();
        CalibrationOptions options;
        options.sims = sims;
        options.seed = seed;
        options.workers = workers;
        options.resimulate = false;
        const CalibrationResult calib = calibrate_design(cfg, options);
        const DesignConfig calibrated = apply_calibration(cfg, calib);
        const auto oc = simulate_bayesian_oc(calibrated, {first_arm}, sims, seed, workers);
        SampleSizePoint point{m, calib.s_ni, calib.s_i, calib.s_t, oc.scenarios.front().arms.front().power};
        if (!result.recommended && point.power.estimate >= target_power) result.recommended = m;
        result.curve.push_back(point);
    }
    return result;
}

void write_sample_size_csv(std::ostream& out, const SampleSizeResult& result) {
    out << "max_per_arm,s_ni,s_i,s_t,power,mc_se,meets_target\n";
    for (const auto& p : result.curve)
        out << p.max_per_arm << ',' << format_number(p.s_ni) << ',' << format_number(p.s_i) << ','
            << format_number(p.s_t) << ',' << format_number(p.power.estimate) << ',' << format_number(p.power.mc_se)
            << ',' << (p.power.estimate >= result.target_power ? 1 : 0) << '\n';
}

}  // namespace deint

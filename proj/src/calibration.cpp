#include "deint/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "deint/error.hpp"
#include "deint/io.hpp"
#include "deint/parallel.hpp"

namespace deint {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Stream keys below the calibration / re-simulation roots.
constexpr std::uint64_t kToxicityKey = 1;
constexpr std::uint64_t kInferiorityKey = 2;
constexpr std::uint64_t kNonInferiorityKey = 3;
constexpr std::uint64_t kInteriorKey = 4;

bool live(const BoundarySpec& b, int n) { return b.scale > 0.0 && b.can_fire(n); }

double futility_probability(const TracePoint& pt, const DesignConfig& config, FutilityTarget rule) {
    if (rule == FutilityTarget::kToxicity) return pt.p_toxic;
    return config.mode == EndpointMode::kCoPrimary ? pt.p_inferior_delta : pt.p_inferior;
}

const BoundarySpec& futility_boundary(const DesignConfig& config, FutilityTarget rule) {
    return rule == FutilityTarget::kToxicity ? config.b_t : config.b_i;
}

bool futility_stop(const TracePoint& pt, const DesignConfig& config) {
    const int n = pt.enrolled;
    if (config.mode == EndpointMode::kEfficacyOnly) return pt.p_inferior > boundary_value(config.b_i, n);
    if (pt.p_toxic > boundary_value(config.b_t, n)) return true;
    const bool low = pt.p_toxic > boundary_value(config.toxicity_margin_boundary(), n);
    return (low ? pt.p_inferior_delta_low : pt.p_inferior_delta) > boundary_value(config.b_i, n);
}

int first_live_of(std::initializer_list<const BoundarySpec*> rules) {
    int first = std::numeric_limits<int>::max();
    for (const BoundarySpec* b : rules) first = std::min(first, first_active_enrollment(*b));
    return first;
}

TraceOptions ni_trace_options(const DesignConfig& c) {
    TraceOptions o;
    o.efficacy = true;
    o.toxicity = c.mode == EndpointMode::kCoPrimary;
    o.first_enrollment = first_active_enrollment(c.b_ni);
    if (c.b_i.scale > 0.0) o.first_enrollment = std::min(o.first_enrollment, first_active_enrollment(c.b_i));
    if (o.toxicity && c.b_t.scale > 0.0)
        o.first_enrollment = std::min(o.first_enrollment, first_active_enrollment(c.b_t));
    return o;
}

TraceOptions futility_trace_options(const DesignConfig& c, FutilityTarget rule) {
    TraceOptions o;
    o.efficacy = rule == FutilityTarget::kInferiority;
    o.toxicity = rule == FutilityTarget::kToxicity;
    o.first_enrollment = first_live_of({&futility_boundary(c, rule)});
    return o;
}

ScenarioDistribution solve_to(const ScenarioDistribution& base, double target, double horizon) {
    return apply_transform(base, solve_transform_to_rmst(base, TransformKind::kProportionalHazards, target, horizon));
}

ScenarioDistribution toxicity_at_beta0(const DesignConfig& c) {
    const ScenarioDistribution g0 = c.reference_toxicity();
    if (std::abs(rmst(g0, c.horizon) - c.beta0) <= 1e-6) return g0;
    return solve_to(g0, c.beta0, c.horizon);
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_from(const json& v) { return v.is_null() ? kInf : v.get<double>(); }

json proportion_to_json(const Proportion& p) {
    return {{"estimate", p.estimate}, {"mc_se", p.mc_se}, {"sims", p.sims}};
}

Proportion proportion_from_json(const json& j) {
    return {j.at("estimate").get<double>(), j.at("mc_se").get<double>(), j.at("sims").get<int>()};
}

json scales_to_json(const std::vector<double>& v) {
    json arr = json::array();
    for (double x : v) arr.push_back(number_or_null(x));
    return arr;
}

std::vector<double> scales_from_json(const json& arr) {
    std::vector<double> out;
    for (const auto& x : arr) out.push_back(number_from(x));
    return out;
}

json rule_to_json(const RuleCalibration& r) {
    json j = {{"target", r.target}, {"scale", r.scale}, {"critical_scales", scales_to_json(r.critical_scales)}};
    if (r.resimulated) j["resimulated"] = proportion_to_json(*r.resimulated);
    return j;
}

RuleCalibration rule_from_json(const json& j) {
    RuleCalibration r;
    r.target = j.at("target").get<double>();
    r.scale = j.at("scale").get<double>();
    r.critical_scales = scales_from_json(j.at("critical_scales"));
    if (j.contains("resimulated")) r.resimulated = proportion_from_json(j.at("resimulated"));
    return r;
}

}  // namespace

int first_active_enrollment(const BoundarySpec& b) {
    // with activation == m_max the weight is 1 at m_max itself
    if (b.shape > 0.0 && b.activation < b.max_enrollment) return b.activation + 1;
    return std::max(b.activation, 1);
}

NullScenarioFamily build_null_family(const DesignConfig& config, const ScenarioDistribution& f0, EndpointMode mode) {
    const double target = config.theta0 - config.delta;
    if (!(rmst(f0, config.horizon) > target))
        throw TargetUnreachable("the reference efficacy law must have RMST above theta0 - delta");
    NullScenarioFamily family;
    const std::pair<TransformKind, const char*> kinds[] = {{TransformKind::kProportionalHazards, "ph"},
                                                           {TransformKind::kAcceleratedFailureTime, "aft"},
                                                           {TransformKind::kProportionalOdds, "po"}};
    for (const auto& [kind, name] : kinds) {
        ArmScenario arm{apply_transform(f0, solve_transform_to_rmst(f0, kind, target, config.horizon)), {}};
        if (mode == EndpointMode::kCoPrimary) {
            arm.toxicity = ScenarioDistribution::no_event();
            family.members.push_back({std::string("efficacy-") + name + "+no-ae", std::move(arm)});
        } else {
            family.members.push_back({name, std::move(arm)});
        }
    }
    if (mode == EndpointMode::kCoPrimary) family.members.push_back({"soc+toxicity-beta0", {f0, toxicity_at_beta0(config)}});
    return family;
}

double lower_quantile(std::vector<double> values, double q) {
    if (values.empty()) throw InvalidArgument("quantile of an empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw InvalidArgument("quantile level must lie in [0, 1]");
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    auto index = static_cast<std::size_t>(std::ceil(q * n - 1e-9));
    index = std::clamp<std::size_t>(index, 1, values.size());
    return values[index - 1];
}

double critical_scale_ni(const ArmTrace& trace, const DesignConfig& config) {
    if (trace.points.empty()) throw InvalidArgument("empty trace");
    const bool coprimary = config.mode == EndpointMode::kCoPrimary;
    double best = kInf;
    for (const TracePoint& pt : trace.points) {
        const int n = pt.enrolled;
        if (!pt.computed) {
            if (config.b_ni.can_fire(n) || live(config.b_i, n) || (coprimary && live(config.b_t, n)))
                throw InvalidArgument("trace has no posterior summaries at an interim where the design can stop");
            continue;
        }
        best = std::min(best, critical_scale(config.b_ni, n, coprimary ? pt.p_joint : pt.p_non_inferior));
        if (futility_stop(pt, config)) break;
    }
    return std::max(best, 0.0);
}

double critical_scale_futility(const ArmTrace& trace, const DesignConfig& config, FutilityTarget rule) {
    if (trace.points.empty()) throw InvalidArgument("empty trace");
    const BoundarySpec& b = futility_boundary(config, rule);
    double best = kInf;
    for (const TracePoint& pt : trace.points) {
        if (!pt.computed) {
            if (b.can_fire(pt.enrolled))
                throw InvalidArgument("trace has no posterior summaries at an interim where the rule is active");
            continue;
        }
        best = std::min(best, critical_scale(b, pt.enrolled, futility_probability(pt, config, rule)));
    }
    return std::max(best, 0.0);
}

Proportion proportion(int hits, int sims) {
    if (sims < 1) throw InvalidArgument("proportion of zero simulations");
    const double p = static_cast<double>(hits) / sims;
    return {p, std::sqrt(p * (1.0 - p) / sims), sims};
}

NiCalibration calibrate_s_ni(const DesignConfig& config, const NullScenarioFamily& family, int sims,
                             const RngStream& stream, int workers) {
    if (sims < 100) throw InvalidArgument("calibration needs at least 100 simulations");
    if (family.members.empty()) throw InvalidArgument("empty null scenario family");
    const BayesianDesign design(config.single_arm());
    const DesignConfig& c = design.config();
    const TraceOptions options = ni_trace_options(c);
    const bool coprimary = c.mode == EndpointMode::kCoPrimary;

    NiCalibration out;
    out.scale = kInf;
    for (std::size_t m = 0; m < family.members.size(); ++m) {
        const NullScenarioMember& member = family.members[m];
        const RngStream member_stream = stream.child(m);
        MemberCalibration mc;
        mc.label = member.label;
        mc.critical_scales = parallel_map<double>(static_cast<std::size_t>(sims), workers, [&](std::size_t i) {
            return critical_scale_ni(trace_single_arm(design, member.arm, member_stream.child(i), options), c);
        });
        double q = lower_quantile(mc.critical_scales, c.alpha);
        // The co-primary rule fires on ">=": step below the quantile so the
        // trials at the quantile itself do not reject.
        if (coprimary && std::isfinite(q)) q = std::nextafter(q, 0.0);
        mc.scale = std::clamp(q, 0.0, 1.0);
        out.scale = std::min(out.scale, mc.scale);
        out.members.push_back(std::move(mc));
    }
    return out;
}

RuleCalibration calibrate_futility_scale(const DesignConfig& config, const ArmScenario& scenario, double target,
                                         FutilityTarget rule, int sims, const RngStream& stream, int workers) {
    if (!(target >= 0.0 && target < 1.0)) throw InvalidArgument("early-stop target must lie in [0, 1)");
    RuleCalibration out;
    out.target = target;
    if (target == 0.0) return out;
    if (sims < 100) throw InvalidArgument("calibration needs at least 100 simulations");
    const BayesianDesign design(config.single_arm());
    const TraceOptions options = futility_trace_options(design.config(), rule);
    out.critical_scales = parallel_map<double>(static_cast<std::size_t>(sims), workers, [&](std::size_t i) {
        return critical_scale_futility(trace_single_arm(design, scenario, stream.child(i), options), design.config(),
                                       rule);
    });
    out.scale = std::clamp(lower_quantile(out.critical_scales, target), 0.0, 1.0);
    return out;
}

Proportion futility_stop_fraction(const DesignConfig& config, const ArmScenario& scenario, FutilityTarget rule,
                                  int sims, const RngStream& stream, int workers) {
    const BayesianDesign design(config.single_arm());
    const DesignConfig& c = design.config();
    const BoundarySpec& b = futility_boundary(c, rule);
    const TraceOptions options = futility_trace_options(c, rule);
    const auto stopped = parallel_map<int>(static_cast<std::size_t>(sims), workers, [&](std::size_t i) {
        const ArmTrace trace = trace_single_arm(design, scenario, stream.child(i), options);
        for (const TracePoint& pt : trace.points)
            if (pt.computed && futility_probability(pt, c, rule) > boundary_value(b, pt.enrolled)) return 1;
        return 0;
    });
    int hits = 0;
    for (int s : stopped) hits += s;
    return proportion(hits, sims);
}

Proportion rejection_rate(const DesignConfig& config, const ArmScenario& scenario, int sims, const RngStream& stream,
                          int workers) {
    const BayesianDesign design(config.single_arm());
    const Scenario scen{"null", {scenario}};
    const auto rejected = parallel_map<int>(static_cast<std::size_t>(sims), workers, [&](std::size_t i) {
        return design.run(scen, stream.child(i)).arms.front().verdict == Verdict::kNonInferior ? 1 : 0;
    });
    int hits = 0;
    for (int r : rejected) hits += r;
    return proportion(hits, sims);
}

CalibrationResult calibrate_design(const DesignConfig& config, const CalibrationOptions& options) {
    validate(config);
    DesignConfig work = config.single_arm();
    const bool coprimary = work.mode == EndpointMode::kCoPrimary;
    const RngStream calibration = RngStream(options.seed).child(stream_tag::kCalibration);
    const RngStream resimulation = RngStream(options.seed).child(stream_tag::kResimulation);
    const int sims = options.sims;

    CalibrationResult result;
    result.tool_version = std::string(kToolVersion);
    result.config_digest = config_digest(config);
    result.seed = options.seed;
    result.sims = sims;
    result.alpha = work.alpha;

    const ScenarioDistribution f0 = work.reference_efficacy();
    const ScenarioDistribution f_null = solve_to(f0, work.theta0 - work.delta, work.horizon);
    std::optional<ScenarioDistribution> g0;
    if (coprimary) g0 = toxicity_at_beta0(work);

    if (coprimary && work.p_toxicity) {
        const ArmScenario scenario{f0, g0};
        RuleCalibration rc = calibrate_futility_scale(work, scenario, *work.p_toxicity, FutilityTarget::kToxicity,
                                                      sims, calibration.child(kToxicityKey), options.workers);
        work.b_t.scale = rc.scale;
        if (options.resimulate && rc.target > 0.0)
            rc.resimulated = futility_stop_fraction(work, scenario, FutilityTarget::kToxicity, sims,
                                                    resimulation.child(kToxicityKey), options.workers);
        result.toxicity = std::move(rc);
    }
    if (work.p_inferiority) {
        const ArmScenario scenario{f_null, g0};
        RuleCalibration rc = calibrate_futility_scale(work, scenario, *work.p_inferiority,
                                                      FutilityTarget::kInferiority, sims,
                                                      calibration.child(kInferiorityKey), options.workers);
        work.b_i.scale = rc.scale;
        if (options.resimulate && rc.target > 0.0)
            rc.resimulated = futility_stop_fraction(work, scenario, FutilityTarget::kInferiority, sims,
                                                    resimulation.child(kInferiorityKey), options.workers);
        result.inferiority = std::move(rc);
    }
    result.s_t = coprimary ? work.b_t.scale : 0.0;
    result.s_i = work.b_i.scale;

    const NullScenarioFamily family = build_null_family(work, f0, work.mode);
    NiCalibration ni = calibrate_s_ni(work, family, sims, calibration.child(kNonInferiorityKey), options.workers);
    work.b_ni.scale = ni.scale;
    result.s_ni = ni.scale;
    result.members = std::move(ni.members);

    if (options.resimulate) {
        std::size_t worst = 0;
        for (std::size_t m = 1; m < result.members.size(); ++m)
            if (result.members[m].scale < result.members[worst].scale) worst = m;
        result.resimulations.push_back(
            {family.members[worst].label, rejection_rate(work, family.members[worst].arm, sims,
                                                         resimulation.child(kNonInferiorityKey), options.workers)});
        if (coprimary) {
            result.resimulations.push_back(
                {"interior-null", rejection_rate(work, ArmScenario{f_null, g0}, sims,
                                                 resimulation.child(kInteriorKey), options.workers)});
        }
    }
    return result;
}

CalibrationResult calibrate_coprimary(const DesignConfig& config, const CalibrationOptions& options) {
    if (config.mode != EndpointMode::kCoPrimary) throw InvalidArgument("design is not in co-primary mode");
    return calibrate_design(config, options);
}

DesignConfig apply_calibration(const DesignConfig& config, const CalibrationResult& result) {
    DesignConfig out = config;
    out.b_ni.scale = result.s_ni;
    out.b_i.scale = result.s_i;
    if (out.mode == EndpointMode::kCoPrimary) out.b_t.scale = result.s_t;
    validate(out);
    return out;
}

json calibration_to_json(const CalibrationResult& r) {
    json members = json::array();
    for (const auto& m : r.members)
        members.push_back({{"label", m.label}, {"scale", m.scale}, {"critical_scales", scales_to_json(m.critical_scales)}});
    json resims = json::array();
    for (const auto& s : r.resimulations) resims.push_back({{"label", s.label}, {"rejection", proportion_to_json(s.rejection)}});
    json j = {{"tool_version", r.tool_version},
              {"config_digest", r.config_digest},
              {"seed", r.seed},
              {"sims", r.sims},
              {"alpha", r.alpha},
              {"s_ni", r.s_ni},
              {"s_i", r.s_i},
              {"s_t", r.s_t},
              {"members", members},
              {"resimulations", resims}};
    if (r.inferiority) j["inferiority"] = rule_to_json(*r.inferiority);
    if (r.toxicity) j["toxicity"] = rule_to_json(*r.toxicity);
    return j;
}

CalibrationResult calibration_from_json(const json& j) {
    try {
        CalibrationResult r;
        r.tool_version = j.at("tool_version").get<std::string>();
        r.config_digest = j.at("config_digest").get<std::string>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.sims = j.at("sims").get<int>();
        r.alpha = j.at("alpha").get<double>();
        r.s_ni = j.at("s_ni").get<double>();
        r.s_i = j.at("s_i").get<double>();
        r.s_t = j.at("s_t").get<double>();
        for (const auto& m : j.at("members"))
            r.members.push_back({m.at("label").get<std::string>(), m.at("scale").get<double>(),
                                 scales_from_json(m.at("critical_scales"))});
        for (const auto& s : j.at("resimulations"))
            r.resimulations.push_back({s.at("label").get<std::string>(), proportion_from_json(s.at("rejection"))});
        if (j.contains("inferiority")) r.inferiority = rule_from_json(j.at("inferiority"));
        if (j.contains("toxicity")) r.toxicity = rule_from_json(j.at("toxicity"));
        return r;
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("malformed calibration file: ") + e.what());
    }
}

}  // namespace deint

#include "deint/io.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>

namespace deint {

using nlohmann::json;

namespace {

/// Reads the members of one JSON object and rejects keys nobody asked for.
class ObjectReader {
   public:
    ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw FieldError(path_.empty() ? "document" : path_, "expected a JSON object");
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key) && !j_.at(key).is_null();
    }

    const json& at(const std::string& key) {
        if (!has(key)) throw FieldError(field(key), "required key is missing");
        return j_.at(key);
    }

    double number(const std::string& key) {
        const json& v = at(key);
        if (!v.is_number()) throw FieldError(field(key), "expected a number");
        return v.get<double>();
    }
    double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

    int integer(const std::string& key) {
        const json& v = at(key);
        if (!v.is_number_integer()) throw FieldError(field(key), "expected an integer");
        return v.get<int>();
    }
    int integer(const std::string& key, int fallback) { return has(key) ? integer(key) : fallback; }

    bool boolean(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_boolean()) throw FieldError(field(key), "expected true or false");
        return v.get<bool>();
    }

    std::string text(const std::string& key) {
        const json& v = at(key);
        if (!v.is_string()) throw FieldError(field(key), "expected a string");
        return v.get<std::string>();
    }
    std::string text(const std::string& key, const std::string& fallback) { return has(key) ? text(key) : fallback; }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw FieldError(field(it.key()), "unknown key");
    }

   private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

template <class F>
auto wrap(const std::string& field, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const FieldError&) {
        throw;
    } catch (const Error& e) {
        throw FieldError(field, e.what());
    }
}

TransformKind transform_kind(const std::string& name, const std::string& field) {
    if (name == "ph") return TransformKind::kProportionalHazards;
    if (name == "aft") return TransformKind::kAcceleratedFailureTime;
    if (name == "po") return TransformKind::kProportionalOdds;
    throw FieldError(field, "unknown transform '" + name + "' (expected ph, aft or po)");
}

std::string transform_name(TransformKind k) {
    switch (k) {
        case TransformKind::kProportionalHazards: return "ph";
        case TransformKind::kAcceleratedFailureTime: return "aft";
        case TransformKind::kProportionalOdds: return "po";
    }
    return "ph";
}

BoundarySpec boundary_from_json(const json& j, const std::string& field, int m_max) {
    ObjectReader r(j, field);
    BoundarySpec b;
    b.scale = r.number("scale", 0.0);
    b.shape = r.number("shape");
    b.activation = r.integer("activation", 0);
    b.max_enrollment = m_max;
    r.finish();
    return b;
}

json boundary_to_json(const BoundarySpec& b) {
    return {{"scale", b.scale}, {"shape", b.shape}, {"activation", b.activation}};
}

PriorSpec prior_from_json(const json& j, const std::string& field, double horizon,
                          const std::filesystem::path& base_dir) {
    ObjectReader r(j, field);
    PriorSpec p;
    p.center = distribution_from_json(r.at("center"), horizon, base_dir, r.field("center"));
    p.weight = r.number("weight");
    r.finish();
    return p;
}

json prior_to_json(const PriorSpec& p) { return {{"center", distribution_to_json(p.center)}, {"weight", p.weight}}; }

SpendingKind spending_kind(const std::string& name, const std::string& field) {
    if (name == "obrien-fleming") return SpendingKind::kOBrienFleming;
    if (name == "pocock") return SpendingKind::kPocock;
    if (name == "linear") return SpendingKind::kLinear;
    throw FieldError(field, "unknown spending function '" + name + "' (expected obrien-fleming, pocock or linear)");
}

std::string spending_name(SpendingKind k) {
    switch (k) {
        case SpendingKind::kOBrienFleming: return "obrien-fleming";
        case SpendingKind::kPocock: return "pocock";
        case SpendingKind::kLinear: return "linear";
    }
    return "obrien-fleming";
}

SpendingFunction spending_from_json(const json& j, const std::string& field, SpendingFunction fallback) {
    ObjectReader r(j, field);
    SpendingFunction sf = fallback;
    sf.kind = spending_kind(r.text("kind", spending_name(fallback.kind)), r.field("kind"));
    sf.alpha = r.number("alpha", fallback.alpha);
    r.finish();
    return sf;
}

json spending_to_json(const SpendingFunction& sf) { return {{"kind", spending_name(sf.kind)}, {"alpha", sf.alpha}}; }

FutilityRule futility_rule(const std::string& name, const std::string& field) {
    if (name == "none") return FutilityRule::kNone;
    if (name == "F1") return FutilityRule::kPValue0025;
    if (name == "F2") return FutilityRule::kPValue05;
    if (name == "F3") return FutilityRule::kRci;
    throw FieldError(field, "unknown futility rule '" + name + "' (expected none, F1, F2 or F3)");
}

std::string futility_name(FutilityRule r) {
    switch (r) {
        case FutilityRule::kNone: return "none";
        case FutilityRule::kPValue0025: return "F1";
        case FutilityRule::kPValue05: return "F2";
        case FutilityRule::kRci: return "F3";
    }
    return "none";
}

RciDesignConfig comparator_from_json(const json& j, const DesignConfig& parent) {
    ObjectReader r(j, "comparator");
    RciDesignConfig c;
    c.theta0 = parent.theta0;
    c.delta = parent.delta;
    c.horizon = parent.horizon;
    c.ni_spending.alpha = parent.alpha;
    if (r.has("ni_spending")) c.ni_spending = spending_from_json(r.at("ni_spending"), r.field("ni_spending"), c.ni_spending);
    c.futility = futility_rule(r.text("futility", "none"), r.field("futility"));
    if (r.has("futility_spending"))
        c.futility_spending = spending_from_json(r.at("futility_spending"), r.field("futility_spending"), c.futility_spending);
    c.min_enrollment = r.integer("min_enrollment", c.min_enrollment);
    c.theta0 = r.number("theta0", c.theta0);
    c.delta = r.number("delta", c.delta);
    c.horizon = r.number("horizon", c.horizon);
    c.bootstrap_resamples = r.integer("bootstrap_resamples", c.bootstrap_resamples);
    r.finish();
    return c;
}

json comparator_to_json(const RciDesignConfig& c) {
    return {{"ni_spending", spending_to_json(c.ni_spending)},
            {"futility", futility_name(c.futility)},
            {"futility_spending", spending_to_json(c.futility_spending)},
            {"min_enrollment", c.min_enrollment},
            {"theta0", c.theta0},
            {"delta", c.delta},
            {"horizon", c.horizon},
            {"bootstrap_resamples", c.bootstrap_resamples}};
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json parse_json_text(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1;
        const std::size_t end = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
        for (std::size_t i = 0; i < end; ++i) line += text[i] == '\n' ? 1 : 0;
        throw ParseError(what + ": malformed JSON (" + std::string(e.what()) + ")", line);
    }
}

}  // namespace

ScenarioDistribution distribution_from_json(const json& j, double default_horizon,
                                            const std::filesystem::path& base_dir, const std::string& field) {
    ObjectReader r(j, field);
    const std::string kind = r.text("kind");
    ScenarioDistribution out = ScenarioDistribution::no_event();
    if (kind == "exponential") {
        const int given = int(r.has("rate")) + int(r.has("mean")) + int(r.has("rmst"));
        if (given != 1) throw FieldError(field, "exponential laws take exactly one of rate, mean, rmst");
        if (r.has("rate")) {
            out = wrap(r.field("rate"), [&] { return ScenarioDistribution::exponential(r.number("rate")); });
        } else if (r.has("mean")) {
            out = wrap(r.field("mean"), [&] { return ScenarioDistribution::exponential_with_mean(r.number("mean")); });
        } else {
            const double horizon = r.number("horizon", default_horizon);
            out = wrap(r.field("rmst"),
                       [&] { return ScenarioDistribution::exponential_with_rmst(r.number("rmst"), horizon); });
        }
    } else if (kind == "piecewise") {
        const std::string tail_name = r.text("tail", "exponential");
        if (tail_name != "exponential" && tail_name != "flat")
            throw FieldError(r.field("tail"), "expected exponential or flat");
        const TailRule tail = tail_name == "flat" ? TailRule::kFlat : TailRule::kExponential;
        std::vector<Knot> knots;
        if (r.has("csv") == r.has("knots")) throw FieldError(field, "piecewise laws take exactly one of knots, csv");
        if (r.has("csv")) {
            std::filesystem::path p = r.text("csv");
            if (p.is_relative()) p = base_dir / p;
            std::ifstream in(p);
            if (!in) throw FieldError(r.field("csv"), "cannot open " + p.string());
            try {
                knots = read_curve_csv(in);
            } catch (const ParseError& e) {
                throw FieldError(r.field("csv"), p.string() + ": " + e.what());
            }
        } else {
            const json& arr = r.at("knots");
            if (!arr.is_array()) throw FieldError(r.field("knots"), "expected [[time, survival], ...]");
            for (const auto& k : arr) {
                if (!k.is_array() || k.size() != 2 || !k[0].is_number() || !k[1].is_number())
                    throw FieldError(r.field("knots"), "expected [[time, survival], ...]");
                knots.push_back({k[0].get<double>(), k[1].get<double>()});
            }
        }
        out = wrap(r.field("knots"), [&] { return ScenarioDistribution::piecewise(std::move(knots), tail); });
    } else if (kind == "no-event") {
        out = ScenarioDistribution::no_event();
    } else if (kind == "transformed") {
        const ScenarioDistribution base =
            distribution_from_json(r.at("base"), default_horizon, base_dir, r.field("base"));
        const TransformKind tk = transform_kind(r.text("transform"), r.field("transform"));
        if (r.has("parameter") == r.has("rmst"))
            throw FieldError(field, "transformed laws take exactly one of parameter, rmst");
        if (r.has("parameter")) {
            out = wrap(r.field("parameter"), [&] {
                return ScenarioDistribution::transformed(base, Transform{tk, r.number("parameter")});
            });
        } else {
            const double horizon = r.number("horizon", default_horizon);
            out = wrap(r.field("rmst"), [&] {
                return apply_transform(base, solve_transform_to_rmst(base, tk, r.number("rmst"), horizon));
            });
        }
    } else {
        throw FieldError(r.field("kind"),
                         "unknown law '" + kind + "' (expected exponential, piecewise, no-event or transformed)");
    }
    r.finish();
    return out;
}

json distribution_to_json(const ScenarioDistribution& dist) {
    switch (dist.kind()) {
        case ScenarioDistribution::Kind::kExponential:
            return {{"kind", "exponential"}, {"rate", dist.rate()}};
        case ScenarioDistribution::Kind::kPiecewise: {
            json knots = json::array();
            for (const Knot& k : dist.knots()) knots.push_back({k.time, k.survival});
            return {{"kind", "piecewise"},
                    {"knots", knots},
                    {"tail", dist.tail() == TailRule::kFlat ? "flat" : "exponential"}};
        }
        case ScenarioDistribution::Kind::kTransformed:
            return {{"kind", "transformed"},
                    {"base", distribution_to_json(dist.base())},
                    {"transform", transform_name(dist.transform().kind)},
                    {"parameter", dist.transform().parameter}};
    }
    return {};
}

DesignConfig design_from_json(const json& j, const std::filesystem::path& base_dir) {
    ObjectReader r(j, "");
    DesignConfig c;
    const std::string mode = r.text("mode", "efficacy-only");
    if (mode == "efficacy-only")
        c.mode = EndpointMode::kEfficacyOnly;
    else if (mode == "co-primary")
        c.mode = EndpointMode::kCoPrimary;
    else
        throw FieldError("mode", "expected efficacy-only or co-primary");
    const bool coprimary = c.mode == EndpointMode::kCoPrimary;

    c.arms = r.integer("arms", 1);
    c.horizon = r.number("horizon", 24.0);
    c.theta0 = r.number("theta0");
    c.delta = r.number("delta");
    c.delta_low = r.number("delta_low", c.delta);
    if (coprimary) {
        c.beta0 = r.number("beta0");
        c.delta_beta = r.number("delta_beta", 0.0);
    }
    if (r.has("arm_margins")) {
        const json& arr = r.at("arm_margins");
        if (!arr.is_array()) throw FieldError("arm_margins", "expected an array of numbers");
        for (const auto& v : arr) {
            if (!v.is_number()) throw FieldError("arm_margins", "expected an array of numbers");
            c.arm_margins.push_back(v.get<double>());
        }
    }

    c.max_per_arm = r.integer("max_per_arm");
    c.max_total = r.integer("max_total", c.max_per_arm * c.arms);
    c.b_ni = boundary_from_json(r.at("b_ni"), "b_ni", c.max_per_arm);
    c.b_i = r.has("b_i") ? boundary_from_json(r.at("b_i"), "b_i", c.max_per_arm)
                         : BoundarySpec{0.0, 0.0, 0, c.max_per_arm};
    if (coprimary) {
        c.b_t = boundary_from_json(r.at("b_t"), "b_t", c.max_per_arm);
        if (r.has("B_t")) c.margin_boundary = boundary_from_json(r.at("B_t"), "B_t", c.max_per_arm);
    } else {
        c.b_t = BoundarySpec{0.0, 0.0, 0, c.max_per_arm};
    }

    c.followup = r.number("followup", c.followup);
    c.accrual_rate = r.number("accrual_rate", c.accrual_rate);
    const std::string accrual = r.text("accrual", "poisson");
    if (accrual == "poisson")
        c.accrual = AccrualMode::kPoisson;
    else if (accrual == "deterministic")
        c.accrual = AccrualMode::kDeterministic;
    else
        throw FieldError("accrual", "expected poisson or deterministic");
    c.interim_period = r.number("interim_period", c.interim_period);
    c.alpha = r.number("alpha", c.alpha);

    c.efficacy_prior = prior_from_json(r.at("efficacy_prior"), "efficacy_prior", c.horizon, base_dir);
    if (coprimary) c.toxicity_prior = prior_from_json(r.at("toxicity_prior"), "toxicity_prior", c.horizon, base_dir);
    c.grid_step = r.number("grid_step", c.grid_step);
    c.grid_horizon = r.number("grid_horizon", c.grid_horizon);
    c.posterior_draws = r.integer("posterior_draws", c.posterior_draws);
    c.monotone_efficacy = r.boolean("monotone_efficacy", false);
    c.monotone_toxicity = r.boolean("monotone_toxicity", false);

    if (r.has("soc_efficacy"))
        c.soc_efficacy = distribution_from_json(r.at("soc_efficacy"), c.horizon, base_dir, "soc_efficacy");
    if (r.has("soc_toxicity"))
        c.soc_toxicity = distribution_from_json(r.at("soc_toxicity"), c.horizon, base_dir, "soc_toxicity");
    if (r.has("p_inferiority")) c.p_inferiority = r.number("p_inferiority");
    if (r.has("p_toxicity")) c.p_toxicity = r.number("p_toxicity");
    if (r.has("comparator")) c.comparator = comparator_from_json(r.at("comparator"), c);
    r.finish();
    return c;
}

json design_to_json(const DesignConfig& c) {
    const bool coprimary = c.mode == EndpointMode::kCoPrimary;
    json j = {
        {"mode", coprimary ? "co-primary" : "efficacy-only"},
        {"arms", c.arms},
        {"horizon", c.horizon},
        {"theta0", c.theta0},
        {"delta", c.delta},
        {"delta_low", c.delta_low},
        {"max_per_arm", c.max_per_arm},
        {"max_total", c.max_total},
        {"b_ni", boundary_to_json(c.b_ni)},
        {"b_i", boundary_to_json(c.b_i)},
        {"followup", c.followup},
        {"accrual_rate", c.accrual_rate},
        {"accrual", c.accrual == AccrualMode::kPoisson ? "poisson" : "deterministic"},
        {"interim_period", c.interim_period},
        {"alpha", c.alpha},
        {"efficacy_prior", prior_to_json(c.efficacy_prior)},
        {"grid_step", c.grid_step},
        {"grid_horizon", c.grid_horizon},
        {"posterior_draws", c.posterior_draws},
        {"monotone_efficacy", c.monotone_efficacy},
        {"monotone_toxicity", c.monotone_toxicity},
    };
    if (coprimary) {
        j["beta0"] = c.beta0;
        j["delta_beta"] = c.delta_beta;
        j["b_t"] = boundary_to_json(c.b_t);
        if (c.margin_boundary) j["B_t"] = boundary_to_json(*c.margin_boundary);
        j["toxicity_prior"] = prior_to_json(c.toxicity_prior);
    }
    if (!c.arm_margins.empty()) j["arm_margins"] = c.arm_margins;
    if (c.soc_efficacy) j["soc_efficacy"] = distribution_to_json(*c.soc_efficacy);
    if (c.soc_toxicity) j["soc_toxicity"] = distribution_to_json(*c.soc_toxicity);
    if (c.p_inferiority) j["p_inferiority"] = *c.p_inferiority;
    if (c.p_toxicity) j["p_toxicity"] = *c.p_toxicity;
    if (c.comparator) j["comparator"] = comparator_to_json(*c.comparator);
    return j;
}

std::string config_digest(const DesignConfig& config) {
    const std::string canonical = design_to_json(config).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : canonical) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

DesignDocument load_design(const std::filesystem::path& path) {
    DesignDocument doc;
    doc.text = read_file(path);
    const json j = parse_json_text(doc.text, path.string());
    doc.config = design_from_json(j, path.parent_path());
    return doc;
}

std::size_t line_of_key(std::string_view text, std::string_view key) {
    const auto dot = key.rfind('.');
    if (dot != std::string_view::npos) key = key.substr(dot + 1);
    const std::string needle = "\"" + std::string(key) + "\"";
    std::size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string_view::npos) {
        std::size_t after = pos + needle.size();
        while (after < text.size() && (text[after] == ' ' || text[after] == '\t' || text[after] == '\n' ||
                                       text[after] == '\r'))
            ++after;
        if (after < text.size() && text[after] == ':') {
            std::size_t line = 1;
            for (std::size_t i = 0; i < pos; ++i) line += text[i] == '\n' ? 1 : 0;
            return line;
        }
        pos = after;
    }
    return 0;
}

std::vector<Scenario> scenarios_from_json(const json& j, double horizon, const std::filesystem::path& base_dir) {
    ObjectReader root(j, "");
    const json& list = root.at("scenarios");
    if (!list.is_array() || list.empty()) throw FieldError("scenarios", "expected a non-empty array");
    std::vector<Scenario> out;
    for (std::size_t s = 0; s < list.size(); ++s) {
        const std::string path = "scenarios[" + std::to_string(s) + "]";
        ObjectReader r(list[s], path);
        Scenario scen;
        scen.label = r.text("label", "scenario-" + std::to_string(s + 1));
        const json& arms = r.at("arms");
        if (!arms.is_array() || arms.empty()) throw FieldError(r.field("arms"), "expected a non-empty array");
        for (std::size_t a = 0; a < arms.size(); ++a) {
            const std::string arm_path = r.field("arms") + "[" + std::to_string(a) + "]";
            ObjectReader ar(arms[a], arm_path);
            ArmScenario arm{distribution_from_json(ar.at("efficacy"), horizon, base_dir, ar.field("efficacy")), {}};
            if (ar.has("toxicity"))
                arm.toxicity = distribution_from_json(ar.at("toxicity"), horizon, base_dir, ar.field("toxicity"));
            if (ar.has("theta") && std::abs(ar.number("theta") - rmst(arm.efficacy, horizon)) > 1e-6)
                throw FieldError(ar.field("theta"), "annotation differs from the efficacy law's RMST (" +
                                                        std::to_string(rmst(arm.efficacy, horizon)) + ")");
            if (ar.has("beta")) {
                if (!arm.toxicity) throw FieldError(ar.field("beta"), "annotation without a toxicity law");
                if (std::abs(ar.number("beta") - rmst(*arm.toxicity, horizon)) > 1e-6)
                    throw FieldError(ar.field("beta"), "annotation differs from the toxicity law's RMST (" +
                                                           std::to_string(rmst(*arm.toxicity, horizon)) + ")");
            }
            ar.finish();
            scen.arms.push_back(std::move(arm));
        }
        r.finish();
        out.push_back(std::move(scen));
    }
    root.finish();
    return out;
}

std::vector<Scenario> load_scenarios(const std::filesystem::path& path, double horizon) {
    return scenarios_from_json(read_json_file(path), horizon, path.parent_path());
}

json read_json_file(const std::filesystem::path& path) { return parse_json_text(read_file(path), path.string()); }

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("failed writing " + path.string());
}

}  // namespace deint

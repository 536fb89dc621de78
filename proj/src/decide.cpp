#include "deint/decide.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "deint/error.hpp"
#include "deint/io.hpp"
#include "deint/text.hpp"

namespace deint {

using nlohmann::json;

namespace {

constexpr std::string_view kEfficacyHeader[] = {"arm", "enroll_month", "pfs_months", "pfs_event"};
constexpr std::string_view kToxicityHeader[] = {"ae_months", "ae_event"};

bool parse_flag(std::string_view field, std::size_t line, const char* column) {
    if (field == "0") return false;
    if (field == "1") return true;
    throw ParseError(std::string(column) + " must be 0 or 1, got '" + std::string(field) + "'", line);
}

double parse_months(std::string_view field, std::size_t line, const char* column) {
    double value = 0.0;
    try {
        value = parse_number(field);
    } catch (const InvalidArgument&) {
        throw ParseError(std::string(column) + " is not a number: '" + std::string(field) + "'", line);
    }
    if (!(value >= 0.0) || !std::isfinite(value))
        throw ParseError(std::string(column) + " must be a finite non-negative number", line);
    return value;
}

int parse_arm(std::string_view field, std::size_t line) {
    double value = 0.0;
    try {
        value = parse_number(field);
    } catch (const InvalidArgument&) {
        throw ParseError("arm is not a number: '" + std::string(field) + "'", line);
    }
    if (value < 1.0 || value != std::floor(value) || value > 1e6)
        throw ParseError("arm must be a positive integer", line);
    return static_cast<int>(value);
}

}  // namespace

PatientData parse_patient_data(std::istream& in) {
    PatientData data;
    std::string text;
    std::size_t line = 0;
    std::size_t columns = 0;
    while (std::getline(in, text)) {
        ++line;
        const std::string_view row = trim(text);
        if (row.empty()) continue;
        const auto fields = split_csv_line(row);
        if (columns == 0) {
            columns = fields.size();
            if (columns != 4 && columns != 6) throw ParseError("expected 4 or 6 header columns", line);
            for (std::size_t i = 0; i < columns; ++i) {
                const std::string_view want = i < 4 ? kEfficacyHeader[i] : kToxicityHeader[i - 4];
                if (trim(fields[i]) != want)
                    throw ParseError("header column " + std::to_string(i + 1) + " must be '" + std::string(want) + "'",
                                     line);
            }
            data.has_toxicity = columns == 6;
            continue;
        }
        if (fields.size() != columns)
            throw ParseError("expected " + std::to_string(columns) + " fields, got " + std::to_string(fields.size()),
                             line);
        Patient p;
        p.arm = parse_arm(trim(fields[0]), line) - 1;
        p.enroll_time = parse_months(trim(fields[1]), line, "enroll_month");
        p.efficacy_time = parse_months(trim(fields[2]), line, "pfs_months");
        p.efficacy_event = parse_flag(trim(fields[3]), line, "pfs_event");
        if (data.has_toxicity) {
            p.toxicity_time = parse_months(trim(fields[4]), line, "ae_months");
            p.toxicity_event = parse_flag(trim(fields[5]), line, "ae_event");
        }
        data.patients.push_back(p);
    }
    if (columns == 0) throw ParseError("patient data has no header", 0);
    return data;
}

PatientData load_patient_data(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open " + path.string());
    try {
        return parse_patient_data(in);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), e.line());
    }
}

DecisionReport decide(const BayesianDesign& design, const PatientData& data, const DecideRequest& request) {
    const DesignConfig& c = design.config();
    const bool coprimary = c.mode == EndpointMode::kCoPrimary;
    if (!(request.time >= 0.0) || !std::isfinite(request.time))
        throw InvalidArgument("analysis time must be a finite non-negative number of months");
    if (coprimary && !data.has_toxicity) throw InvalidArgument("co-primary designs need ae_months and ae_event columns");

    double earliest = std::numeric_limits<double>::infinity();
    int highest_arm = 0;
    for (const Patient& p : data.patients) {
        if (p.arm >= c.arms)
            throw InvalidArgument("patient data references arm " + std::to_string(p.arm + 1) + " but the design has " +
                                  std::to_string(c.arms));
        earliest = std::min(earliest, p.enroll_time);
        if (p.enroll_time <= request.time) highest_arm = std::max(highest_arm, p.arm);
    }
    if (request.time < earliest && !data.patients.empty())
        throw InvalidArgument("analysis time precedes the earliest enrollment");

    DecisionReport report;
    report.time = request.time;
    report.interim_index = static_cast<int>(std::llround(request.time / c.interim_period));
    report.arm = highest_arm;
    if (request.arm) {
        if (*request.arm < 1 || *request.arm > c.arms)
            throw InvalidArgument("arm " + std::to_string(*request.arm) + " outside 1.." + std::to_string(c.arms));
        report.arm = *request.arm - 1;
    }

    double last_enrollment = 0.0;
    for (const Patient& p : data.patients) {
        if (p.arm != report.arm || p.enroll_time > request.time) continue;
        ++report.enrolled;
        last_enrollment = std::max(last_enrollment, p.enroll_time);
    }
    report.since_last_enrollment = request.time - last_enrollment;
    if (report.enrolled == 0) return report;
    if (report.enrolled > c.max_per_arm)
        throw InvalidArgument("arm " + std::to_string(report.arm + 1) + " has " + std::to_string(report.enrolled) +
                              " patients, above max_per_arm " + std::to_string(c.max_per_arm));

    const RngStream trial_stream(request.stream_seed, request.stream_id);
    InterimContext context;
    context.index = report.interim_index;
    context.clock = request.time;
    context.arm = report.arm;
    context.state = {report.enrolled, report.since_last_enrollment};
    context.patients = data.patients;
    context.trial_stream = &trial_stream;
    report.outcome = design.interim(context, true);

    auto reading = [&](const char* name, const BoundarySpec& b) {
        report.boundaries.push_back(
            {name, boundary_value(b, report.enrolled), b.scale > 0.0 && b.can_fire(report.enrolled)});
    };
    reading("b_NI", c.b_ni);
    reading("b_I", c.b_i);
    if (coprimary) {
        reading("b_T", c.b_t);
        reading("B_T", c.toxicity_margin_boundary());
        report.margin = report.outcome.low_margin ? c.delta_low : c.delta;
    } else {
        report.margin = c.arm_margin(report.arm);
    }
    return report;
}

json report_to_json(const DecisionReport& report) {
    auto number = [](double v) { return std::isnan(v) ? json(nullptr) : json(v); };
    json boundaries = json::array();
    for (const auto& b : report.boundaries) boundaries.push_back({{"name", b.name}, {"value", b.value}, {"active", b.active}});
    json j = {{"time", report.time},
              {"interim", report.interim_index},
              {"arm", report.arm + 1},
              {"enrolled", report.enrolled},
              {"months_since_last_enrollment", report.since_last_enrollment},
              {"p_non_inferior", number(report.outcome.p_non_inferior)},
              {"p_inferior", number(report.outcome.p_inferior)},
              {"p_toxic", number(report.outcome.p_toxic)},
              {"boundaries", boundaries},
              {"decision", std::string(to_string(report.outcome.decision))}};
    if (report.margin) {
        j["margin"] = *report.margin;
        j["low_margin"] = report.outcome.low_margin;
    }
    return j;
}

void write_report(std::ostream& out, const DecisionReport& report) {
    out << "time " << format_number(report.time) << " (interim " << report.interim_index << "), arm "
        << report.arm + 1 << ", " << report.enrolled << " enrolled, "
        << format_number(report.since_last_enrollment) << " months since last enrollment\n";
    if (report.outcome.posterior_computed) {
        out << "P(non-inferior) " << format_number(report.outcome.p_non_inferior) << '\n';
        out << "P(inferior)     " << format_number(report.outcome.p_inferior) << '\n';
        if (!std::isnan(report.outcome.p_toxic)) out << "P(toxic)        " << format_number(report.outcome.p_toxic) << '\n';
    } else {
        out << "no patients on the arm; posterior not computed\n";
    }
    for (const auto& b : report.boundaries)
        out << "boundary " << b.name << " = " << format_number(b.value) << (b.active ? "" : " (inactive)") << '\n';
    if (report.margin)
        out << "margin " << format_number(*report.margin) << (report.outcome.low_margin ? " (Delta_L branch)" : "")
            << '\n';
    out << "decision " << to_string(report.outcome.decision) << '\n';
}

int exit_status(Decision d) {
    switch (d) {
        case Decision::kContinue:
        case Decision::kPause: return 0;
        case Decision::kDeclareNonInferior: return 3;
        case Decision::kStopInferior: return 4;
        case Decision::kStopToxicity: return 5;
        case Decision::kCloseNotRejected: return 6;
    }
    return 1;
}

}  // namespace deint

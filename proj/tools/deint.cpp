#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "deint/calibration.hpp"
#include "deint/decide.hpp"
#include "deint/error.hpp"
#include "deint/io.hpp"
#include "deint/parallel.hpp"
#include "deint/simulation.hpp"
#include "deint/text.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitInvalid = 2;

/// Configuration problems that the user has to fix in an input file.
class InputError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

std::string located(const fs::path& path, std::size_t line, const std::string& message) {
    return line > 0 ? path.string() + ":" + std::to_string(line) + ": " + message : path.string() + ": " + message;
}

deint::DesignDocument load_checked_design(const fs::path& path) {
    deint::DesignDocument doc;
    try {
        doc = deint::load_design(path);
    } catch (const deint::ParseError& e) {
        throw InputError(path.string() + ": " + e.what());
    } catch (const deint::FieldError& e) {
        std::ifstream in(path);
        const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
        throw InputError(located(path, deint::line_of_key(text, e.field()), e.what()));
    }
    const auto issues = deint::check(doc.config);
    if (!issues.empty()) {
        std::string message;
        for (const auto& issue : issues) {
            if (!message.empty()) message += '\n';
            message += located(path, deint::line_of_key(doc.text, issue.field), issue.message);
        }
        throw InputError(message);
    }
    return doc;
}

deint::CalibrationResult load_matching_calibration(const fs::path& path, const deint::DesignConfig& config) {
    deint::CalibrationResult calib = deint::calibration_from_json(deint::read_json_file(path));
    const std::string digest = deint::config_digest(config);
    if (calib.config_digest != digest)
        throw InputError(path.string() + ": calibration was produced for design " + calib.config_digest +
                         ", not for this design (" + digest + ")");
    return calib;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json provenance(const deint::DesignConfig& config, std::uint64_t seed) {
    return {{"tool_version", std::string(deint::kToolVersion)},
            {"config_digest", deint::config_digest(config)},
            {"seed", seed}};
}

std::string percent(const deint::Proportion& p) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(4);
    out << p.estimate << " (MC SE " << p.mc_se << ")";
    return out.str();
}

std::vector<int> parse_grid(const std::string& text) {
    std::vector<int> grid;
    for (std::string_view field : deint::split_csv_line(text)) {
        const double v = deint::parse_number(deint::trim(field));
        if (v != static_cast<int>(v)) throw deint::InvalidArgument("grid values must be integers");
        grid.push_back(static_cast<int>(v));
    }
    return grid;
}

const deint::Scenario& pick_scenario(const std::vector<deint::Scenario>& scenarios, const std::string& label) {
    if (scenarios.empty()) throw InputError("scenario file has no scenarios");
    if (label.empty()) return scenarios.front();
    for (const auto& s : scenarios)
        if (s.label == label) return s;
    throw InputError("no scenario labelled '" + label + "'");
}

struct ValidateArgs {
    std::string config;
};

int cmd_validate(const ValidateArgs& a) {
    const auto doc = load_checked_design(a.config);
    std::cout << a.config << ": valid design, digest " << deint::config_digest(doc.config) << '\n';
    return kExitOk;
}

struct CalibrateArgs {
    std::string config;
    std::string out;
    int sims = 2000;
    std::uint64_t seed = 1;
    int workers = 0;
    bool no_resimulate = false;
};

int cmd_calibrate(const CalibrateArgs& a) {
    const auto doc = load_checked_design(a.config);
    deint::CalibrationOptions options;
    options.sims = a.sims;
    options.seed = a.seed;
    options.workers = a.workers;
    options.resimulate = !a.no_resimulate;
    const deint::CalibrationResult result = deint::calibrate_design(doc.config, options);
    deint::write_text_file(a.out, dump(deint::calibration_to_json(result)));

    std::cout << "design " << result.config_digest << ", seed " << result.seed << ", " << result.sims
              << " simulations, " << deint::kToolVersion << '\n';
    std::cout << "null scenario                 s_NI,F\n";
    for (const auto& m : result.members) {
        std::string label = m.label;
        label.resize(std::max<std::size_t>(label.size(), 29), ' ');
        std::cout << label << ' ' << deint::format_number(m.scale) << '\n';
    }
    std::cout << "s_NI = " << deint::format_number(result.s_ni) << ", s_I = " << deint::format_number(result.s_i)
              << ", s_T = " << deint::format_number(result.s_t) << '\n';
    if (result.inferiority && result.inferiority->resimulated)
        std::cout << "inferiority stops on fresh streams: " << percent(*result.inferiority->resimulated)
                  << ", target " << result.inferiority->target << '\n';
    if (result.toxicity && result.toxicity->resimulated)
        std::cout << "toxicity stops on fresh streams: " << percent(*result.toxicity->resimulated) << ", target "
                  << result.toxicity->target << '\n';
    for (const auto& r : result.resimulations)
        std::cout << "type I error on fresh streams (" << r.label << "): " << percent(r.rejection) << ", alpha "
                  << result.alpha << '\n';
    return kExitOk;
}

struct SimulateArgs {
    std::string config;
    std::string calib;
    std::string scenarios;
    std::string out;
    std::string csv;
    std::string design = "bayesian";
    int sims = 2000;
    std::uint64_t seed = 1;
    int workers = 0;
};

int cmd_simulate(const SimulateArgs& a) {
    const auto doc = load_checked_design(a.config);
    const auto scenarios = deint::load_scenarios(a.scenarios, doc.config.horizon);
    deint::OperatingCharacteristics oc;
    if (a.design == "bayesian") {
        if (a.calib.empty()) throw InputError("--calib is required for the Bayesian design");
        const auto calib = load_matching_calibration(a.calib, doc.config);
        oc = deint::simulate_bayesian_oc(deint::apply_calibration(doc.config, calib), scenarios, a.sims, a.seed,
                                         a.workers);
    } else {
        oc = deint::simulate_comparator_oc(doc.config, scenarios, a.sims, a.seed, a.workers);
    }
    json report = provenance(doc.config, a.seed);
    report["characteristics"] = deint::oc_to_json(oc);
    deint::write_text_file(a.out, dump(report));
    std::ostringstream csv;
    deint::write_oc_csv(csv, oc);
    if (!a.csv.empty()) deint::write_text_file(a.csv, csv.str());
    std::cout << csv.str();
    return kExitOk;
}

struct TrialArgs {
    std::string config;
    std::string calib;
    std::string scenarios;
    std::string label;
    std::string patients;
    std::uint64_t seed = 1;
    std::size_t replicate = 0;
};

int cmd_trial(const TrialArgs& a) {
    const auto doc = load_checked_design(a.config);
    const auto calib = load_matching_calibration(a.calib, doc.config);
    const auto scenarios = deint::load_scenarios(a.scenarios, doc.config.horizon);
    const auto index = static_cast<std::size_t>(&pick_scenario(scenarios, a.label) - scenarios.data());
    const deint::RngStream stream = deint::replicate_stream(a.seed, index, a.replicate);
    const deint::TrialRecord record =
        deint::run_trial(deint::apply_calibration(doc.config, calib), scenarios[index], stream);

    std::cout << "stream seed " << record.stream_seed << ", stream id " << record.stream_id << '\n';
    std::cout << "interim,month,arm,enrolled,decision\n";
    for (const auto& ia : record.interims)
        std::cout << ia.index << ',' << deint::format_number(ia.clock) << ',' << ia.arm + 1 << ',' << ia.enrolled
                  << ',' << deint::to_string(ia.outcome.decision) << '\n';
    deint::write_trial_csv(std::cout, record);
    if (!a.patients.empty()) {
        std::ostringstream out;
        deint::write_patients_csv(out, record.patients, record.duration,
                                  doc.config.mode == deint::EndpointMode::kCoPrimary);
        deint::write_text_file(a.patients, out.str());
    }
    return kExitOk;
}

struct DecideArgs {
    std::string config;
    std::string calib;
    std::string data;
    double time = 0.0;
    int arm = 0;
    std::uint64_t seed = 0;
    std::uint64_t stream_id = 0;
    bool json_output = false;
};

int cmd_decide(const DecideArgs& a) {
    const auto doc = load_checked_design(a.config);
    const auto calib = load_matching_calibration(a.calib, doc.config);
    deint::PatientData data;
    try {
        data = deint::load_patient_data(a.data);
    } catch (const deint::ParseError& e) {
        throw InputError(e.what());
    }
    const deint::BayesianDesign design(deint::apply_calibration(doc.config, calib));
    deint::DecideRequest request;
    request.time = a.time;
    if (a.arm > 0) request.arm = a.arm;
    request.stream_seed = a.seed;
    request.stream_id = a.stream_id;
    const deint::DecisionReport report = deint::decide(design, data, request);
    if (a.json_output) {
        json j = provenance(doc.config, a.seed);
        j["stream_id"] = a.stream_id;
        j["report"] = deint::report_to_json(report);
        std::cout << dump(j);
    } else {
        std::cout << deint::kToolVersion << ", design " << deint::config_digest(doc.config) << ", stream "
                  << a.seed << "/" << a.stream_id << '\n';
        deint::write_report(std::cout, report);
    }
    return deint::exit_status(report.outcome.decision);
}

struct SampleSizeArgs {
    std::string config;
    std::string scenarios;
    std::string label;
    std::string grid;
    std::string out;
    double target = 0.9;
    int sims = 2000;
    std::uint64_t seed = 1;
    int workers = 0;
};

int cmd_samplesize(const SampleSizeArgs& a) {
    const auto doc = load_checked_design(a.config);
    const auto scenarios = deint::load_scenarios(a.scenarios, doc.config.horizon);
    const deint::Scenario& scenario = pick_scenario(scenarios, a.label);
    const auto result =
        deint::sample_size_search(doc.config, scenario, a.target, parse_grid(a.grid), a.sims, a.seed, a.workers);
    std::ostringstream csv;
    csv << "# " << deint::kToolVersion << ", design " << deint::config_digest(doc.config) << ", seed " << a.seed
        << '\n';
    deint::write_sample_size_csv(csv, result);
    if (!a.out.empty()) deint::write_text_file(a.out, csv.str());
    std::cout << csv.str();
    if (result.recommended)
        std::cout << "recommended max_per_arm " << *result.recommended << '\n';
    else
        std::cerr << "warning: target power " << a.target << " not reached on the grid\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sequential multi-arm de-intensification designs: calibration, simulation and interim decisions"};
    app.set_version_flag("--version", std::string(deint::kToolVersion));
    app.require_subcommand(1);

    int workers_default = 1;
    try {
        workers_default = deint::default_worker_count();
    } catch (const deint::InvalidArgument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInvalid;
    }

    int status = kExitOk;
    std::function<int()> command;

    ValidateArgs validate;
    auto* v = app.add_subcommand("validate", "Check a design file");
    v->add_option("--config", validate.config, "Design JSON")->required()->check(CLI::ExistingFile);
    v->callback([&] { command = [&] { return cmd_validate(validate); }; });

    CalibrateArgs calibrate;
    calibrate.workers = workers_default;
    auto* c = app.add_subcommand("calibrate", "Calibrate boundary scales");
    c->add_option("--config", calibrate.config, "Design JSON")->required()->check(CLI::ExistingFile);
    c->add_option("--out", calibrate.out, "Calibration JSON to write")->required();
    c->add_option("--sims", calibrate.sims, "Simulated trials per scenario")->check(CLI::PositiveNumber);
    c->add_option("--seed", calibrate.seed, "Random seed");
    c->add_option("--workers", calibrate.workers, "Worker threads")->check(CLI::PositiveNumber);
    c->add_flag("--no-resimulate", calibrate.no_resimulate, "Skip the fresh-stream self-consistency check");
    c->callback([&] { command = [&] { return cmd_calibrate(calibrate); }; });

    SimulateArgs simulate;
    simulate.workers = workers_default;
    auto* s = app.add_subcommand("simulate", "Operating characteristics over scenarios");
    s->add_option("--config", simulate.config, "Design JSON")->required()->check(CLI::ExistingFile);
    s->add_option("--calib", simulate.calib, "Calibration JSON")->check(CLI::ExistingFile);
    s->add_option("--scenarios", simulate.scenarios, "Scenario JSON")->required()->check(CLI::ExistingFile);
    s->add_option("--out", simulate.out, "Report JSON to write")->required();
    s->add_option("--csv", simulate.csv, "Report CSV to write");
    s->add_option("--design", simulate.design, "bayesian or rci")->check(CLI::IsMember({"bayesian", "rci"}));
    s->add_option("--sims", simulate.sims, "Simulated trials per scenario")->check(CLI::PositiveNumber);
    s->add_option("--seed", simulate.seed, "Random seed");
    s->add_option("--workers", simulate.workers, "Worker threads")->check(CLI::PositiveNumber);
    s->callback([&] { command = [&] { return cmd_simulate(simulate); }; });

    TrialArgs trial;
    auto* t = app.add_subcommand("trial", "Simulate one trial and export its patient data");
    t->add_option("--config", trial.config, "Design JSON")->required()->check(CLI::ExistingFile);
    t->add_option("--calib", trial.calib, "Calibration JSON")->required()->check(CLI::ExistingFile);
    t->add_option("--scenarios", trial.scenarios, "Scenario JSON")->required()->check(CLI::ExistingFile);
    t->add_option("--scenario", trial.label, "Scenario label (default: the first)");
    t->add_option("--seed", trial.seed, "Random seed");
    t->add_option("--replicate", trial.replicate, "Replicate number");
    t->add_option("--patients", trial.patients, "Patient-data CSV to write");
    t->callback([&] { command = [&] { return cmd_trial(trial); }; });

    DecideArgs decide;
    auto* d = app.add_subcommand("decide", "Interim decision on observed data");
    d->add_option("--config", decide.config, "Design JSON")->required()->check(CLI::ExistingFile);
    d->add_option("--calib", decide.calib, "Calibration JSON")->required()->check(CLI::ExistingFile);
    d->add_option("--data", decide.data, "Patient-data CSV")->required()->check(CLI::ExistingFile);
    d->add_option("--time", decide.time, "Analysis time in months")->required();
    d->add_option("--arm", decide.arm, "Arm under test (default: latest arm with data)")->check(CLI::PositiveNumber);
    d->add_option("--seed", decide.seed, "Posterior stream seed");
    d->add_option("--stream-id", decide.stream_id, "Posterior stream id");
    d->add_flag("--json", decide.json_output, "Print the report as JSON");
    d->callback([&] { command = [&] { return cmd_decide(decide); }; });

    SampleSizeArgs samplesize;
    samplesize.workers = workers_default;
    auto* z = app.add_subcommand("samplesize", "Power curve over per-arm caps");
    z->add_option("--config", samplesize.config, "Design JSON")->required()->check(CLI::ExistingFile);
    z->add_option("--scenario", samplesize.scenarios, "Scenario JSON")->required()->check(CLI::ExistingFile);
    z->add_option("--label", samplesize.label, "Scenario label (default: the first)");
    z->add_option("--target-power", samplesize.target, "Target power")->check(CLI::Range(0.0, 1.0));
    z->add_option("--grid", samplesize.grid, "Comma-separated max_per_arm values")->required();
    z->add_option("--out", samplesize.out, "Power-curve CSV to write");
    z->add_option("--sims", samplesize.sims, "Simulated trials per point")->check(CLI::PositiveNumber);
    z->add_option("--seed", samplesize.seed, "Random seed");
    z->add_option("--workers", samplesize.workers, "Worker threads")->check(CLI::PositiveNumber);
    z->callback([&] { command = [&] { return cmd_samplesize(samplesize); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInvalid;
    }

    try {
        status = command();
    } catch (const InputError& e) {
        std::cerr << e.what() << '\n';
        status = kExitInvalid;
    } catch (const deint::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        status = kExitInvalid;
    } catch (const deint::InvalidArgument& e) {
        std::cerr << "error: " << e.what() << '\n';
        status = kExitInvalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        status = kExitError;
    }
    return status;
}

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "deint/trial.hpp"

namespace deint {

/// Observed patients from `arm,enroll_month,pfs_months,pfs_event[,ae_months,ae_event]`.
struct PatientData {
    std::vector<Patient> patients;
    bool has_toxicity = false;
};

/// Parses the patient-data CSV. Malformed rows raise ParseError with the
/// 1-based line number.
PatientData parse_patient_data(std::istream& in);
PatientData load_patient_data(const std::filesystem::path& path);

struct DecideRequest {
    double time = 0.0;
    /// 1-based arm under test; by default the highest arm with data.
    std::optional<int> arm;
    /// Identity of the posterior stream. Replaying a simulated trial with its
    /// stream identity reproduces the engine's draws.
    std::uint64_t stream_seed = 0;
    std::uint64_t stream_id = 0;
};

struct BoundaryReading {
    std::string name;
    double value = 1.0;
    bool active = false;
};

struct DecisionReport {
    double time = 0.0;
    int interim_index = 0;
    int arm = 0;  ///< 0-based
    int enrolled = 0;
    double since_last_enrollment = 0.0;
    InterimOutcome outcome;
    std::vector<BoundaryReading> boundaries;
    std::optional<double> margin;  ///< co-primary: the margin in force
};

/// Censors the data at `request.time` and applies the interim rules of the
/// design to the arm under test.
DecisionReport decide(const BayesianDesign& design, const PatientData& data, const DecideRequest& request);

nlohmann::json report_to_json(const DecisionReport& report);
void write_report(std::ostream& out, const DecisionReport& report);

/// Process exit status for a decision: 0 continue or pause, 3 declare-NI,
/// 4 stop-inferior, 5 stop-toxicity, 6 close-not-rejected.
int exit_status(Decision d);

}  // namespace deint

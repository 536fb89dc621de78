#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "deint/design.hpp"
#include "deint/error.hpp"
#include "deint/trial.hpp"

namespace deint {

inline constexpr std::string_view kToolVersion = "deint 1.0.0";

/// A document value that failed to parse or violated an invariant. `field`
/// is the offending key (dotted for nested objects).
class FieldError : public InvalidArgument {
   public:
    FieldError(std::string field, const std::string& what) : InvalidArgument(field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

   private:
    std::string field_;
};

/// Reads a survival law. `default_horizon` is used by `"rmst"` targets that
/// omit their own horizon; relative curve paths resolve against `base_dir`.
ScenarioDistribution distribution_from_json(const nlohmann::json& j, double default_horizon,
                                            const std::filesystem::path& base_dir, const std::string& field);
nlohmann::json distribution_to_json(const ScenarioDistribution& dist);

DesignConfig design_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json design_to_json(const DesignConfig& config);

/// 16 hex digits identifying the design: FNV-1a over its normalized JSON.
std::string config_digest(const DesignConfig& config);

struct DesignDocument {
    std::string text;
    DesignConfig config;
};

/// Parses a design file. Syntax errors become ParseError with the line;
/// invalid values become FieldError.
DesignDocument load_design(const std::filesystem::path& path);

/// 1-based line of the first `"key":` in a JSON text, 0 if absent. Dotted
/// keys match their last component.
std::size_t line_of_key(std::string_view text, std::string_view key);

/// Scenario file: `{"scenarios": [{"label", "arms": [{"efficacy", "toxicity",
/// "theta", "beta"}]}]}`. Optional theta/beta annotations must match the
/// laws' RMSTs within 1e-6.
std::vector<Scenario> scenarios_from_json(const nlohmann::json& j, double horizon,
                                          const std::filesystem::path& base_dir = {});
std::vector<Scenario> load_scenarios(const std::filesystem::path& path, double horizon);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace deint

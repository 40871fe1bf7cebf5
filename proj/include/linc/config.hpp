#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "linc/backend.hpp"
#include "linc/calibrator.hpp"

namespace linc {

enum class Method { noc, conc, linc };
std::string to_string(Method m);
Method method_from_string(const std::string& s);

/// Which demonstrations the validation prompts embed.
enum class ValidationDemos { shared, independent };

struct DatasetPaths {
    std::string train;
    std::optional<std::string> validation;
    std::string test;
};

/// Parameters of the robustness studies and sweeps.
struct StudyConfig {
    std::vector<std::vector<double>> proportions;
    std::size_t permutations = 8;
    std::vector<std::string> templates;
    std::vector<std::size_t> validation_sizes = {1, 5, 10, 30, 100, 300};
    std::vector<std::size_t> grid_epochs = {1, 5, 15, 50, 100};
    std::vector<std::size_t> grid_n_validation = {1, 5, 10, 30, 100, 300};
    std::vector<double> grid_step_size = {1e-3, 1e-2, 1e-1, 1.0};
    double holdout_fraction = 0.2;
};

struct ExperimentConfig {
    DatasetPaths dataset;
    std::string template_name = "sst2";
    std::vector<std::string> label_names;
    std::size_t k = 4;
    std::vector<Method> methods = {Method::noc, Method::conc, Method::linc};
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
    TrainConfig train;
    BackendConfig backend;
    std::size_t test_size = 300;
    std::uint64_t test_seed = 0;
    std::string cf_token = "N/A";
    std::size_t ece_bins = 10;
    std::size_t entropy_bins = 10;
    std::string output = "linc-out";
    ValidationDemos validation_demos = ValidationDemos::shared;
    /// 0 disables the prompt-length guardrail.
    std::size_t max_prompt_tokens = 0;
    StudyConfig study;

    void validate() const;
    bool has_method(Method m) const;
};

/// Unknown keys anywhere in the document are a ConfigError.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& cfg);

/// Applies "a.b.c=value" to `doc`. The value is parsed as JSON when it is
/// valid JSON and kept as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Reads the file, applies overrides in order, parses and validates. Relative
/// dataset and cache paths resolve against the config file's directory.
ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                        const std::vector<std::string>& overrides = {});

}  // namespace linc

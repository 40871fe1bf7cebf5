#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "linc/calibrator.hpp"
#include "linc/config.hpp"
#include "linc/dataset.hpp"
#include "linc/logit_cache.hpp"
#include "linc/metrics.hpp"
#include "linc/templates.hpp"

namespace linc {

/// One (method, seed) evaluation, optionally tagged with the study axis it
/// belongs to. A cell that could not run carries `error` and no metrics.
struct CellResult {
    Method method = Method::noc;
    std::uint64_t seed = 0;
    std::size_t k = 0;
    std::optional<std::string> template_name;
    std::optional<std::vector<double>> proportion;
    std::optional<std::size_t> permutation;
    std::optional<std::size_t> n_validation;

    double accuracy = 0.0;
    double mean_entropy = 0.0;
    /// Entropy of the uncalibrated label probabilities, for reference.
    double raw_mean_entropy = 0.0;
    EceResult ece;
    EntropyHistogram entropy_histogram;
    CalibrationParams params;
    std::optional<TrainTrace> trace;
    std::optional<std::string> error;

    /// Suffix distinguishing cells that share (method, seed).
    std::string tag() const;
};

struct SeedInfo {
    std::uint64_t seed = 0;
    std::string axis;  // study-axis tag, empty for plain evaluation
    std::size_t backend_calls = 0;
    std::size_t prompts_over_budget = 0;
    std::vector<Demonstration> demos;
};

struct MethodAggregate {
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
    std::size_t cells = 0;
};

struct EvalReport {
    std::string experiment;
    nlohmann::json config;
    std::vector<CellResult> cells;
    std::vector<SeedInfo> seeds;
    std::map<std::string, MethodAggregate> aggregate;
    std::size_t total_backend_calls = 0;
    /// Wall-clock and timestamps live here and go to run_info.json, keeping
    /// report.json reproducible byte for byte.
    nlohmann::json run_info;

    /// Recomputes `aggregate` from the error-free cells.
    void recompute_aggregate();
};

struct GridCell {
    std::size_t epochs = 0;
    std::size_t n_validation = 0;
    double step_size = 0.0;
    double heldout_accuracy = 0.0;
    std::optional<std::string> error;
};

struct GridReport {
    nlohmann::json config;
    std::vector<GridCell> cells;
    TrainConfig best;
    double best_heldout_accuracy = 0.0;
    std::size_t heldout_size = 0;
    std::size_t backend_calls = 0;
};

/// Loaded dataset splits and template for one experiment.
struct Task {
    TaskTemplate task_template;
    LabelSpace labels;
    std::vector<LabeledExample> demo_pool;
    /// Fixed, seeded order; the first N_v entries form a validation set of size N_v.
    std::vector<LabeledExample> validation;
    TestSplit test;
};

/// Loads datasets and template. The validation split is used when present,
/// otherwise `validation_needed` examples are carved out of the training
/// split (seeded by train.seed) before demonstrations are drawn.
Task prepare_task(const ExperimentConfig& cfg, std::size_t validation_needed);

/// Runs every configured method on one demonstration set. Methods share the
/// test prompts and backend responses.
std::vector<CellResult> evaluate_demo_set(const ExperimentConfig& cfg, const Task& task,
                                          const TaskTemplate& tmpl, const LabelSpace& labels,
                                          std::span<const Demonstration> demos,
                                          std::span<const Demonstration> validation_demos,
                                          std::size_t n_validation, QueryClient& client,
                                          std::uint64_t seed, SeedInfo* info = nullptr);

/// Backend plus cache wiring shared by the experiment entry points.
class ExperimentSession {
public:
    explicit ExperimentSession(const ExperimentConfig& cfg);
    /// Use an externally owned backend (tests, instrumentation).
    ExperimentSession(const ExperimentConfig& cfg, Backend& backend);

    QueryClient& client() { return *client_; }

private:
    std::unique_ptr<Backend> owned_;
    std::unique_ptr<LogitCache> cache_;
    std::unique_ptr<QueryClient> client_;
};

EvalReport run_fewshot_eval(const ExperimentConfig& cfg, ExperimentSession& session);
EvalReport run_fewshot_eval(const ExperimentConfig& cfg);

EvalReport run_label_proportion_study(const ExperimentConfig& cfg,
                                      const std::vector<std::vector<double>>& proportions,
                                      std::size_t permutations_per_proportion,
                                      ExperimentSession& session);

EvalReport run_template_study(const ExperimentConfig& cfg, const std::vector<std::string>& templates,
                              ExperimentSession& session);

EvalReport run_validation_size_sweep(const ExperimentConfig& cfg,
                                     const std::vector<std::size_t>& sizes,
                                     ExperimentSession& session);

GridReport run_hyperparameter_grid(const ExperimentConfig& cfg,
                                   const std::vector<std::size_t>& epochs_grid,
                                   const std::vector<std::size_t>& n_validation_grid,
                                   const std::vector<double>& step_size_grid,
                                   ExperimentSession& session);

struct CalibrationRun {
    CalibrationParams params;
    TrainTrace trace;
    std::vector<Demonstration> demos;
    std::size_t backend_calls = 0;
};

/// LinC on the first seed's demonstrations and validation prompts, no test pass.
CalibrationRun run_calibration(const ExperimentConfig& cfg, ExperimentSession& session);

}  // namespace linc

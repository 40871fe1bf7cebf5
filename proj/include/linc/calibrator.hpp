#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "linc/prob_vector.hpp"

namespace linc {

/// Dense row-major square matrix; C is small (number of classes).
class Matrix {
public:
    Matrix() = default;
    explicit Matrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}

    static Matrix identity(std::size_t n);
    static Matrix diagonal(std::span<const double> d);

    std::size_t size() const noexcept { return n_; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * n_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * n_ + c]; }
    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t n_ = 0;
    std::vector<double> data_;
};

enum class InitMode { zero, random, conc, identity };
std::string to_string(InitMode m);
InitMode init_mode_from_string(const std::string& s);

/// Affine map z = A p + b applied before the softmax.
struct CalibrationParams {
    Matrix A;
    std::vector<double> b;
    InitMode init_mode = InitMode::zero;

    std::size_t num_classes() const noexcept { return b.size(); }
    /// Throws ShapeError unless A is C x C; ConfigError on non-finite entries.
    void validate() const;
    bool all_finite() const;

    friend bool operator==(const CalibrationParams&, const CalibrationParams&) = default;
};

enum class LrSchedule { constant, linear_decay };

struct TrainConfig {
    double step_size = 1e-2;
    std::size_t epochs = 100;
    std::size_t n_validation = 30;
    InitMode init_mode = InitMode::zero;
    bool shuffle_each_epoch = false;
    double random_init_stddev = 0.01;
    std::uint64_t seed = 0;
    LrSchedule lr_schedule = LrSchedule::constant;
    /// Final-epoch step size as a fraction of step_size under linear decay.
    double lr_floor_fraction = 0.1;

    /// step_size must be 0 or within [1e-5, 20]; epochs and n_validation >= 1.
    void validate() const;
    /// Step size used during epoch `epoch` (0-based).
    double step_size_at(std::size_t epoch) const;
};

struct TrainTrace {
    std::vector<double> epoch_mean_loss;
    CalibrationParams final_params;
    double wall_clock_seconds = 0.0;
    std::size_t backend_calls = 0;
};

struct Gradient {
    Matrix dA;
    std::vector<double> db;
};

struct CalibrationSample {
    ProbVector probs;
    int label = 0;
};

CalibrationParams init_zero(std::size_t num_classes);
CalibrationParams init_random(std::size_t num_classes, std::uint64_t seed, double stddev);
/// A = diag(1 / max(p_cf, 1e-10)), b = 0.
CalibrationParams init_conc(const ProbVector& p_cf);
/// NoC: A = I, b = 0. Only the argmax of p is preserved by calibrated_probs.
CalibrationParams baseline_noc(std::size_t num_classes);

std::vector<double> apply_affine(const CalibrationParams& params, std::span<const double> p);
std::vector<double> softmax(std::span<const double> z);
ProbVector calibrated_probs(const CalibrationParams& params, std::span<const double> p);
/// Natural-log cross-entropy with the probability floored at 1e-12.
double cross_entropy(std::span<const double> calibrated, std::size_t label);
/// With g = softmax(Ap+b) - onehot(y): dL/db = g, dL/dA = g p^T.
Gradient grad(const CalibrationParams& params, std::span<const double> p, std::size_t label);
/// Argmax of the calibrated probabilities, lowest index on ties.
std::size_t predict(const CalibrationParams& params, std::span<const double> p);

/// Loss of params on one sample (softmax then cross-entropy).
double sample_loss(const CalibrationParams& params, std::span<const double> p, std::size_t label);

/// Per-sample gradient descent over precomputed validation probabilities:
/// epochs 1..T, samples in order (seeded shuffle only when requested), the
/// parameters at the end of an epoch carry into the next. Never queries a
/// backend. Throws DivergenceError on non-finite loss or parameters.
std::pair<CalibrationParams, TrainTrace> train_linc(std::span<const CalibrationSample> val,
                                                    const TrainConfig& cfg,
                                                    const CalibrationParams* initial = nullptr);

/// Initialization named by cfg.init_mode. `p_cf` is required for conc.
CalibrationParams initial_params(std::size_t num_classes, const TrainConfig& cfg,
                                 const ProbVector* p_cf = nullptr);

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// {"C", "A" (row-major rows), "b", "init_mode", "train_config"}.
nlohmann::json params_to_json(const CalibrationParams& params, const TrainConfig* cfg = nullptr);
CalibrationParams params_from_json(const nlohmann::json& j);

}  // namespace linc

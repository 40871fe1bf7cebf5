#include "linc/calibrator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>

#include "linc/error.hpp"
#include "linc/rng.hpp"

namespace linc {

using json = nlohmann::json;

namespace {

constexpr double kLogFloor = 1e-12;
constexpr double kConcClamp = 1e-10;

void check_dims(const CalibrationParams& params, std::size_t p_size) {
    if (params.A.size() != params.b.size()) {
        throw ShapeError("A is " + std::to_string(params.A.size()) + "x" +
                         std::to_string(params.A.size()) + " but b has " +
                         std::to_string(params.b.size()) + " entries");
    }
    if (p_size != params.b.size()) {
        throw ShapeError("probability vector of length " + std::to_string(p_size) +
                         " for a " + std::to_string(params.b.size()) + "-class calibration");
    }
}

}  // namespace

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::diagonal(std::span<const double> d) {
    Matrix m(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
}

std::string to_string(InitMode m) {
    switch (m) {
        case InitMode::zero: return "zero";
        case InitMode::random: return "random";
        case InitMode::conc: return "conc";
        case InitMode::identity: return "identity";
    }
    return "zero";
}

InitMode init_mode_from_string(const std::string& s) {
    if (s == "zero") return InitMode::zero;
    if (s == "random") return InitMode::random;
    if (s == "conc") return InitMode::conc;
    if (s == "identity") return InitMode::identity;
    throw ConfigError("unknown init_mode '" + s + "' (expected zero, random or conc)");
}

bool CalibrationParams::all_finite() const {
    const auto finite = [](double v) { return std::isfinite(v); };
    return std::all_of(A.data().begin(), A.data().end(), finite) &&
           std::all_of(b.begin(), b.end(), finite);
}

void CalibrationParams::validate() const {
    check_dims(*this, b.size());
    if (!all_finite()) throw ConfigError("calibration parameters contain non-finite entries");
}

void TrainConfig::validate() const {
    if (!(step_size == 0.0 || (step_size >= 1e-5 && step_size <= 20.0))) {
        throw ConfigError("train.step_size must be 0 or within [1e-5, 20], got " +
                          std::to_string(step_size));
    }
    if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
    if (n_validation < 1) throw ConfigError("train.n_validation must be >= 1");
    if (!(random_init_stddev > 0.0)) throw ConfigError("train.random_init_stddev must be > 0");
    if (!(lr_floor_fraction >= 0.0 && lr_floor_fraction <= 1.0)) {
        throw ConfigError("train.lr_floor_fraction must be within [0, 1]");
    }
}

double TrainConfig::step_size_at(std::size_t epoch) const {
    if (lr_schedule == LrSchedule::constant || epochs <= 1) return step_size;
    const double progress =
        static_cast<double>(std::min(epoch, epochs - 1)) / static_cast<double>(epochs - 1);
    return step_size * (1.0 - (1.0 - lr_floor_fraction) * progress);
}

CalibrationParams init_zero(std::size_t num_classes) {
    if (num_classes < 2) throw ShapeError("calibration needs at least 2 classes");
    return {Matrix(num_classes), std::vector<double>(num_classes, 0.0), InitMode::zero};
}

CalibrationParams init_random(std::size_t num_classes, std::uint64_t seed, double stddev) {
    if (!(stddev > 0.0)) throw ConfigError("random init stddev must be positive");
    auto params = init_zero(num_classes);
    params.init_mode = InitMode::random;
    Rng rng(seed);
    for (auto& v : params.A.data()) v = stddev * rng.normal();
    for (auto& v : params.b) v = stddev * rng.normal();
    return params;
}

CalibrationParams init_conc(const ProbVector& p_cf) {
    std::vector<double> inv(p_cf.size());
    for (std::size_t i = 0; i < p_cf.size(); ++i) inv[i] = 1.0 / std::max(p_cf[i], kConcClamp);
    return {Matrix::diagonal(inv), std::vector<double>(p_cf.size(), 0.0), InitMode::conc};
}

CalibrationParams baseline_noc(std::size_t num_classes) {
    return {Matrix::identity(num_classes), std::vector<double>(num_classes, 0.0),
            InitMode::identity};
}

std::vector<double> apply_affine(const CalibrationParams& params, std::span<const double> p) {
    check_dims(params, p.size());
    const std::size_t n = p.size();
    std::vector<double> z(params.b);
    for (std::size_t r = 0; r < n; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < n; ++c) acc += params.A(r, c) * p[c];
        z[r] += acc;
    }
    return z;
}

std::vector<double> softmax(std::span<const double> z) {
    std::vector<double> out(z.begin(), z.end());
    if (out.empty()) return out;
    const double m = *std::max_element(out.begin(), out.end());
    double total = 0.0;
    for (auto& v : out) {
        v = std::exp(v - m);
        total += v;
    }
    for (auto& v : out) v /= total;
    return out;
}

ProbVector calibrated_probs(const CalibrationParams& params, std::span<const double> p) {
    return ProbVector::from_normalized(softmax(apply_affine(params, p)));
}

double cross_entropy(std::span<const double> calibrated, std::size_t label) {
    if (label >= calibrated.size()) {
        throw InvalidLabelError("label " + std::to_string(label) + " outside " +
                                std::to_string(calibrated.size()) + " classes");
    }
    return -std::log(std::max(calibrated[label], kLogFloor));
}

double sample_loss(const CalibrationParams& params, std::span<const double> p, std::size_t label) {
    return cross_entropy(softmax(apply_affine(params, p)), label);
}

Gradient grad(const CalibrationParams& params, std::span<const double> p, std::size_t label) {
    auto g = softmax(apply_affine(params, p));
    if (label >= g.size()) throw InvalidLabelError("label " + std::to_string(label) + " out of range");
    g[label] -= 1.0;
    const std::size_t n = g.size();
    Gradient out{Matrix(n), g};
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) out.dA(r, c) = g[r] * p[c];
    }
    return out;
}

std::size_t predict(const CalibrationParams& params, std::span<const double> p) {
    // softmax is strictly monotone, so the argmax of the logits is the
    // argmax of the calibrated probabilities.
    const auto z = apply_affine(params, p);
    return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
}

CalibrationParams initial_params(std::size_t num_classes, const TrainConfig& cfg,
                                 const ProbVector* p_cf) {
    switch (cfg.init_mode) {
        case InitMode::zero: return init_zero(num_classes);
        case InitMode::random: return init_random(num_classes, cfg.seed, cfg.random_init_stddev);
        case InitMode::identity: return baseline_noc(num_classes);
        case InitMode::conc:
            if (p_cf == nullptr) {
                throw ConfigError("conc initialization needs a content-free probability vector");
            }
            if (p_cf->size() != num_classes) throw ShapeError("content-free vector has wrong length");
            return init_conc(*p_cf);
    }
    return init_zero(num_classes);
}

std::pair<CalibrationParams, TrainTrace> train_linc(std::span<const CalibrationSample> val,
                                                    const TrainConfig& cfg,
                                                    const CalibrationParams* initial) {
    if (val.empty()) throw ConfigError("LinC training needs at least one validation sample");
    cfg.validate();
    const std::size_t n_classes = val.front().probs.size();
    for (const auto& s : val) {
        if (s.probs.size() != n_classes) throw ShapeError("validation vectors differ in length");
        if (s.label < 0 || static_cast<std::size_t>(s.label) >= n_classes) {
            throw InvalidLabelError("validation label " + std::to_string(s.label) + " out of range");
        }
    }

    const auto start = std::chrono::steady_clock::now();
    CalibrationParams params = initial ? *initial : initial_params(n_classes, cfg);
    params.validate();
    if (params.num_classes() != n_classes) throw ShapeError("initial parameters have wrong size");

    std::vector<std::size_t> order(val.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(mix_seed(cfg.seed, 0x5348554646ull));

    TrainTrace trace;
    trace.epoch_mean_loss.reserve(cfg.epochs);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.shuffle_each_epoch) shuffle_rng.shuffle(std::span(order));
        const double alpha = cfg.step_size_at(epoch);
        double loss_sum = 0.0;
        for (std::size_t pos = 0; pos < order.size(); ++pos) {
            const auto& sample = val[order[pos]];
            const auto p = sample.probs.values();
            const auto y = static_cast<std::size_t>(sample.label);

            const double loss = sample_loss(params, p, y);
            if (!std::isfinite(loss)) throw DivergenceError(epoch + 1, order[pos], alpha);
            loss_sum += loss;

            const auto g = grad(params, p, y);
            auto a = params.A.data();
            const auto ga = g.dA.data();
            for (std::size_t i = 0; i < a.size(); ++i) a[i] -= alpha * ga[i];
            for (std::size_t i = 0; i < params.b.size(); ++i) params.b[i] -= alpha * g.db[i];
            if (!params.all_finite()) throw DivergenceError(epoch + 1, order[pos], alpha);
        }
        trace.epoch_mean_loss.push_back(loss_sum / static_cast<double>(order.size()));
    }

    trace.final_params = params;
    trace.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {std::move(params), std::move(trace)};
}

json to_json(const TrainConfig& cfg) {
    return {{"step_size", cfg.step_size},
            {"epochs", cfg.epochs},
            {"n_validation", cfg.n_validation},
            {"init_mode", to_string(cfg.init_mode)},
            {"shuffle_each_epoch", cfg.shuffle_each_epoch},
            {"random_init_stddev", cfg.random_init_stddev},
            {"seed", cfg.seed},
            {"lr_schedule", cfg.lr_schedule == LrSchedule::constant ? "constant" : "linear_decay"},
            {"lr_floor_fraction", cfg.lr_floor_fraction}};
}

TrainConfig train_config_from_json(const json& j) {
    static const std::set<std::string> allowed = {
        "step_size", "epochs",    "n_validation", "init_mode",        "shuffle_each_epoch",
        "random_init_stddev", "seed", "lr_schedule", "lr_floor_fraction"};
    if (!j.is_object()) throw ConfigError("train config must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (!allowed.contains(key)) throw ConfigError("unknown key 'train." + key + "'");
    }
    TrainConfig cfg;
    try {
        cfg.step_size = j.value("step_size", cfg.step_size);
        cfg.epochs = j.value("epochs", cfg.epochs);
        cfg.n_validation = j.value("n_validation", cfg.n_validation);
        if (j.contains("init_mode")) cfg.init_mode = init_mode_from_string(j.at("init_mode"));
        cfg.shuffle_each_epoch = j.value("shuffle_each_epoch", cfg.shuffle_each_epoch);
        cfg.random_init_stddev = j.value("random_init_stddev", cfg.random_init_stddev);
        cfg.seed = j.value("seed", cfg.seed);
        if (j.contains("lr_schedule")) {
            const auto s = j.at("lr_schedule").get<std::string>();
            if (s == "constant") {
                cfg.lr_schedule = LrSchedule::constant;
            } else if (s == "linear_decay") {
                cfg.lr_schedule = LrSchedule::linear_decay;
            } else {
                throw ConfigError("unknown lr_schedule '" + s + "'");
            }
        }
        cfg.lr_floor_fraction = j.value("lr_floor_fraction", cfg.lr_floor_fraction);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("train config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

json params_to_json(const CalibrationParams& params, const TrainConfig* cfg) {
    const std::size_t n = params.num_classes();
    json rows = json::array();
    for (std::size_t r = 0; r < n; ++r) {
        json row = json::array();
        for (std::size_t c = 0; c < n; ++c) row.push_back(params.A(r, c));
        rows.push_back(std::move(row));
    }
    json j = {{"C", n}, {"A", std::move(rows)}, {"b", params.b},
              {"init_mode", to_string(params.init_mode)}};
    j["train_config"] = cfg ? to_json(*cfg) : json::object();
    return j;
}

CalibrationParams params_from_json(const json& j) {
    try {
        const auto n = j.at("C").get<std::size_t>();
        const auto& rows = j.at("A");
        if (!rows.is_array() || rows.size() != n) throw ShapeError("A must have C rows");
        CalibrationParams params{Matrix(n), j.at("b").get<std::vector<double>>(),
                                 init_mode_from_string(j.value("init_mode", "zero"))};
        for (std::size_t r = 0; r < n; ++r) {
            const auto row = rows.at(r).get<std::vector<double>>();
            if (row.size() != n) throw ShapeError("row " + std::to_string(r) + " of A has wrong length");
            for (std::size_t c = 0; c < n; ++c) params.A(r, c) = row[c];
        }
        params.validate();
        return params;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("calibration parameters: ") + e.what());
    }
}

}  // namespace linc

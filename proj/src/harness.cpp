#include "linc/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <tuple>

#include "linc/error.hpp"
#include "linc/rng.hpp"

namespace linc {

using json = nlohmann::json;

namespace {

constexpr std::uint64_t kIndependentDemoSalt = 0x56414C44454D4Full;
constexpr std::uint64_t kPermutationSalt = 0x5045524D5554ull;
constexpr std::uint64_t kHoldoutSalt = 0x484F4C444F5554ull;

std::string join_proportion(const std::vector<double>& p) {
    std::string out;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (i) out += "-";
        char buf[32];
        std::snprintf(buf, sizeof buf, "%g", p[i]);
        out += buf;
    }
    return out;
}

void check_labels(std::span<const LabeledExample> data, const LabelSpace& ls,
                  const std::string& split) {
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!ls.contains(data[i].label)) {
            throw InvalidLabelError(split + " example " + std::to_string(i) + " has label " +
                                    std::to_string(data[i].label) + " outside the " +
                                    std::to_string(ls.size()) + "-class label space");
        }
    }
}

LabelSpace make_labels(const ExperimentConfig& cfg, const TaskTemplate& tmpl) {
    if (!cfg.label_names.empty() && cfg.label_names.size() == tmpl.verbalizers.size()) {
        return tmpl.label_space(cfg.label_names);
    }
    if (!cfg.label_names.empty()) {
        throw ConfigError("label_names has " + std::to_string(cfg.label_names.size()) +
                          " entries but template '" + tmpl.format.name + "' has " +
                          std::to_string(tmpl.verbalizers.size()) + " classes");
    }
    return tmpl.label_space();
}

std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::vector<CalibrationSample> to_samples(std::span<const ProbVector> probs,
                                          std::span<const ValidationPrompt> prompts) {
    std::vector<CalibrationSample> out;
    out.reserve(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) out.push_back({probs[i], prompts[i].label});
    return out;
}

std::vector<Prompt> prompts_of(std::span<const ValidationPrompt> vps) {
    std::vector<Prompt> out;
    out.reserve(vps.size());
    for (const auto& v : vps) out.push_back(v.prompt);
    return out;
}

std::vector<Demonstration> validation_demos_for(const ExperimentConfig& cfg, const Task& task,
                                                std::span<const Demonstration> demos,
                                                std::uint64_t seed) {
    if (cfg.validation_demos == ValidationDemos::shared) return {demos.begin(), demos.end()};
    return sample_demonstrations(task.demo_pool, demos.size(), mix_seed(seed, kIndependentDemoSalt));
}

json run_info_base() {
    return {{"generated_at", iso_timestamp()}, {"cells", json::array()}};
}

void note_cell_timing(EvalReport& report, const CellResult& cell) {
    if (!cell.trace) return;
    report.run_info["cells"].push_back({{"method", to_string(cell.method)},
                                        {"seed", cell.seed},
                                        {"tag", cell.tag()},
                                        {"train_wall_clock_seconds", cell.trace->wall_clock_seconds}});
}

void finish(EvalReport& report, QueryClient& client, std::size_t calls_before,
            std::chrono::steady_clock::time_point start) {
    report.total_backend_calls = client.backend_calls() - calls_before;
    report.recompute_aggregate();
    for (const auto& cell : report.cells) note_cell_timing(report, cell);
    report.run_info["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

CellResult error_cell(Method m, std::uint64_t seed, std::size_t k, const std::string& message) {
    CellResult c;
    c.method = m;
    c.seed = seed;
    c.k = k;
    c.error = message;
    return c;
}

}  // namespace

std::string CellResult::tag() const {
    std::string t;
    if (template_name) t += "_tpl-" + *template_name;
    if (proportion) t += "_prop-" + join_proportion(*proportion);
    if (permutation) t += "_perm-" + std::to_string(*permutation);
    if (n_validation) t += "_nv-" + std::to_string(*n_validation);
    return t;
}

void EvalReport::recompute_aggregate() {
    aggregate.clear();
    std::map<std::string, std::vector<double>> acc;
    for (const auto& c : cells) {
        if (!c.error) acc[to_string(c.method)].push_back(c.accuracy);
    }
    for (const auto& [method, values] : acc) {
        const auto [mean, sd] = mean_std(values);
        aggregate[method] = {mean, sd, values.size()};
    }
}

Task prepare_task(const ExperimentConfig& cfg, std::size_t validation_needed) {
    auto tmpl = resolve_template(cfg.template_name);
    auto labels = make_labels(cfg, tmpl);

    auto train = load_jsonl(cfg.dataset.train);
    auto test_pool = load_jsonl(cfg.dataset.test);
    check_labels(train, labels, "train");
    check_labels(test_pool, labels, "test");

    std::vector<LabeledExample> demo_pool;
    std::vector<LabeledExample> validation;
    if (cfg.dataset.validation) {
        validation = load_jsonl(*cfg.dataset.validation);
        check_labels(validation, labels, "validation");
        Rng rng(cfg.train.seed);
        rng.shuffle(std::span(validation));
        demo_pool = std::move(train);
    } else {
        const std::size_t spare = train.size() > cfg.k ? train.size() - cfg.k : 0;
        auto split = carve_validation(train, std::min(validation_needed, spare), cfg.train.seed);
        validation = std::move(split.validation);
        demo_pool = std::move(split.train);
    }
    auto test = make_test_split(test_pool, cfg.test_size, cfg.test_seed);
    return Task{std::move(tmpl), std::move(labels), std::move(demo_pool), std::move(validation),
                std::move(test)};
}

ExperimentSession::ExperimentSession(const ExperimentConfig& cfg)
    : owned_(make_backend(cfg.backend)),
      cache_(cfg.backend.cache_dir ? std::make_unique<LogitCache>(*cfg.backend.cache_dir)
                                   : std::make_unique<LogitCache>()),
      client_(std::make_unique<QueryClient>(*owned_, *cache_, cfg.backend.max_parallel_requests)) {}

ExperimentSession::ExperimentSession(const ExperimentConfig& cfg, Backend& backend)
    : cache_(cfg.backend.cache_dir ? std::make_unique<LogitCache>(*cfg.backend.cache_dir)
                                   : std::make_unique<LogitCache>()),
      client_(std::make_unique<QueryClient>(backend, *cache_, cfg.backend.max_parallel_requests)) {}

std::vector<CellResult> evaluate_demo_set(const ExperimentConfig& cfg, const Task& task,
                                          const TaskTemplate& tmpl, const LabelSpace& labels,
                                          std::span<const Demonstration> demos,
                                          std::span<const Demonstration> validation_demos,
                                          std::size_t n_validation, QueryClient& client,
                                          std::uint64_t seed, SeedInfo* info) {
    const std::size_t calls_before = client.backend_calls();
    const auto& fmt = tmpl.format;

    std::vector<Prompt> test_prompts;
    test_prompts.reserve(task.test.inputs.size());
    std::size_t over_budget = 0;
    for (const auto& x : task.test.inputs) {
        test_prompts.push_back(assemble_prompt(x, demos, fmt, labels));
        test_prompts.back().provenance.seed = seed;
        if (cfg.max_prompt_tokens > 0 &&
            !estimate_token_budget(test_prompts.back(), cfg.max_prompt_tokens).fits) {
            ++over_budget;
        }
    }
    const auto test_probs = client.query_all(test_prompts, labels);

    std::optional<ProbVector> p_cf;
    auto content_free = [&]() -> const ProbVector& {
        if (!p_cf) p_cf = client.query(content_free_prompt(demos, fmt, labels, cfg.cf_token), labels);
        return *p_cf;
    };

    std::vector<CellResult> cells;
    for (const Method method : cfg.methods) {
        CellResult cell;
        cell.method = method;
        cell.seed = seed;
        cell.k = demos.size();
        switch (method) {
            case Method::noc:
                cell.params = baseline_noc(labels.size());
                break;
            case Method::conc:
                cell.params = init_conc(content_free());
                break;
            case Method::linc: {
                if (task.validation.size() < n_validation) {
                    throw SamplingError("LinC needs " + std::to_string(n_validation) +
                                        " validation examples, only " +
                                        std::to_string(task.validation.size()) + " available");
                }
                const std::span<const LabeledExample> val_set(task.validation.data(), n_validation);
                const auto vps = build_validation_prompts(val_set, validation_demos, fmt, labels);
                const auto val_prompts = prompts_of(vps);
                const std::size_t before = client.backend_calls();
                const auto val_probs = precompute_validation_logits(val_prompts, labels, client);
                const std::size_t val_calls = client.backend_calls() - before;

                TrainConfig tc = cfg.train;
                tc.n_validation = n_validation;
                const auto samples = to_samples(val_probs, vps);
                std::optional<CalibrationParams> init;
                if (tc.init_mode == InitMode::conc) init = init_conc(content_free());
                auto [params, trace] = train_linc(samples, tc, init ? &*init : nullptr);
                trace.backend_calls = val_calls;
                cell.params = std::move(params);
                cell.trace = std::move(trace);
                break;
            }
        }

        std::vector<int> predictions;
        std::vector<ProbVector> calibrated;
        predictions.reserve(test_probs.size());
        calibrated.reserve(test_probs.size());
        double raw_entropy = 0.0;
        for (const auto& p : test_probs) {
            calibrated.push_back(calibrated_probs(cell.params, p.values()));
            predictions.push_back(static_cast<int>(predict(cell.params, p.values())));
            raw_entropy += shannon_entropy(p.values());
        }
        const auto& truth = task.test.labels.reveal(predictions);

        std::vector<double> confidences;
        std::vector<bool> correct;
        confidences.reserve(calibrated.size());
        correct.reserve(calibrated.size());
        for (std::size_t i = 0; i < calibrated.size(); ++i) {
            confidences.push_back(calibrated[i].max());
            correct.push_back(predictions[i] == truth[i]);
        }
        cell.accuracy = accuracy(predictions, truth);
        cell.ece = expected_calibration_error(confidences, correct, cfg.ece_bins);
        cell.entropy_histogram = entropy_histogram(calibrated, cfg.entropy_bins, labels.size());
        cell.mean_entropy = cell.entropy_histogram.mean_entropy;
        cell.raw_mean_entropy = raw_entropy / static_cast<double>(test_probs.size());
        cells.push_back(std::move(cell));
    }

    if (info) {
        info->seed = seed;
        info->backend_calls = client.backend_calls() - calls_before;
        info->prompts_over_budget = over_budget;
        info->demos.assign(demos.begin(), demos.end());
    }
    return cells;
}

EvalReport run_fewshot_eval(const ExperimentConfig& cfg, ExperimentSession& session) {
    const auto start = std::chrono::steady_clock::now();
    auto& client = session.client();
    const std::size_t calls_before = client.backend_calls();
    const Task task = prepare_task(cfg, cfg.train.n_validation);

    EvalReport report;
    report.experiment = "fewshot_eval";
    report.config = to_json(cfg);
    report.run_info = run_info_base();
    for (const auto seed : cfg.seeds) {
        auto demos = sample_demonstrations(task.demo_pool, cfg.k, seed);
        auto val_demos = validation_demos_for(cfg, task, demos, seed);
        SeedInfo info;
        try {
            auto cells = evaluate_demo_set(cfg, task, task.task_template, task.labels, demos,
                                           val_demos, cfg.train.n_validation, client, seed, &info);
            for (auto& c : cells) report.cells.push_back(std::move(c));
        } catch (Error& e) {
            e.add_context("seed " + std::to_string(seed));
            throw;
        }
        report.seeds.push_back(std::move(info));
    }
    finish(report, client, calls_before, start);
    return report;
}

EvalReport run_fewshot_eval(const ExperimentConfig& cfg) {
    ExperimentSession session(cfg);
    return run_fewshot_eval(cfg, session);
}

EvalReport run_label_proportion_study(const ExperimentConfig& cfg,
                                      const std::vector<std::vector<double>>& proportions,
                                      std::size_t permutations_per_proportion,
                                      ExperimentSession& session) {
    const auto start = std::chrono::steady_clock::now();
    auto& client = session.client();
    const std::size_t calls_before = client.backend_calls();
    const Task task = prepare_task(cfg, cfg.train.n_validation);
    const std::uint64_t seed = cfg.seeds.front();

    EvalReport report;
    report.experiment = "label_proportion_study";
    report.config = to_json(cfg);
    report.config["study_proportions"] = proportions;
    report.config["study_permutations"] = permutations_per_proportion;
    report.run_info = run_info_base();

    for (const auto& proportion : proportions) {
        std::vector<Demonstration> base;
        std::optional<std::string> failure;
        try {
            base = sample_demonstrations(task.demo_pool, cfg.k, seed, proportion);
        } catch (const Error& e) {
            failure = e.what();
        }
        for (std::size_t perm = 0; perm < permutations_per_proportion; ++perm) {
            std::vector<CellResult> cells;
            if (!failure) {
                try {
                    const auto demos =
                        permute_demonstrations(base, mix_seed(seed, kPermutationSalt + perm));
                    const auto val_demos = validation_demos_for(cfg, task, demos, seed);
                    SeedInfo info;
                    cells = evaluate_demo_set(cfg, task, task.task_template, task.labels, demos,
                                              val_demos, cfg.train.n_validation, client, seed,
                                              &info);
                    info.axis = "_prop-" + join_proportion(proportion) + "_perm-" + std::to_string(perm);
                    report.seeds.push_back(std::move(info));
                } catch (const BackendError&) {
                    throw;
                } catch (const Error& e) {
                    failure = e.what();
                }
            }
            if (failure) {
                cells.clear();
                for (const auto m : cfg.methods) cells.push_back(error_cell(m, seed, cfg.k, *failure));
            }
            for (auto& c : cells) {
                c.proportion = proportion;
                c.permutation = perm;
                report.cells.push_back(std::move(c));
            }
        }
    }
    finish(report, client, calls_before, start);
    return report;
}

EvalReport run_template_study(const ExperimentConfig& cfg, const std::vector<std::string>& templates,
                              ExperimentSession& session) {
    if (templates.size() < 2) throw ConfigError("template study needs at least 2 templates");
    const auto start = std::chrono::steady_clock::now();
    auto& client = session.client();
    const std::size_t calls_before = client.backend_calls();
    const Task task = prepare_task(cfg, cfg.train.n_validation);
    const std::uint64_t seed = cfg.seeds.front();
    const auto demos = sample_demonstrations(task.demo_pool, cfg.k, seed);
    const auto val_demos = validation_demos_for(cfg, task, demos, seed);

    EvalReport report;
    report.experiment = "template_study";
    report.config = to_json(cfg);
    report.config["study_templates"] = templates;
    report.run_info = run_info_base();

    for (const auto& name : templates) {
        std::vector<CellResult> cells;
        try {
            const auto tmpl = resolve_template(name);
            const auto labels = make_labels(cfg, tmpl);
            if (labels.size() != task.labels.size()) {
                throw ConfigError("template '" + name + "' has " + std::to_string(labels.size()) +
                                  " classes, dataset uses " + std::to_string(task.labels.size()));
            }
            SeedInfo info;
            cells = evaluate_demo_set(cfg, task, tmpl, labels, demos, val_demos,
                                      cfg.train.n_validation, client, seed, &info);
            info.axis = "_tpl-" + name;
            report.seeds.push_back(std::move(info));
        } catch (const BackendError&) {
            throw;
        } catch (const Error& e) {
            cells.clear();
            for (const auto m : cfg.methods) cells.push_back(error_cell(m, seed, cfg.k, e.what()));
        }
        for (auto& c : cells) {
            c.template_name = name;
            report.cells.push_back(std::move(c));
        }
    }
    finish(report, client, calls_before, start);
    return report;
}

EvalReport run_validation_size_sweep(const ExperimentConfig& cfg,
                                     const std::vector<std::size_t>& sizes,
                                     ExperimentSession& session) {
    if (sizes.empty()) throw ConfigError("validation size sweep needs at least one size");
    const auto start = std::chrono::steady_clock::now();
    auto& client = session.client();
    const std::size_t calls_before = client.backend_calls();
    const std::size_t largest = *std::max_element(sizes.begin(), sizes.end());
    const Task task = prepare_task(cfg, largest);

    EvalReport report;
    report.experiment = "validation_size_sweep";
    report.config = to_json(cfg);
    report.config["study_validation_sizes"] = sizes;
    report.run_info = run_info_base();

    ExperimentConfig reference_cfg = cfg;
    reference_cfg.methods.clear();
    for (const auto m : cfg.methods) {
        if (m != Method::linc) reference_cfg.methods.push_back(m);
    }
    ExperimentConfig linc_cfg = cfg;
    linc_cfg.methods = {Method::linc};

    for (const auto seed : cfg.seeds) {
        const auto demos = sample_demonstrations(task.demo_pool, cfg.k, seed);
        const auto val_demos = validation_demos_for(cfg, task, demos, seed);
        if (!reference_cfg.methods.empty()) {
            SeedInfo info;
            for (auto& c : evaluate_demo_set(reference_cfg, task, task.task_template, task.labels,
                                             demos, val_demos, 0, client, seed, &info)) {
                report.cells.push_back(std::move(c));
            }
            report.seeds.push_back(std::move(info));
        }
        if (!cfg.has_method(Method::linc)) continue;
        for (const auto size : sizes) {
            CellResult cell;
            if (size > task.validation.size()) {
                cell = error_cell(Method::linc, seed, cfg.k,
                                  "validation size " + std::to_string(size) + " exceeds the " +
                                      std::to_string(task.validation.size()) + " available examples");
            } else {
                SeedInfo info;
                cell = evaluate_demo_set(linc_cfg, task, task.task_template, task.labels, demos,
                                         val_demos, size, client, seed, &info)
                           .front();
                info.axis = "_nv-" + std::to_string(size);
                report.seeds.push_back(std::move(info));
            }
            cell.n_validation = size;
            report.cells.push_back(std::move(cell));
        }
    }
    finish(report, client, calls_before, start);
    return report;
}

GridReport run_hyperparameter_grid(const ExperimentConfig& cfg,
                                   const std::vector<std::size_t>& epochs_grid,
                                   const std::vector<std::size_t>& n_validation_grid,
                                   const std::vector<double>& step_size_grid,
                                   ExperimentSession& session) {
    if (epochs_grid.empty() || n_validation_grid.empty() || step_size_grid.empty()) {
        throw ConfigError("hyperparameter grids must be non-empty");
    }
    auto& client = session.client();
    const std::size_t calls_before = client.backend_calls();
    const std::size_t largest_nv = *std::max_element(n_validation_grid.begin(), n_validation_grid.end());
    const double keep = 1.0 - cfg.study.holdout_fraction;
    const auto pool_needed = static_cast<std::size_t>(std::ceil(static_cast<double>(largest_nv) / keep));
    const Task task = prepare_task(cfg, pool_needed);
    const std::uint64_t seed = cfg.seeds.front();

    // Seeded 80/20 split of the validation data; the test split is never touched.
    std::vector<LabeledExample> pool = task.validation;
    Rng rng(mix_seed(seed, kHoldoutSalt));
    rng.shuffle(std::span(pool));
    const auto heldout_n = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(cfg.study.holdout_fraction * static_cast<double>(pool.size()))));
    if (pool.size() < 2) throw SamplingError("hyperparameter search needs at least 2 validation examples");
    const std::vector<LabeledExample> heldout(pool.end() - static_cast<std::ptrdiff_t>(heldout_n), pool.end());
    const std::vector<LabeledExample> fit(pool.begin(), pool.end() - static_cast<std::ptrdiff_t>(heldout_n));

    const auto demos = sample_demonstrations(task.demo_pool, cfg.k, seed);
    const auto val_demos = validation_demos_for(cfg, task, demos, seed);
    const auto& fmt = task.task_template.format;

    const auto fit_vps = build_validation_prompts(fit, val_demos, fmt, task.labels);
    const auto fit_probs = precompute_validation_logits(prompts_of(fit_vps), task.labels, client);
    const auto fit_samples = to_samples(fit_probs, fit_vps);
    const auto held_vps = build_validation_prompts(heldout, demos, fmt, task.labels);
    const auto held_probs = precompute_validation_logits(prompts_of(held_vps), task.labels, client);

    std::optional<ProbVector> p_cf;
    if (cfg.train.init_mode == InitMode::conc) {
        p_cf = client.query(content_free_prompt(demos, fmt, task.labels, cfg.cf_token), task.labels);
    }

    GridReport report;
    report.config = to_json(cfg);
    report.config["grid"] = {{"epochs", epochs_grid},
                             {"n_validation", n_validation_grid},
                             {"step_size", step_size_grid}};
    report.heldout_size = heldout.size();

    std::optional<std::tuple<double, std::size_t, std::size_t, double>> best;  // -acc, T, Nv, alpha
    for (const auto epochs : epochs_grid) {
        for (const auto nv : n_validation_grid) {
            for (const auto alpha : step_size_grid) {
                GridCell cell{epochs, nv, alpha, 0.0, std::nullopt};
                if (nv > fit_samples.size()) {
                    cell.error = "n_validation " + std::to_string(nv) + " exceeds the " +
                                 std::to_string(fit_samples.size()) + " fitting examples";
                    report.cells.push_back(cell);
                    continue;
                }
                TrainConfig tc = cfg.train;
                tc.epochs = epochs;
                tc.n_validation = nv;
                tc.step_size = alpha;
                try {
                    std::optional<CalibrationParams> init;
                    if (tc.init_mode == InitMode::conc) init = init_conc(*p_cf);
                    const auto [params, trace] = train_linc(
                        std::span(fit_samples.data(), nv), tc, init ? &*init : nullptr);
                    std::size_t hits = 0;
                    for (std::size_t i = 0; i < held_probs.size(); ++i) {
                        hits += static_cast<int>(predict(params, held_probs[i].values())) ==
                                held_vps[i].label;
                    }
                    cell.heldout_accuracy =
                        static_cast<double>(hits) / static_cast<double>(held_probs.size());
                } catch (const DivergenceError& e) {
                    cell.error = e.what();
                }
                report.cells.push_back(cell);
                if (cell.error) continue;
                const auto key = std::make_tuple(-cell.heldout_accuracy, epochs, nv, alpha);
                if (!best || key < *best) {
                    best = key;
                    report.best = tc;
                    report.best_heldout_accuracy = cell.heldout_accuracy;
                }
            }
        }
    }
    if (!best) throw ConfigError("no hyperparameter cell could be evaluated");
    report.backend_calls = client.backend_calls() - calls_before;
    return report;
}

CalibrationRun run_calibration(const ExperimentConfig& cfg, ExperimentSession& session) {
    auto& client = session.client();
    const std::size_t calls_before = client.backend_calls();
    const Task task = prepare_task(cfg, cfg.train.n_validation);
    const std::uint64_t seed = cfg.seeds.front();
    auto demos = sample_demonstrations(task.demo_pool, cfg.k, seed);
    const auto val_demos = validation_demos_for(cfg, task, demos, seed);
    if (task.validation.size() < cfg.train.n_validation) {
        throw SamplingError("calibration needs " + std::to_string(cfg.train.n_validation) +
                            " validation examples, only " + std::to_string(task.validation.size()) +
                            " available");
    }
    const std::span<const LabeledExample> val_set(task.validation.data(), cfg.train.n_validation);
    const auto& fmt = task.task_template.format;
    const auto vps = build_validation_prompts(val_set, val_demos, fmt, task.labels);
    const auto probs = precompute_validation_logits(prompts_of(vps), task.labels, client);
    std::optional<CalibrationParams> init;
    if (cfg.train.init_mode == InitMode::conc) {
        init = init_conc(client.query(content_free_prompt(demos, fmt, task.labels, cfg.cf_token),
                                      task.labels));
    }
    auto [params, trace] = train_linc(to_samples(probs, vps), cfg.train, init ? &*init : nullptr);
    const std::size_t calls = client.backend_calls() - calls_before;
    trace.backend_calls = calls;
    return {std::move(params), std::move(trace), std::move(demos), calls};
}

}  // namespace linc

#include "linc/cli.hpp"

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "linc/error.hpp"
#include "linc/harness.hpp"
#include "linc/report.hpp"

namespace linc {

namespace {

struct Invocation {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    int verbosity = 0;
    // convert-report
    std::string input;
    std::string format = "csv";
    std::string output_dir;
};

std::string summarize(const EvalReport& report) {
    std::string line;
    char buf[128];
    for (const auto& [method, a] : report.aggregate) {
        if (!line.empty()) line += ", ";
        std::snprintf(buf, sizeof buf, "%s -> %.4f +/- %.4f", method.c_str(), a.mean_accuracy,
                      a.std_accuracy);
        line += buf;
    }
    return line.empty() ? "no successful cells" : line;
}

ExperimentConfig load(const Invocation& inv) {
    auto overrides = inv.overrides;
    if (inv.seed) overrides.push_back("seeds=[" + std::to_string(*inv.seed) + "]");
    return load_experiment_config(inv.config_path, overrides);
}

class Runner {
public:
    Runner(std::ostream& out, std::ostream& err, const Invocation& inv)
        : out_(out), err_(err), inv_(inv) {}

    void log(const std::string& msg) const {
        if (inv_.verbosity > 0) err_ << "[linc] " << msg << '\n';
    }

    void eval_like(const std::string& stage,
                   const std::function<EvalReport(const ExperimentConfig&, ExperimentSession&)>& run) {
        const auto cfg = load(inv_);
        log(stage + ": config " + inv_.config_path);
        ExperimentSession session(cfg);
        const auto report = run(cfg, session);
        const auto files = emit_report(report, cfg.output, ReportFormat::json);
        emit_report(report, cfg.output, ReportFormat::csv);
        log(stage + ": " + std::to_string(report.total_backend_calls) + " backend calls");
        out_ << summarize(report) << '\n' << "report: " << files.front().string() << '\n';
    }

    void calibrate() {
        const auto cfg = load(inv_);
        log("calibrate: config " + inv_.config_path);
        ExperimentSession session(cfg);
        const auto run = run_calibration(cfg, session);
        std::error_code ec;
        std::filesystem::create_directories(cfg.output, ec);
        if (ec) throw IoError("cannot create output directory " + cfg.output);
        const auto path = std::filesystem::path(cfg.output) / "params.json";
        write_text_file(path, params_to_json(run.params, &cfg.train).dump(2) + "\n");
        char buf[96];
        std::snprintf(buf, sizeof buf, "final loss %.6f after %zu epochs, %zu backend calls",
                      run.trace.epoch_mean_loss.back(), run.trace.epoch_mean_loss.size(),
                      run.backend_calls);
        out_ << "linc: " << buf << '\n' << "params: " << path.string() << '\n';
    }

    void hparams() {
        const auto cfg = load(inv_);
        ExperimentSession session(cfg);
        const auto report = run_hyperparameter_grid(cfg, cfg.study.grid_epochs,
                                                    cfg.study.grid_n_validation,
                                                    cfg.study.grid_step_size, session);
        const auto path = emit_grid_report(report, cfg.output);
        char buf[160];
        std::snprintf(buf, sizeof buf, "best: epochs=%zu n_validation=%zu step_size=%g (held-out accuracy %.4f)",
                      report.best.epochs, report.best.n_validation, report.best.step_size,
                      report.best_heldout_accuracy);
        out_ << buf << '\n' << "report: " << path.string() << '\n';
    }

    void convert() {
        const auto report = eval_report_from_json(read_json_file(inv_.input));
        const auto dir = inv_.output_dir.empty()
                             ? std::filesystem::path(inv_.input).parent_path()
                             : std::filesystem::path(inv_.output_dir);
        const auto format = inv_.format == "json" ? ReportFormat::json : ReportFormat::csv;
        const auto files = emit_report(report, dir, format);
        out_ << "report: " << files.front().string() << '\n';
    }

private:
    std::ostream& out_;
    std::ostream& err_;
    const Invocation& inv_;
};

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Linear probe calibration for in-context learning", "linc"};
    app.require_subcommand(1);
    Invocation inv;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", inv.config_path, "Experiment config (JSON)")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_option("--set", inv.overrides, "Override a config value: dotted.key=value")
            ->take_all();
        sub->add_option("--seed", inv.seed, "Run a single demonstration seed");
        sub->add_flag("-v,--verbose", inv.verbosity, "Progress on stderr");
    };

    auto* calibrate = app.add_subcommand("calibrate", "Fit LinC parameters and write params.json");
    auto* eval = app.add_subcommand("eval", "Few-shot evaluation of noc/conc/linc across seeds");
    auto* sweep_v = app.add_subcommand("sweep-validation", "Accuracy against validation set size");
    auto* sweep_h = app.add_subcommand("sweep-hparams", "Grid search over epochs, N_v and step size");
    auto* study_p = app.add_subcommand("study-permutations",
                                       "Label proportions x demonstration permutations");
    auto* study_t = app.add_subcommand("study-templates", "Accuracy across prompt templates");
    for (auto* sub : {calibrate, eval, sweep_v, sweep_h, study_p, study_t}) add_common(sub);

    auto* convert = app.add_subcommand("convert-report", "Re-emit a report.json as CSV or JSON");
    convert->add_option("-i,--input", inv.input, "report.json")->required()->check(CLI::ExistingFile);
    convert->add_option("-f,--format", inv.format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    convert->add_option("-o,--output", inv.output_dir, "Output directory (default: input's)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return 1;
    }

    Runner runner(out, err, inv);
    std::string stage = "config";
    try {
        if (calibrate->parsed()) {
            stage = "calibrate";
            runner.calibrate();
        } else if (eval->parsed()) {
            stage = "eval";
            runner.eval_like(stage, [](const ExperimentConfig& c, ExperimentSession& s) {
                return run_fewshot_eval(c, s);
            });
        } else if (sweep_v->parsed()) {
            stage = "sweep-validation";
            runner.eval_like(stage, [](const ExperimentConfig& c, ExperimentSession& s) {
                return run_validation_size_sweep(c, c.study.validation_sizes, s);
            });
        } else if (sweep_h->parsed()) {
            stage = "sweep-hparams";
            runner.hparams();
        } else if (study_p->parsed()) {
            stage = "study-permutations";
            runner.eval_like(stage, [](const ExperimentConfig& c, ExperimentSession& s) {
                if (c.study.proportions.empty()) {
                    throw ConfigError("study.proportions must list at least one proportion vector");
                }
                return run_label_proportion_study(c, c.study.proportions, c.study.permutations, s);
            });
        } else if (study_t->parsed()) {
            stage = "study-templates";
            runner.eval_like(stage, [](const ExperimentConfig& c, ExperimentSession& s) {
                const auto templates =
                    c.study.templates.empty() ? sst2_format_names() : c.study.templates;
                return run_template_study(c, templates, s);
            });
        } else if (convert->parsed()) {
            stage = "convert-report";
            runner.convert();
        }
    } catch (const BackendError& e) {
        err << "linc " << stage << ": backend error: " << e.what() << '\n';
        return 2;
    } catch (const DivergenceError& e) {
        err << "linc " << stage << ": " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        err << "linc " << stage << ": " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace linc

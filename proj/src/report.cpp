#include "linc/report.hpp"

#include <fstream>
#include <sstream>

#include "linc/error.hpp"
#include "linc/format.hpp"

namespace linc {

using json = nlohmann::json;

namespace {

json ece_to_json(const EceResult& e) {
    json bins = json::array();
    for (const auto& b : e.per_bin) {
        bins.push_back({{"count", b.count}, {"accuracy", b.accuracy}, {"confidence", b.confidence}});
    }
    return {{"M", e.num_bins}, {"ece", e.ece}, {"per_bin", std::move(bins)}};
}

EceResult ece_from_json(const json& j) {
    EceResult e;
    e.num_bins = j.at("M").get<std::size_t>();
    e.ece = j.at("ece").get<double>();
    for (const auto& b : j.at("per_bin")) {
        e.per_bin.push_back({b.at("count").get<std::size_t>(), b.at("accuracy").get<double>(),
                             b.at("confidence").get<double>()});
    }
    return e;
}

json cell_to_json(const CellResult& c) {
    json j = {{"method", to_string(c.method)}, {"seed", c.seed}, {"k", c.k}};
    if (c.template_name) j["template"] = *c.template_name;
    if (c.proportion) j["proportion"] = *c.proportion;
    if (c.permutation) j["permutation"] = *c.permutation;
    if (c.n_validation) j["n_validation"] = *c.n_validation;
    if (c.error) {
        j["error"] = *c.error;
        return j;
    }
    j["accuracy"] = c.accuracy;
    j["mean_entropy"] = c.mean_entropy;
    j["raw_mean_entropy"] = c.raw_mean_entropy;
    j["ece"] = ece_to_json(c.ece);
    j["entropy_histogram"] = {{"bin_edges", c.entropy_histogram.bin_edges},
                              {"counts", c.entropy_histogram.counts},
                              {"mean_entropy", c.entropy_histogram.mean_entropy}};
    j["params"] = params_to_json(c.params);
    if (c.trace) {
        j["train_trace"] = {{"epoch_mean_loss", c.trace->epoch_mean_loss},
                            {"backend_calls", c.trace->backend_calls}};
    }
    return j;
}

CellResult cell_from_json(const json& j) {
    CellResult c;
    c.method = method_from_string(j.at("method").get<std::string>());
    c.seed = j.at("seed").get<std::uint64_t>();
    c.k = j.at("k").get<std::size_t>();
    if (j.contains("template")) c.template_name = j.at("template").get<std::string>();
    if (j.contains("proportion")) c.proportion = j.at("proportion").get<std::vector<double>>();
    if (j.contains("permutation")) c.permutation = j.at("permutation").get<std::size_t>();
    if (j.contains("n_validation")) c.n_validation = j.at("n_validation").get<std::size_t>();
    if (j.contains("error")) {
        c.error = j.at("error").get<std::string>();
        return c;
    }
    c.accuracy = j.at("accuracy").get<double>();
    c.mean_entropy = j.at("mean_entropy").get<double>();
    c.raw_mean_entropy = j.at("raw_mean_entropy").get<double>();
    c.ece = ece_from_json(j.at("ece"));
    const auto& h = j.at("entropy_histogram");
    c.entropy_histogram.bin_edges = h.at("bin_edges").get<std::vector<double>>();
    c.entropy_histogram.counts = h.at("counts").get<std::vector<std::size_t>>();
    c.entropy_histogram.mean_entropy = h.at("mean_entropy").get<double>();
    c.params = params_from_json(j.at("params"));
    if (j.contains("train_trace")) {
        TrainTrace t;
        t.epoch_mean_loss = j.at("train_trace").at("epoch_mean_loss").get<std::vector<double>>();
        t.backend_calls = j.at("train_trace").at("backend_calls").get<std::size_t>();
        t.final_params = c.params;
        c.trace = std::move(t);
    }
    return c;
}

json demo_to_json(const Demonstration& d) {
    json j = {{"label", d.label}};
    if (d.input_text.is_pair()) {
        j["premise"] = d.input_text.text;
        j["hypothesis"] = *d.input_text.hypothesis;
    } else {
        j["text"] = d.input_text.text;
    }
    return j;
}

Demonstration demo_from_json(const json& j) {
    Demonstration d;
    d.label = j.at("label").get<int>();
    if (j.contains("premise")) {
        d.input_text = TextInput(j.at("premise").get<std::string>(),
                                 j.at("hypothesis").get<std::string>());
    } else {
        d.input_text = TextInput(j.at("text").get<std::string>());
    }
    return d;
}

std::string file_safe(std::string s) {
    for (auto& ch : s) {
        const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') ||
                        (ch >= '0' && ch <= '9') || ch == '.' || ch == '_' || ch == '-';
        if (!ok) ch = '_';
    }
    return s;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

}  // namespace

json to_json(const EvalReport& report) {
    json cells = json::array();
    for (const auto& c : report.cells) cells.push_back(cell_to_json(c));
    json seeds = json::array();
    for (const auto& s : report.seeds) {
        json demos = json::array();
        for (const auto& d : s.demos) demos.push_back(demo_to_json(d));
        seeds.push_back({{"seed", s.seed},
                         {"axis", s.axis},
                         {"backend_calls", s.backend_calls},
                         {"prompts_over_budget", s.prompts_over_budget},
                         {"demos", std::move(demos)}});
    }
    json aggregate = json::object();
    for (const auto& [method, a] : report.aggregate) {
        aggregate[method] = {{"mean_accuracy", a.mean_accuracy},
                             {"std_accuracy", a.std_accuracy},
                             {"cells", a.cells}};
    }
    return {{"tool", {{"name", "linc"}, {"version", kToolVersion}}},
            {"experiment", report.experiment},
            {"config", report.config},
            {"cells", std::move(cells)},
            {"seeds", std::move(seeds)},
            {"aggregate", std::move(aggregate)},
            {"total_backend_calls", report.total_backend_calls}};
}

EvalReport eval_report_from_json(const json& j) {
    try {
        EvalReport r;
        r.experiment = j.at("experiment").get<std::string>();
        r.config = j.at("config");
        for (const auto& c : j.at("cells")) r.cells.push_back(cell_from_json(c));
        for (const auto& s : j.at("seeds")) {
            SeedInfo info;
            info.seed = s.at("seed").get<std::uint64_t>();
            info.axis = s.value("axis", "");
            info.backend_calls = s.at("backend_calls").get<std::size_t>();
            info.prompts_over_budget = s.value("prompts_over_budget", std::size_t{0});
            for (const auto& d : s.at("demos")) info.demos.push_back(demo_from_json(d));
            r.seeds.push_back(std::move(info));
        }
        for (const auto& [method, a] : j.at("aggregate").items()) {
            r.aggregate[method] = {a.at("mean_accuracy").get<double>(),
                                   a.at("std_accuracy").get<double>(),
                                   a.at("cells").get<std::size_t>()};
        }
        r.total_backend_calls = j.value("total_backend_calls", std::size_t{0});
        return r;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed report: ") + e.what());
    }
}

json to_json(const GridReport& report) {
    json cells = json::array();
    for (const auto& c : report.cells) {
        json cell = {{"epochs", c.epochs}, {"n_validation", c.n_validation}, {"step_size", c.step_size}};
        if (c.error) {
            cell["error"] = *c.error;
        } else {
            cell["heldout_accuracy"] = c.heldout_accuracy;
        }
        cells.push_back(std::move(cell));
    }
    return {{"tool", {{"name", "linc"}, {"version", kToolVersion}}},
            {"experiment", "hyperparameter_grid"},
            {"config", report.config},
            {"cells", std::move(cells)},
            {"best", to_json(report.best)},
            {"best_heldout_accuracy", report.best_heldout_accuracy},
            {"heldout_size", report.heldout_size},
            {"backend_calls", report.backend_calls}};
}

std::string report_csv(const EvalReport& report) {
    std::ostringstream out;
    out << "experiment,method,seed,k,template,proportion,permutation,n_validation,accuracy,"
           "mean_entropy,raw_mean_entropy,ece,error\n";
    for (const auto& c : report.cells) {
        std::string proportion;
        if (c.proportion) {
            for (std::size_t i = 0; i < c.proportion->size(); ++i) {
                if (i) proportion += ";";
                proportion += format_double((*c.proportion)[i]);
            }
        }
        out << report.experiment << ',' << to_string(c.method) << ',' << c.seed << ',' << c.k << ','
            << csv_escape(c.template_name.value_or("")) << ',' << proportion << ','
            << (c.permutation ? std::to_string(*c.permutation) : "") << ','
            << (c.n_validation ? std::to_string(*c.n_validation) : "") << ',';
        if (c.error) {
            out << ",,,," << csv_escape(*c.error) << '\n';
        } else {
            out << format_double(c.accuracy) << ',' << format_double(c.mean_entropy) << ','
                << format_double(c.raw_mean_entropy) << ',' << format_double(c.ece.ece) << ",\n";
        }
    }
    return out.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    if (!out) throw IoError("write to " + path.string() + " failed");
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::vector<std::filesystem::path> emit_report(const EvalReport& report,
                                               const std::filesystem::path& dir,
                                               ReportFormat format) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());

    std::vector<std::filesystem::path> written;
    if (format == ReportFormat::csv) {
        written.push_back(dir / "report.csv");
        write_text_file(written.back(), report_csv(report));
        return written;
    }
    written.push_back(dir / "report.json");
    write_text_file(written.back(), to_json(report).dump(2) + "\n");
    for (const auto& c : report.cells) {
        if (c.error) continue;
        written.push_back(dir / ("entropy_" + to_string(c.method) + "_" + std::to_string(c.seed) +
                                 file_safe(c.tag()) + ".csv"));
        write_text_file(written.back(), histogram_csv(c.entropy_histogram));
    }
    if (!report.run_info.is_null()) {
        written.push_back(dir / "run_info.json");
        write_text_file(written.back(), report.run_info.dump(2) + "\n");
    }
    return written;
}

std::filesystem::path emit_grid_report(const GridReport& report, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    const auto path = dir / "grid_report.json";
    write_text_file(path, to_json(report).dump(2) + "\n");
    return path;
}

}  // namespace linc

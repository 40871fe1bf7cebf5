#include "linc/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "linc/error.hpp"
#include "linc/templates.hpp"

namespace linc {

using json = nlohmann::json;

std::string to_string(Method m) {
    switch (m) {
        case Method::noc: return "noc";
        case Method::conc: return "conc";
        case Method::linc: return "linc";
    }
    return "noc";
}

Method method_from_string(const std::string& s) {
    if (s == "noc") return Method::noc;
    if (s == "conc") return Method::conc;
    if (s == "linc") return Method::linc;
    throw ConfigError("unknown method '" + s + "' (expected noc, conc or linc)");
}

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (!allowed.contains(key)) {
            throw ConfigError("unknown key '" + (where.empty() ? key : where + "." + key) + "'");
        }
    }
}

SyntheticOracleSpec synthetic_from_json(const json& j) {
    check_keys(j, {"true_logit_scale", "bias_weights", "noise_stddev", "seed", "class_cues"},
               "backend.synthetic");
    SyntheticOracleSpec s;
    s.true_logit_scale = j.value("true_logit_scale", s.true_logit_scale);
    s.bias_weights = j.value("bias_weights", std::vector<double>{1.0, 1.0});
    s.noise_stddev = j.value("noise_stddev", s.noise_stddev);
    s.seed = j.value("seed", s.seed);
    s.class_cues = j.value("class_cues", std::vector<std::string>{});
    s.num_classes = s.bias_weights.size();
    return s;
}

json to_json(const SyntheticOracleSpec& s) {
    return {{"true_logit_scale", s.true_logit_scale},
            {"bias_weights", s.bias_weights},
            {"noise_stddev", s.noise_stddev},
            {"seed", s.seed},
            {"class_cues", s.class_cues}};
}

BackendConfig backend_from_json(const json& j) {
    check_keys(j,
               {"kind", "endpoint_url", "model_name", "max_parallel_requests", "timeout_ms",
                "retry", "api_key_env_var", "top_logprobs", "cache_dir", "synthetic"},
               "backend");
    BackendConfig b;
    const auto kind = j.value("kind", std::string("synthetic"));
    if (kind == "http") {
        b.kind = BackendKind::http;
        b.model_name = "";
    } else if (kind != "synthetic") {
        throw ConfigError("backend.kind must be 'http' or 'synthetic'");
    }
    b.endpoint_url = j.value("endpoint_url", b.endpoint_url);
    b.model_name = j.value("model_name", b.kind == BackendKind::http ? std::string{} : b.model_name);
    b.max_parallel_requests = j.value("max_parallel_requests", b.max_parallel_requests);
    b.timeout = std::chrono::milliseconds(j.value("timeout_ms", b.timeout.count()));
    if (j.contains("retry")) {
        const auto& r = j.at("retry");
        check_keys(r, {"max_attempts", "backoff_ms"}, "backend.retry");
        b.retry.max_attempts = r.value("max_attempts", b.retry.max_attempts);
        b.retry.backoff = std::chrono::milliseconds(r.value("backoff_ms", b.retry.backoff.count()));
    }
    b.api_key_env_var = j.value("api_key_env_var", b.api_key_env_var);
    b.top_logprobs = j.value("top_logprobs", b.top_logprobs);
    if (j.contains("cache_dir") && !j.at("cache_dir").is_null()) {
        b.cache_dir = j.at("cache_dir").get<std::string>();
    }
    if (j.contains("synthetic")) b.synthetic = synthetic_from_json(j.at("synthetic"));
    if (b.kind == BackendKind::http && b.model_name.empty()) {
        throw ConfigError("backend.model_name is required for the http backend");
    }
    return b;
}

json to_json(const BackendConfig& b) {
    json j = {{"kind", b.kind == BackendKind::http ? "http" : "synthetic"},
              {"endpoint_url", b.endpoint_url},
              {"model_name", b.model_name},
              {"max_parallel_requests", b.max_parallel_requests},
              {"timeout_ms", b.timeout.count()},
              {"retry", {{"max_attempts", b.retry.max_attempts},
                         {"backoff_ms", b.retry.backoff.count()}}},
              {"api_key_env_var", b.api_key_env_var},
              {"top_logprobs", b.top_logprobs},
              {"cache_dir", b.cache_dir ? json(*b.cache_dir) : json(nullptr)}};
    if (b.kind == BackendKind::synthetic) j["synthetic"] = to_json(b.synthetic);
    return j;
}

StudyConfig study_from_json(const json& j) {
    check_keys(j,
               {"proportions", "permutations", "templates", "validation_sizes", "grid_epochs",
                "grid_n_validation", "grid_step_size", "holdout_fraction"},
               "study");
    StudyConfig s;
    s.proportions = j.value("proportions", s.proportions);
    s.permutations = j.value("permutations", s.permutations);
    s.templates = j.value("templates", s.templates);
    s.validation_sizes = j.value("validation_sizes", s.validation_sizes);
    s.grid_epochs = j.value("grid_epochs", s.grid_epochs);
    s.grid_n_validation = j.value("grid_n_validation", s.grid_n_validation);
    s.grid_step_size = j.value("grid_step_size", s.grid_step_size);
    s.holdout_fraction = j.value("holdout_fraction", s.holdout_fraction);
    return s;
}

json to_json(const StudyConfig& s) {
    return {{"proportions", s.proportions},
            {"permutations", s.permutations},
            {"templates", s.templates},
            {"validation_sizes", s.validation_sizes},
            {"grid_epochs", s.grid_epochs},
            {"grid_n_validation", s.grid_n_validation},
            {"grid_step_size", s.grid_step_size},
            {"holdout_fraction", s.holdout_fraction}};
}

}  // namespace

bool ExperimentConfig::has_method(Method m) const {
    return std::find(methods.begin(), methods.end(), m) != methods.end();
}

void ExperimentConfig::validate() const {
    if (dataset.train.empty()) throw ConfigError("dataset.train is required");
    if (dataset.test.empty()) throw ConfigError("dataset.test is required");
    if (seeds.empty()) throw ConfigError("seeds must be non-empty");
    if (methods.empty()) throw ConfigError("methods must be non-empty");
    if (test_size < 1) throw ConfigError("test_size must be >= 1");
    if (ece_bins < 1) throw ConfigError("ece_bins must be >= 1");
    if (entropy_bins < 1) throw ConfigError("entropy_bins must be >= 1");
    if (!(study.holdout_fraction > 0.0 && study.holdout_fraction < 1.0)) {
        throw ConfigError("study.holdout_fraction must be within (0, 1)");
    }
    train.validate();
    backend.validate();
}

ExperimentConfig experiment_config_from_json(const json& j) {
    check_keys(j,
               {"dataset", "template", "label_names", "k", "methods", "seeds", "train", "backend",
                "test_size", "test_seed", "cf_token", "ece_bins", "entropy_bins", "output",
                "validation_demos", "max_prompt_tokens", "study"},
               "");
    ExperimentConfig cfg;
    try {
        const auto& d = j.at("dataset");
        check_keys(d, {"train", "validation", "test"}, "dataset");
        cfg.dataset.train = d.at("train").get<std::string>();
        cfg.dataset.test = d.at("test").get<std::string>();
        if (d.contains("validation") && !d.at("validation").is_null()) {
            cfg.dataset.validation = d.at("validation").get<std::string>();
        }
        cfg.template_name = j.value("template", cfg.template_name);
        cfg.label_names = j.value("label_names", cfg.label_names);
        cfg.k = j.value("k", cfg.k);
        if (j.contains("methods")) {
            cfg.methods.clear();
            for (const auto& m : j.at("methods")) cfg.methods.push_back(method_from_string(m));
        }
        cfg.seeds = j.value("seeds", cfg.seeds);
        if (j.contains("train")) cfg.train = train_config_from_json(j.at("train"));
        if (j.contains("backend")) cfg.backend = backend_from_json(j.at("backend"));
        cfg.test_size = j.value("test_size", cfg.test_size);
        cfg.test_seed = j.value("test_seed", cfg.test_seed);
        cfg.cf_token = j.value("cf_token", cfg.cf_token);
        cfg.ece_bins = j.value("ece_bins", cfg.ece_bins);
        cfg.entropy_bins = j.value("entropy_bins", cfg.entropy_bins);
        cfg.output = j.value("output", cfg.output);
        if (j.contains("validation_demos")) {
            const auto v = j.at("validation_demos").get<std::string>();
            if (v == "shared") {
                cfg.validation_demos = ValidationDemos::shared;
            } else if (v == "independent") {
                cfg.validation_demos = ValidationDemos::independent;
            } else {
                throw ConfigError("validation_demos must be 'shared' or 'independent'");
            }
        }
        cfg.max_prompt_tokens = j.value("max_prompt_tokens", cfg.max_prompt_tokens);
        if (j.contains("study")) cfg.study = study_from_json(j.at("study"));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("experiment config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

json to_json(const ExperimentConfig& cfg) {
    json methods = json::array();
    for (auto m : cfg.methods) methods.push_back(to_string(m));
    json dataset = {{"train", cfg.dataset.train}, {"test", cfg.dataset.test}};
    dataset["validation"] = cfg.dataset.validation ? json(*cfg.dataset.validation) : json(nullptr);
    return {{"dataset", std::move(dataset)},
            {"template", cfg.template_name},
            {"label_names", cfg.label_names},
            {"k", cfg.k},
            {"methods", std::move(methods)},
            {"seeds", cfg.seeds},
            {"train", to_json(cfg.train)},
            {"backend", to_json(cfg.backend)},
            {"test_size", cfg.test_size},
            {"test_seed", cfg.test_seed},
            {"cf_token", cfg.cf_token},
            {"ece_bins", cfg.ece_bins},
            {"entropy_bins", cfg.entropy_bins},
            {"output", cfg.output},
            {"validation_demos",
             cfg.validation_demos == ValidationDemos::shared ? "shared" : "independent"},
            {"max_prompt_tokens", cfg.max_prompt_tokens},
            {"study", to_json(cfg.study)}};
}

void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override '" + assignment + "' is not of the form key.path=value");
    }
    const std::string path = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::exception&) {
        value = raw;
    }
    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos
                                                                            : dot - start);
        if (key.empty()) throw ConfigError("override '" + assignment + "' has an empty key");
        if (!node->is_object()) {
            throw ConfigError("override '" + assignment + "': '" + key + "' is not inside an object");
        }
        if (dot == std::string::npos) {
            (*node)[key] = std::move(value);
            return;
        }
        node = &(*node)[key];
        if (node->is_null()) *node = json::object();
        start = dot + 1;
    }
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                        const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    for (const auto& o : overrides) apply_override(doc, o);
    auto cfg = experiment_config_from_json(doc);

    const auto base = path.parent_path();
    auto resolve = [&](std::string& p) {
        if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).lexically_normal().string();
    };
    resolve(cfg.dataset.train);
    resolve(cfg.dataset.test);
    if (cfg.dataset.validation) resolve(*cfg.dataset.validation);
    if (cfg.backend.cache_dir) resolve(*cfg.backend.cache_dir);
    const auto names = builtin_template_names();
    auto resolve_template_path = [&](std::string& t) {
        if (std::find(names.begin(), names.end(), t) == names.end() && !t.starts_with("openml:") &&
            std::filesystem::path(t).is_relative() && std::filesystem::exists(base / t)) {
            t = (base / t).lexically_normal().string();
        }
    };
    resolve_template_path(cfg.template_name);
    for (auto& t : cfg.study.templates) resolve_template_path(t);
    return cfg;
}

}  // namespace linc

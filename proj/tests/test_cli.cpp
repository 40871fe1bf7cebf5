#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include "fixtures.hpp"
#include "linc/calibrator.hpp"
#include "linc/report.hpp"

using namespace linc;
using json = nlohmann::json;
using testing::TempDir;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

RunResult run(const std::filesystem::path& dir, const std::string& args, const std::string& env = "") {
    const auto out = dir / "stdout.txt";
    const auto err = dir / "stderr.txt";
    const std::string cmd = env + " \"" + LINC_CLI_PATH + "\" " + args + " > \"" + out.string() +
                            "\" 2> \"" + err.string() + "\"";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

std::filesystem::path write_config(const std::filesystem::path& dir, const ExperimentConfig& cfg) {
    const auto path = dir / "experiment.json";
    write_text_file(path, to_json(cfg).dump(2));
    return path;
}

ExperimentConfig small_bias_flip(const std::filesystem::path& dir) {
    auto cfg = testing::synthetic_experiment(dir, 20, std::log(1.5), {4.0, 1.0});
    cfg.seeds = {0, 1};
    cfg.train.step_size = 0.1;
    return cfg;
}

}  // namespace

TEST_CASE("eval writes reports and a summary") {
    TempDir dir("cli-eval");
    const auto cfg_path = write_config(dir.path(), small_bias_flip(dir.path()));
    const auto r = run(dir.path(), "eval --config " + cfg_path.string() + " --set train.epochs=5");
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("noc -> 0.5000 +/- 0.0000") != std::string::npos);
    CHECK(r.out.find("report: ") != std::string::npos);
    const auto report = read_json_file(dir.path() / "out" / "report.json");
    CHECK(report.at("config").at("train").at("epochs") == 5);
    for (const auto& c : report.at("cells")) {
        if (c.at("method") == "linc") CHECK(c.at("train_trace").at("epoch_mean_loss").size() == 5);
    }
    CHECK(std::filesystem::exists(dir.path() / "out" / "report.csv"));
}

TEST_CASE("--seed pins a single seed and reruns are byte-identical") {
    TempDir dir("cli-seed");
    const auto cfg_path = write_config(dir.path(), small_bias_flip(dir.path()));
    REQUIRE(run(dir.path(), "eval -c " + cfg_path.string() + " --seed 7").exit_code == 0);
    const auto first = slurp(dir.path() / "out" / "report.json");
    REQUIRE(run(dir.path(), "eval -c " + cfg_path.string() + " --seed 7").exit_code == 0);
    CHECK(slurp(dir.path() / "out" / "report.json") == first);
    CHECK(json::parse(first).at("config").at("seeds") == json::array({7}));
}

TEST_CASE("calibrate writes params that flip the biased argmax") {
    TempDir dir("cli-calibrate");
    auto cfg = small_bias_flip(dir.path());
    cfg.train.epochs = 100;
    const auto cfg_path = write_config(dir.path(), cfg);
    const auto r = run(dir.path(), "calibrate --config " + cfg_path.string());
    REQUIRE(r.exit_code == 0);
    const auto params = params_from_json(read_json_file(dir.path() / "out" / "params.json"));
    const auto p1 = synthetic_oracle_probs(1, cfg.backend.synthetic, 0);
    CHECK(p1.argmax() == 0);
    CHECK(predict(params, p1.values()) == 1);
}

TEST_CASE("studies and sweeps") {
    TempDir dir("cli-studies");
    auto cfg = small_bias_flip(dir.path());
    cfg.seeds = {0};
    cfg.train.epochs = 5;
    cfg.study.proportions = {{0.5, 0.5}, {0.75, 0.25}};
    cfg.study.permutations = 2;
    cfg.study.validation_sizes = {1, 5};
    cfg.study.grid_epochs = {1, 5};
    cfg.study.grid_n_validation = {5};
    cfg.study.grid_step_size = {0.1};
    const auto cfg_path = write_config(dir.path(), cfg).string();

    CHECK(run(dir.path(), "study-permutations -c " + cfg_path).exit_code == 0);
    CHECK(read_json_file(dir.path() / "out" / "report.json").at("cells").size() == 12);

    CHECK(run(dir.path(), "study-templates -c " + cfg_path).exit_code == 0);
    CHECK(read_json_file(dir.path() / "out" / "report.json").at("cells").size() == 18);

    CHECK(run(dir.path(), "sweep-validation -c " + cfg_path).exit_code == 0);
    CHECK(read_json_file(dir.path() / "out" / "report.json").at("experiment") == "validation_size_sweep");

    const auto h = run(dir.path(), "sweep-hparams -c " + cfg_path);
    CHECK(h.exit_code == 0);
    CHECK(h.out.find("best: ") != std::string::npos);
    CHECK(read_json_file(dir.path() / "out" / "grid_report.json").at("cells").size() == 2);
}

TEST_CASE("convert-report") {
    TempDir dir("cli-convert");
    auto cfg = small_bias_flip(dir.path());
    cfg.train.epochs = 3;
    const auto cfg_path = write_config(dir.path(), cfg);
    REQUIRE(run(dir.path(), "eval -c " + cfg_path.string()).exit_code == 0);
    const auto converted = dir.path() / "converted";
    const auto r = run(dir.path(), "convert-report --input " + (dir.path() / "out" / "report.json").string() +
                                       " --format csv --output " + converted.string());
    REQUIRE(r.exit_code == 0);
    CHECK(slurp(converted / "report.csv") == slurp(dir.path() / "out" / "report.csv"));
}

TEST_CASE("exit codes") {
    TempDir dir("cli-exit");
    auto cfg = small_bias_flip(dir.path());

    SUBCASE("config errors exit 1 and name the stage") {
        const auto cfg_path = write_config(dir.path(), cfg);
        const auto r = run(dir.path(), "eval -c " + cfg_path.string() + " --set bogus_key=1");
        CHECK(r.exit_code == 1);
        CHECK(r.err.find("eval") != std::string::npos);
        CHECK(r.err.find("bogus_key") != std::string::npos);
        CHECK(run(dir.path(), "eval -c " + (dir.path() / "missing.json").string()).exit_code == 1);
        CHECK(run(dir.path(), "no-such-command").exit_code == 1);
        CHECK(run(dir.path(), "").exit_code == 1);
    }
    SUBCASE("missing API key exits 2 before any training") {
        cfg.backend.kind = BackendKind::http;
        cfg.backend.endpoint_url = "http://127.0.0.1:1/v1/completions";
        cfg.backend.model_name = "some-model";
        cfg.backend.api_key_env_var = "LINC_CLI_TEST_MISSING_KEY";
        const auto cfg_path = write_config(dir.path(), cfg);
        const auto r = run(dir.path(), "eval -c " + cfg_path.string(), "env -u LINC_CLI_TEST_MISSING_KEY");
        CHECK(r.exit_code == 2);
        CHECK(r.err.find("LINC_CLI_TEST_MISSING_KEY") != std::string::npos);
        CHECK_FALSE(std::filesystem::exists(dir.path() / "out"));
    }
    SUBCASE("unreachable backend exits 2") {
        cfg.backend.kind = BackendKind::http;
        cfg.backend.endpoint_url = "http://127.0.0.1:1/v1/completions";
        cfg.backend.model_name = "some-model";
        cfg.backend.api_key_env_var = "LINC_CLI_TEST_KEY";
        cfg.backend.retry = {1, std::chrono::milliseconds(1)};
        const auto cfg_path = write_config(dir.path(), cfg);
        const auto r = run(dir.path(), "eval -c " + cfg_path.string(), "LINC_CLI_TEST_KEY=secret-value");
        CHECK(r.exit_code == 2);
        CHECK(r.err.find("secret-value") == std::string::npos);
    }
    SUBCASE("help exits 0") {
        const auto r = run(dir.path(), "--help");
        CHECK(r.exit_code == 0);
        CHECK(r.out.find("sweep-hparams") != std::string::npos);
    }
}

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "linc/config.hpp"
#include "linc/dataset.hpp"
#include "linc/rng.hpp"

namespace linc::testing {

inline const std::vector<std::string> kCues = {"terrible", "wonderful"};

/// Scratch directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& name) {
        path_ = std::filesystem::temp_directory_path() /
                ("linc-" + name + "-" + std::to_string(::getpid()));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

/// `per_class` reviews of each class, alternating labels, each containing the
/// class cue.
inline std::vector<LabeledExample> cue_examples(std::size_t per_class, const std::string& prefix) {
    std::vector<LabeledExample> out;
    for (std::size_t i = 0; i < per_class; ++i) {
        for (int c = 0; c < 2; ++c) {
            out.push_back({TextInput(prefix + " " + std::to_string(i) + ": a " +
                                     kCues[static_cast<std::size_t>(c)] + " film"),
                           c});
        }
    }
    return out;
}

/// Writes train/validation/test JSONL files into `dir` and returns a config
/// pointing at them with a two-class synthetic oracle.
inline ExperimentConfig synthetic_experiment(const std::filesystem::path& dir,
                                             std::size_t test_per_class, double scale,
                                             std::vector<double> bias, double noise = 0.0) {
    const auto train = cue_examples(100, "train review");
    const auto validation = cue_examples(50, "validation review");
    const auto test = cue_examples(test_per_class, "test review");
    save_jsonl(dir / "train.jsonl", train);
    save_jsonl(dir / "validation.jsonl", validation);
    save_jsonl(dir / "test.jsonl", test);

    ExperimentConfig cfg;
    cfg.dataset.train = (dir / "train.jsonl").string();
    cfg.dataset.validation = (dir / "validation.jsonl").string();
    cfg.dataset.test = (dir / "test.jsonl").string();
    cfg.template_name = "sst2";
    cfg.test_size = 2 * test_per_class;
    cfg.output = (dir / "out").string();
    cfg.backend.kind = BackendKind::synthetic;
    cfg.backend.synthetic.num_classes = 2;
    cfg.backend.synthetic.true_logit_scale = scale;
    cfg.backend.synthetic.bias_weights = std::move(bias);
    cfg.backend.synthetic.noise_stddev = noise;
    cfg.backend.synthetic.class_cues = kCues;
    return cfg;
}

}  // namespace linc::testing

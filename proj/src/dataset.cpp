#include "linc/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>

#include <json.hpp>

#include "linc/error.hpp"
#include "linc/rng.hpp"

namespace linc {

using json = nlohmann::json;

std::vector<LabeledExample> load_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset " + path.string());
    std::vector<LabeledExample> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto where = path.string() + ":" + std::to_string(line_no);
        try {
            const auto j = json::parse(line);
            LabeledExample ex;
            ex.label = j.at("label").get<int>();
            if (j.contains("text")) {
                ex.input_text = TextInput(j.at("text").get<std::string>());
            } else if (j.contains("premise") && j.contains("hypothesis")) {
                ex.input_text = TextInput(j.at("premise").get<std::string>(),
                                          j.at("hypothesis").get<std::string>());
            } else {
                throw ConfigError(where + ": expected \"text\" or \"premise\"/\"hypothesis\"");
            }
            out.push_back(std::move(ex));
        } catch (const json::exception& e) {
            throw ConfigError(where + ": " + e.what());
        }
    }
    return out;
}

void save_jsonl(const std::filesystem::path& path, std::span<const LabeledExample> examples) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write dataset " + path.string());
    for (const auto& ex : examples) {
        json j;
        if (ex.input_text.is_pair()) {
            j["premise"] = ex.input_text.text;
            j["hypothesis"] = *ex.input_text.hypothesis;
        } else {
            j["text"] = ex.input_text.text;
        }
        j["label"] = ex.label;
        out << j.dump() << '\n';
    }
}

const std::vector<int>& HeldOutLabels::reveal(std::span<const int> predictions) const {
    if (predictions.size() != labels_.size()) {
        throw ShapeError("test labels requested with " + std::to_string(predictions.size()) +
                         " predictions for " + std::to_string(labels_.size()) + " samples");
    }
    ++reveals_;
    return labels_;
}

std::vector<LabeledExample> stratified_subset(std::span<const LabeledExample> pool,
                                              std::size_t size, std::uint64_t seed) {
    if (size >= pool.size()) return {pool.begin(), pool.end()};

    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < pool.size(); ++i) by_class[pool[i].label].push_back(i);

    std::vector<double> fractions;
    for (const auto& [_, idx] : by_class) {
        fractions.push_back(static_cast<double>(idx.size()) / static_cast<double>(pool.size()));
    }
    // Fractions sum to 1 up to rounding; renormalize before the strict check.
    const double total = std::accumulate(fractions.begin(), fractions.end(), 0.0);
    for (auto& f : fractions) f /= total;
    const auto counts = proportional_counts(size, fractions);

    Rng rng(seed);
    std::vector<LabeledExample> out;
    out.reserve(size);
    std::size_t c = 0;
    for (auto& [_, idx] : by_class) {
        rng.shuffle(std::span(idx));
        const auto take = std::min(counts[c++], idx.size());
        for (std::size_t i = 0; i < take; ++i) out.push_back(pool[idx[i]]);
    }
    rng.shuffle(std::span(out));
    return out;
}

TestSplit make_test_split(std::span<const LabeledExample> pool, std::size_t size,
                          std::uint64_t seed) {
    auto subset = stratified_subset(pool, size, seed);
    TestSplit split;
    std::vector<int> labels;
    split.inputs.reserve(subset.size());
    labels.reserve(subset.size());
    for (auto& ex : subset) {
        split.inputs.push_back(std::move(ex.input_text));
        labels.push_back(ex.label);
    }
    split.labels = HeldOutLabels(std::move(labels));
    return split;
}

TrainValidationSplit carve_validation(std::span<const LabeledExample> train,
                                      std::size_t validation_size, std::uint64_t seed) {
    if (validation_size > train.size()) {
        throw SamplingError("validation size " + std::to_string(validation_size) +
                            " exceeds training split of " + std::to_string(train.size()));
    }
    std::vector<std::size_t> idx(train.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    rng.shuffle(std::span(idx));
    TrainValidationSplit out;
    out.validation.reserve(validation_size);
    for (std::size_t i = 0; i < validation_size; ++i) out.validation.push_back(train[idx[i]]);
    std::vector<std::size_t> rest(idx.begin() + static_cast<std::ptrdiff_t>(validation_size),
                                  idx.end());
    std::sort(rest.begin(), rest.end());
    for (auto i : rest) out.train.push_back(train[i]);
    return out;
}

}  // namespace linc

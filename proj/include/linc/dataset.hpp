#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "linc/prompt.hpp"

namespace linc {

/// JSON Lines: {"text", "label"} or {"premise", "hypothesis", "label"} per line.
std::vector<LabeledExample> load_jsonl(const std::filesystem::path& path);
void save_jsonl(const std::filesystem::path& path, std::span<const LabeledExample> examples);

/// Test labels are held behind this guard: they become readable only once a
/// full prediction vector has been handed over, so nothing upstream of
/// prediction can peek at them.
class HeldOutLabels {
public:
    explicit HeldOutLabels(std::vector<int> labels) : labels_(std::move(labels)) {}

    std::size_t size() const noexcept { return labels_.size(); }

    /// Throws ShapeError unless predictions.size() == size().
    const std::vector<int>& reveal(std::span<const int> predictions) const;

    std::size_t reveal_count() const noexcept { return reveals_; }

private:
    std::vector<int> labels_;
    mutable std::size_t reveals_ = 0;
};

struct TestSplit {
    std::vector<TextInput> inputs;
    HeldOutLabels labels{{}};
};

/// Per-class counts follow the class frequencies of `pool` (largest-remainder
/// rounding); selection and final order are seeded. Returns all of `pool`
/// when size >= pool.size().
std::vector<LabeledExample> stratified_subset(std::span<const LabeledExample> pool,
                                              std::size_t size, std::uint64_t seed);

TestSplit make_test_split(std::span<const LabeledExample> pool, std::size_t size,
                          std::uint64_t seed);

struct TrainValidationSplit {
    std::vector<LabeledExample> train;
    std::vector<LabeledExample> validation;
};

/// Seeded draw of `validation_size` examples out of `train`; the rest stays
/// as the demonstration pool.
TrainValidationSplit carve_validation(std::span<const LabeledExample> train,
                                      std::size_t validation_size, std::uint64_t seed);

}  // namespace linc

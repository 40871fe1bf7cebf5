#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace linc {

/// Probability vector over the C classes of a label space. Entries are
/// non-negative and sum to one; `raw_mass` keeps the sum seen before
/// normalization (label-token mass for a real model).
class ProbVector {
public:
    ProbVector() = default;

    /// Normalizes `weights`. Throws ProtocolError on negative or non-finite
    /// entries or a zero total.
    static ProbVector from_weights(std::vector<double> weights);

    /// Entries are taken as-is (already on the simplex up to 1e-9). Used for
    /// cache reads and calibrated outputs.
    static ProbVector from_normalized(std::vector<double> values, double raw_mass = 1.0);

    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    std::span<const double> values() const noexcept { return values_; }
    double raw_mass() const noexcept { return raw_mass_; }

    /// Lowest index among the maxima.
    std::size_t argmax() const;
    double max() const;

    friend bool operator==(const ProbVector&, const ProbVector&) = default;

private:
    ProbVector(std::vector<double> v, double raw) : values_(std::move(v)), raw_mass_(raw) {}

    std::vector<double> values_;
    double raw_mass_ = 1.0;
};

}  // namespace linc

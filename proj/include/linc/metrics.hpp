#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "linc/prob_vector.hpp"

namespace linc {

/// Shannon entropy in bits, with 0 log 0 = 0.
double shannon_entropy(std::span<const double> p);

struct EntropyHistogram {
    std::vector<double> bin_edges;  // bins + 1 ascending edges over [0, log2 C]
    std::vector<std::size_t> counts;
    double mean_entropy = 0.0;
};

/// Equal-width bins over [0, log2 C]; the last bin is closed on the right.
/// An empty input yields zero counts over [0, 1] unless `num_classes` is given.
EntropyHistogram entropy_histogram(std::span<const ProbVector> probs, std::size_t bins,
                                   std::size_t num_classes = 0);

struct EceBin {
    std::size_t count = 0;
    double accuracy = 0.0;
    double confidence = 0.0;
};

struct EceResult {
    std::size_t num_bins = 0;
    std::vector<EceBin> per_bin;
    double ece = 0.0;
};

/// Equal-width confidence bins over [0, 1], last bin closed on the right;
/// ECE = sum_m |B_m| / n * |acc_m - conf_m|.
EceResult expected_calibration_error(std::span<const double> confidences,
                                     const std::vector<bool>& correct, std::size_t bins = 10);

/// Bin index used by expected_calibration_error.
std::size_t confidence_bin(double confidence, std::size_t bins);

double accuracy(std::span<const int> predictions, std::span<const int> labels);

/// Arithmetic mean and population standard deviation.
std::pair<double, double> mean_std(std::span<const double> values);

/// "bin_left_edge,count" rows.
std::string histogram_csv(const EntropyHistogram& h);

}  // namespace linc

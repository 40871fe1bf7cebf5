#include "linc/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "linc/error.hpp"
#include "linc/format.hpp"

namespace linc {

double shannon_entropy(std::span<const double> p) {
    double h = 0.0;
    for (double v : p) {
        if (v > 0.0) h -= v * std::log2(v);
    }
    // Rounding can push a one-hot vector a hair below zero.
    return std::max(h, 0.0);
}

EntropyHistogram entropy_histogram(std::span<const ProbVector> probs, std::size_t bins,
                                   std::size_t num_classes) {
    if (bins < 1) throw ConfigError("entropy histogram needs at least one bin");
    const std::size_t c = num_classes ? num_classes : (probs.empty() ? 2 : probs.front().size());
    const double top = std::log2(static_cast<double>(c));

    EntropyHistogram h;
    h.bin_edges.resize(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i) {
        h.bin_edges[i] = top * static_cast<double>(i) / static_cast<double>(bins);
    }
    h.counts.assign(bins, 0);
    double total = 0.0;
    for (const auto& p : probs) {
        if (p.size() != c) throw ShapeError("entropy histogram inputs differ in class count");
        const double e = shannon_entropy(p.values());
        total += e;
        auto bin = static_cast<std::size_t>(std::floor(e / top * static_cast<double>(bins)));
        h.counts[std::min(bin, bins - 1)] += 1;
    }
    h.mean_entropy = probs.empty() ? 0.0 : total / static_cast<double>(probs.size());
    return h;
}

std::size_t confidence_bin(double confidence, std::size_t bins) {
    const auto bin = static_cast<std::size_t>(
        std::floor(std::clamp(confidence, 0.0, 1.0) * static_cast<double>(bins)));
    return std::min(bin, bins - 1);
}

EceResult expected_calibration_error(std::span<const double> confidences,
                                     const std::vector<bool>& correct, std::size_t bins) {
    if (confidences.size() != correct.size()) {
        throw ShapeError("ECE: " + std::to_string(confidences.size()) + " confidences but " +
                         std::to_string(correct.size()) + " correctness flags");
    }
    if (confidences.empty()) throw ShapeError("ECE needs at least one sample");
    if (bins < 1) throw ConfigError("ECE needs at least one bin");

    EceResult r;
    r.num_bins = bins;
    r.per_bin.assign(bins, {});
    std::vector<double> conf_sum(bins, 0.0);
    std::vector<double> conf_carry(bins, 0.0);  // Neumaier compensation
    std::vector<std::size_t> hits(bins, 0);
    for (std::size_t i = 0; i < confidences.size(); ++i) {
        const double conf = confidences[i];
        if (!(conf >= 0.0 && conf <= 1.0)) {
            throw ConfigError("ECE confidence outside [0, 1]: " + std::to_string(conf));
        }
        const auto b = confidence_bin(conf, bins);
        r.per_bin[b].count += 1;
        const double t = conf_sum[b] + conf;
        conf_carry[b] += std::abs(conf_sum[b]) >= std::abs(conf) ? (conf_sum[b] - t) + conf
                                                                 : (conf - t) + conf_sum[b];
        conf_sum[b] = t;
        hits[b] += correct[i] ? 1 : 0;
    }
    const double n = static_cast<double>(confidences.size());
    for (std::size_t b = 0; b < bins; ++b) {
        auto& bin = r.per_bin[b];
        if (bin.count == 0) continue;
        const double m = static_cast<double>(bin.count);
        bin.accuracy = static_cast<double>(hits[b]) / m;
        bin.confidence = (conf_sum[b] + conf_carry[b]) / m;
        r.ece += m / n * std::abs(bin.accuracy - bin.confidence);
    }
    return r;
}

double accuracy(std::span<const int> predictions, std::span<const int> labels) {
    if (predictions.size() != labels.size()) {
        throw ShapeError("accuracy: " + std::to_string(predictions.size()) + " predictions for " +
                         std::to_string(labels.size()) + " labels");
    }
    if (predictions.empty()) throw ShapeError("accuracy of an empty prediction list");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i];
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}

std::pair<double, double> mean_std(std::span<const double> values) {
    if (values.empty()) throw ShapeError("mean_std of an empty list");
    const double n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    return {mean, std::sqrt(var / n)};
}

std::string histogram_csv(const EntropyHistogram& h) {
    std::string out = "bin_left_edge,count\n";
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
        out += format_double(h.bin_edges[i]) + "," + std::to_string(h.counts[i]) + "\n";
    }
    return out;
}

}  // namespace linc

#include "linc/backend.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "linc/error.hpp"
#include "linc/hash.hpp"
#include "linc/rng.hpp"

namespace linc {

ProbVector ProbVector::from_weights(std::vector<double> weights) {
    double total = 0.0;
    for (double w : weights) {
        if (!std::isfinite(w) || w < 0.0) {
            throw ProtocolError("probability weights must be finite and non-negative");
        }
        total += w;
    }
    if (!(total > 0.0)) throw ProtocolError("probability weights sum to zero");
    for (auto& w : weights) w /= total;
    return ProbVector(std::move(weights), total);
}

ProbVector ProbVector::from_normalized(std::vector<double> values, double raw_mass) {
    return ProbVector(std::move(values), raw_mass);
}

std::size_t ProbVector::argmax() const {
    return static_cast<std::size_t>(std::max_element(values_.begin(), values_.end()) -
                                    values_.begin());
}

double ProbVector::max() const { return values_.empty() ? 0.0 : values_[argmax()]; }

void SyntheticOracleSpec::validate() const {
    if (num_classes < 2) throw ConfigError("synthetic oracle needs at least 2 classes");
    if (bias_weights.size() != num_classes) {
        throw ConfigError("synthetic oracle: bias_weights has " +
                          std::to_string(bias_weights.size()) + " entries for " +
                          std::to_string(num_classes) + " classes");
    }
    for (double w : bias_weights) {
        if (!(w > 0.0) || !std::isfinite(w)) {
            throw ConfigError("synthetic oracle: bias_weights must be positive");
        }
    }
    if (!(noise_stddev >= 0.0)) throw ConfigError("synthetic oracle: noise_stddev must be >= 0");
    if (!std::isfinite(true_logit_scale)) {
        throw ConfigError("synthetic oracle: true_logit_scale must be finite");
    }
    if (!class_cues.empty() && class_cues.size() != num_classes) {
        throw ConfigError("synthetic oracle: class_cues must have one entry per class");
    }
}

void BackendConfig::validate() const {
    if (max_parallel_requests < 1) throw ConfigError("backend.max_parallel_requests must be >= 1");
    if (retry.max_attempts < 1) throw ConfigError("backend.retry.max_attempts must be >= 1");
    if (kind == BackendKind::http && endpoint_url.empty()) {
        throw ConfigError("backend.endpoint_url is required for the http backend");
    }
    if (kind == BackendKind::synthetic) synthetic.validate();
}

namespace {

std::string first_word(const std::string& verbalizer) {
    const auto begin = verbalizer.find_first_not_of(" \t\n");
    if (begin == std::string::npos) return verbalizer;
    const auto end = verbalizer.find_first_of(" \t\n", begin);
    return verbalizer.substr(begin, end == std::string::npos ? std::string::npos : end - begin);
}

std::vector<double> softmax(std::vector<double> z) {
    const double m = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (auto& v : z) {
        v = std::exp(v - m);
        total += v;
    }
    for (auto& v : z) v /= total;
    return z;
}

}  // namespace

ProbVector extract_label_probs(const std::map<std::string, double>& token_probs,
                               const LabelSpace& ls) {
    std::vector<double> weights;
    weights.reserve(ls.size());
    for (const auto& cls : ls.classes()) {
        const std::string token = first_word(cls.verbalizer);
        auto it = token_probs.find(token);
        if (it == token_probs.end()) it = token_probs.find(" " + token);
        if (it == token_probs.end()) throw MissingVerbalizerError(cls.index, cls.verbalizer);
        if (!std::isfinite(it->second)) {
            throw ProtocolError("non-finite probability for verbalizer '" + cls.verbalizer + "'");
        }
        weights.push_back(it->second);
    }
    return ProbVector::from_weights(std::move(weights));
}

ProbVector synthetic_oracle_probs(std::optional<std::size_t> true_class,
                                  const SyntheticOracleSpec& spec, std::uint64_t sample_key) {
    const std::size_t c = spec.num_classes;
    std::vector<double> logits(c, 0.0);
    if (true_class) {
        if (*true_class >= c) {
            throw InvalidLabelError("synthetic oracle: class " + std::to_string(*true_class) +
                                    " out of range");
        }
        logits[*true_class] = spec.true_logit_scale;
    }
    if (spec.noise_stddev > 0.0) {
        Rng rng(mix_seed(spec.seed, sample_key));
        for (auto& z : logits) z += spec.noise_stddev * rng.normal();
    }
    auto conditional = softmax(std::move(logits));
    for (std::size_t i = 0; i < c; ++i) conditional[i] *= spec.bias_weights[i];
    return ProbVector::from_weights(std::move(conditional));
}

SyntheticBackend::SyntheticBackend(SyntheticOracleSpec spec, std::string model_name)
    : spec_(std::move(spec)), model_name_(std::move(model_name)) {
    spec_.validate();
    // Fold the oracle parameters into the name so cached entries never cross
    // between differently configured oracles.
    std::string fingerprint = std::to_string(spec_.true_logit_scale) + "|" +
                              std::to_string(spec_.noise_stddev) + "|" +
                              std::to_string(spec_.seed);
    for (double w : spec_.bias_weights) fingerprint += "|" + std::to_string(w);
    for (const auto& cue : spec_.class_cues) fingerprint += "|" + cue;
    model_name_ += "#" + sha256_hex(fingerprint).substr(0, 12);
}

std::optional<std::size_t> SyntheticBackend::true_class_of(const Prompt& prompt,
                                                           const LabelSpace& ls) const {
    const auto cues = spec_.class_cues.empty() ? ls.verbalizers() : spec_.class_cues;
    const auto& q = prompt.query_input;
    for (std::size_t i = 0; i < cues.size(); ++i) {
        if (q.text.find(cues[i]) != std::string::npos ||
            (q.hypothesis && q.hypothesis->find(cues[i]) != std::string::npos)) {
            return i;
        }
    }
    return std::nullopt;
}

ProbVector SyntheticBackend::query(const Prompt& prompt, const LabelSpace& ls) {
    if (ls.size() != spec_.num_classes) {
        throw ShapeError("synthetic oracle configured for " + std::to_string(spec_.num_classes) +
                         " classes, label space has " + std::to_string(ls.size()));
    }
    return synthetic_oracle_probs(true_class_of(prompt, ls), spec_,
                                  sha256_u64(prompt.rendered_text));
}

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg) {
    cfg.validate();
    if (cfg.kind == BackendKind::http) return std::make_unique<HttpBackend>(cfg);
    return std::make_unique<SyntheticBackend>(cfg.synthetic, cfg.model_name);
}

}  // namespace linc

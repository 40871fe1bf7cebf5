#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "linc/prob_vector.hpp"
#include "linc/prompt.hpp"

namespace linc {

enum class BackendKind { http, synthetic };

struct RetryPolicy {
    std::size_t max_attempts = 3;
    std::chrono::milliseconds backoff{500};
};

/// Stand-in for a label-biased language model. The true conditional for a
/// query is softmax(true_logit_scale * onehot(class) + noise), the returned
/// vector is that conditional reweighted by `bias_weights` and renormalized.
/// The class is read from the query text: the first class (in index order)
/// whose cue string occurs in it. Queries with no cue (content-free inputs)
/// get a uniform conditional.
struct SyntheticOracleSpec {
    std::size_t num_classes = 2;
    double true_logit_scale = 1.0;
    std::vector<double> bias_weights;
    double noise_stddev = 0.0;
    std::uint64_t seed = 0;
    /// Empty means "use the verbalizers".
    std::vector<std::string> class_cues;

    void validate() const;
};

struct BackendConfig {
    BackendKind kind = BackendKind::synthetic;
    std::string endpoint_url;
    std::string model_name = "synthetic-oracle";
    std::size_t max_parallel_requests = 4;
    std::chrono::milliseconds timeout{30000};
    RetryPolicy retry;
    std::string api_key_env_var = "OPENAI_API_KEY";
    std::size_t top_logprobs = 100;
    std::optional<std::string> cache_dir;
    SyntheticOracleSpec synthetic;

    void validate() const;
};

/// Anything that turns a prompt into a probability vector over the label space.
class Backend {
public:
    virtual ~Backend() = default;
    virtual ProbVector query(const Prompt& prompt, const LabelSpace& ls) = 0;
    /// Part of the cache key; distinct models must report distinct names.
    virtual std::string model_name() const = 0;
};

/// Renormalizes the verbalizer entries of a next-token distribution. Each
/// verbalizer is matched by its first whitespace-delimited word, exactly
/// first and then with one leading space.
ProbVector extract_label_probs(const std::map<std::string, double>& token_probs,
                               const LabelSpace& ls);

/// `sample_key` individualizes the noise draw; equal keys give equal output.
ProbVector synthetic_oracle_probs(std::optional<std::size_t> true_class,
                                  const SyntheticOracleSpec& spec, std::uint64_t sample_key);

class SyntheticBackend final : public Backend {
public:
    SyntheticBackend(SyntheticOracleSpec spec, std::string model_name = "synthetic-oracle");

    ProbVector query(const Prompt& prompt, const LabelSpace& ls) override;
    std::string model_name() const override { return model_name_; }

    /// Class whose cue appears in the query, if any.
    std::optional<std::size_t> true_class_of(const Prompt& prompt, const LabelSpace& ls) const;

private:
    SyntheticOracleSpec spec_;
    std::string model_name_;
};

/// Completions endpoint with next-token logprobs:
///   POST {model, prompt, max_tokens: 1, logprobs: K, echo: false}
///   <- {"choices": [{"logprobs": {"top_logprobs": [{token: logprob, ...}]}}]}
class HttpBackend final : public Backend {
public:
    /// Reads the credential from `cfg.api_key_env_var`; throws BackendError
    /// if it is unset.
    explicit HttpBackend(BackendConfig cfg);

    ProbVector query(const Prompt& prompt, const LabelSpace& ls) override;
    std::string model_name() const override { return cfg_.model_name; }

    /// Next-token probabilities parsed out of a completions response body.
    static std::map<std::string, double> parse_top_logprobs(const std::string& body);

private:
    BackendConfig cfg_;
    std::string api_key_;
    std::string base_url_;
    std::string path_;
};

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg);

}  // namespace linc

#pragma once

#include <atomic>
#include <filesystem>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "linc/backend.hpp"

namespace linc {

/// Content hash of (rendered prompt, model name, label verbalizers).
std::string prompt_cache_key(const Prompt& prompt, const std::string& model_name,
                             const LabelSpace& ls);

/// Probability vectors keyed by prompt_cache_key. Optionally mirrored to a
/// directory with one JSON record per prompt:
/// {hash, model, labels, values, raw_mass, timestamp}.
class LogitCache {
public:
    LogitCache() = default;
    explicit LogitCache(std::filesystem::path dir);

    std::optional<ProbVector> find(const std::string& key) const;
    void store(const std::string& key, const ProbVector& p, const std::string& model,
               const LabelSpace& ls);
    void clear();
    std::size_t size() const;

private:
    std::optional<ProbVector> read_file(const std::string& key) const;

    mutable std::shared_mutex mu_;
    mutable std::unordered_map<std::string, ProbVector> entries_;
    std::optional<std::filesystem::path> dir_;
};

/// Routes queries through a cache so each distinct prompt reaches the backend
/// at most once. Batches run up to `max_parallel` queries at a time and always
/// return results in input order.
class QueryClient {
public:
    QueryClient(Backend& backend, LogitCache& cache, std::size_t max_parallel = 1);

    ProbVector query(const Prompt& prompt, const LabelSpace& ls);

    /// Errors carry the index of the first failing prompt.
    std::vector<ProbVector> query_all(std::span<const Prompt> prompts, const LabelSpace& ls);

    std::size_t backend_calls() const noexcept { return backend_calls_.load(); }
    std::size_t cache_hits() const noexcept { return cache_hits_.load(); }
    const std::string& model_name() const noexcept { return model_name_; }

private:
    Backend& backend_;
    LogitCache& cache_;
    std::size_t max_parallel_;
    std::string model_name_;
    std::atomic<std::size_t> backend_calls_{0};
    std::atomic<std::size_t> cache_hits_{0};
};

/// Queries every validation prompt once, before any training epoch runs.
std::vector<ProbVector> precompute_validation_logits(std::span<const Prompt> prompts,
                                                     const LabelSpace& ls, QueryClient& client);

}  // namespace linc

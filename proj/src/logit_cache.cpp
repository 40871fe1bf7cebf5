#include "linc/logit_cache.hpp"

#include <algorithm>
#include <chrono>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "linc/error.hpp"
#include "linc/hash.hpp"

namespace linc {

using json = nlohmann::json;

std::string prompt_cache_key(const Prompt& prompt, const std::string& model_name,
                             const LabelSpace& ls) {
    std::string material = prompt.rendered_text;
    material.push_back('\0');
    material += model_name;
    for (const auto& v : ls.verbalizers()) {
        material.push_back('\0');
        material += v;
    }
    return sha256_hex(material);
}

LogitCache::LogitCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(*dir_, ec);
    if (ec) throw IoError("cannot create cache directory " + dir_->string() + ": " + ec.message());
}

std::optional<ProbVector> LogitCache::read_file(const std::string& key) const {
    const auto path = *dir_ / (key + ".json");
    std::ifstream in(path);
    if (!in) return std::nullopt;
    try {
        json j;
        in >> j;
        if (j.at("hash").get<std::string>() != key) return std::nullopt;
        return ProbVector::from_normalized(j.at("values").get<std::vector<double>>(),
                                           j.at("raw_mass").get<double>());
    } catch (const json::exception&) {
        // Unreadable records are treated as misses and overwritten later.
        return std::nullopt;
    }
}

std::optional<ProbVector> LogitCache::find(const std::string& key) const {
    {
        std::shared_lock lock(mu_);
        if (auto it = entries_.find(key); it != entries_.end()) return it->second;
    }
    if (!dir_) return std::nullopt;
    auto from_disk = read_file(key);
    if (from_disk) {
        std::unique_lock lock(mu_);
        entries_.emplace(key, *from_disk);
    }
    return from_disk;
}

void LogitCache::store(const std::string& key, const ProbVector& p, const std::string& model,
                       const LabelSpace& ls) {
    {
        std::unique_lock lock(mu_);
        entries_.insert_or_assign(key, p);
    }
    if (!dir_) return;
    const auto now = std::chrono::system_clock::now();
    const json record = {
        {"hash", key},
        {"model", model},
        {"labels", ls.verbalizers()},
        {"values", std::vector<double>(p.values().begin(), p.values().end())},
        {"raw_mass", p.raw_mass()},
        {"timestamp",
         std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count()}};
    const auto path = *dir_ / (key + ".json");
    const auto tmp = path.string() + ".tmp" +
                     std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
    {
        std::ofstream out(tmp);
        if (!out) throw IoError("cannot write cache record " + tmp);
        out << record.dump(2) << '\n';
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move cache record into place: " + ec.message());
}

void LogitCache::clear() {
    std::unique_lock lock(mu_);
    entries_.clear();
}

std::size_t LogitCache::size() const {
    std::shared_lock lock(mu_);
    return entries_.size();
}

QueryClient::QueryClient(Backend& backend, LogitCache& cache, std::size_t max_parallel)
    : backend_(backend),
      cache_(cache),
      max_parallel_(std::max<std::size_t>(1, max_parallel)),
      model_name_(backend.model_name()) {}

ProbVector QueryClient::query(const Prompt& prompt, const LabelSpace& ls) {
    const auto key = prompt_cache_key(prompt, model_name_, ls);
    if (auto hit = cache_.find(key)) {
        ++cache_hits_;
        return *hit;
    }
    ++backend_calls_;
    auto p = backend_.query(prompt, ls);
    if (p.size() != ls.size()) {
        throw ProtocolError("backend returned " + std::to_string(p.size()) + " classes, expected " +
                            std::to_string(ls.size()));
    }
    cache_.store(key, p, model_name_, ls);
    return p;
}

std::vector<ProbVector> QueryClient::query_all(std::span<const Prompt> prompts,
                                               const LabelSpace& ls) {
    // Deduplicate by content so repeated prompts cost one backend call even
    // when they would otherwise race inside the same batch.
    std::vector<std::string> keys(prompts.size());
    std::unordered_map<std::string, std::size_t> first_of;
    std::vector<std::size_t> unique;
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        keys[i] = prompt_cache_key(prompts[i], model_name_, ls);
        if (first_of.emplace(keys[i], i).second) unique.push_back(i);
    }

    std::vector<std::optional<ProbVector>> results(prompts.size());
    std::vector<std::exception_ptr> errors(prompts.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t u = next++; u < unique.size(); u = next++) {
            const std::size_t i = unique[u];
            try {
                results[i] = query(prompts[i], ls);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t n_threads = std::min(max_parallel_, unique.size());
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(n_threads);
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    }

    for (std::size_t i = 0; i < prompts.size(); ++i) {
        if (!errors[i]) continue;
        try {
            std::rethrow_exception(errors[i]);
        } catch (Error& e) {
            e.add_context("prompt " + std::to_string(i));
            throw;
        }
    }

    std::vector<ProbVector> out;
    out.reserve(prompts.size());
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        const std::size_t src = first_of.at(keys[i]);
        if (src != i) ++cache_hits_;
        out.push_back(*results[src]);
    }
    return out;
}

std::vector<ProbVector> precompute_validation_logits(std::span<const Prompt> prompts,
                                                     const LabelSpace& ls, QueryClient& client) {
    return client.query_all(prompts, ls);
}

}  // namespace linc

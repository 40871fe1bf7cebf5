#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cmath>
#include <cstdlib>
#include <thread>

#include <json.hpp>

#include "linc/backend.hpp"
#include "linc/error.hpp"

namespace linc {

using json = nlohmann::json;

HttpBackend::HttpBackend(BackendConfig cfg) : cfg_(std::move(cfg)) {
    const char* key = std::getenv(cfg_.api_key_env_var.c_str());
    if (key == nullptr || *key == '\0') {
        throw BackendError("environment variable " + cfg_.api_key_env_var +
                           " holding the API key is not set");
    }
    api_key_ = key;

    const auto scheme_end = cfg_.endpoint_url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("backend.endpoint_url must start with http:// or https://");
    }
    const auto path_begin = cfg_.endpoint_url.find('/', scheme_end + 3);
    base_url_ = cfg_.endpoint_url.substr(0, path_begin);
    path_ = path_begin == std::string::npos ? "/v1/completions"
                                            : cfg_.endpoint_url.substr(path_begin);
}

std::map<std::string, double> HttpBackend::parse_top_logprobs(const std::string& body) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("response is not JSON: ") + e.what());
    }
    std::map<std::string, double> out;
    try {
        const auto& top = j.at("choices").at(0).at("logprobs").at("top_logprobs").at(0);
        auto add = [&](const std::string& token, const json& lp) {
            if (!lp.is_number()) throw ProtocolError("non-numeric logprob for '" + token + "'");
            const double v = lp.get<double>();
            if (!std::isfinite(v)) throw ProtocolError("non-finite logprob for '" + token + "'");
            out[token] = std::exp(v);
        };
        if (top.is_object()) {
            for (const auto& [token, lp] : top.items()) add(token, lp);
        } else if (top.is_array()) {
            for (const auto& entry : top) add(entry.at("token").get<std::string>(), entry.at("logprob"));
        } else {
            throw ProtocolError("top_logprobs[0] must be an object or an array");
        }
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("unexpected completions response shape: ") + e.what());
    }
    return out;
}

ProbVector HttpBackend::query(const Prompt& prompt, const LabelSpace& ls) {
    const json request = {{"model", cfg_.model_name},
                          {"prompt", prompt.rendered_text},
                          {"max_tokens", 1},
                          {"logprobs", cfg_.top_logprobs},
                          {"echo", false}};
    const std::string payload = request.dump();

    httplib::Client client(base_url_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
    const auto usecs =
        std::chrono::duration_cast<std::chrono::microseconds>(cfg_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    const httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};

    std::string last_failure;
    for (std::size_t attempt = 1; attempt <= cfg_.retry.max_attempts; ++attempt) {
        if (attempt > 1) {
            std::this_thread::sleep_for(cfg_.retry.backoff * (1LL << std::min<std::size_t>(attempt - 2, 10)));
        }
        auto res = client.Post(path_, headers, payload, "application/json");
        if (!res) {
            last_failure = httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_failure = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            throw BackendError("completions endpoint returned HTTP " +
                               std::to_string(res->status));
        }
        return extract_label_probs(parse_top_logprobs(res->body), ls);
    }
    throw BackendUnavailableError("completions endpoint unreachable after " +
                                  std::to_string(cfg_.retry.max_attempts) +
                                  " attempts: " + last_failure);
}

}  // namespace linc

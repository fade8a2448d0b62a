#include "stagefix/http_backend.hpp"

#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace stagefix {

using json = nlohmann::json;

json build_request_body(const ChatRequest& request) {
    return json{{"model", request.model_name},
                {"messages", json::array({{{"role", "system"}, {"content", request.system_instruction}},
                                          {{"role", "user"}, {"content", request.user_prompt}}})},
                {"temperature", request.temperature},
                {"max_tokens", request.max_tokens}};
}

ChatResponse parse_response_body(const std::string& body) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::parse_error& e) {
        throw LlmError(LlmError::Kind::MalformedResponse, std::string("response is not JSON: ") + e.what());
    }
    const auto choices = j.find("choices");
    if (choices == j.end() || !choices->is_array() || choices->empty()) {
        throw LlmError(LlmError::Kind::MalformedResponse, "response has no choices");
    }
    const auto& first = (*choices)[0];
    if (!first.contains("message") || !first["message"].is_object()) {
        throw LlmError(LlmError::Kind::MalformedResponse, "choices[0] has no message");
    }
    const auto& content = first["message"].value("content", json());
    ChatResponse out;
    out.backend = "http";
    if (content.is_string()) {
        out.text = content.get<std::string>();
    } else if (!content.is_null()) {
        throw LlmError(LlmError::Kind::MalformedResponse, "choices[0].message.content is not a string");
    }
    if (auto u = j.find("usage"); u != j.end() && u->is_object()) {
        out.usage = TokenUsage{u->value("prompt_tokens", 0L), u->value("completion_tokens", 0L)};
    }
    return out;
}

namespace {

// Splits "scheme://host[:port]/path" into origin and path.
std::pair<std::string, std::string> split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw LlmError(LlmError::Kind::Config, "endpoint must be an absolute http(s) URL: " + url);
    }
    const auto scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") {
        throw LlmError(LlmError::Kind::Config, "unsupported scheme '" + scheme + "'");
    }
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

HttpBackend::HttpBackend(HttpBackendConfig config, Sleeper sleeper)
    : config_(std::move(config)), sleep_(std::move(sleeper)) {
    if (config_.endpoint.empty()) throw LlmError(LlmError::Kind::Config, "no endpoint configured");
    if (config_.max_in_flight < 1) throw LlmError(LlmError::Kind::Config, "max_in_flight must be >= 1");
    std::tie(origin_, path_) = split_url(config_.endpoint);
    if (!sleep_) sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    in_flight_ = std::make_unique<std::counting_semaphore<>>(config_.max_in_flight);
}

ChatResponse HttpBackend::complete(const ChatRequest& request, std::size_t /*sample_index*/) {
    const auto body = build_request_body(request).dump();
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    std::string last_error;
    bool rate_limited = false;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) sleep_(config_.initial_backoff * (1 << (attempt - 1)));

        httplib::Result res{nullptr, httplib::Error::Unknown};
        {
            in_flight_->acquire();
            httplib::Client client(origin_);
            client.set_connection_timeout(config_.timeout);
            client.set_read_timeout(config_.timeout);
            client.set_write_timeout(config_.timeout);
            res = client.Post(path_, headers, body, "application/json");
            in_flight_->release();
        }

        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            rate_limited = false;
            continue;
        }
        if (res->status == 200) return parse_response_body(res->body);
        if (res->status == 429) {
            last_error = "HTTP 429: " + res->body;
            rate_limited = true;
            continue;
        }
        if (res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status) + ": " + res->body;
            rate_limited = false;
            continue;
        }
        throw LlmError(LlmError::Kind::NetworkError, "HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    throw LlmError(rate_limited ? LlmError::Kind::RateLimited : LlmError::Kind::NetworkError,
                   "giving up after " + std::to_string(config_.max_retries + 1) + " attempts; " + last_error);
}

}  // namespace stagefix

#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <semaphore>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "stagefix/llm.hpp"

namespace stagefix {

struct HttpBackendConfig {
    /// Full chat-completions URL, e.g. https://api.openai.com/v1/chat/completions
    std::string endpoint;
    std::string api_key;
    std::chrono::seconds timeout{120};
    /// Attempts after the first one on transient failures.
    int max_retries = 3;
    std::chrono::milliseconds initial_backoff{1000};
    int max_in_flight = 4;
};

/// Request body in the OpenAI chat-completions wire format.
nlohmann::json build_request_body(const ChatRequest& request);

/// Reads choices[0].message.content; throws MalformedResponse otherwise.
ChatResponse parse_response_body(const std::string& body);

/// OpenAI-compatible chat-completions client with bounded retries.
class HttpBackend final : public Backend {
  public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    explicit HttpBackend(HttpBackendConfig config, Sleeper sleeper = {});

    ChatResponse complete(const ChatRequest& request, std::size_t sample_index) override;

  private:
    HttpBackendConfig config_;
    Sleeper sleep_;
    std::string origin_;
    std::string path_;
    std::unique_ptr<std::counting_semaphore<>> in_flight_;
};

}  // namespace stagefix
